#include "rah/loop.hpp"
#include "rah/text.hpp"

#include <fstream>

namespace rah {

// rah-personality v1
// user    <id>
// clock   <n>
// entry   <like|dislike>  <created_at>  <statement>  <facets json>  <provenance json>
// end     <entry count>

void write_personality(std::ostream& os, const Personality& p) {
    os << kPersonalityHeader << "\n";
    os << "user\t" << text::escape(p.user) << "\n";
    os << "clock\t" << p.clock << "\n";
    for (const auto& e : p.entries) {
        os << "entry\t" << to_string(e.polarity) << "\t" << e.created_at << "\t" << text::escape(e.statement) << "\t"
           << nlohmann::json(e.facets).dump() << "\t" << nlohmann::json(e.provenance).dump() << "\n";
    }
    os << "end\t" << p.entries.size() << "\n";
}

Personality read_personality(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    auto next = [&]() -> std::vector<std::string> {
        if (!std::getline(is, line)) throw DecodeError("personality file truncated after line " + std::to_string(lineno));
        ++lineno;
        return text::split(line, '\t');
    };
    auto fail = [&](const std::string& why) -> DecodeError {
        return DecodeError("personality line " + std::to_string(lineno) + ": " + why);
    };

    if (!std::getline(is, line)) throw DecodeError("personality file is empty");
    ++lineno;
    if (line != kPersonalityHeader) {
        if (line.rfind("rah-personality ", 0) == 0)
            throw MigrationError("unsupported personality format '" + line + "' (this build reads '" + kPersonalityHeader + "')");
        throw fail("not a personality file");
    }
    Personality p;
    auto f = next();
    if (f.size() != 2 || f[0] != "user") throw fail("expected user");
    p.user = text::unescape(f[1]);
    f = next();
    if (f.size() != 2 || f[0] != "clock") throw fail("expected clock");
    p.clock = static_cast<std::uint64_t>(text::parse_int(f[1]));
    for (;;) {
        f = next();
        if (f.size() == 2 && f[0] == "end") {
            if (static_cast<std::size_t>(text::parse_int(f[1])) != p.entries.size()) throw fail("entry count mismatch");
            return p;
        }
        if (f.size() != 6 || f[0] != "entry") throw fail("malformed entry");
        TraitEntry e;
        try {
            e.polarity = action_from_string(f[1]);
            e.created_at = static_cast<std::uint64_t>(text::parse_int(f[2]));
            e.statement = text::unescape(f[3]);
            e.facets = nlohmann::json::parse(f[4]).get<FacetSet>();
            e.provenance = nlohmann::json::parse(f[5]).get<std::set<InteractionId>>();
            validate(e);
        } catch (const DecodeError&) {
            throw;
        } catch (const std::exception& ex) {
            throw fail(ex.what());
        }
        p.entries.push_back(std::move(e));
    }
}

void store_save(const Personality& p, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        write_personality(os, p);
        if (!os) throw RunError("cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Personality store_load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LookupError("cannot open personality file " + path.string());
    return read_personality(is);
}

} // namespace rah
