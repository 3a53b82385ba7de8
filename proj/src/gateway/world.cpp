#include "rah/gateway/world.hpp"

#include "rah/rng.hpp"
#include "rah/text.hpp"

#include <fstream>
#include <sstream>

namespace rah {

const SyntheticUser& SyntheticWorld::user(const UserId& id) const {
    const auto it = users.find(id);
    if (it == users.end()) throw LookupError("unknown user '" + id + "'");
    return it->second;
}

std::vector<UserId> SyntheticWorld::users_with_role(UserRole role) const {
    std::vector<UserId> out;
    for (const auto& [id, u] : users)
        if (u.role == role) out.push_back(id);
    return out;
}

void validate(const SyntheticWorld& w) {
    for (const auto& [id, u] : w.users) {
        for (const auto& t : u.liked_tags)
            if (u.disliked_tags.contains(t))
                throw ValidationError("user '" + id + "' both likes and dislikes tag '" + t + "'");
        if (u.noise_rate < 0.0 || u.noise_rate >= 1.0)
            throw ValidationError("user '" + id + "' noise_rate outside [0,1)");
    }
}

int synthetic_preference_score(const SyntheticUser& u, const Item& item) {
    int score = 0;
    for (const auto& t : item.tags) {
        if (u.liked_tags.contains(t)) ++score;
        if (u.disliked_tags.contains(t)) --score;
    }
    return score;
}

Action synthetic_human_action(const SyntheticWorld& w, const UserId& user, const Item& item) {
    const auto& u = w.user(user);
    Action a = synthetic_preference_score(u, item) > 0 ? Action::Like : Action::Dislike;
    if (u.noise_rate > 0.0) {
        const auto draw = unit_from_bits(derive_seed(derive_seed(w.seed, "human-noise:" + user), item.id));
        if (draw < u.noise_rate) a = flip(a);
    }
    return a;
}

namespace {

std::string_view role_name(UserRole r) { return r == UserRole::Cohort ? "cohort" : "background"; }

UserRole role_from(std::string_view s) {
    if (s == "cohort") return UserRole::Cohort;
    if (s == "background") return UserRole::Background;
    throw DecodeError("unknown user role '" + std::string(s) + "'");
}

} // namespace

void write_world(std::ostream& os, const SyntheticWorld& w) {
    os << "rah-world v1\n";
    os << "seed\t" << w.seed << "\n";
    os << "items\t" << w.catalog.size() << "\n";
    for (const auto& it : w.catalog.items()) {
        os << "item\t" << text::escape(it.id) << '\t' << it.domain.name() << '\t' << text::escape(join(it.tags)) << '\t'
           << text::escape(it.title) << '\t' << text::escape(it.description) << "\n";
    }
    os << "users\t" << w.users.size() << "\n";
    for (const auto& [id, u] : w.users) {
        os << "user\t" << text::escape(id) << '\t' << role_name(u.role) << '\t' << text::format_double(u.noise_rate) << '\t'
           << text::escape(join(u.liked_tags)) << '\t' << text::escape(join(u.disliked_tags)) << "\n";
    }
    os << "end\n";
}

SyntheticWorld read_world(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    auto next = [&](const char* what) -> std::vector<std::string> {
        if (!std::getline(is, line)) throw DecodeError(std::string("world file truncated: expected ") + what);
        ++lineno;
        return text::split(line, '\t');
    };
    auto fail = [&](const std::string& msg) { return DecodeError("world file line " + std::to_string(lineno) + ": " + msg); };

    if (!std::getline(is, line)) throw DecodeError("world file is empty");
    ++lineno;
    if (line.rfind("rah-world ", 0) != 0) throw DecodeError("not a world file");
    if (line != "rah-world v1") throw MigrationError("unsupported world file version: '" + line + "'");

    SyntheticWorld w;
    auto f = next("seed");
    if (f.size() != 2 || f[0] != "seed") throw fail("expected seed");
    w.seed = static_cast<std::uint64_t>(std::stoull(f[1]));

    f = next("items");
    if (f.size() != 2 || f[0] != "items") throw fail("expected item count");
    const auto n_items = static_cast<std::size_t>(text::parse_int(f[1]));
    for (std::size_t i = 0; i < n_items; ++i) {
        f = next("item");
        if (f.size() != 6 || f[0] != "item") throw fail("malformed item record");
        Item it;
        it.id = text::unescape(f[1]);
        it.domain = DomainTag(f[2]);
        it.tags = split_facets(text::unescape(f[3]));
        it.title = text::unescape(f[4]);
        it.description = text::unescape(f[5]);
        w.catalog.add(std::move(it));
    }

    f = next("users");
    if (f.size() != 2 || f[0] != "users") throw fail("expected user count");
    const auto n_users = static_cast<std::size_t>(text::parse_int(f[1]));
    for (std::size_t i = 0; i < n_users; ++i) {
        f = next("user");
        if (f.size() != 6 || f[0] != "user") throw fail("malformed user record");
        SyntheticUser u;
        u.role = role_from(f[2]);
        u.noise_rate = text::parse_double(f[3]);
        u.liked_tags = split_facets(text::unescape(f[4]));
        u.disliked_tags = split_facets(text::unescape(f[5]));
        w.users.emplace(text::unescape(f[1]), std::move(u));
    }
    f = next("end");
    if (f.size() != 1 || f[0] != "end") throw fail("expected end marker");
    validate(w);
    return w;
}

void save_world(const std::filesystem::path& path, const SyntheticWorld& w) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    write_world(os, w);
}

SyntheticWorld load_world(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot read " + path.string());
    return read_world(is);
}

} // namespace rah
