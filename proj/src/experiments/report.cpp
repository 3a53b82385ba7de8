#include "rah/experiments.hpp"

#include "rah/text.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace rah {

namespace {

const char* kE1Header = "config_hash,seed,variant,scope,source,target,users,f1,converged_rate";
const char* kE2Header = "config_hash,seed,model,arm,scope,ndcg,recall,delta_ndcg,delta_recall,users,train_size,base_hash";
const char* kE3Header = "config_hash,seed,arm,ndcg,recall,users,test_size,augmented";

std::string num(double v) { return text::format_double(v); }

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        os << content;
        if (!os) throw RunError("cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

struct Csv {
    std::string config_hash;
    std::vector<std::map<std::string, std::string>> rows;
};

std::optional<Csv> read_csv(const std::filesystem::path& path, const char* expected_header) {
    std::ifstream is(path);
    if (!is) return std::nullopt;
    std::string line;
    if (!std::getline(is, line) || line != expected_header)
        throw DecodeError(path.string() + ": unexpected header (report schema changed?)");
    const auto cols = text::split(expected_header, ',');
    Csv csv;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = text::split(line, ',');
        if (f.size() != cols.size()) throw DecodeError(path.string() + ":" + std::to_string(lineno) + ": wrong field count");
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < cols.size(); ++i) row[cols[i]] = f[i];
        csv.config_hash = row["config_hash"];
        csv.rows.push_back(std::move(row));
    }
    return csv;
}

std::uint64_t u64(const std::string& s) { return static_cast<std::uint64_t>(text::parse_int(s)); }

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string signed_fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.4f", v);
    return buf;
}

std::string pad(std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
}

} // namespace

void write_e1(const ExperimentConfig& config, const E1Result& r) {
    std::ostringstream os;
    os << kE1Header << "\n";
    const auto h = config.hash();
    for (const auto& row : r.rows)
        os << h << "," << row.seed << "," << row.variant << "," << row.scope << "," << row.source << "," << row.target << ","
           << row.users << "," << num(row.f1) << "," << (row.converged_rate ? num(*row.converged_rate) : "") << "\n";
    write_file(config.out / "e1.csv", os.str());
    write_summary(config.out);
}

void write_e2(const ExperimentConfig& config, const E2Result& r) {
    std::ostringstream os;
    os << kE2Header << "\n";
    const auto h = config.hash();
    for (const auto& row : r.rows)
        os << h << "," << row.seed << "," << row.model << "," << row.arm << "," << row.scope << "," << num(row.ndcg) << ","
           << num(row.recall) << "," << num(row.delta_ndcg) << "," << num(row.delta_recall) << "," << row.users << ","
           << row.train_size << "," << row.base_hash << "\n";
    write_file(config.out / "e2.csv", os.str());
    write_summary(config.out);
}

void write_e3(const ExperimentConfig& config, const E3Result& r) {
    std::ostringstream os;
    os << kE3Header << "\n";
    const auto h = config.hash();
    for (const auto& row : r.rows)
        os << h << "," << row.seed << "," << row.arm << "," << num(row.ndcg) << "," << num(row.recall) << "," << row.users
           << "," << row.test_size << "," << row.augmented << "\n";
    write_file(config.out / "e3.csv", os.str());
    write_summary(config.out);
}

void write_summary(const std::filesystem::path& out) {
    std::ostringstream os;
    os << "RAH experiment summary\n";
    bool any = false;

    if (auto csv = read_csv(out / "e1.csv", kE1Header)) {
        any = true;
        E1Result r;
        std::vector<std::string> variants, domains;
        std::set<std::uint64_t> seeds;
        for (auto& row : csv->rows) {
            E1Row e;
            e.seed = u64(row["seed"]);
            e.variant = row["variant"];
            e.scope = row["scope"];
            e.source = row["source"];
            e.target = row["target"];
            e.f1 = text::parse_double(row["f1"]);
            if (std::find(variants.begin(), variants.end(), e.variant) == variants.end()) variants.push_back(e.variant);
            if (e.scope == "single" && std::find(domains.begin(), domains.end(), e.source) == domains.end())
                domains.push_back(e.source);
            seeds.insert(e.seed);
            r.rows.push_back(std::move(e));
        }
        os << "\nE1  macro-F1 of proxy actions against user actions (config " << csv->config_hash << ", " << seeds.size()
           << " seeds)\n";
        os << pad("variant", 8) << pad("single", 9) << pad("cross", 9) << pad("mixed", 9);
        for (const auto& d : domains) os << pad(d, 9);
        os << "\n";
        for (const auto& v : variants) {
            os << pad(v, 8);
            for (const char* scope : {"single", "cross", "mixed"}) {
                try {
                    os << pad(fixed(r.mean(v, scope)), 9);
                } catch (const RunError&) {
                    os << pad("-", 9);
                }
            }
            for (const auto& d : domains) os << pad(fixed(r.mean_single(v, d)), 9);
            os << "\n";
        }
    }

    if (auto csv = read_csv(out / "e2.csv", kE2Header)) {
        any = true;
        E2Result r;
        std::vector<std::string> models, scopes;
        std::set<std::uint64_t> seeds;
        for (auto& row : csv->rows) {
            E2Row e;
            e.seed = u64(row["seed"]);
            e.model = row["model"];
            e.arm = row["arm"];
            e.scope = row["scope"];
            e.ndcg = text::parse_double(row["ndcg"]);
            e.recall = text::parse_double(row["recall"]);
            if (std::find(models.begin(), models.end(), e.model) == models.end()) models.push_back(e.model);
            if (std::find(scopes.begin(), scopes.end(), e.scope) == scopes.end()) scopes.push_back(e.scope);
            seeds.insert(e.seed);
            r.rows.push_back(std::move(e));
        }
        auto mean_recall = [&](const std::string& m, const std::string& a, const std::string& s) {
            double t = 0;
            std::size_t n = 0;
            for (const auto& e : r.rows)
                if (e.model == m && e.arm == a && e.scope == s) t += e.recall, ++n;
            return n ? t / static_cast<double>(n) : 0.0;
        };
        os << "\nE2  proxy feedback: NDCG@10 / Recall@10 on the Unseen Set (config " << csv->config_hash << ", "
           << seeds.size() << " seeds)\n";
        for (const auto& scope : scopes) {
            os << "[" << scope << "]\n";
            os << pad("model", 12) << pad("none", 17) << pad("random", 17) << pad("assistant", 17) << "delta(assistant)\n";
            for (const auto& m : models) {
                os << pad(m, 12);
                for (const auto& arm : e2_arms())
                    os << pad(fixed(r.mean_ndcg(m, arm, scope)) + " / " + fixed(mean_recall(m, arm, scope)), 17);
                os << signed_fixed(r.mean_ndcg(m, "assistant", scope) - r.mean_ndcg(m, "none", scope)) << "\n";
            }
        }
    }

    if (auto csv = read_csv(out / "e3.csv", kE3Header)) {
        any = true;
        E3Result r;
        std::set<std::uint64_t> seeds;
        for (auto& row : csv->rows) {
            E3Row e;
            e.seed = u64(row["seed"]);
            e.arm = row["arm"];
            e.ndcg = text::parse_double(row["ndcg"]);
            e.recall = text::parse_double(row["recall"]);
            seeds.insert(e.seed);
            r.rows.push_back(std::move(e));
        }
        os << "\nE3  bias: NDCG@10 / Recall@10 on the unbiased test sample (config " << csv->config_hash << ", "
           << seeds.size() << " seeds)\n";
        for (const auto& arm : e3_arms()) {
            double rec = 0;
            std::size_t n = 0;
            for (const auto& e : r.rows)
                if (e.arm == arm) rec += e.recall, ++n;
            os << pad(arm, 12) << fixed(r.mean_ndcg(arm)) << " / " << fixed(n ? rec / static_cast<double>(n) : 0.0) << "\n";
        }
    }

    if (!any) throw RunError("no e1.csv, e2.csv or e3.csv in " + out.string());
    write_file(out / "summary.txt", os.str());
}

} // namespace rah
