#include "rah/experiments.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

using namespace rah;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string backend;
    std::string out;
    bool verbose = false;
};

ExperimentConfig resolve(const Globals& g) {
    ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(g.config);
    if (g.seed) c.seeds = {*g.seed};
    if (g.backend == "oracle") c.backend = BackendKind::Oracle;
    else if (g.backend == "remote") c.backend = BackendKind::Remote;
    if (!g.out.empty()) c.out = g.out;
    c.validate();
    return c;
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw RunError("cannot write " + path.string());
    body(os);
    if (!os) throw RunError("cannot write " + path.string());
}

void print_stats(const std::vector<Interaction>& xs, const Catalog& catalog) {
    const auto s = stats(xs, catalog);
    std::cout << "domain\tusers\titems\tinteractions\n";
    for (const auto& [d, row] : s.per_domain)
        std::cout << d.name() << "\t" << row.users << "\t" << row.items << "\t" << row.interactions << "\n";
    std::cout << "total\t" << s.total.users << "\t" << s.total.items << "\t" << s.total.interactions << "\n";
}

std::filesystem::path personality_path(const std::filesystem::path& out, const UserId& user) {
    return out / "personalities" / (user + ".txt");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"RAH: assistant-mediated recommendation experiments"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "INI config file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "run a single seed instead of the configured list");
    app.add_option("--backend", g.backend, "agent backend")->check(CLI::IsMember({"oracle", "remote"}));
    app.add_option("--out", g.out, "output directory");
    app.add_flag("-v,--verbose", g.verbose, "debug logging");

    auto* synth = app.add_subcommand("synth", "generate a synthetic world, its interactions and a split");

    auto* ingest_cmd = app.add_subcommand("ingest", "read review dumps (JSON lines) into interactions");
    std::vector<std::string> inputs;
    std::size_t k = 5;
    bool keep_single_domain = false;
    ingest_cmd->add_option("-i,--input", inputs, "file, or file=domain for dumps without a domain field")->required();
    ingest_cmd->add_option("--kcore", k, "minimum interactions per user and item (0 disables)");
    ingest_cmd->add_flag("--keep-single-domain", keep_single_domain, "do not drop users seen in only one domain");

    auto* split_cmd = app.add_subcommand("split", "assign interactions to Learn/Proxy/Unseen 1:1:1 per user");
    std::string split_input;
    split_cmd->add_option("interactions", split_input, "interactions file")->required()->check(CLI::ExistingFile);

    auto* learn_cmd = app.add_subcommand("learn", "learn personalities from each cohort user's Learn Set");
    std::string variant = "L+C+R";
    std::vector<std::string> only_users;
    learn_cmd->add_option("--variant", variant, "loop variant")->check(CLI::IsMember(loop_variants()));
    learn_cmd->add_option("--user", only_users, "restrict to these users");

    auto* proxy_cmd = app.add_subcommand("proxy", "proxy actions on each user's Proxy Set from learned personalities");

    auto* e1_cmd = app.add_subcommand("e1", "alignment: F1 of proxy actions against user actions");
    auto* e2_cmd = app.add_subcommand("e2", "proxy feedback: none / random / assistant arms per model");
    auto* e3_cmd = app.add_subcommand("e3", "bias: MF, MF+IPS, MF+RAH, MF+IPS+RAH on an unbiased test sample");
    auto* control_cmd = app.add_subcommand("control", "replay the result-control and privacy scenarios");
    auto* report_cmd = app.add_subcommand("report", "rebuild summary.txt from the CSV files in --out");
    auto* schema_cmd = app.add_subcommand("schema", "print the config file schema");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        if (schema_cmd->parsed()) {
            std::string section;
            for (const auto& key : config_schema()) {
                if (key.section != section) {
                    section = key.section;
                    std::cout << (section.empty() ? "" : "\n") << "[" << section << "]\n";
                }
                std::cout << key.key << "  ; " << key.help << "\n";
            }
            return 0;
        }

        auto config = resolve(g);
        const auto seed = config.seeds.front();

        if (synth->parsed()) {
            auto wc = config.world;
            wc.seed = seed;
            const auto bundle = make_world(wc);
            save_world(config.out / "world.txt", bundle.world);
            save_interactions(config.out / "interactions.jsonl", bundle.interactions);
            std::vector<Interaction> cohort;
            for (const auto& x : bundle.interactions)
                if (bundle.world.user(x.user).role == UserRole::Cohort) cohort.push_back(x);
            write_file(config.out / "split.tsv", [&](std::ostream& os) { write_split(os, split_lpu(cohort, seed)); });
            print_stats(bundle.interactions, bundle.world.catalog);
        } else if (ingest_cmd->parsed()) {
            std::vector<IngestSource> sources;
            for (const auto& in : inputs) {
                const auto eq = in.rfind('=');
                if (eq == std::string::npos) sources.push_back({in, std::nullopt});
                else sources.push_back({in.substr(0, eq), DomainTag(in.substr(eq + 1))});
            }
            auto r = ingest(sources);
            auto xs = r.interactions;
            if (k > 0) xs = kcore_filter(xs, k);
            if (!keep_single_domain) xs = retain_cross_domain(xs, r.catalog);
            // A world without users: enough for the remote backend, refused by the oracle.
            SyntheticWorld w;
            std::set<ItemId> used;
            for (const auto& x : xs) used.insert(x.item);
            for (const auto& item : r.catalog.items())
                if (used.contains(item.id)) w.catalog.add(item);
            save_world(config.out / "world.txt", w);
            save_interactions(config.out / "interactions.jsonl", xs);
            std::cout << "records skipped " << r.skipped << ", neutral " << r.neutral << ", duplicates " << r.duplicates << "\n";
            print_stats(xs, w.catalog);
        } else if (split_cmd->parsed()) {
            const auto xs = load_interactions(split_input);
            write_file(config.out / "split.tsv", [&](std::ostream& os) { write_split(os, split_lpu(xs, seed)); });
        } else if (learn_cmd->parsed() || proxy_cmd->parsed()) {
            const auto ctx = prepare_seed(config, seed);
            std::vector<UserId> users = ctx.cohort;
            if (!only_users.empty()) users = only_users;
            if (learn_cmd->parsed()) {
                auto lc = LoopConfig::variant(variant);
                lc.max_iters = config.loop.max_iters;
                lc.decode = config.loop.decode;
                for (const auto& u : users) {
                    LearnSetStats st;
                    const auto p = learn_set(u, ctx.user_set(u, SplitSet::Learn), ctx.world->catalog, lc, *ctx.backend, &st);
                    store_save(p, personality_path(config.out, u));
                    std::cout << u << "\tentries " << p.entries.size() << "\tconverged " << st.converged << "/" << st.attempted
                              << "\tqueries " << st.user_queries.size() << "\n";
                }
            } else {
                std::vector<Interaction> all;
                for (const auto& u : users) {
                    const auto p = store_load(personality_path(config.out, u));
                    std::vector<Item> items;
                    std::vector<Action> truth;
                    for (const auto& x : ctx.user_set(u, SplitSet::Proxy)) {
                        items.push_back(ctx.world->catalog.at(x.item));
                        truth.push_back(x.action);
                    }
                    auto px = proxy_actions(u, p, items, *ctx.backend, config.loop.decode);
                    std::vector<Action> predicted;
                    for (const auto& x : px) predicted.push_back(x.action);
                    if (predicted.size() == truth.size())
                        std::cout << u << "\tproxied " << px.size() << "\tF1 " << macro_f1(predicted, truth) << "\n";
                    all.insert(all.end(), px.begin(), px.end());
                }
                save_interactions(config.out / "proxy.jsonl", all);
            }
        } else if (e1_cmd->parsed()) {
            write_e1(config, run_e1(config));
            std::cout << std::ifstream(config.out / "summary.txt").rdbuf();
        } else if (e2_cmd->parsed()) {
            write_e2(config, run_e2(config));
            std::cout << std::ifstream(config.out / "summary.txt").rdbuf();
        } else if (e3_cmd->parsed()) {
            write_e3(config, run_e3(config));
            std::cout << std::ifstream(config.out / "summary.txt").rdbuf();
        } else if (control_cmd->parsed()) {
            run_control(config);
            std::cout << std::ifstream(config.out / "control.log").rdbuf();
        } else if (report_cmd->parsed()) {
            write_summary(config.out);
            std::cout << std::ifstream(config.out / "summary.txt").rdbuf();
        }
    } catch (const ConfigError& e) {
        spdlog::error("config: {}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
