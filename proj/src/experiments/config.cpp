#include "rah/experiments.hpp"

#include "rah/gateway/cache.hpp"
#include "rah/text.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <sstream>

namespace rah {

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> keys{
        {"run", "backend", "oracle | remote"},
        {"run", "seeds", "comma-separated list of seeds; every experiment averages over them"},
        {"run", "out", "output directory for reports"},
        {"run", "world", "world file to use instead of generating one per seed"},
        {"run", "interactions", "interactions file (JSON lines); required with world"},
        {"run", "split", "split file (id<TAB>set); default: split_lpu with each seed"},
        {"run", "cache_dir", "response cache directory for the remote backend"},
        {"run", "templates", "directory of <agent>.txt prompt templates for the remote backend"},
        {"world", "users", "cohort users (learned by the assistant)"},
        {"world", "background", "background users (recommender training data only)"},
        {"world", "items", "catalog size, spread round-robin over domains"},
        {"world", "domains", "comma-separated domain names"},
        {"world", "tags", "number of themes"},
        {"world", "subtags", "optional subtags per theme and domain"},
        {"world", "subtag_prob", "probability an item carries each subtag"},
        {"world", "liked_tags", "themes each user likes"},
        {"world", "disliked_tags", "themes each user dislikes"},
        {"world", "affinity_liked", "exposure weight of liked-theme items"},
        {"world", "affinity_disliked", "exposure weight of disliked-theme items"},
        {"world", "affinity_neutral", "exposure weight of other items"},
        {"world", "per_domain", "interactions per user and domain"},
        {"world", "noise_rate", "probability a human action is flipped"},
        {"world", "zipf", "popularity skew exponent (0 = uniform)"},
        {"loop", "max_iters", "Learn-Act-Critic iterations per interaction"},
        {"loop", "variants", "E1 variants: any of L, L+R, L+C, L+C+R"},
        {"loop", "temperature", "decode temperature for agent calls"},
        {"loop", "max_tokens", "decode token limit for agent calls"},
        {"models", "kinds", "comma-separated: MF, FM, ItemKNN, Popularity"},
        {"models", "dim", "latent dimension of MF and FM"},
        {"models", "learning_rate", "SGD step size"},
        {"models", "l2", "L2 penalty"},
        {"models", "epochs", "SGD epochs"},
        {"models", "negatives", "sampled unobserved items per positive"},
        {"models", "negative_weight", "loss weight of a sampled unobserved item"},
        {"models", "knn_k", "ItemKNN neighbourhood size"},
        {"e2", "variant", "loop variant used to learn the assistants"},
        {"e3", "zipf", "popularity skew of the E3 world"},
        {"e3", "gamma", "propensity exponent"},
        {"e3", "clip", "propensity floor"},
        {"e3", "threshold", "minimum reviews per item after augmentation (0 disables)"},
        {"e3", "test_fraction", "share of Unseen Likes drawn into the unbiased test sample"},
        {"e3", "variant", "loop variant used to learn the assistants"},
        {"control", "scenario", "result-control scenario script"},
        {"control", "privacy_scenario", "privacy scenario script"},
        {"control", "psychologist_k", "extra Likes for the Psychologist strategy"},
        {"control", "shared_account_m", "random interactions for the SharedAccount strategy"},
        {"control", "professional_facet", "facet marking professional literature"},
    };
    return keys;
}

namespace {

std::string list(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
    return out;
}

std::vector<std::string> parse_list(const std::string& v) {
    std::vector<std::string> out;
    for (const auto& s : text::split(v, ',')) {
        const auto t = text::trim(s);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
    const auto n = text::parse_int(v);
    if (n < 0) throw ConfigError(key + " must be non-negative");
    return static_cast<std::size_t>(n);
}

} // namespace

std::string ExperimentConfig::canonical() const {
    std::ostringstream os;
    auto opt = [](const std::optional<std::filesystem::path>& p) { return p ? p->generic_string() : std::string(); };
    auto num = [](double d) { return text::format_double(d); };
    std::vector<std::string> seed_list, model_list, domain_list;
    for (auto s : seeds) seed_list.push_back(std::to_string(s));
    for (auto m : models) model_list.emplace_back(to_string(m));
    for (const auto& d : world.domains) domain_list.push_back(d.name());
    // The output directory and cache location do not affect results and are left out.
    os << "run.backend=" << to_string(backend) << "\n"
       << "run.seeds=" << list(seed_list) << "\n"
       << "run.world=" << opt(world_path) << "\n"
       << "run.interactions=" << opt(interactions_path) << "\n"
       << "run.split=" << opt(split_path) << "\n"
       << "run.templates=" << opt(templates_dir) << "\n"
       << "world.users=" << world.users << "\n"
       << "world.background=" << world.background << "\n"
       << "world.items=" << world.items << "\n"
       << "world.domains=" << list(domain_list) << "\n"
       << "world.tags=" << world.tags << "\n"
       << "world.subtags=" << world.subtags << "\n"
       << "world.subtag_prob=" << num(world.subtag_prob) << "\n"
       << "world.liked_tags=" << world.liked_tags << "\n"
       << "world.disliked_tags=" << world.disliked_tags << "\n"
       << "world.affinity_liked=" << num(world.affinity_liked) << "\n"
       << "world.affinity_disliked=" << num(world.affinity_disliked) << "\n"
       << "world.affinity_neutral=" << num(world.affinity_neutral) << "\n"
       << "world.per_domain=" << world.per_domain << "\n"
       << "world.noise_rate=" << num(world.noise_rate) << "\n"
       << "world.zipf=" << num(world.zipf) << "\n"
       << "loop.max_iters=" << loop.max_iters << "\n"
       << "loop.variants=" << list(variants) << "\n"
       << "loop.temperature=" << num(loop.decode.temperature) << "\n"
       << "loop.max_tokens=" << loop.decode.max_tokens << "\n"
       << "models.kinds=" << list(model_list) << "\n"
       << "models.dim=" << fit.dim << "\n"
       << "models.learning_rate=" << num(fit.learning_rate) << "\n"
       << "models.l2=" << num(fit.l2) << "\n"
       << "models.epochs=" << fit.epochs << "\n"
       << "models.negatives=" << fit.negatives << "\n"
       << "models.negative_weight=" << num(fit.negative_weight) << "\n"
       << "models.knn_k=" << fit.knn_k << "\n"
       << "e2.variant=" << e2_variant << "\n"
       << "e3.zipf=" << num(e3_zipf) << "\n"
       << "e3.gamma=" << num(e3_gamma) << "\n"
       << "e3.clip=" << num(e3_clip) << "\n"
       << "e3.threshold=" << e3_threshold << "\n"
       << "e3.test_fraction=" << num(e3_test_fraction) << "\n"
       << "e3.variant=" << e3_variant << "\n"
       << "control.scenario=" << control_scenario.generic_string() << "\n"
       << "control.privacy_scenario=" << privacy_scenario.generic_string() << "\n"
       << "control.psychologist_k=" << obfuscation.psychologist_k << "\n"
       << "control.shared_account_m=" << obfuscation.shared_account_m << "\n"
       << "control.professional_facet=" << obfuscation.professional_facet << "\n";
    return os.str();
}

std::string ExperimentConfig::hash() const { return sha256_hex(canonical()).substr(0, 16); }

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ConfigError("run.seeds must list at least one seed");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
        throw ConfigError("run.seeds contains duplicates");
    if (world_path && !interactions_path) throw ConfigError("run.world requires run.interactions");
    if (!world_path && interactions_path) throw ConfigError("run.interactions requires run.world");
    world.validate();
    loop.validate();
    if (variants.empty()) throw ConfigError("loop.variants must list at least one variant");
    for (const auto& v : variants) (void)LoopConfig::variant(v);
    (void)LoopConfig::variant(e2_variant);
    (void)LoopConfig::variant(e3_variant);
    if (models.empty()) throw ConfigError("models.kinds must list at least one model");
    fit.validate();
    if (e3_zipf < 0.0) throw ConfigError("e3.zipf must be non-negative");
    if (e3_gamma < 0.0) throw ConfigError("e3.gamma must be non-negative");
    if (!(e3_clip > 0.0 && e3_clip <= 1.0)) throw ConfigError("e3.clip must be in (0, 1]");
    if (!(e3_test_fraction > 0.0 && e3_test_fraction <= 1.0)) throw ConfigError("e3.test_fraction must be in (0, 1]");
    if (obfuscation.psychologist_k == 0 || obfuscation.shared_account_m == 0)
        throw ConfigError("obfuscation counts must be positive");
}

ExperimentConfig ExperimentConfig::parse(std::istream& is) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
    }

    std::set<std::pair<std::string, std::string>> known;
    std::set<std::string> sections;
    for (const auto& k : config_schema()) {
        known.emplace(k.section, k.key);
        sections.insert(k.section);
    }
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("config key '" + section + "' must sit inside a [section]");
        if (!sections.contains(section)) throw ConfigError("unknown config section [" + section + "]");
        for (const auto& [key, value] : body)
            if (!known.contains({section, key})) throw ConfigError("unknown config key " + section + "." + key);
    }

    ExperimentConfig c;
    auto get = [&](const char* section, const char* key) -> std::optional<std::string> {
        if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(std::string(section) + "." + key, '.')))
            return std::string(text::trim(*v));
        return std::nullopt;
    };
    auto with = [&](const char* section, const char* key, auto&& apply) {
        if (auto v = get(section, key)) {
            const std::string name = std::string(section) + "." + key;
            try {
                apply(*v, name);
            } catch (const ConfigError&) {
                throw;
            } catch (const Error& e) {
                throw ConfigError(name + ": " + e.what());
            }
        }
    };
    auto count_into = [&](std::size_t& dst) { return [&dst](const std::string& v, const std::string& n) { dst = parse_count(n, v); }; };
    auto int_into = [&](int& dst) { return [&dst](const std::string& v, const std::string&) { dst = static_cast<int>(text::parse_int(v)); }; };
    auto real_into = [&](double& dst) { return [&dst](const std::string& v, const std::string&) { dst = text::parse_double(v); }; };
    auto path_into = [&](std::optional<std::filesystem::path>& dst) {
        return [&dst](const std::string& v, const std::string&) {
            if (!v.empty()) dst = std::filesystem::path(v);
        };
    };
    auto string_into = [&](std::string& dst) { return [&dst](const std::string& v, const std::string&) { dst = v; }; };

    with("run", "backend", [&](const std::string& v, const std::string& n) {
        if (v == "oracle") c.backend = BackendKind::Oracle;
        else if (v == "remote") c.backend = BackendKind::Remote;
        else throw ConfigError(n + " must be oracle or remote");
    });
    with("run", "seeds", [&](const std::string& v, const std::string& n) {
        c.seeds.clear();
        for (const auto& s : parse_list(v)) c.seeds.push_back(parse_count(n, s));
    });
    with("run", "out", [&](const std::string& v, const std::string&) { c.out = v; });
    with("run", "world", path_into(c.world_path));
    with("run", "interactions", path_into(c.interactions_path));
    with("run", "split", path_into(c.split_path));
    with("run", "cache_dir", path_into(c.cache_dir));
    with("run", "templates", path_into(c.templates_dir));

    with("world", "users", count_into(c.world.users));
    with("world", "background", count_into(c.world.background));
    with("world", "items", count_into(c.world.items));
    with("world", "domains", [&](const std::string& v, const std::string&) {
        c.world.domains.clear();
        for (const auto& d : parse_list(v)) c.world.domains.emplace_back(d);
    });
    with("world", "tags", count_into(c.world.tags));
    with("world", "subtags", count_into(c.world.subtags));
    with("world", "subtag_prob", real_into(c.world.subtag_prob));
    with("world", "liked_tags", count_into(c.world.liked_tags));
    with("world", "disliked_tags", count_into(c.world.disliked_tags));
    with("world", "affinity_liked", real_into(c.world.affinity_liked));
    with("world", "affinity_disliked", real_into(c.world.affinity_disliked));
    with("world", "affinity_neutral", real_into(c.world.affinity_neutral));
    with("world", "per_domain", count_into(c.world.per_domain));
    with("world", "noise_rate", real_into(c.world.noise_rate));
    with("world", "zipf", real_into(c.world.zipf));

    with("loop", "max_iters", int_into(c.loop.max_iters));
    with("loop", "variants", [&](const std::string& v, const std::string&) { c.variants = parse_list(v); });
    with("loop", "temperature", real_into(c.loop.decode.temperature));
    with("loop", "max_tokens", int_into(c.loop.decode.max_tokens));

    with("models", "kinds", [&](const std::string& v, const std::string&) {
        c.models.clear();
        for (const auto& m : parse_list(v)) c.models.push_back(model_kind_from_string(m));
    });
    with("models", "dim", int_into(c.fit.dim));
    with("models", "learning_rate", real_into(c.fit.learning_rate));
    with("models", "l2", real_into(c.fit.l2));
    with("models", "epochs", int_into(c.fit.epochs));
    with("models", "negatives", int_into(c.fit.negatives));
    with("models", "negative_weight", real_into(c.fit.negative_weight));
    with("models", "knn_k", int_into(c.fit.knn_k));

    with("e2", "variant", string_into(c.e2_variant));

    with("e3", "zipf", real_into(c.e3_zipf));
    with("e3", "gamma", real_into(c.e3_gamma));
    with("e3", "clip", real_into(c.e3_clip));
    with("e3", "threshold", count_into(c.e3_threshold));
    with("e3", "test_fraction", real_into(c.e3_test_fraction));
    with("e3", "variant", string_into(c.e3_variant));

    with("control", "scenario", [&](const std::string& v, const std::string&) { c.control_scenario = v; });
    with("control", "privacy_scenario", [&](const std::string& v, const std::string&) { c.privacy_scenario = v; });
    with("control", "psychologist_k", count_into(c.obfuscation.psychologist_k));
    with("control", "shared_account_m", count_into(c.obfuscation.shared_account_m));
    with("control", "professional_facet", string_into(c.obfuscation.professional_facet));

    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path.string());
    auto c = parse(is);
    // Relative input paths are taken relative to the config file.
    const auto base = path.parent_path();
    auto fix = [&](std::filesystem::path& p) {
        if (!p.empty() && p.is_relative()) p = base / p;
    };
    for (auto* p : {&c.world_path, &c.interactions_path, &c.split_path, &c.templates_dir, &c.cache_dir})
        if (*p) fix(**p);
    fix(c.control_scenario);
    fix(c.privacy_scenario);
    return c;
}

} // namespace rah
