#pragma once

#include "rah/debias.hpp"
#include "rah/loop.hpp"
#include "rah/pipeline.hpp"
#include "rah/recsys.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rah {

/// Everything a run needs. Loaded from an INI file whose schema is listed in
/// `config_schema()`; unknown sections and keys are rejected.
struct ExperimentConfig {
    BackendKind backend = BackendKind::Oracle;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::filesystem::path out = "runs/default";
    std::optional<std::filesystem::path> world_path;        // fixed world instead of generating one per seed
    std::optional<std::filesystem::path> interactions_path; // required with world_path
    std::optional<std::filesystem::path> split_path;
    std::optional<std::filesystem::path> cache_dir;     // remote backend response cache
    std::optional<std::filesystem::path> templates_dir; // remote backend prompt templates

    WorldConfig world = [] {
        WorldConfig w;
        w.background = 100;
        w.noise_rate = 0.1;
        return w;
    }();

    LoopConfig loop;
    std::vector<std::string> variants = loop_variants();

    std::vector<ModelKind> models = all_model_kinds();
    FitParams fit;

    std::string e2_variant = "L+C+R";

    double e3_zipf = 1.0;
    double e3_gamma = 1.0;
    double e3_clip = 0.01;
    std::size_t e3_threshold = 10;
    double e3_test_fraction = 0.5;
    std::string e3_variant = "L+C+R";

    std::filesystem::path control_scenario = "scenarios/fig4a.txt";
    std::filesystem::path privacy_scenario = "scenarios/fig4b.txt";
    ObfuscationParams obfuscation;

    void validate() const;
    /// Sorted key=value listing of every setting; the config hash is the first
    /// 16 hex digits of its SHA-256.
    std::string canonical() const;
    std::string hash() const;

    static ExperimentConfig parse(std::istream& is);
    static ExperimentConfig load(const std::filesystem::path& path);
};

/// (section, key, description) for every accepted key, in file order.
struct ConfigKey {
    const char* section;
    const char* key;
    const char* help;
};
const std::vector<ConfigKey>& config_schema();

/// Per-seed inputs shared by all experiments.
struct SeedContext {
    std::uint64_t seed = 0;
    std::shared_ptr<const SyntheticWorld> world;
    std::vector<Interaction> interactions;
    std::vector<UserId> cohort;     // users whose data is split Learn/Proxy/Unseen
    std::vector<UserId> background; // users whose data only trains recommenders
    SplitAssignment split;          // over cohort interactions
    std::shared_ptr<Backend> backend;

    std::vector<Interaction> user_set(const UserId& user, SplitSet set) const;
};

/// `zipf` overrides the world config's exponent when a world is generated.
SeedContext prepare_seed(const ExperimentConfig& config, std::uint64_t seed, std::optional<double> zipf = std::nullopt);

std::shared_ptr<Backend> make_backend(const ExperimentConfig& config, std::shared_ptr<const SyntheticWorld> world);

/// Macro-F1 over {Like, Dislike}. A class absent from both predictions and
/// truth scores 1.
double macro_f1(const std::vector<Action>& predicted, const std::vector<Action>& truth);

// --- E1 ---------------------------------------------------------------------

struct E1Row {
    std::uint64_t seed = 0;
    std::string variant;
    std::string scope; // single | cross | mixed
    std::string source;
    std::string target;
    std::size_t users = 0;
    double f1 = 0.0;
    std::optional<double> converged_rate;
};

struct E1Result {
    std::vector<E1Row> rows;
    /// Mean over seeds of the per-seed scope average (single: over domains; cross: over pairs).
    double mean(const std::string& variant, const std::string& scope) const;
    /// Mean over seeds for one single-domain cell.
    double mean_single(const std::string& variant, const std::string& domain) const;
};

E1Result run_e1(const ExperimentConfig& config);

// --- E2 ---------------------------------------------------------------------

inline const std::vector<std::string>& e2_arms() {
    static const std::vector<std::string> v{"none", "random", "assistant"};
    return v;
}

struct E2Row {
    std::uint64_t seed = 0;
    std::string model;
    std::string arm;
    std::string scope; // mixed or a domain name
    double ndcg = 0.0;
    double recall = 0.0;
    double delta_ndcg = 0.0; // arm − none
    double delta_recall = 0.0;
    std::size_t users = 0;
    std::size_t train_size = 0;
    std::string base_hash; // digest of the inputs every arm shares
};

struct E2Result {
    std::vector<E2Row> rows;
    double mean_ndcg(const std::string& model, const std::string& arm, const std::string& scope = "mixed") const;
};

E2Result run_e2(const ExperimentConfig& config);

// --- E3 ---------------------------------------------------------------------

inline const std::vector<std::string>& e3_arms() {
    static const std::vector<std::string> v{"MF", "MF+IPS", "MF+RAH", "MF+IPS+RAH"};
    return v;
}

struct E3Row {
    std::uint64_t seed = 0;
    std::string arm;
    double ndcg = 0.0;
    double recall = 0.0;
    std::size_t users = 0;
    std::size_t test_size = 0;
    std::size_t augmented = 0;
};

struct E3Result {
    std::vector<E3Row> rows;
    double mean_ndcg(const std::string& arm) const;
};

E3Result run_e3(const ExperimentConfig& config);

// --- control / privacy case studies -------------------------------------------

/// Line-oriented scenario script; fields are tab-separated:
///   scenario  control|privacy
///   user      <id>
///   item      <id>  <domain>  <tag,tag,...>  <title>
///   history   like|dislike  <item id>
///   exclude   <facet>            (control)
///   candidate <item id>          (control)
///   sensitive <facet>            (privacy)
///   trigger   <item id>          (privacy; must also appear in history)
struct Scenario {
    std::string kind;
    UserId user;
    Catalog catalog;
    std::vector<Interaction> history;
    IntentRules rules;
    std::vector<ItemId> candidates;
    std::optional<ItemId> trigger;
};

Scenario parse_scenario(std::istream& is);
Scenario load_scenario(const std::filesystem::path& path);

struct ControlOutcome {
    ForwardDecision decision;
    std::vector<ItemId> candidates;
    Personality personality;
};

struct PrivacyOutcome {
    std::vector<ItemId> baseline_visible;
    struct Run {
        ObfuscationPlan plan;
        std::vector<ItemId> visible;
        bool sound = false; // visible == baseline_visible
    };
    std::vector<Run> runs; // Psychologist, SharedAccount
};

ControlOutcome run_control_scenario(const Scenario& s, const ExperimentConfig& config, std::ostream& log);
PrivacyOutcome run_privacy_scenario(const Scenario& s, const ExperimentConfig& config, std::uint64_t seed, std::ostream& log);

/// Runs both scripted scenarios for the first seed and writes control.log.
void run_control(const ExperimentConfig& config);

// --- reports ------------------------------------------------------------------

void write_e1(const ExperimentConfig& config, const E1Result& r);
void write_e2(const ExperimentConfig& config, const E2Result& r);
void write_e3(const ExperimentConfig& config, const E3Result& r);

/// Rebuilds summary.txt in `out` from whichever of e1.csv, e2.csv, e3.csv exist.
void write_summary(const std::filesystem::path& out);

} // namespace rah
