#include "rah/experiments.hpp"

#include "rah/gateway/cache.hpp"
#include "rah/gateway/remote.hpp"

#include <fstream>

namespace rah {

std::shared_ptr<Backend> make_backend(const ExperimentConfig& config, std::shared_ptr<const SyntheticWorld> world) {
    if (config.backend == BackendKind::Oracle) {
        if (!world || world->users.empty())
            throw ConfigError("the oracle backend needs a synthetic world with ground-truth users");
        return std::make_shared<OracleBackend>(std::move(world));
    }
    auto templates = config.templates_dir ? TemplateSet::load(*config.templates_dir) : TemplateSet::defaults();
    std::shared_ptr<Backend> remote =
        std::make_shared<RemoteBackend>(RemoteConfig::from_env(), std::move(templates), std::make_shared<HttpTransport>());
    if (config.cache_dir) return std::make_shared<CachedBackend>(std::move(remote), *config.cache_dir);
    return remote;
}

std::vector<Interaction> SeedContext::user_set(const UserId& user, SplitSet set) const {
    std::vector<Interaction> out;
    for (const auto& x : interactions) {
        if (x.user != user) continue;
        const auto it = split.find(x.id);
        if (it != split.end() && it->second == set) out.push_back(x);
    }
    return out;
}

SeedContext prepare_seed(const ExperimentConfig& config, std::uint64_t seed, std::optional<double> zipf) {
    SeedContext ctx;
    ctx.seed = seed;
    if (config.world_path) {
        ctx.world = std::make_shared<SyntheticWorld>(load_world(*config.world_path));
        ctx.interactions = load_interactions(*config.interactions_path);
    } else {
        auto wc = config.world;
        wc.seed = seed;
        if (zipf) wc.zipf = *zipf;
        auto bundle = make_world(wc);
        ctx.world = std::make_shared<SyntheticWorld>(std::move(bundle.world));
        ctx.interactions = std::move(bundle.interactions);
    }
    std::set<UserId> users;
    for (const auto& x : ctx.interactions) users.insert(x.user);
    for (const auto& u : users) {
        const auto it = ctx.world->users.find(u);
        // Users unknown to the world (ingested data) are all cohort users.
        if (it != ctx.world->users.end() && it->second.role == UserRole::Background)
            ctx.background.push_back(u);
        else
            ctx.cohort.push_back(u);
    }
    const std::set<UserId> cohort(ctx.cohort.begin(), ctx.cohort.end());
    std::vector<Interaction> cohort_x;
    for (const auto& x : ctx.interactions)
        if (cohort.contains(x.user)) cohort_x.push_back(x);
    if (config.split_path) {
        std::ifstream is(*config.split_path);
        if (!is) throw ConfigError("cannot read split file " + config.split_path->string());
        ctx.split = read_split(is);
        for (const auto& x : cohort_x)
            if (!ctx.split.contains(x.id)) throw ConfigError("split file does not cover interaction " + x.id);
    } else {
        ctx.split = split_lpu(cohort_x, seed);
    }
    ctx.backend = make_backend(config, ctx.world);
    return ctx;
}

double macro_f1(const std::vector<Action>& predicted, const std::vector<Action>& truth) {
    if (predicted.size() != truth.size()) throw ValidationError("prediction and truth lengths differ");
    double total = 0.0;
    for (Action c : {Action::Like, Action::Dislike}) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            if (predicted[i] == c && truth[i] == c) ++tp;
            else if (predicted[i] == c) ++fp;
            else if (truth[i] == c) ++fn;
        }
        total += tp + fp + fn == 0 ? 1.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    }
    return total / 2.0;
}

} // namespace rah
