#include "rah/experiments.hpp"

#include "rah/rng.hpp"

#include <cmath>

namespace rah {

double E3Result::mean_ndcg(const std::string& arm) const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows)
        if (r.arm == arm) s += r.ndcg, ++n;
    if (n == 0) throw RunError("no E3 rows for " + arm);
    return s / static_cast<double>(n);
}

namespace {

// Rescales 1/p so the observed examples keep their total weight: the arms then
// differ in how weight is spread over items, not in how much the observed data
// counts against the sampled negatives.
std::vector<double> self_normalized(std::vector<double> w, const RecDataset& data) {
    double total = 0.0, base = 0.0;
    for (const auto& e : data.examples()) {
        total += e.weight * w[e.item];
        base += e.weight;
    }
    if (total > 0.0)
        for (auto& v : w) v *= base / total;
    return w;
}

} // namespace

E3Result run_e3(const ExperimentConfig& config) {
    config.validate();
    E3Result result;
    for (const auto seed : config.seeds) {
        const auto ctx = prepare_seed(config, seed, config.e3_zipf);
        const auto& catalog = ctx.world->catalog;
        auto loop = LoopConfig::variant(config.e3_variant);
        loop.max_iters = config.loop.max_iters;
        loop.decode = config.loop.decode;

        // Observed (exposure-biased) data: the cohort's Learn and Proxy Sets. Background users are
        // left out so that the tail stays thin, as in a small crawled corpus.
        std::vector<Interaction> train;
        std::vector<Assistant> assistants;
        std::vector<Interaction> unseen;
        for (const auto& user : ctx.cohort) {
            const auto learn = ctx.user_set(user, SplitSet::Learn);
            const auto proxy = ctx.user_set(user, SplitSet::Proxy);
            train.insert(train.end(), learn.begin(), learn.end());
            train.insert(train.end(), proxy.begin(), proxy.end());
            if (config.e3_threshold > 0)
                assistants.push_back({user, learn_set(user, learn, catalog, loop, *ctx.backend)});
            const auto u = ctx.user_set(user, SplitSet::Unseen);
            unseen.insert(unseen.end(), u.begin(), u.end());
        }
        // Rated Unseen interactions drawn against item frequency; each user then ranks their own
        // sampled items and the Likes among them are the hits.
        const auto test_size = static_cast<std::size_t>(std::llround(config.e3_test_fraction * unseen.size()));
        const auto test = sample_unbiased_test(unseen, test_size, seed);

        std::vector<Interaction> augmented;
        if (config.e3_threshold > 0)
            augmented = augment_unpopular(catalog, train, assistants, config.e3_threshold, seed, *ctx.backend, loop.decode);
        const auto weights = ips_weights(estimate_propensity(catalog, train, config.e3_gamma, config.e3_clip));

        for (const auto& arm : e3_arms()) {
            const bool ips = arm.find("IPS") != std::string::npos;
            const bool rah = arm.find("RAH") != std::string::npos;
            auto data_x = train;
            if (rah) data_x.insert(data_x.end(), augmented.begin(), augmented.end());
            auto data = RecDataset::build(catalog, data_x, ctx.cohort);
            if (ips) data.apply_item_weights(self_normalized(weights, data));
            std::vector<RatedCase> cases;
            for (const auto& x : test)
                cases.push_back({data.user_index(x.user), data.item_index(x.item), x.action == Action::Like});
            const auto model = fit(ModelKind::MF, data, config.fit, derive_seed(seed, "fit:MF"));
            const auto report = evaluate_rated(*model, cases);
            result.rows.push_back({seed, arm, report.ndcg, report.recall, report.per_user.size(), test.size(),
                                   rah ? augmented.size() : 0});
        }
    }
    return result;
}

} // namespace rah
