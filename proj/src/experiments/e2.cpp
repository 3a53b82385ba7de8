#include "rah/experiments.hpp"

#include "rah/gateway/cache.hpp"
#include "rah/rng.hpp"

#include <map>

namespace rah {

double E2Result::mean_ndcg(const std::string& model, const std::string& arm, const std::string& scope) const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows)
        if (r.model == model && r.arm == arm && r.scope == scope) s += r.ndcg, ++n;
    if (n == 0) throw RunError("no E2 rows for " + model + "/" + arm + "/" + scope);
    return s / static_cast<double>(n);
}

namespace {

std::string digest(const std::vector<Interaction>& xs) {
    std::string buf;
    for (const auto& x : xs) buf += nlohmann::json(x).dump() + "\n";
    return sha256_hex(buf).substr(0, 16);
}

} // namespace

E2Result run_e2(const ExperimentConfig& config) {
    config.validate();
    E2Result result;
    for (const auto seed : config.seeds) {
        const auto ctx = prepare_seed(config, seed);
        const auto& catalog = ctx.world->catalog;
        auto loop = LoopConfig::variant(config.e2_variant);
        loop.max_iters = config.loop.max_iters;
        loop.decode = config.loop.decode;

        // Shared by every arm: background data plus the cohort's Learn Set.
        std::vector<Interaction> base;
        const std::set<UserId> background(ctx.background.begin(), ctx.background.end());
        for (const auto& x : ctx.interactions)
            if (background.contains(x.user)) base.push_back(x);
        std::vector<Interaction> proxy_assistant, proxy_random;
        std::vector<std::pair<UserId, ItemId>> test;
        Rng coin(derive_seed(seed, "random-arm"));
        for (const auto& user : ctx.cohort) {
            const auto learn = ctx.user_set(user, SplitSet::Learn);
            base.insert(base.end(), learn.begin(), learn.end());
            const auto personality = learn_set(user, learn, catalog, loop, *ctx.backend);
            std::vector<Item> items;
            for (const auto& x : ctx.user_set(user, SplitSet::Proxy)) items.push_back(catalog.at(x.item));
            auto proxies = proxy_actions(user, personality, items, *ctx.backend, loop.decode);
            // The random arm acts on exactly the items the assistant acted on.
            for (const auto& p : proxies) {
                Interaction r = p;
                r.id = "random:" + user + ":" + p.item;
                r.action = coin.bernoulli(0.5) ? Action::Like : Action::Dislike;
                r.source = Source::RandomBaseline;
                proxy_random.push_back(std::move(r));
            }
            proxy_assistant.insert(proxy_assistant.end(), proxies.begin(), proxies.end());
            for (const auto& x : ctx.user_set(user, SplitSet::Unseen))
                if (x.action == Action::Like) test.emplace_back(user, x.item);
        }
        const auto base_hash = digest(base);

        std::vector<UserId> all_users = ctx.cohort;
        all_users.insert(all_users.end(), ctx.background.begin(), ctx.background.end());

        struct Arm {
            std::string name;
            const std::vector<Interaction>* extra;
        };
        const std::vector<Arm> arms{{"none", nullptr}, {"random", &proxy_random}, {"assistant", &proxy_assistant}};

        std::map<std::pair<std::string, std::string>, std::pair<double, double>> none_metrics; // (model, scope)
        for (const auto& arm : arms) {
            auto train = base;
            if (arm.extra) train.insert(train.end(), arm.extra->begin(), arm.extra->end());
            if (digest({train.begin(), train.begin() + static_cast<std::ptrdiff_t>(base.size())}) != base_hash)
                throw RunError("E2 arm " + arm.name + " does not share the base training data");
            const auto data = RecDataset::build(catalog, train, all_users);
            const auto positives = data.positives();
            std::vector<TestCase> cases;
            for (const auto& [u, i] : test) cases.push_back({data.user_index(u), data.item_index(i)});

            std::vector<std::pair<std::string, std::vector<std::uint32_t>>> scopes;
            std::vector<std::uint32_t> everything(data.n_items());
            for (std::uint32_t i = 0; i < data.n_items(); ++i) everything[i] = i;
            scopes.emplace_back("mixed", std::move(everything));
            for (const auto& d : data.domains()) scopes.emplace_back(d.name(), data.domain_items(d));

            for (const auto kind : config.models) {
                const std::string model(to_string(kind));
                const auto rec = fit(kind, data, config.fit, derive_seed(seed, "fit:" + model));
                for (const auto& [scope, candidates] : scopes) {
                    const std::set<std::uint32_t> pool(candidates.begin(), candidates.end());
                    std::vector<TestCase> scoped;
                    for (const auto& c : cases)
                        if (pool.contains(c.item)) scoped.push_back(c);
                    const auto report = evaluate(*rec, scoped, candidates, positives);
                    E2Row row;
                    row.seed = seed;
                    row.model = model;
                    row.arm = arm.name;
                    row.scope = scope;
                    row.ndcg = report.ndcg;
                    row.recall = report.recall;
                    row.users = report.per_user.size();
                    row.train_size = train.size();
                    row.base_hash = base_hash;
                    if (arm.name == "none") none_metrics[{model, scope}] = {report.ndcg, report.recall};
                    const auto& none = none_metrics.at({model, scope});
                    row.delta_ndcg = report.ndcg - none.first;
                    row.delta_recall = report.recall - none.second;
                    result.rows.push_back(std::move(row));
                }
            }
        }
    }
    return result;
}

} // namespace rah
