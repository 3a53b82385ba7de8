#include "rah/experiments.hpp"

#include <map>

namespace rah {

namespace {

double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw RunError("no rows to average");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace

double E1Result::mean(const std::string& variant, const std::string& scope) const {
    std::map<std::uint64_t, std::vector<double>> per_seed;
    for (const auto& r : rows)
        if (r.variant == variant && r.scope == scope) per_seed[r.seed].push_back(r.f1);
    std::vector<double> seeds;
    for (const auto& [s, v] : per_seed) seeds.push_back(mean_of(v));
    return mean_of(seeds);
}

double E1Result::mean_single(const std::string& variant, const std::string& domain) const {
    std::vector<double> v;
    for (const auto& r : rows)
        if (r.variant == variant && r.scope == "single" && r.source == domain) v.push_back(r.f1);
    return mean_of(v);
}

E1Result run_e1(const ExperimentConfig& config) {
    config.validate();
    E1Result result;
    for (const auto seed : config.seeds) {
        const auto ctx = prepare_seed(config, seed);
        const auto& catalog = ctx.world->catalog;
        const auto domains = catalog.domains();
        auto in_domain = [&](const std::vector<Interaction>& xs, const std::optional<DomainTag>& d) {
            if (!d) return xs;
            std::vector<Interaction> out;
            for (const auto& x : xs)
                if (catalog.at(x.item).domain == *d) out.push_back(x);
            return out;
        };
        // Sources and targets: each domain, plus nullopt for "all domains".
        std::vector<std::optional<DomainTag>> scopes(domains.begin(), domains.end());
        scopes.push_back(std::nullopt);

        for (const auto& variant : config.variants) {
            auto loop = LoopConfig::variant(variant);
            loop.max_iters = config.loop.max_iters;
            loop.decode = config.loop.decode;

            struct Cell {
                std::vector<double> f1;
            };
            std::map<std::pair<std::size_t, std::size_t>, Cell> cells; // (source, target) scope indices
            std::vector<std::size_t> converged(scopes.size(), 0), attempted(scopes.size(), 0);

            for (const auto& user : ctx.cohort) {
                const auto learn_all = ctx.user_set(user, SplitSet::Learn);
                const auto proxy_all = ctx.user_set(user, SplitSet::Proxy);
                for (std::size_t s = 0; s < scopes.size(); ++s) {
                    LearnSetStats st;
                    const auto personality =
                        learn_set(user, in_domain(learn_all, scopes[s]), catalog, loop, *ctx.backend, &st);
                    converged[s] += st.converged;
                    attempted[s] += st.attempted - st.failed;
                    for (std::size_t t = 0; t < scopes.size(); ++t) {
                        const bool mixed = !scopes[s] && !scopes[t];
                        const bool single = scopes[s] && scopes[t] && *scopes[s] == *scopes[t];
                        const bool cross = scopes[s] && scopes[t] && *scopes[s] != *scopes[t];
                        if (!mixed && !single && !cross) continue;
                        const auto targets = in_domain(proxy_all, scopes[t]);
                        if (targets.empty()) continue;
                        std::vector<Item> items;
                        for (const auto& x : targets) items.push_back(catalog.at(x.item));
                        const auto proxies = proxy_actions(user, personality, items, *ctx.backend, loop.decode);
                        std::map<ItemId, Action> predicted;
                        for (const auto& p : proxies) predicted.emplace(p.item, p.action);
                        std::vector<Action> pred, truth;
                        for (const auto& x : targets) {
                            const auto it = predicted.find(x.item);
                            if (it == predicted.end()) continue; // gateway failure, already logged
                            pred.push_back(it->second);
                            truth.push_back(x.action);
                        }
                        if (!pred.empty()) cells[{s, t}].f1.push_back(macro_f1(pred, truth));
                    }
                }
            }

            auto name = [&](std::size_t i) { return scopes[i] ? scopes[i]->name() : std::string("all"); };
            auto emit = [&](std::size_t s, std::size_t t, const char* scope) {
                const auto it = cells.find({s, t});
                if (it == cells.end()) return;
                E1Row row;
                row.seed = seed;
                row.variant = variant;
                row.scope = scope;
                row.source = name(s);
                row.target = name(t);
                row.users = it->second.f1.size();
                row.f1 = mean_of(it->second.f1);
                if (loop.use_critic && attempted[s] > 0)
                    row.converged_rate = static_cast<double>(converged[s]) / static_cast<double>(attempted[s]);
                result.rows.push_back(std::move(row));
            };
            const std::size_t all = scopes.size() - 1;
            for (std::size_t d = 0; d < all; ++d) emit(d, d, "single");
            for (std::size_t a = 0; a < all; ++a)
                for (std::size_t b = 0; b < all; ++b)
                    if (a != b) emit(a, b, "cross");
            emit(all, all, "mixed");
        }
    }
    return result;
}

} // namespace rah
