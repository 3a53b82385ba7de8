#include "rah/debias.hpp"

#include "rah/agents.hpp"
#include "rah/loop.hpp"
#include "rah/rng.hpp"
#include "rah/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <unordered_map>

namespace rah {

double PropensityTable::at(const ItemId& item) const {
    const auto it = std::find(items.begin(), items.end(), item);
    if (it == items.end()) throw LookupError("no propensity for item " + item);
    return propensity[static_cast<std::size_t>(it - items.begin())];
}

namespace {

// Smallest double ≥ p whose reciprocal multiplies back to exactly 1, so that
// w·p = 1 holds in floating point, not just algebraically. Moves at most a few ulps.
double round_trip_propensity(double p) {
    double q = p;
    for (int step = 0; step < 64 && (1.0 / q) * q != 1.0; ++step) q = std::nextafter(q, 2.0);
    return (1.0 / q) * q == 1.0 ? q : p;
}

} // namespace

PropensityTable estimate_propensity(const Catalog& catalog, const std::vector<Interaction>& interactions, double gamma,
                                    double clip) {
    if (interactions.empty()) throw ValidationError("propensity estimation needs interactions");
    if (gamma < 0.0) throw ConfigError("propensity exponent must be non-negative");
    if (!(clip > 0.0 && clip <= 1.0)) throw ConfigError("propensity clip must be in (0, 1]");
    PropensityTable t;
    t.gamma = gamma;
    t.clip = clip;
    t.counts.assign(catalog.size(), 0);
    for (const auto& x : interactions) ++t.counts[catalog.index_of(x.item)];
    const double max_n = static_cast<double>(*std::max_element(t.counts.begin(), t.counts.end()));
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        t.items.push_back(catalog.items()[i].id);
        const double ratio = static_cast<double>(t.counts[i]) / max_n;
        // pow(0, 0) is 1, which is what γ = 0 should mean even for unseen items.
        t.propensity.push_back(round_trip_propensity(std::max(clip, std::pow(ratio, gamma))));
    }
    return t;
}

std::vector<double> ips_weights(const PropensityTable& table) {
    std::vector<double> w;
    w.reserve(table.propensity.size());
    for (double p : table.propensity) w.push_back(1.0 / p);
    return w;
}

void write_propensity(std::ostream& os, const PropensityTable& table) {
    for (std::size_t i = 0; i < table.items.size(); ++i)
        os << table.items[i] << "\t" << text::format_double(table.propensity[i]) << "\n";
}

std::vector<Interaction> sample_unbiased_test(const std::vector<Interaction>& interactions, std::size_t size,
                                              std::uint64_t seed) {
    std::map<ItemId, std::size_t> n;
    for (const auto& x : interactions) ++n[x.item];
    return sample_unbiased_test(interactions, size, seed, n);
}

std::vector<Interaction> sample_unbiased_test(const std::vector<Interaction>& interactions, std::size_t size,
                                              std::uint64_t seed, const std::map<ItemId, std::size_t>& item_counts) {
    if (size > interactions.size())
        throw ValidationError("cannot sample " + std::to_string(size) + " of " + std::to_string(interactions.size()) +
                              " interactions");
    std::vector<double> w;
    w.reserve(interactions.size());
    for (const auto& x : interactions) {
        const auto it = item_counts.find(x.item);
        if (it == item_counts.end()) throw LookupError("no frequency for item " + x.item);
        if (it->second == 0) throw ValidationError("item " + x.item + " has frequency 0");
        w.push_back(1.0 / static_cast<double>(it->second));
    }
    Rng rng(derive_seed(seed, "unbiased-test"));
    auto picked = weighted_sample(w, size, rng);
    std::sort(picked.begin(), picked.end());
    std::vector<Interaction> out;
    out.reserve(picked.size());
    for (auto i : picked) out.push_back(interactions[i]);
    return out;
}

std::vector<Interaction> augment_unpopular(const Catalog& catalog, const std::vector<Interaction>& interactions,
                                           const std::vector<Assistant>& assistants, std::size_t threshold,
                                           std::uint64_t seed, Backend& backend, const DecodeParams& decode) {
    std::unordered_map<ItemId, std::set<UserId>> raters;
    std::unordered_map<ItemId, std::size_t> count;
    for (const auto& x : interactions) {
        raters[x.item].insert(x.user);
        ++count[x.item];
    }
    std::vector<const Assistant*> pool;
    for (const auto& a : assistants) pool.push_back(&a);
    std::sort(pool.begin(), pool.end(), [](const Assistant* a, const Assistant* b) { return a->user < b->user; });

    std::vector<Interaction> out;
    for (const auto& item : catalog.items()) {
        const std::size_t have = count[item.id];
        if (have >= threshold) continue;
        const std::size_t need = threshold - have;
        const auto& seen = raters[item.id];
        std::vector<const Assistant*> eligible;
        for (const auto* a : pool)
            if (!seen.contains(a->user)) eligible.push_back(a);
        if (eligible.size() < need)
            throw ValidationError("item " + item.id + " needs " + std::to_string(need) + " proxy reviews but only " +
                                  std::to_string(eligible.size()) + " assistants are eligible");
        Rng rng(derive_seed(seed, "augment:" + item.id));
        rng.shuffle(eligible.begin(), eligible.end());
        std::size_t added = 0;
        for (const auto* a : eligible) {
            if (added == need) break;
            auto proxy = proxy_actions(a->user, a->personality, {item}, backend, decode);
            if (proxy.empty()) continue; // gateway failure for this assistant; try the next one
            out.push_back(std::move(proxy.front()));
            ++added;
        }
        if (added < need) throw RunError("could not collect enough proxy reviews for item " + item.id);
    }
    return out;
}

} // namespace rah
