#pragma once

#include "rah/gateway/backend.hpp"

#include <iosfwd>
#include <map>
#include <vector>

namespace rah {

/// Per-item exposure propensity, in catalog order.
struct PropensityTable {
    std::vector<ItemId> items;
    std::vector<std::size_t> counts;
    std::vector<double> propensity;
    double gamma = 1.0;
    double clip = 0.01;

    double at(const ItemId& item) const;
};

/// p_i = max(clip, (n_i / max_j n_j)^γ), n_i = interactions on item i, nudged up
/// by at most a few ulps so that (1/p_i)·p_i == 1 exactly in double precision.
PropensityTable estimate_propensity(const Catalog& catalog, const std::vector<Interaction>& interactions, double gamma = 1.0,
                                    double clip = 0.01);

/// w_i = 1 / p_i, in table order.
std::vector<double> ips_weights(const PropensityTable& table);

/// "item<TAB>propensity" per line.
void write_propensity(std::ostream& os, const PropensityTable& table);

/// Weighted sampling without replacement with weight ∝ 1 / n_item(e), where
/// n counts occurrences within `interactions`. Output keeps input order.
std::vector<Interaction> sample_unbiased_test(const std::vector<Interaction>& interactions, std::size_t size,
                                              std::uint64_t seed);
/// Same, with item frequencies taken from a wider corpus.
std::vector<Interaction> sample_unbiased_test(const std::vector<Interaction>& interactions, std::size_t size,
                                              std::uint64_t seed, const std::map<ItemId, std::size_t>& item_counts);

struct Assistant {
    UserId user;
    Personality personality;
};

/// Tops every catalog item with fewer than `threshold` interactions up to
/// exactly `threshold` with proxy actions from distinct assistants who have
/// not interacted with it. Assistants are drawn per item from a sub-generator
/// seeded by (seed, item id).
std::vector<Interaction> augment_unpopular(const Catalog& catalog, const std::vector<Interaction>& interactions,
                                           const std::vector<Assistant>& assistants, std::size_t threshold,
                                           std::uint64_t seed, Backend& backend, const DecodeParams& decode = {});

} // namespace rah
