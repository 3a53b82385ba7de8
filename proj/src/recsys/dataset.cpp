#include "rah/recsys.hpp"

#include <algorithm>

namespace rah {

RecDataset::RecDataset(const Catalog& catalog, std::vector<UserId> users) : users_(std::move(users)) {
    for (std::uint32_t u = 0; u < users_.size(); ++u)
        if (!user_index_.emplace(users_[u], u).second) throw ValidationError("duplicate user " + users_[u]);
    domains_ = catalog.domains();
    std::sort(domains_.begin(), domains_.end());
    for (const auto& item : catalog.items()) {
        item_index_.emplace(item.id, static_cast<std::uint32_t>(items_.size()));
        items_.push_back(item.id);
        const auto d = std::lower_bound(domains_.begin(), domains_.end(), item.domain) - domains_.begin();
        item_domain_.push_back(static_cast<std::uint32_t>(d));
    }
}

RecDataset RecDataset::build(const Catalog& catalog, const std::vector<Interaction>& interactions,
                             const std::vector<UserId>& extra_users) {
    std::set<UserId> users(extra_users.begin(), extra_users.end());
    for (const auto& x : interactions) users.insert(x.user);
    RecDataset d(catalog, std::vector<UserId>(users.begin(), users.end()));
    for (const auto& x : interactions) d.add(x);
    return d;
}

void RecDataset::add(const Interaction& x, double weight) {
    add(user_index(x.user), item_index(x.item), x.action == Action::Like ? 1 : 0, weight);
}

void RecDataset::add(std::uint32_t user, std::uint32_t item, std::uint8_t label, double weight) {
    if (user >= users_.size() || item >= items_.size()) throw LookupError("example index out of range");
    if (!(weight > 0.0)) throw ValidationError("example weight must be positive");
    if (label > 1) throw ValidationError("example label must be 0 or 1");
    examples_.push_back({user, item, label, weight});
}

void RecDataset::apply_item_weights(const std::vector<double>& weights) {
    if (weights.size() != items_.size()) throw ValidationError("item weight vector does not match the catalog");
    for (auto& e : examples_) e.weight *= weights[e.item];
}

std::uint32_t RecDataset::user_index(const UserId& u) const {
    const auto it = user_index_.find(u);
    if (it == user_index_.end()) throw LookupError("unknown user " + u);
    return it->second;
}

std::uint32_t RecDataset::item_index(const ItemId& i) const {
    const auto it = item_index_.find(i);
    if (it == item_index_.end()) throw LookupError("unknown item " + i);
    return it->second;
}

std::vector<std::uint32_t> RecDataset::domain_items(const DomainTag& d) const {
    const auto pos = std::lower_bound(domains_.begin(), domains_.end(), d);
    if (pos == domains_.end() || *pos != d) throw LookupError("unknown domain " + d.name());
    const auto di = static_cast<std::uint32_t>(pos - domains_.begin());
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < items_.size(); ++i)
        if (item_domain_[i] == di) out.push_back(i);
    return out;
}

std::vector<std::set<std::uint32_t>> RecDataset::positives() const {
    std::vector<std::set<std::uint32_t>> out(users_.size());
    for (const auto& e : examples_)
        if (e.label == 1) out[e.user].insert(e.item);
    return out;
}

std::string_view to_string(ModelKind k) noexcept {
    switch (k) {
    case ModelKind::MF: return "MF";
    case ModelKind::FM: return "FM";
    case ModelKind::ItemKNN: return "ItemKNN";
    case ModelKind::Popularity: return "Popularity";
    }
    return "?";
}

ModelKind model_kind_from_string(std::string_view s) {
    for (auto k : all_model_kinds())
        if (s == to_string(k)) return k;
    throw ConfigError("unknown model kind '" + std::string(s) + "' (expected MF, FM, ItemKNN or Popularity)");
}

void FitParams::validate() const {
    if (dim < 1) throw ConfigError("model dim must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (l2 < 0.0) throw ConfigError("l2 must be non-negative");
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (negatives < 0) throw ConfigError("negatives must be non-negative");
    if (!(negative_weight > 0.0)) throw ConfigError("negative weight must be positive");
    if (knn_k < 1) throw ConfigError("knn k must be at least 1");
}

} // namespace rah
