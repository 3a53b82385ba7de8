#pragma once

#include "rah/gateway/backend.hpp"

#include <filesystem>
#include <memory>
#include <random>
#include <string>

namespace testing_helpers {

inline rah::Item item(const std::string& id, rah::FacetSet tags, rah::DomainTag domain = rah::DomainTag::movie()) {
    return rah::Item{id, domain, "Title " + id, "", std::move(tags)};
}

inline rah::Interaction interaction(const std::string& user, const std::string& item_id, rah::Action a, std::int64_t ts = 0) {
    rah::Interaction x;
    x.id = user + ":" + item_id;
    x.user = user;
    x.item = item_id;
    x.action = a;
    x.timestamp = ts;
    return x;
}

/// One-user world over the given items.
inline std::shared_ptr<rah::SyntheticWorld> world_of(std::vector<rah::Item> items, rah::FacetSet liked = {},
                                                     rah::FacetSet disliked = {}, const std::string& user = "u1") {
    auto w = std::make_shared<rah::SyntheticWorld>();
    for (auto& i : items) w->catalog.add(std::move(i));
    w->users.emplace(user, rah::SyntheticUser{std::move(liked), std::move(disliked), 0.0, rah::UserRole::Cohort});
    return w;
}

inline rah::TraitEntry trait(rah::Action polarity, const std::string& facet, const std::string& provenance = "x") {
    return rah::TraitEntry{polarity, facet, {facet}, {provenance}, 0};
}

inline rah::Personality personality(const std::string& user, rah::FacetSet likes, rah::FacetSet dislikes) {
    rah::Personality p;
    p.user = user;
    for (const auto& f : likes) p.entries.push_back(trait(rah::Action::Like, f));
    for (const auto& f : dislikes) p.entries.push_back(trait(rah::Action::Dislike, f));
    return p;
}

inline rah::PerceivedItem perceived(const rah::Item& i) { return rah::PerceivedItem{i.id, i.title, i.domain, i.title, i.tags}; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("rah-test-" + name + "-" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace testing_helpers
