#pragma once

#include "rah/core.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rah {

/// Perceive output: the item enriched with a description and attribute set.
struct PerceivedItem {
    ItemId item;
    std::string title;
    DomainTag domain;
    std::string description;
    FacetSet attributes;

    bool operator==(const PerceivedItem&) const = default;
};

struct CandidateTraits {
    std::vector<TraitEntry> new_likes;
    std::vector<TraitEntry> new_dislikes;
    std::string why_like;
    std::string why_dislike;

    bool operator==(const CandidateTraits&) const = default;
    bool empty() const noexcept { return new_likes.empty() && new_dislikes.empty(); }
};

/// The four chain-of-thought stages of the Act agent. `uncertain` marks a
/// prediction with no supporting evidence either way.
struct ActOutcome {
    std::string hypothesized_reasons;
    std::string perception_analysis;
    std::string simulated_comment;
    Action predicted = Action::Dislike;
    bool uncertain = false;

    bool operator==(const ActOutcome&) const = default;
};

struct Verdict {
    bool pass = true;
    std::optional<std::pair<Action, Action>> mismatch; // (predicted, actual)
    std::vector<std::string> reasons;
    std::vector<std::string> suggestions;
    FacetSet flagged_facets;

    bool operator==(const Verdict&) const = default;
};

struct ReflectResult {
    Personality merged;
    std::size_t duplicates_removed = 0;
    std::size_t conflicts_resolved = 0;
    std::vector<std::string> user_queries;

    bool operator==(const ReflectResult&) const = default;
};

void to_json(nlohmann::json& j, const PerceivedItem& x);
void from_json(const nlohmann::json& j, PerceivedItem& x);
void to_json(nlohmann::json& j, const CandidateTraits& x);
void from_json(const nlohmann::json& j, CandidateTraits& x);
void to_json(nlohmann::json& j, const ActOutcome& x);
void from_json(const nlohmann::json& j, ActOutcome& x);
void to_json(nlohmann::json& j, const Verdict& x);
void from_json(const nlohmann::json& j, Verdict& x);
void to_json(nlohmann::json& j, const ReflectResult& x);
void from_json(const nlohmann::json& j, ReflectResult& x);

} // namespace rah
