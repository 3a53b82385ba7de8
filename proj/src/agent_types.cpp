#include "rah/agent_types.hpp"

namespace rah {

using nlohmann::json;

void to_json(json& j, const PerceivedItem& x) {
    j = json{{"item", x.item},
             {"title", x.title},
             {"domain", x.domain},
             {"description", x.description},
             {"attributes", x.attributes}};
}

void from_json(const json& j, PerceivedItem& x) {
    x.item = j.at("item").get<std::string>();
    x.title = j.at("title").get<std::string>();
    x.domain = j.at("domain").get<DomainTag>();
    x.description = j.at("description").get<std::string>();
    x.attributes = j.at("attributes").get<FacetSet>();
}

void to_json(json& j, const CandidateTraits& x) {
    j = json{{"new_likes", x.new_likes},
             {"new_dislikes", x.new_dislikes},
             {"why_like", x.why_like},
             {"why_dislike", x.why_dislike}};
}

void from_json(const json& j, CandidateTraits& x) {
    x.new_likes = j.at("new_likes").get<std::vector<TraitEntry>>();
    x.new_dislikes = j.at("new_dislikes").get<std::vector<TraitEntry>>();
    x.why_like = j.at("why_like").get<std::string>();
    x.why_dislike = j.at("why_dislike").get<std::string>();
}

void to_json(json& j, const ActOutcome& x) {
    j = json{{"hypothesized_reasons", x.hypothesized_reasons},
             {"perception_analysis", x.perception_analysis},
             {"simulated_comment", x.simulated_comment},
             {"predicted", x.predicted},
             {"uncertain", x.uncertain}};
}

void from_json(const json& j, ActOutcome& x) {
    x.hypothesized_reasons = j.at("hypothesized_reasons").get<std::string>();
    x.perception_analysis = j.at("perception_analysis").get<std::string>();
    x.simulated_comment = j.at("simulated_comment").get<std::string>();
    x.predicted = j.at("predicted").get<Action>();
    x.uncertain = j.value("uncertain", false);
}

void to_json(json& j, const Verdict& x) {
    j = json{{"pass", x.pass},
             {"reasons", x.reasons},
             {"suggestions", x.suggestions},
             {"flagged_facets", x.flagged_facets}};
    if (x.mismatch)
        j["mismatch"] = json{{"predicted", x.mismatch->first}, {"actual", x.mismatch->second}};
    else
        j["mismatch"] = nullptr;
}

void from_json(const json& j, Verdict& x) {
    x.pass = j.at("pass").get<bool>();
    x.reasons = j.at("reasons").get<std::vector<std::string>>();
    x.suggestions = j.at("suggestions").get<std::vector<std::string>>();
    x.flagged_facets = j.value("flagged_facets", FacetSet{});
    if (j.contains("mismatch") && !j["mismatch"].is_null())
        x.mismatch = std::make_pair(j["mismatch"].at("predicted").get<Action>(), j["mismatch"].at("actual").get<Action>());
    else
        x.mismatch.reset();
}

void to_json(json& j, const ReflectResult& x) {
    j = json{{"merged", x.merged},
             {"duplicates_removed", x.duplicates_removed},
             {"conflicts_resolved", x.conflicts_resolved},
             {"user_queries", x.user_queries}};
}

void from_json(const json& j, ReflectResult& x) {
    x.merged = j.at("merged").get<Personality>();
    x.duplicates_removed = j.at("duplicates_removed").get<std::size_t>();
    x.conflicts_resolved = j.at("conflicts_resolved").get<std::size_t>();
    x.user_queries = j.at("user_queries").get<std::vector<std::string>>();
}

} // namespace rah
