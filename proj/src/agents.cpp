#include "rah/agents.hpp"

namespace rah {

namespace {

template <class T>
T expect(AgentResponse resp, AgentKind kind) {
    if (auto* r = std::get_if<T>(&resp.result)) return std::move(*r);
    throw MalformedResponse("backend answered a " + std::string(to_string(kind)) + " request with a " +
                            std::string(to_string(resp.kind())) + " result");
}

void require_text(const std::string& s, const char* what) {
    if (s.empty()) throw MalformedResponse(std::string("agent output lacks ") + what);
}

} // namespace

PerceivedItem perceive(const Item& item, Backend& backend, const DecodeParams& decode) {
    if (item.title.empty()) throw ValidationError("item " + item.id + " has no title");
    auto p = expect<PerceivedItem>(backend.complete({PerceiveInput{item}, decode}), AgentKind::Perceive);
    if (p.item != item.id) throw MalformedResponse("perceive answered for item " + p.item + " instead of " + item.id);
    if (p.attributes.empty()) throw ValidationError("perceive produced no attributes for item " + item.id);
    return p;
}

CandidateTraits learn(const PerceivedItem& perceived, const Interaction& interaction, const Personality& personality,
                      const std::optional<Verdict>& critique, Backend& backend, const DecodeParams& decode) {
    validate(interaction);
    if (interaction.item != perceived.item) throw ValidationError("interaction " + interaction.id + " is not about item " + perceived.item);
    if (critique && critique->pass) throw ValidationError("learn critique must be a failing verdict");
    auto c = expect<CandidateTraits>(
        backend.complete({LearnInput{perceived, interaction, personality, critique}, decode}), AgentKind::Learn);
    require_text(c.why_like, "why_like");
    require_text(c.why_dislike, "why_dislike");
    for (auto* list : {&c.new_likes, &c.new_dislikes}) {
        const Action expected = list == &c.new_likes ? Action::Like : Action::Dislike;
        for (auto& e : *list) {
            if (e.polarity != expected) throw MalformedResponse("learn put a trait under the wrong polarity");
            e.provenance = {interaction.id};
            validate(e);
        }
    }
    return c;
}

ActOutcome act(const PerceivedItem& perceived, const Personality& personality, Backend& backend, const DecodeParams& decode) {
    auto o = expect<ActOutcome>(backend.complete({ActInput{perceived, personality}, decode}), AgentKind::Act);
    require_text(o.hypothesized_reasons, "hypothesized reasons");
    require_text(o.perception_analysis, "perception analysis");
    require_text(o.simulated_comment, "simulated comment");
    return o;
}

Verdict critic(const PerceivedItem& perceived, const Personality& personality, const ActOutcome& outcome, Action actual,
               Backend& backend, const DecodeParams& decode) {
    auto v = expect<Verdict>(backend.complete({CriticInput{perceived, personality, outcome, actual}, decode}),
                             AgentKind::Critic);
    v.pass = outcome.predicted == actual;
    if (v.pass) {
        v.mismatch.reset();
        v.flagged_facets.clear();
        return v;
    }
    v.mismatch = std::make_pair(outcome.predicted, actual);
    if (v.reasons.empty())
        v.reasons.push_back("predicted " + std::string(to_string(outcome.predicted)) + " but the user chose " +
                            std::string(to_string(actual)));
    return v;
}

ReflectResult reflect(const Personality& existing, const CandidateTraits& fresh, Backend& backend, const DecodeParams& decode) {
    for (const auto* list : {&fresh.new_likes, &fresh.new_dislikes})
        for (const auto& e : *list) validate(e);
    auto r = expect<ReflectResult>(backend.complete({ReflectInput{existing, fresh}, decode}), AgentKind::Reflect);
    if (r.merged.user != existing.user) throw MalformedResponse("reflect returned a personality for another user");
    for (const auto& e : r.merged.entries) validate(e);
    if (!satisfies_reflect_invariants(r.merged)) {
        auto repaired = oracle_reflect(r.merged, {});
        r.merged = std::move(repaired.merged);
        r.duplicates_removed += repaired.duplicates_removed;
        r.conflicts_resolved += repaired.conflicts_resolved;
        r.user_queries.insert(r.user_queries.end(), repaired.user_queries.begin(), repaired.user_queries.end());
    }
    return r;
}

} // namespace rah
