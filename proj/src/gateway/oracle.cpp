#include "rah/gateway/backend.hpp"
#include "rah/gateway/remote.hpp"

#include "rah/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace rah {

int oracle_act_score(const FacetSet& tags, const Personality& p) {
    const auto likes = facets_of(p, Action::Like);
    const auto dislikes = facets_of(p, Action::Dislike);
    int score = 0;
    for (const auto& t : tags) {
        if (likes.contains(t)) ++score;
        if (dislikes.contains(t)) --score;
    }
    return score;
}

namespace {

struct Key {
    Action polarity;
    std::string statement;
    auto operator<=>(const Key&) const = default;
};

// Inserts or merges provenance into an existing (polarity, statement) entry.
// Returns true when the entry was a duplicate.
bool upsert(std::vector<TraitEntry>& entries, std::map<Key, std::size_t>& index, TraitEntry e) {
    Key k{e.polarity, e.statement};
    if (auto it = index.find(k); it != index.end()) {
        auto& target = entries[it->second];
        target.provenance.insert(e.provenance.begin(), e.provenance.end());
        target.facets.insert(e.facets.begin(), e.facets.end());
        return true;
    }
    index.emplace(std::move(k), entries.size());
    entries.push_back(std::move(e));
    return false;
}

std::string query_for(const std::string& facet) {
    return "You have both liked and disliked items with '" + facet + "'. Do you like or dislike '" + facet + "'?";
}

std::string list_or(const FacetSet& s, const char* empty) { return s.empty() ? std::string(empty) : join(s, ", "); }

} // namespace

ReflectResult oracle_reflect(const Personality& existing, const CandidateTraits& fresh) {
    ReflectResult out;
    Personality& merged = out.merged;
    merged.user = existing.user;
    merged.clock = existing.clock;

    std::vector<TraitEntry> entries;
    std::map<Key, std::size_t> index;
    for (const auto& e : existing.entries)
        if (upsert(entries, index, e)) ++out.duplicates_removed;
    auto take_fresh = [&](const std::vector<TraitEntry>& list) {
        for (auto e : list) {
            if (index.contains(Key{e.polarity, e.statement})) {
                upsert(entries, index, std::move(e));
                ++out.duplicates_removed;
                continue;
            }
            e.created_at = merged.stamp();
            upsert(entries, index, std::move(e));
        }
    };
    take_fresh(fresh.new_likes);
    take_fresh(fresh.new_dislikes);

    FacetSet likes, dislikes;
    for (const auto& e : entries) (e.polarity == Action::Like ? likes : dislikes).insert(e.facets.begin(), e.facets.end());
    FacetSet conflicts;
    std::set_intersection(likes.begin(), likes.end(), dislikes.begin(), dislikes.end(),
                          std::inserter(conflicts, conflicts.end()));

    if (conflicts.empty()) {
        merged.entries = std::move(entries);
        return out;
    }

    // Deconstruct: entries touching a conflicting facet are split into
    // single-facet entries for whatever is left; conflicting facets go back
    // to the user as questions.
    std::vector<TraitEntry> kept;
    std::map<Key, std::size_t> kept_index;
    for (auto& e : entries) {
        const bool touches = std::any_of(e.facets.begin(), e.facets.end(), [&](const auto& f) { return conflicts.contains(f); });
        if (!touches) {
            upsert(kept, kept_index, std::move(e));
            continue;
        }
        for (const auto& f : e.facets) {
            if (conflicts.contains(f)) continue;
            upsert(kept, kept_index, TraitEntry{e.polarity, f, {f}, e.provenance, e.created_at});
        }
    }
    merged.entries = std::move(kept);
    out.conflicts_resolved = conflicts.size();
    for (const auto& c : conflicts) out.user_queries.push_back(query_for(c));
    return out;
}

namespace {

std::string world_fingerprint(const SyntheticWorld& w) {
    std::ostringstream os;
    write_world(os, w);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(stable_hash(os.str())));
    return buf;
}

} // namespace

OracleBackend::OracleBackend(std::shared_ptr<const SyntheticWorld> world) : world_(std::move(world)) {
    if (!world_) throw ConfigError("oracle backend needs a world");
    identity_ = "oracle:" + world_fingerprint(*world_);
}

AgentResponse OracleBackend::complete(const AgentRequest& req) {
    const auto& w = *world_;
    AgentResponse resp;
    resp.backend = BackendKind::Oracle;

    auto require_item = [&](const ItemId& id) -> const Item& { return w.catalog.at(id); };
    auto require_user = [&](const UserId& id) { (void)w.user(id); };

    resp.result = std::visit(
        [&](const auto& in) -> AgentResult {
            using T = std::decay_t<decltype(in)>;
            if constexpr (std::is_same_v<T, PerceiveInput>) {
                const auto& truth = require_item(in.item.id);
                return PerceivedItem{truth.id, truth.title, truth.domain, truth.title, truth.tags};
            } else if constexpr (std::is_same_v<T, LearnInput>) {
                require_item(in.item.item);
                require_user(in.interaction.user);
                const FacetSet flagged = in.critique ? in.critique->flagged_facets : FacetSet{};
                CandidateTraits c;
                FacetSet kept;
                for (const auto& f : in.item.attributes) {
                    if (flagged.contains(f)) continue;
                    kept.insert(f);
                    TraitEntry e{in.interaction.action, f, {f}, {in.interaction.id}, 0};
                    (in.interaction.action == Action::Like ? c.new_likes : c.new_dislikes).push_back(std::move(e));
                }
                c.why_like = "Some people may like it for: " + list_or(in.item.attributes, "nothing in particular");
                c.why_dislike = "Some people may dislike it for: " + list_or(in.item.attributes, "nothing in particular");
                if (!flagged.empty()) c.why_like += " (set aside after critique: " + join(flagged, ", ") + ")";
                return c;
            } else if constexpr (std::is_same_v<T, ActInput>) {
                require_item(in.item.item);
                require_user(in.personality.user);
                const auto likes = facets_of(in.personality, Action::Like);
                const auto dislikes = facets_of(in.personality, Action::Dislike);
                FacetSet pro, con;
                for (const auto& t : in.item.attributes) {
                    if (likes.contains(t)) pro.insert(t);
                    if (dislikes.contains(t)) con.insert(t);
                }
                const int score = static_cast<int>(pro.size()) - static_cast<int>(con.size());
                ActOutcome o;
                o.hypothesized_reasons = "might like for: " + list_or(pro, "none") + "; might dislike for: " + list_or(con, "none");
                o.perception_analysis = "net preference score " + std::to_string(score);
                o.predicted = score > 0 ? Action::Like : Action::Dislike;
                o.uncertain = score == 0;
                o.simulated_comment = o.predicted == Action::Like ? "I enjoyed this one." : "Not for me.";
                return o;
            } else if constexpr (std::is_same_v<T, CriticInput>) {
                require_item(in.item.item);
                require_user(in.personality.user);
                Verdict v;
                v.pass = in.outcome.predicted == in.actual;
                if (v.pass) return v;
                v.mismatch = std::make_pair(in.outcome.predicted, in.actual);
                const auto wrong_side = facets_of(in.personality, in.outcome.predicted == Action::Like ? Action::Like : Action::Dislike);
                for (const auto& t : in.item.attributes)
                    if (wrong_side.contains(t)) v.flagged_facets.insert(t);
                v.reasons.push_back("predicted " + std::string(to_string(in.outcome.predicted)) + " but the user chose " +
                                    std::string(to_string(in.actual)));
                if (v.flagged_facets.empty()) {
                    v.reasons.push_back("no learned facet supports " + std::string(to_string(in.actual)));
                    v.suggestions.push_back("learn the facets of this item");
                }
                for (const auto& f : v.flagged_facets) {
                    v.reasons.push_back("facet '" + f + "' pushed toward " + std::string(to_string(in.outcome.predicted)));
                    v.suggestions.push_back("remove or flip '" + f + "'");
                }
                return v;
            } else {
                require_user(in.existing.user);
                return oracle_reflect(in.existing, in.fresh);
            }
        },
        req.payload);
    resp.raw_text = format_response(resp.result);
    return resp;
}

} // namespace rah
