#include "rah/loop.hpp"
#include "rah/rng.hpp"

#include <algorithm>

namespace rah {

bool IntentRules::is_sensitive(const Item& item) const {
    return std::any_of(item.tags.begin(), item.tags.end(), [&](const auto& t) { return sensitive.contains(t); });
}

std::string_view to_string(Forward f) noexcept {
    switch (f) {
    case Forward::PassToUser: return "pass_to_user";
    case Forward::PassAndObserve: return "pass_and_observe";
    case Forward::ProxyDislike: return "proxy_dislike";
    }
    return "?";
}

Forward ForwardDecision::at(const ItemId& id) const {
    for (const auto& [item, f] : decisions)
        if (item == id) return f;
    throw LookupError("no forward decision for item " + id);
}

ForwardDecision filter_recommendations(const UserId& user, const Personality& personality, const IntentRules& rules,
                                       const std::vector<Item>& candidates, Backend& backend, const DecodeParams& decode) {
    ForwardDecision out;
    for (const auto& item : candidates) {
        const auto perceived = perceive(item, backend, decode);
        const bool excluded = std::any_of(perceived.attributes.begin(), perceived.attributes.end(),
                                          [&](const auto& a) { return rules.exclude.contains(a); }) ||
                              std::any_of(item.tags.begin(), item.tags.end(),
                                          [&](const auto& a) { return rules.exclude.contains(a); });
        Forward f;
        int score;
        if (excluded) {
            f = Forward::ProxyDislike;
            score = -1;
        } else {
            const auto o = act(perceived, personality, backend, decode);
            if (o.uncertain) {
                f = Forward::PassAndObserve;
                score = 0;
            } else if (o.predicted == Action::Like) {
                f = Forward::PassToUser;
                score = 1;
            } else {
                f = Forward::ProxyDislike;
                score = -1;
            }
        }
        out.decisions.emplace_back(item.id, f);
        out.scores.push_back(score);
        if (f == Forward::ProxyDislike) {
            Interaction x;
            x.id = proxy_interaction_id(user, item.id);
            x.user = user;
            x.item = item.id;
            x.action = Action::Dislike;
            x.source = Source::AssistantProxy;
            out.proxy_feedback.push_back(std::move(x));
        }
    }
    return out;
}

std::string_view to_string(ObfuscationStrategy s) noexcept {
    return s == ObfuscationStrategy::Psychologist ? "psychologist" : "shared_account";
}

ObfuscationStrategy obfuscation_strategy_from_string(std::string_view s) {
    if (s == "psychologist") return ObfuscationStrategy::Psychologist;
    if (s == "shared_account") return ObfuscationStrategy::SharedAccount;
    throw ConfigError("unknown obfuscation strategy '" + std::string(s) + "'");
}

bool FilterRules::removes(const Item& item) const {
    if (extra_items.contains(item.id)) return true;
    auto touches = [&](const FacetSet& s) {
        return std::any_of(item.tags.begin(), item.tags.end(), [&](const auto& t) { return s.contains(t); });
    };
    return touches(extra_like_facets) && !touches(real_like_facets);
}

std::vector<Item> FilterRules::apply(const std::vector<Item>& items) const {
    std::vector<Item> out;
    std::copy_if(items.begin(), items.end(), std::back_inserter(out), [&](const Item& i) { return !removes(i); });
    return out;
}

ObfuscationPlan obfuscate(const UserId& user, const Interaction& trigger, ObfuscationStrategy strategy,
                          const Catalog& catalog, const std::vector<Interaction>& history, const IntentRules& rules,
                          std::uint64_t seed, const ObfuscationParams& params) {
    if (trigger.user != user) throw ValidationError("trigger " + trigger.id + " does not belong to " + user);
    const auto& trigger_item = catalog.at(trigger.item);
    if (!rules.is_sensitive(trigger_item))
        throw ValidationError("trigger item " + trigger_item.id + " is not flagged sensitive");

    std::set<InteractionId> real_ids{trigger.id};
    std::set<ItemId> touched{trigger.item};
    FacetSet real_like_facets;
    if (trigger.action == Action::Like) real_like_facets = trigger_item.tags;
    for (const auto& x : history) {
        if (x.source == Source::Obfuscation) throw ValidationError("history must not contain obfuscation feedback");
        real_ids.insert(x.id);
        touched.insert(x.item);
        if (x.action == Action::Like)
            if (const auto* it = catalog.find(x.item)) real_like_facets.insert(it->tags.begin(), it->tags.end());
    }

    std::vector<const Item*> eligible;
    if (strategy == ObfuscationStrategy::Psychologist) {
        // Topical facets of the trigger: whatever is not itself sensitive.
        FacetSet topical;
        for (const auto& t : trigger_item.tags)
            if (!rules.sensitive.contains(t)) topical.insert(t);
        for (const auto& it : catalog.items()) {
            if (touched.contains(it.id) || !it.tags.contains(params.professional_facet) || rules.is_sensitive(it)) continue;
            if (std::any_of(it.tags.begin(), it.tags.end(), [&](const auto& t) { return topical.contains(t); }))
                eligible.push_back(&it);
        }
    } else {
        for (const auto& it : catalog.items()) {
            if (touched.contains(it.id) || rules.is_sensitive(it)) continue;
            if (std::none_of(it.tags.begin(), it.tags.end(), [&](const auto& t) { return real_like_facets.contains(t); }))
                eligible.push_back(&it);
        }
    }
    if (eligible.empty())
        throw ValidationError(std::string(to_string(strategy)) + " obfuscation found no eligible items for user " + user);

    Rng rng(derive_seed(derive_seed(seed, "obfuscate:" + std::string(to_string(strategy))), user));
    rng.shuffle(eligible.begin(), eligible.end());
    const std::size_t n = std::min(eligible.size(),
                                   strategy == ObfuscationStrategy::Psychologist ? params.psychologist_k : params.shared_account_m);

    ObfuscationPlan plan;
    plan.strategy = strategy;
    plan.filter_rules.real_like_facets = real_like_facets;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& it = *eligible[i];
        Interaction x;
        x.id = "obf:" + std::string(to_string(strategy)) + ":" + user + ":" + it.id;
        if (real_ids.contains(x.id)) throw ValidationError("obfuscation id collides with a real interaction: " + x.id);
        x.user = user;
        x.item = it.id;
        x.action = strategy == ObfuscationStrategy::Psychologist || rng.bernoulli(0.5) ? Action::Like : Action::Dislike;
        x.timestamp = trigger.timestamp;
        x.source = Source::Obfuscation;
        plan.filter_rules.extra_items.insert(it.id);
        if (x.action == Action::Like) plan.filter_rules.extra_like_facets.insert(it.tags.begin(), it.tags.end());
        plan.extra_feedback.push_back(std::move(x));
    }
    return plan;
}

} // namespace rah
