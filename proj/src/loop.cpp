#include "rah/loop.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace rah {

LoopConfig LoopConfig::variant(std::string_view name) {
    LoopConfig c;
    if (name == "L") {
        c.use_critic = false, c.use_reflect = false;
    } else if (name == "L+R") {
        c.use_critic = false, c.use_reflect = true;
    } else if (name == "L+C") {
        c.use_critic = true, c.use_reflect = false;
    } else if (name == "L+C+R") {
        c.use_critic = true, c.use_reflect = true;
    } else {
        throw ConfigError("unknown loop variant '" + std::string(name) + "' (expected L, L+R, L+C or L+C+R)");
    }
    return c;
}

std::string LoopConfig::name() const {
    std::string n = "L";
    if (use_critic) n += "+C";
    if (use_reflect) n += "+R";
    return n;
}

void LoopConfig::validate() const {
    if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
}

namespace {

Personality append(const Personality& p, const CandidateTraits& c) {
    Personality out = p;
    for (const auto* list : {&c.new_likes, &c.new_dislikes})
        for (auto e : *list) {
            e.created_at = out.stamp();
            out.entries.push_back(std::move(e));
        }
    return out;
}

} // namespace

std::pair<Personality, LoopTrace> learn_one(const UserId& user, const Item& item, const Interaction& interaction,
                                            const Personality& personality, const LoopConfig& config, Backend& backend) {
    config.validate();
    if (interaction.user != user) throw ValidationError("interaction " + interaction.id + " does not belong to " + user);
    if (interaction.item != item.id) throw ValidationError("interaction " + interaction.id + " is not about item " + item.id);
    if (!personality.user.empty() && personality.user != user)
        throw ValidationError("personality belongs to " + personality.user + ", not " + user);
    Personality base = personality;
    base.user = user;

    const auto perceived = perceive(item, backend, config.decode);

    // The merged personality for a candidate, remembered so the accepted
    // candidate is not reflected twice.
    std::optional<ReflectResult> last_reflect;
    auto merge = [&](const CandidateTraits& c) {
        if (!config.use_reflect) return append(base, c);
        last_reflect = reflect(base, c, backend, config.decode);
        return last_reflect->merged;
    };

    LoopTrace trace;
    Personality result;
    if (!config.use_critic) {
        trace.accepted = learn(perceived, interaction, base, std::nullopt, backend, config.decode);
        result = merge(trace.accepted);
    } else {
        std::optional<Verdict> critique;
        for (int i = 0; i < config.max_iters; ++i) {
            auto candidate = learn(perceived, interaction, base, critique, backend, config.decode);
            auto trial = merge(candidate);
            auto outcome = act(perceived, trial, backend, config.decode);
            auto verdict = critic(perceived, trial, outcome, interaction.action, backend, config.decode);
            const bool pass = verdict.pass;
            trace.iterations.push_back({std::move(candidate), std::move(outcome), verdict});
            result = std::move(trial);
            if (pass) {
                trace.converged = true;
                break;
            }
            critique = std::move(verdict);
        }
        trace.accepted = trace.iterations.back().candidate;
    }
    if (last_reflect) trace.user_queries = last_reflect->user_queries;
    return {std::move(result), std::move(trace)};
}

Personality learn_set(const UserId& user, std::vector<Interaction> interactions, const Catalog& catalog,
                      const LoopConfig& config, Backend& backend, LearnSetStats* stats) {
    for (const auto& x : interactions)
        if (x.user != user) throw ValidationError("interaction " + x.id + " does not belong to " + user);
    std::stable_sort(interactions.begin(), interactions.end(), [](const Interaction& a, const Interaction& b) {
        return std::tie(a.timestamp, a.id) < std::tie(b.timestamp, b.id);
    });
    LearnSetStats local;
    Personality p;
    p.user = user;
    for (const auto& x : interactions) {
        ++local.attempted;
        try {
            auto [next, trace] = learn_one(user, catalog.at(x.item), x, p, config, backend);
            p = std::move(next);
            local.converged += trace.converged ? 1 : 0;
            local.iterations += trace.iterations.size();
            local.user_queries.insert(local.user_queries.end(), trace.user_queries.begin(), trace.user_queries.end());
        } catch (const Error& e) {
            ++local.failed;
            spdlog::warn("learn: skipping interaction {} of user {}: {}", x.id, user, e.what());
        }
    }
    if (local.failed * 2 > local.attempted)
        throw RunError("learn: " + std::to_string(local.failed) + " of " + std::to_string(local.attempted) +
                       " interactions failed for user " + user);
    if (stats) *stats = std::move(local);
    return p;
}

std::string proxy_interaction_id(const UserId& user, const ItemId& item) { return "proxy:" + user + ":" + item; }

std::vector<Interaction> proxy_actions(const UserId& user, const Personality& personality, const std::vector<Item>& items,
                                       Backend& backend, const DecodeParams& decode) {
    std::vector<Interaction> out;
    out.reserve(items.size());
    for (const auto& item : items) {
        try {
            const auto outcome = act(perceive(item, backend, decode), personality, backend, decode);
            Interaction x;
            x.id = proxy_interaction_id(user, item.id);
            x.user = user;
            x.item = item.id;
            x.action = outcome.predicted;
            x.source = Source::AssistantProxy;
            out.push_back(std::move(x));
        } catch (const Error& e) {
            spdlog::warn("proxy: skipping item {} for user {}: {}", item.id, user, e.what());
        }
    }
    return out;
}

} // namespace rah
