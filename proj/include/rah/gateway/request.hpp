#pragma once

#include "rah/agent_types.hpp"

#include <string>
#include <string_view>
#include <variant>

namespace rah {

enum class AgentKind : std::uint8_t { Perceive, Learn, Act, Critic, Reflect };

std::string_view to_string(AgentKind k) noexcept;
AgentKind agent_kind_from_string(std::string_view s);

struct DecodeParams {
    double temperature = 0.0;
    int max_tokens = 512;

    bool operator==(const DecodeParams&) const = default;
};

struct PerceiveInput {
    Item item;
};

struct LearnInput {
    PerceivedItem item;
    Interaction interaction;
    Personality personality;
    std::optional<Verdict> critique;
};

struct ActInput {
    PerceivedItem item;
    Personality personality;
};

struct CriticInput {
    PerceivedItem item;
    Personality personality;
    ActOutcome outcome;
    Action actual = Action::Dislike;
};

struct ReflectInput {
    Personality existing;
    CandidateTraits fresh;
};

// Alternative index matches AgentKind.
using AgentPayload = std::variant<PerceiveInput, LearnInput, ActInput, CriticInput, ReflectInput>;
using AgentResult = std::variant<PerceivedItem, CandidateTraits, ActOutcome, Verdict, ReflectResult>;

struct AgentRequest {
    AgentPayload payload;
    DecodeParams decode;

    AgentKind kind() const noexcept { return static_cast<AgentKind>(payload.index()); }
};

enum class BackendKind : std::uint8_t { Remote, Oracle };

std::string_view to_string(BackendKind b) noexcept;

struct AgentResponse {
    AgentResult result;
    std::string raw_text;
    BackendKind backend = BackendKind::Oracle;
    int retry_count = 0;

    AgentKind kind() const noexcept { return static_cast<AgentKind>(result.index()); }
};

/// Canonical JSON of a request; the cache key is a digest of this plus the
/// backend identity.
nlohmann::json request_to_json(const AgentRequest& r);
nlohmann::json response_to_json(const AgentResponse& r);
AgentResponse response_from_json(const nlohmann::json& j);

} // namespace rah
