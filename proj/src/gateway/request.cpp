#include "rah/gateway/request.hpp"

namespace rah {

using nlohmann::json;

std::string_view to_string(AgentKind k) noexcept {
    switch (k) {
    case AgentKind::Perceive: return "perceive";
    case AgentKind::Learn: return "learn";
    case AgentKind::Act: return "act";
    case AgentKind::Critic: return "critic";
    case AgentKind::Reflect: return "reflect";
    }
    return "perceive";
}

AgentKind agent_kind_from_string(std::string_view s) {
    for (auto k : {AgentKind::Perceive, AgentKind::Learn, AgentKind::Act, AgentKind::Critic, AgentKind::Reflect})
        if (to_string(k) == s) return k;
    throw ValidationError("unknown agent kind '" + std::string(s) + "'");
}

std::string_view to_string(BackendKind b) noexcept { return b == BackendKind::Remote ? "remote" : "oracle"; }

namespace {

json payload_json(const AgentPayload& p) {
    return std::visit(
        [](const auto& x) -> json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, PerceiveInput>) {
                return json{{"item", x.item}};
            } else if constexpr (std::is_same_v<T, LearnInput>) {
                return json{{"item", x.item},
                            {"interaction", x.interaction},
                            {"personality", x.personality},
                            {"critique", x.critique ? json(*x.critique) : json(nullptr)}};
            } else if constexpr (std::is_same_v<T, ActInput>) {
                return json{{"item", x.item}, {"personality", x.personality}};
            } else if constexpr (std::is_same_v<T, CriticInput>) {
                return json{{"item", x.item}, {"personality", x.personality}, {"outcome", x.outcome}, {"actual", x.actual}};
            } else {
                return json{{"existing", x.existing}, {"fresh", x.fresh}};
            }
        },
        p);
}

} // namespace

json request_to_json(const AgentRequest& r) {
    return json{{"kind", std::string(to_string(r.kind()))},
                {"payload", payload_json(r.payload)},
                {"decode", json{{"temperature", r.decode.temperature}, {"max_tokens", r.decode.max_tokens}}}};
}

json response_to_json(const AgentResponse& r) {
    json result = std::visit([](const auto& x) { return json(x); }, r.result);
    return json{{"kind", std::string(to_string(r.kind()))},
                {"result", std::move(result)},
                {"raw_text", r.raw_text},
                {"backend", std::string(to_string(r.backend))},
                {"retry_count", r.retry_count}};
}

AgentResponse response_from_json(const json& j) {
    AgentResponse r;
    const auto kind = agent_kind_from_string(j.at("kind").get<std::string>());
    const auto& res = j.at("result");
    switch (kind) {
    case AgentKind::Perceive: r.result = res.get<PerceivedItem>(); break;
    case AgentKind::Learn: r.result = res.get<CandidateTraits>(); break;
    case AgentKind::Act: r.result = res.get<ActOutcome>(); break;
    case AgentKind::Critic: r.result = res.get<Verdict>(); break;
    case AgentKind::Reflect: r.result = res.get<ReflectResult>(); break;
    }
    r.raw_text = j.at("raw_text").get<std::string>();
    const auto b = j.at("backend").get<std::string>();
    if (b == "remote")
        r.backend = BackendKind::Remote;
    else if (b == "oracle")
        r.backend = BackendKind::Oracle;
    else
        throw DecodeError("unknown backend '" + b + "'");
    r.retry_count = j.value("retry_count", 0);
    return r;
}

} // namespace rah
