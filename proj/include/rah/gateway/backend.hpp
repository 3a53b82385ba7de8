#pragma once

#include "rah/gateway/request.hpp"
#include "rah/gateway/world.hpp"

#include <memory>
#include <string>

namespace rah {

/// Every agent call goes through one of these.
class Backend {
public:
    virtual ~Backend() = default;
    virtual AgentResponse complete(const AgentRequest& req) = 0;
    /// Stable string that distinguishes backends whose answers may differ.
    virtual std::string identity() const = 0;
};

/// Deterministic rule-based stand-in for the LLM over a SyntheticWorld.
///
/// Perceive  description := title, attributes := ground-truth tags.
/// Learn     polarity-matched candidates := attributes minus critique flags,
///           one entry per facet.
/// Act       score := |tags ∩ likes| − |tags ∩ dislikes|; Like iff score > 0.
/// Critic    pass iff predicted == actual; otherwise flags the facets that
///           pushed toward the wrong sign.
/// Reflect   union-merge by (polarity, statement); facets under both
///           polarities are removed from both and turned into a user query.
class OracleBackend final : public Backend {
public:
    explicit OracleBackend(std::shared_ptr<const SyntheticWorld> world);

    AgentResponse complete(const AgentRequest& req) override;
    std::string identity() const override { return identity_; }

    const SyntheticWorld& world() const noexcept { return *world_; }

private:
    std::shared_ptr<const SyntheticWorld> world_;
    std::string identity_;
};

/// Oracle scoring rule exposed for callers and tests.
int oracle_act_score(const FacetSet& tags, const Personality& p);

/// Reflect merge used by the oracle backend.
ReflectResult oracle_reflect(const Personality& existing, const CandidateTraits& fresh);

} // namespace rah
