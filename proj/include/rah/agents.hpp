#pragma once

#include "rah/gateway/backend.hpp"

#include <optional>

namespace rah {

// The five agents. Each is a single gateway call plus validation of the
// schema-level invariants; none performs I/O directly.

PerceivedItem perceive(const Item& item, Backend& backend, const DecodeParams& decode = {});

/// `critique`, when given, must be a failing verdict. Every returned entry
/// carries exactly {interaction.id} as provenance.
CandidateTraits learn(const PerceivedItem& perceived, const Interaction& interaction, const Personality& personality,
                      const std::optional<Verdict>& critique, Backend& backend, const DecodeParams& decode = {});

/// The actual action is deliberately not a parameter.
ActOutcome act(const PerceivedItem& perceived, const Personality& personality, Backend& backend,
               const DecodeParams& decode = {});

/// pass is forced to agree with (outcome.predicted == actual).
Verdict critic(const PerceivedItem& perceived, const Personality& personality, const ActOutcome& outcome, Action actual,
               Backend& backend, const DecodeParams& decode = {});

/// Merged personality always satisfies the reflect invariants; a backend
/// answer that does not is repaired with the deterministic merge rule.
ReflectResult reflect(const Personality& existing, const CandidateTraits& fresh, Backend& backend,
                      const DecodeParams& decode = {});

} // namespace rah
