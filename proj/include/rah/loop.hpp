#pragma once

#include "rah/agents.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace rah {

/// (use_critic, use_reflect): L = (no, no), L+R = (no, yes), L+C = (yes, no), L+C+R = (yes, yes).
struct LoopConfig {
    int max_iters = 3;
    bool use_critic = true;
    bool use_reflect = true;
    DecodeParams decode;

    static LoopConfig variant(std::string_view name);
    std::string name() const;
    void validate() const;
};

inline const std::vector<std::string>& loop_variants() {
    static const std::vector<std::string> v{"L", "L+R", "L+C", "L+C+R"};
    return v;
}

struct LoopIteration {
    CandidateTraits candidate;
    ActOutcome outcome;
    Verdict verdict;
};

/// Without a critic `iterations` stays empty and `converged` is false.
struct LoopTrace {
    std::vector<LoopIteration> iterations;
    CandidateTraits accepted;
    bool converged = false;
    std::vector<std::string> user_queries;
};

/// One interaction through perceive → (learn → act → critic)* → merge.
/// Gateway errors propagate; the caller's personality is never modified.
std::pair<Personality, LoopTrace> learn_one(const UserId& user, const Item& item, const Interaction& interaction,
                                            const Personality& personality, const LoopConfig& config, Backend& backend);

struct LearnSetStats {
    std::size_t attempted = 0;
    std::size_t failed = 0;
    std::size_t converged = 0;
    std::size_t iterations = 0;
    std::vector<std::string> user_queries;
};

/// Folds learn_one over the interactions in timestamp order (ties by id).
/// Failing interactions are logged and skipped; more than half failing is a RunError.
Personality learn_set(const UserId& user, std::vector<Interaction> interactions, const Catalog& catalog,
                      const LoopConfig& config, Backend& backend, LearnSetStats* stats = nullptr);

/// One AssistantProxy interaction per item, action = act(...).predicted.
/// Items whose gateway call fails are skipped.
std::vector<Interaction> proxy_actions(const UserId& user, const Personality& personality, const std::vector<Item>& items,
                                       Backend& backend, const DecodeParams& decode = {});

std::string proxy_interaction_id(const UserId& user, const ItemId& item);

// ---------------------------------------------------------------------------
// User control

/// Explicit user instructions. `exclude` facets are never shown; `sensitive`
/// facets mark interactions the user wants masked.
struct IntentRules {
    FacetSet exclude;
    FacetSet sensitive;

    bool is_sensitive(const Item& item) const;
};

enum class Forward : std::uint8_t { PassToUser, PassAndObserve, ProxyDislike };
std::string_view to_string(Forward f) noexcept;

struct ForwardDecision {
    std::vector<std::pair<ItemId, Forward>> decisions; // same order as the candidates
    std::vector<Interaction> proxy_feedback;           // one Dislike per ProxyDislike
    std::vector<int> scores;                            // +1 confident Like, 0 uncertain, -1 confident Dislike

    Forward at(const ItemId& id) const;
};

/// Exclusions win; otherwise a confident Like passes, an uncertain
/// prediction passes for observation and a confident Dislike is answered
/// by the assistant.
ForwardDecision filter_recommendations(const UserId& user, const Personality& personality, const IntentRules& rules,
                                       const std::vector<Item>& candidates, Backend& backend,
                                       const DecodeParams& decode = {});

enum class ObfuscationStrategy : std::uint8_t { Psychologist, SharedAccount };
std::string_view to_string(ObfuscationStrategy s) noexcept;
ObfuscationStrategy obfuscation_strategy_from_string(std::string_view s);

/// Removes recommendations that only the extra feedback explains: the extra
/// items themselves, and items sharing a facet with extra Likes but none with
/// the user's real Likes.
struct FilterRules {
    std::set<ItemId> extra_items;
    FacetSet real_like_facets;
    FacetSet extra_like_facets;

    bool removes(const Item& item) const;
    std::vector<Item> apply(const std::vector<Item>& items) const;
};

struct ObfuscationPlan {
    ObfuscationStrategy strategy = ObfuscationStrategy::Psychologist;
    std::vector<Interaction> extra_feedback;
    FilterRules filter_rules;
};

struct ObfuscationParams {
    std::size_t psychologist_k = 5;
    std::size_t shared_account_m = 10;
    std::string professional_facet = "professional";
};

/// `history` is the user's real feedback (it must contain no obfuscation).
/// The trigger must be flagged sensitive by `rules`.
ObfuscationPlan obfuscate(const UserId& user, const Interaction& trigger, ObfuscationStrategy strategy,
                          const Catalog& catalog, const std::vector<Interaction>& history, const IntentRules& rules,
                          std::uint64_t seed, const ObfuscationParams& params = {});

// ---------------------------------------------------------------------------
// Personality library files. One writer per user at a time; any number of
// concurrent readers. Saves go through a temporary file and a rename.

inline constexpr const char* kPersonalityHeader = "rah-personality v1";

void write_personality(std::ostream& os, const Personality& p);
Personality read_personality(std::istream& is);
void store_save(const Personality& p, const std::filesystem::path& path);
Personality store_load(const std::filesystem::path& path);

} // namespace rah
