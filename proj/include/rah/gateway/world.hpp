#pragma once

#include "rah/core.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>

namespace rah {

enum class UserRole : std::uint8_t { Cohort, Background };

/// Ground-truth taste of a synthetic user.
struct SyntheticUser {
    FacetSet liked_tags;
    FacetSet disliked_tags;
    double noise_rate = 0.0;
    UserRole role = UserRole::Cohort;

    bool operator==(const SyntheticUser&) const = default;
};

/// Desk-scale stand-in for a real catalog plus real people: items with known
/// tags and users with known tag preferences.
struct SyntheticWorld {
    Catalog catalog;
    std::map<UserId, SyntheticUser> users;
    std::uint64_t seed = 0;

    bool operator==(const SyntheticWorld&) const = default;

    const SyntheticUser& user(const UserId& id) const;
    std::vector<UserId> users_with_role(UserRole role) const;
};

void validate(const SyntheticWorld& w);

/// Like iff more liked than disliked tags; flipped with probability
/// noise_rate. The flip draw is a pure function of (seed, user, item), so the
/// answer does not depend on call order.
Action synthetic_human_action(const SyntheticWorld& w, const UserId& user, const Item& item);

/// Noise-free part of the rule: |tags ∩ liked| − |tags ∩ disliked|.
int synthetic_preference_score(const SyntheticUser& u, const Item& item);

// Versioned text encoding ("rah-world v1"). Output is byte-stable for equal worlds.
void write_world(std::ostream& os, const SyntheticWorld& w);
SyntheticWorld read_world(std::istream& is);
void save_world(const std::filesystem::path& path, const SyntheticWorld& w);
SyntheticWorld load_world(const std::filesystem::path& path);

} // namespace rah
