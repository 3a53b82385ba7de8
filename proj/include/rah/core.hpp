#pragma once

#include "rah/error.hpp"

#include <json.hpp>

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rah {

using UserId = std::string;
using ItemId = std::string;
using InteractionId = std::string;
using FacetSet = std::set<std::string>;

/// Catalog domain. The three review domains are built in; any other
/// nonempty lowercase token is accepted as an extension.
class DomainTag {
public:
    DomainTag() = default;
    explicit DomainTag(std::string name);

    static DomainTag movie() { return DomainTag("movie"); }
    static DomainTag book() { return DomainTag("book"); }
    static DomainTag game() { return DomainTag("game"); }

    const std::string& name() const noexcept { return name_; }
    bool is_builtin() const noexcept;

    auto operator<=>(const DomainTag&) const = default;

private:
    std::string name_{"movie"};
};

enum class Action : std::uint8_t { Dislike = 0, Like = 1 };

std::string_view to_string(Action a) noexcept;
Action action_from_string(std::string_view s);
constexpr Action flip(Action a) noexcept { return a == Action::Like ? Action::Dislike : Action::Like; }

enum class Source : std::uint8_t { Human, AssistantProxy, Obfuscation, RandomBaseline };

std::string_view to_string(Source s) noexcept;
Source source_from_string(std::string_view s);

struct Item {
    ItemId id;
    DomainTag domain;
    std::string title;
    std::string description;
    FacetSet tags;

    bool operator==(const Item&) const = default;
};

struct Interaction {
    InteractionId id;
    UserId user;
    ItemId item;
    Action action = Action::Dislike;
    std::optional<int> rating;
    std::optional<std::string> comment;
    std::int64_t timestamp = 0;
    Source source = Source::Human;

    bool operator==(const Interaction&) const = default;
};

/// Ratings 4-5 map to Like, 1-2 to Dislike; 3 carries no polarity.
/// Throws ValidationError outside [1,5].
std::optional<Action> action_from_rating(int rating);

void validate(const Interaction& x);

struct TraitEntry {
    Action polarity = Action::Like;
    std::string statement;
    FacetSet facets;
    std::set<InteractionId> provenance;
    std::uint64_t created_at = 0;

    bool operator==(const TraitEntry&) const = default;
};

void validate(const TraitEntry& e);

/// A user's library of likes and dislikes. `clock` is the monotonic counter
/// that stamps created_at; it is part of the value so reloads keep counting.
struct Personality {
    UserId user;
    std::vector<TraitEntry> entries;
    std::uint64_t clock = 0;

    bool operator==(const Personality&) const = default;

    std::uint64_t stamp() { return ++clock; }
    bool empty() const noexcept { return entries.empty(); }
};

FacetSet facets_of(const Personality& p, Action polarity);

/// No two entries share (polarity, statement).
bool has_no_duplicate_entries(const Personality& p);
/// No facet appears under both polarities.
bool has_no_dual_polarity_facet(const Personality& p);
inline bool satisfies_reflect_invariants(const Personality& p) {
    return has_no_duplicate_entries(p) && has_no_dual_polarity_facet(p);
}

enum class SplitSet : std::uint8_t { Learn, Proxy, Unseen };

std::string_view to_string(SplitSet s) noexcept;
SplitSet split_set_from_string(std::string_view s);

using SplitAssignment = std::map<InteractionId, SplitSet>;

/// Items indexed by id; ids are unique and tags are a set by construction.
class Catalog {
public:
    Catalog() = default;
    explicit Catalog(std::vector<Item> items);

    void add(Item item);
    const Item& at(const ItemId& id) const;
    const Item* find(const ItemId& id) const;
    bool contains(const ItemId& id) const { return index_.contains(id); }
    std::size_t index_of(const ItemId& id) const;

    const std::vector<Item>& items() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }
    std::vector<DomainTag> domains() const;

    bool operator==(const Catalog& o) const { return items_ == o.items_; }

private:
    std::vector<Item> items_;
    std::unordered_map<ItemId, std::size_t> index_;
};

std::string join(const FacetSet& s, std::string_view sep = ",");
FacetSet split_facets(std::string_view s, char sep = ',');

// JSON encodings. These are the in-memory canonical forms used for caching
// and round-trip tests; on-disk text formats live with their modules.
void to_json(nlohmann::json& j, const DomainTag& d);
void from_json(const nlohmann::json& j, DomainTag& d);
void to_json(nlohmann::json& j, Action a);
void from_json(const nlohmann::json& j, Action& a);
void to_json(nlohmann::json& j, Source s);
void from_json(const nlohmann::json& j, Source& s);
void to_json(nlohmann::json& j, const Item& x);
void from_json(const nlohmann::json& j, Item& x);
void to_json(nlohmann::json& j, const Interaction& x);
void from_json(const nlohmann::json& j, Interaction& x);
void to_json(nlohmann::json& j, const TraitEntry& x);
void from_json(const nlohmann::json& j, TraitEntry& x);
void to_json(nlohmann::json& j, const Personality& x);
void from_json(const nlohmann::json& j, Personality& x);
void to_json(nlohmann::json& j, SplitSet s);
void from_json(const nlohmann::json& j, SplitSet& s);

} // namespace rah
