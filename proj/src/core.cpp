#include "rah/core.hpp"

#include <algorithm>
#include <cctype>

namespace rah {

DomainTag::DomainTag(std::string name) : name_(std::move(name)) {
    if (name_.empty()) throw ValidationError("domain tag must be nonempty");
    for (unsigned char c : name_) {
        if (!(std::islower(c) || std::isdigit(c) || c == '-' || c == '_'))
            throw ValidationError("domain tag must be a lowercase token: '" + name_ + "'");
    }
}

bool DomainTag::is_builtin() const noexcept {
    return name_ == "movie" || name_ == "book" || name_ == "game";
}

std::string_view to_string(Action a) noexcept { return a == Action::Like ? "like" : "dislike"; }

Action action_from_string(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "like") return Action::Like;
    if (lower == "dislike") return Action::Dislike;
    throw ValidationError("unknown action '" + std::string(s) + "'");
}

std::string_view to_string(Source s) noexcept {
    switch (s) {
    case Source::Human: return "human";
    case Source::AssistantProxy: return "assistant_proxy";
    case Source::Obfuscation: return "obfuscation";
    case Source::RandomBaseline: return "random_baseline";
    }
    return "human";
}

Source source_from_string(std::string_view s) {
    if (s == "human") return Source::Human;
    if (s == "assistant_proxy") return Source::AssistantProxy;
    if (s == "obfuscation") return Source::Obfuscation;
    if (s == "random_baseline") return Source::RandomBaseline;
    throw ValidationError("unknown interaction source '" + std::string(s) + "'");
}

std::optional<Action> action_from_rating(int rating) {
    if (rating < 1 || rating > 5) throw ValidationError("rating out of range [1,5]: " + std::to_string(rating));
    if (rating >= 4) return Action::Like;
    if (rating <= 2) return Action::Dislike;
    return std::nullopt;
}

void validate(const Interaction& x) {
    if (x.id.empty()) throw ValidationError("interaction id is empty");
    if (x.user.empty() || x.item.empty()) throw ValidationError("interaction " + x.id + " lacks user or item");
    if (x.rating && (*x.rating < 1 || *x.rating > 5))
        throw ValidationError("interaction " + x.id + " rating out of range");
}

void validate(const TraitEntry& e) {
    if (e.statement.empty()) throw ValidationError("trait statement is empty");
    if (e.provenance.empty()) throw ValidationError("trait '" + e.statement + "' has no provenance");
}

FacetSet facets_of(const Personality& p, Action polarity) {
    FacetSet out;
    for (const auto& e : p.entries)
        if (e.polarity == polarity) out.insert(e.facets.begin(), e.facets.end());
    return out;
}

bool has_no_duplicate_entries(const Personality& p) {
    std::set<std::pair<Action, std::string>> seen;
    for (const auto& e : p.entries)
        if (!seen.emplace(e.polarity, e.statement).second) return false;
    return true;
}

bool has_no_dual_polarity_facet(const Personality& p) {
    const auto likes = facets_of(p, Action::Like);
    const auto dislikes = facets_of(p, Action::Dislike);
    return std::none_of(likes.begin(), likes.end(), [&](const auto& f) { return dislikes.contains(f); });
}

std::string_view to_string(SplitSet s) noexcept {
    switch (s) {
    case SplitSet::Learn: return "learn";
    case SplitSet::Proxy: return "proxy";
    case SplitSet::Unseen: return "unseen";
    }
    return "learn";
}

SplitSet split_set_from_string(std::string_view s) {
    if (s == "learn") return SplitSet::Learn;
    if (s == "proxy") return SplitSet::Proxy;
    if (s == "unseen") return SplitSet::Unseen;
    throw ValidationError("unknown split set '" + std::string(s) + "'");
}

Catalog::Catalog(std::vector<Item> items) {
    items_.reserve(items.size());
    for (auto& it : items) add(std::move(it));
}

void Catalog::add(Item item) {
    if (item.id.empty()) throw ValidationError("item id is empty");
    if (index_.contains(item.id)) throw ValidationError("duplicate item id '" + item.id + "'");
    index_.emplace(item.id, items_.size());
    items_.push_back(std::move(item));
}

const Item& Catalog::at(const ItemId& id) const {
    if (const auto* p = find(id)) return *p;
    throw LookupError("unknown item '" + id + "'");
}

const Item* Catalog::find(const ItemId& id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? nullptr : &items_[it->second];
}

std::size_t Catalog::index_of(const ItemId& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw LookupError("unknown item '" + id + "'");
    return it->second;
}

std::vector<DomainTag> Catalog::domains() const {
    std::set<DomainTag> seen;
    std::vector<DomainTag> out;
    for (const auto& it : items_)
        if (seen.insert(it.domain).second) out.push_back(it.domain);
    return out;
}

std::string join(const FacetSet& s, std::string_view sep) {
    std::string out;
    for (const auto& f : s) {
        if (!out.empty()) out += sep;
        out += f;
    }
    return out;
}

FacetSet split_facets(std::string_view s, char sep) {
    FacetSet out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find(sep, start);
        if (end == std::string_view::npos) end = s.size();
        auto tok = s.substr(start, end - start);
        while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.front()))) tok.remove_prefix(1);
        while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.back()))) tok.remove_suffix(1);
        if (!tok.empty()) out.emplace(tok);
        start = end + 1;
    }
    return out;
}

using nlohmann::json;

void to_json(json& j, const DomainTag& d) { j = d.name(); }
void from_json(const json& j, DomainTag& d) { d = DomainTag(j.get<std::string>()); }
void to_json(json& j, Action a) { j = std::string(to_string(a)); }
void from_json(const json& j, Action& a) { a = action_from_string(j.get<std::string>()); }
void to_json(json& j, Source s) { j = std::string(to_string(s)); }
void from_json(const json& j, Source& s) { s = source_from_string(j.get<std::string>()); }
void to_json(json& j, SplitSet s) { j = std::string(to_string(s)); }
void from_json(const json& j, SplitSet& s) { s = split_set_from_string(j.get<std::string>()); }

void to_json(json& j, const Item& x) {
    j = json{{"id", x.id}, {"domain", x.domain}, {"title", x.title}, {"description", x.description}, {"tags", x.tags}};
}

void from_json(const json& j, Item& x) {
    x.id = j.at("id").get<std::string>();
    x.domain = j.at("domain").get<DomainTag>();
    x.title = j.at("title").get<std::string>();
    x.description = j.value("description", std::string{});
    x.tags = j.value("tags", FacetSet{});
}

void to_json(json& j, const Interaction& x) {
    j = json{{"id", x.id},
             {"user", x.user},
             {"item", x.item},
             {"action", x.action},
             {"timestamp", x.timestamp},
             {"source", x.source}};
    j["rating"] = x.rating ? json(*x.rating) : json(nullptr);
    j["comment"] = x.comment ? json(*x.comment) : json(nullptr);
}

void from_json(const json& j, Interaction& x) {
    x.id = j.at("id").get<std::string>();
    x.user = j.at("user").get<std::string>();
    x.item = j.at("item").get<std::string>();
    x.action = j.at("action").get<Action>();
    x.timestamp = j.at("timestamp").get<std::int64_t>();
    x.source = j.at("source").get<Source>();
    x.rating = j.contains("rating") && !j["rating"].is_null() ? std::optional<int>(j["rating"].get<int>()) : std::nullopt;
    x.comment = j.contains("comment") && !j["comment"].is_null() ? std::optional<std::string>(j["comment"].get<std::string>())
                                                                   : std::nullopt;
}

void to_json(json& j, const TraitEntry& x) {
    j = json{{"polarity", x.polarity},
             {"statement", x.statement},
             {"facets", x.facets},
             {"provenance", x.provenance},
             {"created_at", x.created_at}};
}

void from_json(const json& j, TraitEntry& x) {
    x.polarity = j.at("polarity").get<Action>();
    x.statement = j.at("statement").get<std::string>();
    x.facets = j.at("facets").get<FacetSet>();
    x.provenance = j.at("provenance").get<std::set<std::string>>();
    x.created_at = j.at("created_at").get<std::uint64_t>();
}

void to_json(json& j, const Personality& x) {
    j = json{{"user", x.user}, {"entries", x.entries}, {"clock", x.clock}};
}

void from_json(const json& j, Personality& x) {
    x.user = j.at("user").get<std::string>();
    x.entries = j.at("entries").get<std::vector<TraitEntry>>();
    x.clock = j.value("clock", std::uint64_t{0});
}

} // namespace rah
