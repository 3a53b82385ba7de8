#include "rah/pipeline.hpp"

#include "rah/rng.hpp"
#include "rah/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

namespace rah {

using nlohmann::json;

namespace {

const json* field(const json& j, std::initializer_list<const char*> names) {
    for (const char* n : names)
        if (auto it = j.find(n); it != j.end() && !it->is_null()) return &*it;
    return nullptr;
}

std::string as_string(const json& v, const char* what) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw DecodeError(std::string("field ") + what + " is not a string");
}

} // namespace

RawReview parse_review(std::string_view line, const std::optional<DomainTag>& default_domain) {
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw DecodeError("record is not a JSON object");
    RawReview r;
    const auto* user = field(j, {"user", "reviewerID"});
    const auto* item = field(j, {"item", "asin"});
    const auto* rating = field(j, {"rating", "overall"});
    const auto* ts = field(j, {"timestamp", "unixReviewTime"});
    if (!user || !item || !rating || !ts) throw DecodeError("record lacks user, item, rating or timestamp");
    r.user = as_string(*user, "user");
    r.item = as_string(*item, "item");
    if (r.user.empty() || r.item.empty()) throw DecodeError("record has an empty user or item");
    if (!rating->is_number()) throw DecodeError("rating is not a number");
    const double rv = rating->get<double>();
    if (rv != std::floor(rv) || rv < 1 || rv > 5) throw DecodeError("rating must be an integer in [1,5]");
    r.rating = static_cast<int>(rv);
    if (!ts->is_number_integer()) throw DecodeError("timestamp is not an integer");
    r.timestamp = ts->get<std::int64_t>();
    if (const auto* d = field(j, {"domain"})) {
        try {
            r.domain = DomainTag(text::lower(as_string(*d, "domain")));
        } catch (const ValidationError& e) {
            throw DecodeError(e.what());
        }
    } else if (default_domain) {
        r.domain = *default_domain;
    } else {
        throw DecodeError("record has no domain and the source names none");
    }
    if (const auto* t = field(j, {"text", "reviewText"})) r.text = as_string(*t, "text");
    if (const auto* id = field(j, {"id"})) r.id = as_string(*id, "id");
    if (const auto* title = field(j, {"title"})) r.title = as_string(*title, "title");
    if (const auto* tags = field(j, {"tags"})) {
        if (!tags->is_array()) throw DecodeError("tags must be an array");
        for (const auto& t : *tags) r.tags.insert(text::lower(as_string(t, "tags")));
    }
    return r;
}

IngestResult ingest(const std::vector<IngestSource>& sources) {
    IngestResult out;
    std::unordered_map<InteractionId, Interaction> by_id;
    for (const auto& src : sources) {
        std::ifstream is(src.path);
        if (!is) throw RunError("cannot read " + src.path.string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (text::trim(line).empty()) continue;
            RawReview r;
            try {
                r = parse_review(line, src.domain);
            } catch (const Error& e) {
                ++out.skipped;
                spdlog::debug("{}:{}: skipped: {}", src.path.string(), lineno, e.what());
                continue;
            }
            const auto action = action_from_rating(r.rating);
            if (!action) {
                ++out.neutral;
                continue;
            }
            if (const auto* known = out.catalog.find(r.item)) {
                if (known->domain != r.domain) {
                    ++out.skipped;
                    spdlog::debug("{}:{}: item {} already seen in domain {}", src.path.string(), lineno, r.item,
                                  known->domain.name());
                    continue;
                }
            } else {
                out.catalog.add(Item{r.item, r.domain, r.title.value_or(r.item), "", r.tags});
            }
            Interaction x;
            x.id = r.id.value_or(r.domain.name() + ":" + r.user + ":" + r.item + ":" + std::to_string(r.timestamp));
            x.user = r.user;
            x.item = r.item;
            x.action = *action;
            x.rating = r.rating;
            if (!r.text.empty()) x.comment = r.text;
            x.timestamp = r.timestamp;
            if (!by_id.emplace(x.id, x).second) {
                ++out.duplicates;
                continue;
            }
            out.interactions.push_back(std::move(x));
        }
    }
    std::sort(out.interactions.begin(), out.interactions.end(), [](const Interaction& a, const Interaction& b) {
        return std::tie(a.timestamp, a.user, a.item, a.id) < std::tie(b.timestamp, b.user, b.item, b.id);
    });
    if (out.skipped) spdlog::warn("ingest: skipped {} malformed records", out.skipped);
    return out;
}

std::vector<Interaction> kcore_filter(const std::vector<Interaction>& interactions, std::size_t k) {
    if (k < 1) throw ValidationError("k-core needs k >= 1");
    std::vector<Interaction> cur = interactions;
    for (;;) {
        std::unordered_map<UserId, std::size_t> nu;
        std::unordered_map<ItemId, std::size_t> ni;
        for (const auto& x : cur) ++nu[x.user], ++ni[x.item];
        std::vector<Interaction> next;
        next.reserve(cur.size());
        for (const auto& x : cur)
            if (nu[x.user] >= k && ni[x.item] >= k) next.push_back(x);
        if (next.size() == cur.size()) return cur;
        cur = std::move(next);
    }
}

std::vector<Interaction> retain_cross_domain(const std::vector<Interaction>& interactions, const Catalog& catalog) {
    std::unordered_map<UserId, std::set<DomainTag>> domains;
    for (const auto& x : interactions) domains[x.user].insert(catalog.at(x.item).domain);
    std::vector<Interaction> out;
    for (const auto& x : interactions)
        if (domains[x.user].size() >= 2) out.push_back(x);
    return out;
}

SplitAssignment split_lpu(const std::vector<Interaction>& interactions, std::uint64_t seed) {
    std::map<UserId, std::vector<InteractionId>> per_user;
    for (const auto& x : interactions) per_user[x.user].push_back(x.id);
    SplitAssignment out;
    static constexpr SplitSet order[3] = {SplitSet::Learn, SplitSet::Proxy, SplitSet::Unseen};
    for (auto& [user, ids] : per_user) {
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
            throw ValidationError("duplicate interaction id for user " + user);
        Rng rng(derive_seed(seed, "split:" + user));
        rng.shuffle(ids.begin(), ids.end());
        for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], order[i % 3]);
    }
    return out;
}

std::vector<Interaction> select(const std::vector<Interaction>& interactions, const SplitAssignment& split, SplitSet set) {
    std::vector<Interaction> out;
    for (const auto& x : interactions) {
        const auto it = split.find(x.id);
        if (it == split.end()) throw LookupError("interaction " + x.id + " is not in the split");
        if (it->second == set) out.push_back(x);
    }
    return out;
}

void write_split(std::ostream& os, const SplitAssignment& split) {
    for (const auto& [id, set] : split) os << text::escape(id) << "\t" << to_string(set) << "\n";
}

SplitAssignment read_split(std::istream& is) {
    SplitAssignment out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = text::split(line, '\t');
        if (f.size() != 2) throw DecodeError("split line " + std::to_string(lineno) + ": expected id<TAB>set");
        try {
            if (!out.emplace(text::unescape(f[0]), split_set_from_string(f[1])).second)
                throw DecodeError("split line " + std::to_string(lineno) + ": duplicate id");
        } catch (const ValidationError& e) {
            throw DecodeError("split line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_interactions(std::ostream& os, const std::vector<Interaction>& interactions) {
    for (const auto& x : interactions) os << json(x).dump() << "\n";
}

std::vector<Interaction> read_interactions(std::istream& is) {
    std::vector<Interaction> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            auto x = json::parse(line).get<Interaction>();
            validate(x);
            out.push_back(std::move(x));
        } catch (const std::exception& e) {
            throw DecodeError("interactions line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void save_interactions(const std::filesystem::path& path, const std::vector<Interaction>& interactions) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw RunError("cannot write " + path.string());
    write_interactions(os, interactions);
}

std::vector<Interaction> load_interactions(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LookupError("cannot open " + path.string());
    return read_interactions(is);
}

// ---------------------------------------------------------------------------
// Synthetic worlds

void WorldConfig::validate() const {
    if (users == 0) throw ConfigError("world needs at least one user");
    if (domains.empty()) throw ConfigError("world needs at least one domain");
    if (items < domains.size()) throw ConfigError("world needs at least one item per domain");
    if (tags == 0) throw ConfigError("world needs at least one tag");
    if (liked_tags + disliked_tags > tags)
        throw ConfigError("inconsistent world config: " + std::to_string(liked_tags) + " liked + " +
                          std::to_string(disliked_tags) + " disliked tags exceed " + std::to_string(tags) + " tags");
    if (liked_tags == 0) throw ConfigError("users must like at least one tag");
    if (!(subtag_prob >= 0.0 && subtag_prob <= 1.0)) throw ConfigError("subtag_prob must be in [0,1]");
    if (!(affinity_liked > 0 && affinity_disliked > 0 && affinity_neutral > 0)) throw ConfigError("affinities must be positive");
    if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw ConfigError("noise_rate must be in [0,1)");
    if (!(zipf >= 0.0)) throw ConfigError("zipf exponent must be non-negative");
    const std::size_t smallest_domain = items / domains.size();
    if (per_domain == 0 || per_domain > smallest_domain)
        throw ConfigError("per_domain must be in [1, " + std::to_string(smallest_domain) + "]");
}

namespace {

std::string numbered(const char* prefix, std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%04zu", prefix, n);
    return buf;
}

std::string theme_tag(std::size_t t) { return "t" + std::to_string(t); }
std::string subtag(std::size_t t, const DomainTag& d, std::size_t s) {
    return theme_tag(t) + "/" + d.name() + std::to_string(s);
}

} // namespace

WorldBundle make_world(const WorldConfig& c) {
    c.validate();
    WorldBundle out;
    auto& w = out.world;
    w.seed = c.seed;
    Rng rng(derive_seed(c.seed, "world"));

    const std::size_t nd = c.domains.size();
    std::vector<std::size_t> theme(c.items);
    std::vector<std::vector<std::size_t>> by_domain(nd);
    for (std::size_t i = 0; i < c.items; ++i) {
        const auto& d = c.domains[i % nd];
        theme[i] = rng.below(c.tags);
        Item item;
        item.id = d.name() + "-" + numbered("", i);
        item.domain = d;
        item.title = d.name() + " " + std::to_string(i);
        item.tags.insert(theme_tag(theme[i]));
        for (std::size_t s = 0; s < c.subtags; ++s)
            if (rng.bernoulli(c.subtag_prob)) item.tags.insert(subtag(theme[i], d, s));
        w.catalog.add(std::move(item));
        by_domain[i % nd].push_back(i);
    }

    // Popularity: Zipf over a seeded rank within each domain.
    std::vector<double> popularity(c.items, 1.0);
    for (auto& members : by_domain) {
        auto order = members;
        rng.shuffle(order.begin(), order.end());
        for (std::size_t r = 0; r < order.size(); ++r)
            popularity[order[r]] = std::pow(static_cast<double>(r + 1), -c.zipf);
    }

    auto theme_tags = [&](std::size_t t) {
        FacetSet s{theme_tag(t)};
        for (const auto& d : c.domains)
            for (std::size_t k = 0; k < c.subtags; ++k) s.insert(subtag(t, d, k));
        return s;
    };

    auto add_user = [&](const UserId& id, UserRole role) {
        std::vector<std::size_t> themes(c.tags);
        for (std::size_t t = 0; t < c.tags; ++t) themes[t] = t;
        rng.shuffle(themes.begin(), themes.end());
        std::vector<int> affinity(c.tags, 0); // 1 liked, -1 disliked
        SyntheticUser u;
        u.noise_rate = c.noise_rate;
        u.role = role;
        for (std::size_t k = 0; k < c.liked_tags; ++k) {
            affinity[themes[k]] = 1;
            u.liked_tags.merge(theme_tags(themes[k]));
        }
        for (std::size_t k = c.liked_tags; k < c.liked_tags + c.disliked_tags; ++k) {
            affinity[themes[k]] = -1;
            u.disliked_tags.merge(theme_tags(themes[k]));
        }
        w.users.emplace(id, std::move(u));

        std::vector<std::size_t> chosen;
        for (const auto& members : by_domain) {
            std::vector<double> weights;
            for (auto i : members) {
                const double a = affinity[theme[i]] > 0   ? c.affinity_liked
                                  : affinity[theme[i]] < 0 ? c.affinity_disliked
                                                           : c.affinity_neutral;
                weights.push_back(a * popularity[i]);
            }
            for (auto k : weighted_sample(weights, c.per_domain, rng)) chosen.push_back(members[k]);
        }
        rng.shuffle(chosen.begin(), chosen.end());
        for (std::size_t pos = 0; pos < chosen.size(); ++pos) {
            const auto& item = w.catalog.items()[chosen[pos]];
            Interaction x;
            x.id = id + ":" + item.id;
            x.user = id;
            x.item = item.id;
            x.timestamp = static_cast<std::int64_t>(pos + 1);
            out.interactions.push_back(std::move(x));
        }
    };
    for (std::size_t u = 0; u < c.users; ++u) add_user(numbered("u", u), UserRole::Cohort);
    for (std::size_t u = 0; u < c.background; ++u) add_user(numbered("b", u), UserRole::Background);

    // Actions need the finished world (the noise draw is keyed by its seed).
    for (auto& x : out.interactions) {
        x.action = synthetic_human_action(w, x.user, w.catalog.at(x.item));
        x.source = Source::Human;
    }
    validate(w);
    return out;
}

CorpusStats stats(const std::vector<Interaction>& interactions, const Catalog& catalog) {
    std::map<DomainTag, std::pair<std::set<UserId>, std::set<ItemId>>> sets;
    std::set<UserId> users;
    std::set<ItemId> items;
    CorpusStats out;
    for (const auto& x : interactions) {
        const auto& d = catalog.at(x.item).domain;
        sets[d].first.insert(x.user);
        sets[d].second.insert(x.item);
        ++out.per_domain[d].interactions;
        users.insert(x.user);
        items.insert(x.item);
    }
    for (auto& [d, s] : sets) {
        out.per_domain[d].users = s.first.size();
        out.per_domain[d].items = s.second.size();
    }
    out.total = {users.size(), items.size(), interactions.size()};
    return out;
}

} // namespace rah
