#pragma once

#include "rah/gateway/world.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

namespace rah {

struct RawReview {
    UserId user;
    ItemId item;
    DomainTag domain;
    int rating = 0;
    std::int64_t timestamp = 0;
    std::string text;
    std::optional<std::string> id;
    std::optional<std::string> title;
    FacetSet tags;
};

/// Parses one JSON record. Accepts the documented names (user, item, domain,
/// rating, timestamp, text) and the Amazon dump names (reviewerID, asin,
/// overall, unixReviewTime, reviewText). Throws DecodeError.
RawReview parse_review(std::string_view line, const std::optional<DomainTag>& default_domain = std::nullopt);

struct IngestSource {
    std::filesystem::path path;
    std::optional<DomainTag> domain; // for dumps without a per-record domain
};

struct IngestResult {
    std::vector<Interaction> interactions; // ordered by (timestamp, user, item)
    Catalog catalog;
    std::size_t skipped = 0;    // malformed records
    std::size_t neutral = 0;    // 3-star records
    std::size_t duplicates = 0; // exact duplicates removed
};

IngestResult ingest(const std::vector<IngestSource>& sources);

/// Repeatedly drops users and items with fewer than k interactions until nothing changes.
std::vector<Interaction> kcore_filter(const std::vector<Interaction>& interactions, std::size_t k = 5);

/// Keeps users whose interactions span at least two domains.
std::vector<Interaction> retain_cross_domain(const std::vector<Interaction>& interactions, const Catalog& catalog);

/// Per user: interactions sorted by id, seeded shuffle, then round-robin
/// Learn, Proxy, Unseen (so remainders favour Learn, then Proxy).
SplitAssignment split_lpu(const std::vector<Interaction>& interactions, std::uint64_t seed);

std::vector<Interaction> select(const std::vector<Interaction>& interactions, const SplitAssignment& split, SplitSet set);

void write_split(std::ostream& os, const SplitAssignment& split);
SplitAssignment read_split(std::istream& is);

/// JSON lines in the documented interaction schema.
void write_interactions(std::ostream& os, const std::vector<Interaction>& interactions);
std::vector<Interaction> read_interactions(std::istream& is);
void save_interactions(const std::filesystem::path& path, const std::vector<Interaction>& interactions);
std::vector<Interaction> load_interactions(const std::filesystem::path& path);

/// Synthetic world: every item belongs to one theme ("t<k>") and carries
/// optional domain-specific subtags ("t<k>/<domain><s>"). Users like and
/// dislike whole themes and pick items with theme-affinity × popularity
/// weights; popularity is Zipf over a seeded per-domain rank.
struct WorldConfig {
    std::size_t users = 50;      // cohort
    std::size_t background = 0;  // extra users whose data only trains recommenders
    std::size_t items = 300;
    std::vector<DomainTag> domains{DomainTag::movie(), DomainTag::book(), DomainTag::game()};
    std::size_t tags = 4;        // themes
    std::size_t subtags = 2;     // per theme and domain
    double subtag_prob = 0.5;
    std::size_t liked_tags = 1;  // themes per user
    std::size_t disliked_tags = 2;
    double affinity_liked = 8.0;
    double affinity_disliked = 3.0;
    double affinity_neutral = 1.0;
    std::size_t per_domain = 40; // interactions per user and domain
    double noise_rate = 0.0;
    double zipf = 0.0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct WorldBundle {
    SyntheticWorld world;
    std::vector<Interaction> interactions; // Human, ordered by (user, timestamp)
};

WorldBundle make_world(const WorldConfig& config);

struct DomainStats {
    std::size_t users = 0;
    std::size_t items = 0;
    std::size_t interactions = 0;
    bool operator==(const DomainStats&) const = default;
};

struct CorpusStats {
    std::map<DomainTag, DomainStats> per_domain;
    DomainStats total;
};

CorpusStats stats(const std::vector<Interaction>& interactions, const Catalog& catalog);

} // namespace rah
