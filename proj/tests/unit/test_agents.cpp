#include "helpers.hpp"

#include "rah/agents.hpp"
#include "rah/rng.hpp"

#include <gtest/gtest.h>

using namespace rah;
using namespace testing_helpers;

namespace {

FacetSet facets(const std::vector<TraitEntry>& entries) {
    FacetSet out;
    for (const auto& e : entries) out.insert(e.facets.begin(), e.facets.end());
    return out;
}

struct AgentsTest : ::testing::Test {
    std::shared_ptr<SyntheticWorld> w = world_of({item("pf", {"pixar", "family"}), item("ab", {"a", "b"}),
                                                  item("c", {"c"}), item("empty", {"x"})});
    OracleBackend oracle{w};
};

} // namespace

TEST_F(AgentsTest, PerceiveReturnsGroundTruthTags) {
    const auto p = perceive(w->catalog.at("pf"), oracle);
    EXPECT_EQ(p.attributes, (FacetSet{"pixar", "family"}));
    EXPECT_EQ(perceive(w->catalog.at("pf"), oracle), p);
}

TEST_F(AgentsTest, PerceiveOfUntaggedItemFails) {
    auto bare = std::make_shared<SyntheticWorld>(*w);
    bare->catalog = Catalog({Item{"bare", DomainTag::movie(), "Bare", "", {}}});
    OracleBackend b(bare);
    EXPECT_THROW(perceive(bare->catalog.at("bare"), b), ValidationError);
}

TEST_F(AgentsTest, LearnLikeCollectsAllFacets) {
    const auto x = interaction("u1", "ab", Action::Like);
    const auto c = learn(perceived(w->catalog.at("ab")), x, Personality{"u1", {}, 0}, std::nullopt, oracle);
    EXPECT_EQ(facets(c.new_likes), (FacetSet{"a", "b"}));
    EXPECT_TRUE(c.new_dislikes.empty());
    EXPECT_FALSE(c.why_like.empty());
    EXPECT_FALSE(c.why_dislike.empty());
    for (const auto& e : c.new_likes) EXPECT_EQ(e.provenance, std::set<InteractionId>{x.id});
}

TEST_F(AgentsTest, LearnDropsCritiqueFlaggedFacets) {
    Verdict v;
    v.pass = false;
    v.mismatch = std::make_pair(Action::Dislike, Action::Like);
    v.reasons = {"b misled"};
    v.flagged_facets = {"b"};
    const auto c = learn(perceived(w->catalog.at("ab")), interaction("u1", "ab", Action::Like), Personality{"u1", {}, 0}, v, oracle);
    EXPECT_EQ(facets(c.new_likes), FacetSet{"a"});
}

TEST_F(AgentsTest, LearnRejectsPassingCritique) {
    EXPECT_THROW(learn(perceived(w->catalog.at("ab")), interaction("u1", "ab", Action::Like), Personality{"u1", {}, 0},
                       Verdict{}, oracle),
                 ValidationError);
}

TEST_F(AgentsTest, LearnDislikeIsSymmetric) {
    const auto c = learn(perceived(w->catalog.at("c")), interaction("u1", "c", Action::Dislike), Personality{"u1", {}, 0},
                         std::nullopt, oracle);
    EXPECT_EQ(facets(c.new_dislikes), FacetSet{"c"});
    EXPECT_TRUE(c.new_likes.empty());
}

TEST_F(AgentsTest, ActExamples) {
    const auto ab = perceived(w->catalog.at("ab"));
    auto o = act(ab, personality("u1", {"a"}, {}), oracle);
    EXPECT_EQ(o.predicted, Action::Like);
    EXPECT_FALSE(o.hypothesized_reasons.empty());
    EXPECT_FALSE(o.perception_analysis.empty());
    EXPECT_FALSE(o.simulated_comment.empty());
    EXPECT_EQ(act(ab, personality("u1", {"a"}, {"b"}), oracle).predicted, Action::Dislike);
    EXPECT_EQ(act(ab, Personality{"u1", {}, 0}, oracle).predicted, Action::Dislike);
}

TEST_F(AgentsTest, CriticExamples) {
    const auto ab = perceived(w->catalog.at("ab"));
    const auto p = personality("u1", {}, {"a"});
    const auto o = act(ab, p, oracle);
    ASSERT_EQ(o.predicted, Action::Dislike);
    EXPECT_TRUE(critic(ab, p, o, Action::Dislike, oracle).pass);
    const auto v = critic(ab, p, o, Action::Like, oracle);
    EXPECT_FALSE(v.pass);
    EXPECT_EQ(v.flagged_facets, FacetSet{"a"});
    EXPECT_FALSE(v.reasons.empty());
    EXPECT_FALSE(v.suggestions.empty());

    const auto liker = personality("u1", {"a"}, {});
    const auto like = act(ab, liker, oracle);
    const auto miss = critic(ab, liker, like, Action::Dislike, oracle);
    EXPECT_FALSE(miss.pass);
    ASSERT_TRUE(miss.mismatch.has_value());
    EXPECT_EQ(*miss.mismatch, std::make_pair(Action::Like, Action::Dislike));
}

TEST_F(AgentsTest, ReflectExamples) {
    const auto existing = personality("u1", {"a"}, {});
    auto r = reflect(existing, CandidateTraits{{trait(Action::Like, "a", "y")}, {}, "w", "w"}, oracle);
    EXPECT_EQ(facets_of(r.merged, Action::Like), FacetSet{"a"});
    EXPECT_EQ(r.duplicates_removed, 1u);
    EXPECT_EQ(r.merged.entries.size(), 1u);

    r = reflect(existing, CandidateTraits{{}, {trait(Action::Dislike, "a", "y")}, "w", "w"}, oracle);
    EXPECT_FALSE(facets_of(r.merged, Action::Like).contains("a"));
    EXPECT_FALSE(facets_of(r.merged, Action::Dislike).contains("a"));
    EXPECT_EQ(r.user_queries.size(), 1u);
    EXPECT_EQ(r.conflicts_resolved, 1u);

    r = reflect(existing, CandidateTraits{}, oracle);
    EXPECT_EQ(r.merged, existing);
    EXPECT_EQ(r.duplicates_removed, 0u);
    EXPECT_EQ(r.conflicts_resolved, 0u);
    EXPECT_TRUE(r.user_queries.empty());
}

TEST_F(AgentsTest, ReflectRejectsUnknownUser) {
    EXPECT_THROW(reflect(personality("stranger", {"a"}, {}), CandidateTraits{}, oracle), LookupError);
}

namespace {

std::vector<TraitEntry> random_entries(Rng& rng, Action polarity, std::size_t n) {
    static const std::vector<std::string> pool{"a", "b", "c", "d", "e", "f", "g", "h"};
    std::vector<TraitEntry> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& f = pool[rng.below(pool.size())];
        FacetSet facets{f};
        if (rng.bernoulli(0.3)) facets.insert(pool[rng.below(pool.size())]);
        out.push_back(TraitEntry{polarity, join(facets, " and "), facets, {"i" + std::to_string(rng.below(50))}, 0});
    }
    return out;
}

} // namespace

TEST_F(AgentsTest, ReflectIsIdempotentAndConflictFreeOnRandomInputs) {
    Rng rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        Personality p{"u1", {}, 0};
        for (auto& e : random_entries(rng, Action::Like, rng.below(5))) p.entries.push_back(e);
        for (auto& e : random_entries(rng, Action::Dislike, rng.below(5))) p.entries.push_back(e);
        CandidateTraits fresh{random_entries(rng, Action::Like, rng.below(4)), random_entries(rng, Action::Dislike, rng.below(4)),
                              "w", "w"};
        const auto once = reflect(p, fresh, oracle);
        EXPECT_TRUE(satisfies_reflect_invariants(once.merged));
        const auto twice = reflect(once.merged, CandidateTraits{}, oracle);
        EXPECT_EQ(twice.merged, once.merged);
    }
}

TEST(AgentsBruteForce, ActReproducesNoiseFreeUserOverWholeCatalog) {
    // Every item of a small world; the personality holds exactly the user's liked and disliked tags.
    std::vector<Item> items;
    const std::vector<std::string> tags{"a", "b", "c", "d", "e"};
    for (unsigned mask = 1; mask < (1u << tags.size()); ++mask) {
        FacetSet s;
        for (std::size_t t = 0; t < tags.size(); ++t)
            if (mask & (1u << t)) s.insert(tags[t]);
        items.push_back(item("i" + std::to_string(mask), s));
    }
    auto w = world_of(items, {"a", "b"}, {"c", "d"});
    OracleBackend oracle(w);
    const auto p = personality("u1", {"a", "b"}, {"c", "d"});
    for (const auto& i : w->catalog.items())
        EXPECT_EQ(act(perceive(i, oracle), p, oracle).predicted, synthetic_human_action(*w, "u1", i)) << i.id;
}
