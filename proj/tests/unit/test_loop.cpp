#include "helpers.hpp"

#include "rah/loop.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <future>
#include <sstream>

using namespace rah;
using namespace testing_helpers;

namespace {

// Oracle whose Act agent always predicts the opposite action, so every
// critic verdict fails.
class ContraryActBackend final : public Backend {
public:
    explicit ContraryActBackend(std::shared_ptr<const SyntheticWorld> w) : inner_(std::move(w)) {}
    AgentResponse complete(const AgentRequest& req) override {
        auto r = inner_.complete(req);
        if (auto* o = std::get_if<ActOutcome>(&r.result))
            o->predicted = o->predicted == Action::Like ? Action::Dislike : Action::Like;
        return r;
    }
    std::string identity() const override { return "contrary"; }

private:
    OracleBackend inner_;
};

class FailingBackend final : public Backend {
public:
    FailingBackend(std::shared_ptr<const SyntheticWorld> w, std::set<ItemId> bad) : inner_(std::move(w)), bad_(std::move(bad)) {}
    AgentResponse complete(const AgentRequest& req) override {
        if (const auto* p = std::get_if<PerceiveInput>(&req.payload); p && bad_.contains(p->item.id))
            throw TransportError("injected failure");
        return inner_.complete(req);
    }
    std::string identity() const override { return "failing"; }

private:
    OracleBackend inner_;
    std::set<ItemId> bad_;
};

} // namespace

TEST(LoopConfigTest, Variants) {
    for (const auto& name : loop_variants()) EXPECT_EQ(LoopConfig::variant(name).name(), name);
    EXPECT_FALSE(LoopConfig::variant("L").use_critic);
    EXPECT_TRUE(LoopConfig::variant("L+R").use_reflect);
    EXPECT_THROW(LoopConfig::variant("C"), ConfigError);
    LoopConfig c;
    c.max_iters = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(LearnOne, OracleConvergesOnFirstIteration) {
    auto w = world_of({item("i", {"a", "b"})}, {"a", "b"}, {});
    OracleBackend oracle(w);
    const auto x = interaction("u1", "i", Action::Like);
    const auto [p, trace] = learn_one("u1", w->catalog.at("i"), x, Personality{"u1", {}, 0}, LoopConfig::variant("L+C"), oracle);
    EXPECT_TRUE(trace.converged);
    ASSERT_EQ(trace.iterations.size(), 1u);
    EXPECT_TRUE(trace.iterations[0].verdict.pass);
    EXPECT_EQ(facets_of(p, Action::Like), (FacetSet{"a", "b"}));
}

TEST(LearnOne, AppendWithoutReflectKeepsDuplicates) {
    auto w = world_of({item("i", {"a"}), item("j", {"a"})}, {"a"}, {});
    OracleBackend oracle(w);
    const auto cfg = LoopConfig::variant("L");
    auto [p1, t1] = learn_one("u1", w->catalog.at("i"), interaction("u1", "i", Action::Like), Personality{"u1", {}, 0}, cfg, oracle);
    auto [p2, t2] = learn_one("u1", w->catalog.at("j"), interaction("u1", "j", Action::Like), p1, cfg, oracle);
    ASSERT_EQ(p2.entries.size(), 2u);
    EXPECT_EQ(p2.entries[0].statement, p2.entries[1].statement);
    EXPECT_TRUE(t2.iterations.empty());
    EXPECT_FALSE(t2.converged);

    auto [p3, t3] = learn_one("u1", w->catalog.at("j"), interaction("u1", "j", Action::Like), p1, LoopConfig::variant("L+R"), oracle);
    EXPECT_EQ(p3.entries.size(), 1u);
}

TEST(LearnOne, ForcedFailureAcceptsLastCandidate) {
    auto w = world_of({item("i", {"a", "b"})}, {"a", "b"}, {});
    ContraryActBackend contrary(w);
    auto cfg = LoopConfig::variant("L+C+R");
    cfg.max_iters = 1;
    const auto [p, trace] =
        learn_one("u1", w->catalog.at("i"), interaction("u1", "i", Action::Like), Personality{"u1", {}, 0}, cfg, contrary);
    EXPECT_FALSE(trace.converged);
    ASSERT_EQ(trace.iterations.size(), 1u);
    EXPECT_EQ(trace.accepted, trace.iterations[0].candidate);
    EXPECT_FALSE(trace.iterations[0].verdict.pass);

    cfg.max_iters = 3;
    const auto [p3, trace3] =
        learn_one("u1", w->catalog.at("i"), interaction("u1", "i", Action::Like), Personality{"u1", {}, 0}, cfg, contrary);
    EXPECT_FALSE(trace3.converged);
    EXPECT_EQ(trace3.iterations.size(), 3u);
    EXPECT_EQ(trace3.accepted, trace3.iterations.back().candidate);
}

TEST(LearnOne, RejectsForeignInteractionAndLeavesInputAlone) {
    auto w = world_of({item("i", {"a"})}, {"a"}, {});
    FailingBackend failing(w, {"i"});
    const auto before = personality("u1", {"z"}, {});
    auto copy = before;
    EXPECT_THROW(learn_one("u1", w->catalog.at("i"), interaction("u1", "i", Action::Like), copy, LoopConfig{}, failing),
                 TransportError);
    EXPECT_EQ(copy, before);
    OracleBackend oracle(w);
    EXPECT_THROW(learn_one("u1", w->catalog.at("i"), interaction("u2", "i", Action::Like), copy, LoopConfig{}, oracle),
                 ValidationError);
}

TEST(LearnSet, EmptyInputGivesEmptyPersonality) {
    auto w = world_of({item("i", {"a"})});
    OracleBackend oracle(w);
    const auto p = learn_set("u1", {}, w->catalog, LoopConfig{}, oracle);
    EXPECT_TRUE(p.empty());
    EXPECT_EQ(p.user, "u1");
}

TEST(LearnSet, DisjointLikesUnion) {
    auto w = world_of({item("i", {"a", "b"}), item("j", {"c"})}, {"a", "b", "c"}, {});
    OracleBackend oracle(w);
    const auto p = learn_set("u1", {interaction("u1", "i", Action::Like, 1), interaction("u1", "j", Action::Like, 2)}, w->catalog,
                             LoopConfig::variant("L+C+R"), oracle);
    EXPECT_EQ(facets_of(p, Action::Like), (FacetSet{"a", "b", "c"}));
    EXPECT_TRUE(facets_of(p, Action::Dislike).empty());
}

TEST(LearnSet, PermutationsGiveSameFacets) {
    auto w = world_of({item("i", {"a", "b"}), item("j", {"b", "c"}), item("k", {"d"}), item("l", {"e", "a"})}, {"a", "d"},
                      {"c", "e"});
    OracleBackend oracle(w);
    std::vector<Interaction> xs{interaction("u1", "i", Action::Like), interaction("u1", "j", Action::Dislike),
                                interaction("u1", "k", Action::Like), interaction("u1", "l", Action::Dislike)};
    std::sort(xs.begin(), xs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::optional<std::pair<FacetSet, FacetSet>> reference;
    do {
        auto ordered = xs;
        for (std::size_t t = 0; t < ordered.size(); ++t) ordered[t].timestamp = static_cast<std::int64_t>(t);
        const auto p = learn_set("u1", ordered, w->catalog, LoopConfig::variant("L+C+R"), oracle);
        EXPECT_TRUE(satisfies_reflect_invariants(p));
        const auto got = std::make_pair(facets_of(p, Action::Like), facets_of(p, Action::Dislike));
        if (!reference) reference = got;
        EXPECT_EQ(got, *reference);
    } while (std::next_permutation(xs.begin(), xs.end(), [](const auto& a, const auto& b) { return a.id < b.id; }));
}

TEST(LearnSet, SkipsFailuresUntilMajorityFails) {
    auto w = world_of({item("i", {"a"}), item("j", {"b"}), item("k", {"c"})}, {"a", "b", "c"}, {});
    const std::vector<Interaction> xs{interaction("u1", "i", Action::Like, 1), interaction("u1", "j", Action::Like, 2),
                                      interaction("u1", "k", Action::Like, 3)};
    FailingBackend one(w, {"j"});
    LearnSetStats stats;
    const auto p = learn_set("u1", xs, w->catalog, LoopConfig{}, one, &stats);
    EXPECT_EQ(stats.attempted, 3u);
    EXPECT_EQ(stats.failed, 1u);
    EXPECT_EQ(facets_of(p, Action::Like), (FacetSet{"a", "c"}));

    FailingBackend two(w, {"i", "j"});
    EXPECT_THROW(learn_set("u1", xs, w->catalog, LoopConfig{}, two), RunError);
}

TEST(LearnSet, NoiseFreeOracleAlwaysConverges) {
    std::vector<Item> items;
    std::vector<Interaction> xs;
    const std::vector<std::string> tags{"a", "b", "c", "d", "e", "f"};
    for (int i = 0; i < 30; ++i) {
        FacetSet s{tags[static_cast<std::size_t>(i) % 6], tags[static_cast<std::size_t>(i * 7 + 1) % 6]};
        items.push_back(item("i" + std::to_string(i), s));
    }
    auto w = world_of(items, {"a", "b", "c"}, {"d", "e"});
    for (const auto& it : w->catalog.items())
        xs.push_back(interaction("u1", it.id, synthetic_human_action(*w, "u1", it), static_cast<std::int64_t>(xs.size())));
    OracleBackend oracle(w);
    LearnSetStats stats;
    learn_set("u1", xs, w->catalog, LoopConfig::variant("L+C+R"), oracle, &stats);
    EXPECT_EQ(stats.converged, stats.attempted);
    EXPECT_LE(stats.iterations, stats.attempted * 3);
}

TEST(ProxyActions, OracleExamples) {
    auto w = world_of({item("ia", {"a"}), item("iz", {"z"})});
    OracleBackend oracle(w);
    const auto p = personality("u1", {"a"}, {});
    const auto xs = proxy_actions("u1", p, {w->catalog.at("ia"), w->catalog.at("iz")}, oracle);
    ASSERT_EQ(xs.size(), 2u);
    EXPECT_EQ(xs[0].action, Action::Like);
    EXPECT_EQ(xs[1].action, Action::Dislike);
    for (const auto& x : xs) {
        EXPECT_EQ(x.source, Source::AssistantProxy);
        EXPECT_EQ(x.id, proxy_interaction_id("u1", x.item));
        EXPECT_EQ(x.user, "u1");
    }
    EXPECT_NE(xs[0].id, interaction("u1", "ia", Action::Like).id);
    EXPECT_TRUE(proxy_actions("u1", p, {}, oracle).empty());

    FailingBackend failing(w, {"ia"});
    const auto partial = proxy_actions("u1", p, {w->catalog.at("ia"), w->catalog.at("iz")}, failing);
    ASSERT_EQ(partial.size(), 1u);
    EXPECT_EQ(partial[0].item, "iz");
}

TEST(FilterRecommendations, ForwardRules) {
    auto w = world_of({item("batman", {"dark", "superhero"}), item("coco", {"family"}), item("ironman", {"action"}),
                       item("boring", {"slow"})});
    OracleBackend oracle(w);
    const auto p = personality("u1", {"family", "superhero"}, {"slow"});
    IntentRules rules;
    rules.exclude = {"dark"};
    std::vector<Item> candidates;
    for (const auto& it : w->catalog.items()) candidates.push_back(it);
    const auto d = filter_recommendations("u1", p, rules, candidates, oracle);
    EXPECT_EQ(d.at("batman"), Forward::ProxyDislike);
    EXPECT_EQ(d.at("coco"), Forward::PassToUser);
    EXPECT_EQ(d.at("ironman"), Forward::PassAndObserve);
    EXPECT_EQ(d.at("boring"), Forward::ProxyDislike);
    EXPECT_EQ(d.scores, (std::vector<int>{-1, 1, 0, -1}));
    ASSERT_EQ(d.proxy_feedback.size(), 2u);
    for (const auto& x : d.proxy_feedback) {
        EXPECT_EQ(x.action, Action::Dislike);
        EXPECT_EQ(x.source, Source::AssistantProxy);
    }
    EXPECT_THROW(d.at("nope"), LookupError);
}

namespace {

struct ObfuscationFixture : ::testing::Test {
    Catalog catalog;
    IntentRules rules;
    Interaction trigger = interaction("u1", "dep", Action::Like, 5);
    std::vector<Interaction> history{interaction("u1", "novel", Action::Like, 1)};

    void SetUp() override {
        catalog.add(item("dep", {"psychology", "depression"}, DomainTag::book()));
        catalog.add(item("novel", {"fiction"}, DomainTag::book()));
        for (int i = 0; i < 7; ++i)
            catalog.add(item("psych" + std::to_string(i), {"psychology", "professional"}, DomainTag::book()));
        catalog.add(item("sad-tome", {"psychology", "professional", "depression"}, DomainTag::book()));
        catalog.add(item("fic-pro", {"fiction", "professional"}, DomainTag::book()));
        for (int i = 0; i < 14; ++i)
            catalog.add(item("hobby" + std::to_string(i), {"hobby" + std::to_string(i % 5)},
                             i % 2 ? DomainTag::game() : DomainTag::movie()));
        rules.sensitive = {"depression"};
    }
};

} // namespace

TEST_F(ObfuscationFixture, PsychologistLikesProfessionalTextbooks) {
    const auto plan = obfuscate("u1", trigger, ObfuscationStrategy::Psychologist, catalog, history, rules, 42);
    ASSERT_EQ(plan.extra_feedback.size(), 5u);
    for (const auto& x : plan.extra_feedback) {
        EXPECT_EQ(x.source, Source::Obfuscation);
        EXPECT_EQ(x.action, Action::Like);
        const auto& it = catalog.at(x.item);
        EXPECT_TRUE(it.tags.contains("psychology") && it.tags.contains("professional")) << x.item;
        EXPECT_FALSE(it.tags.contains("depression"));
    }
    const std::vector<Item> recs{catalog.at("psych0"), catalog.at("fic-pro"), catalog.at("novel"), catalog.at("hobby1")};
    const auto& extra = plan.extra_feedback.front().item;
    auto shown = plan.filter_rules.apply(recs);
    EXPECT_TRUE(std::none_of(shown.begin(), shown.end(), [&](const Item& i) { return i.id == extra; }));
    // A professional textbook the user never touched is explained only by the extra Likes.
    EXPECT_TRUE(plan.filter_rules.removes(catalog.at("psych0")));
    EXPECT_FALSE(plan.filter_rules.removes(catalog.at("novel")));
    EXPECT_FALSE(plan.filter_rules.removes(catalog.at("fic-pro")));
    EXPECT_FALSE(plan.filter_rules.removes(catalog.at("hobby1")));
}

TEST_F(ObfuscationFixture, SharedAccountIsSeededAndCrossDomain) {
    const auto a = obfuscate("u1", trigger, ObfuscationStrategy::SharedAccount, catalog, history, rules, 42);
    const auto b = obfuscate("u1", trigger, ObfuscationStrategy::SharedAccount, catalog, history, rules, 42);
    ASSERT_EQ(a.extra_feedback.size(), 10u);
    EXPECT_EQ(a.extra_feedback, b.extra_feedback);
    std::set<std::string> domains;
    std::set<Action> actions;
    for (const auto& x : a.extra_feedback) {
        EXPECT_EQ(x.source, Source::Obfuscation);
        domains.insert(catalog.at(x.item).domain.name());
        actions.insert(x.action);
    }
    EXPECT_GE(domains.size(), 2u);
    EXPECT_EQ(actions.size(), 2u);
    const auto c = obfuscate("u1", trigger, ObfuscationStrategy::SharedAccount, catalog, history, rules, 43);
    EXPECT_NE(a.extra_feedback, c.extra_feedback);
}

TEST_F(ObfuscationFixture, Errors) {
    EXPECT_THROW(obfuscate("u1", interaction("u1", "novel", Action::Like), ObfuscationStrategy::Psychologist, catalog, history,
                           rules, 1),
                 ValidationError);
    Catalog bare;
    bare.add(item("dep", {"psychology", "depression"}));
    try {
        obfuscate("u1", trigger, ObfuscationStrategy::Psychologist, bare, {}, rules, 1);
        FAIL() << "expected an error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("psychologist"), std::string::npos);
    }
    auto tainted = history;
    tainted.push_back(interaction("u1", "psych0", Action::Like));
    tainted.back().source = Source::Obfuscation;
    EXPECT_THROW(obfuscate("u1", trigger, ObfuscationStrategy::Psychologist, catalog, tainted, rules, 1), ValidationError);
    EXPECT_EQ(obfuscation_strategy_from_string("shared_account"), ObfuscationStrategy::SharedAccount);
    EXPECT_THROW(obfuscation_strategy_from_string("spy"), ConfigError);
}

TEST(PersonalityStore, RoundTripAndFaults) {
    const auto dir = temp_dir("store");
    auto p = personality("u1", {"a", "tab\there"}, {"b"});
    p.entries[0].provenance = {"x1", "x2"};
    p.clock = 17;
    const auto path = dir / "u1.txt";
    store_save(p, path);
    EXPECT_EQ(store_load(path), p);

    auto f1 = std::async(std::launch::async, [&] { return store_load(path); });
    auto f2 = std::async(std::launch::async, [&] { return store_load(path); });
    EXPECT_EQ(f1.get(), f2.get());

    std::stringstream full;
    write_personality(full, p);
    const auto text = full.str();
    const auto truncated = dir / "trunc.txt";
    {
        std::ofstream os(truncated, std::ios::binary);
        os << text.substr(0, text.size() / 2);
    }
    const auto before = std::filesystem::file_size(truncated);
    EXPECT_THROW(store_load(truncated), DecodeError);
    EXPECT_EQ(std::filesystem::file_size(truncated), before);

    std::istringstream future("rah-personality v9\nuser\tu1\n");
    EXPECT_THROW(read_personality(future), MigrationError);
    std::istringstream junk("hello\n");
    EXPECT_THROW(read_personality(junk), DecodeError);
    EXPECT_THROW(store_load(dir / "missing.txt"), LookupError);
    std::filesystem::remove_all(dir);
}
