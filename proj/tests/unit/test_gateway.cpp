#include "helpers.hpp"

#include "rah/gateway/cache.hpp"
#include "rah/gateway/remote.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

using namespace rah;
using namespace testing_helpers;

namespace {

AgentRequest perceive_request(const Item& i, double temperature = 0.0) {
    return AgentRequest{PerceiveInput{i}, DecodeParams{temperature, 512}};
}

AgentRequest act_request(const Item& i, const Personality& p) { return AgentRequest{ActInput{perceived(i), p}, {}}; }

std::string chat_body(const std::string& content) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

struct ScriptedTransport : ChatTransport {
    std::vector<std::string> replies; // content strings; "!transport" throws TransportError
    std::vector<std::string> prompts;
    std::size_t calls = 0;

    std::string post(const std::string&, const std::string& body, const std::map<std::string, std::string>& headers) override {
        EXPECT_EQ(headers.at("Authorization"), "Bearer secret");
        const auto j = nlohmann::json::parse(body);
        prompts.push_back(j["messages"].back()["content"].get<std::string>());
        const auto& r = replies.at(std::min(calls, replies.size() - 1));
        ++calls;
        if (r == "!transport") throw TransportError("connection reset");
        return chat_body(r);
    }
};

RemoteConfig remote_config() { return RemoteConfig{"https://llm.example.test/v1/chat/completions", "secret", "test-model"}; }

RetryPolicy no_sleep() {
    RetryPolicy r;
    r.sleep = [](std::chrono::milliseconds) {};
    return r;
}

// Counts calls to an inner backend.
struct CountingBackend : Backend {
    std::shared_ptr<Backend> inner;
    std::size_t calls = 0;
    explicit CountingBackend(std::shared_ptr<Backend> b) : inner(std::move(b)) {}
    AgentResponse complete(const AgentRequest& r) override {
        ++calls;
        return inner->complete(r);
    }
    std::string identity() const override { return inner->identity(); }
};

} // namespace

// --- oracle -------------------------------------------------------------------

TEST(Oracle, PerceiveIsIdentityOnTags) {
    auto w = world_of({item("coco", {"family", "animation"})});
    OracleBackend b(w);
    const auto r = std::get<PerceivedItem>(b.complete(perceive_request(w->catalog.at("coco"))).result);
    EXPECT_EQ(r.attributes, (FacetSet{"family", "animation"}));
    EXPECT_EQ(r.description, w->catalog.at("coco").title);
}

TEST(Oracle, ActScoresLikesMinusDislikes) {
    auto w = world_of({item("ab", {"a", "b"}), item("a", {"a"})});
    OracleBackend b(w);
    auto o = std::get<ActOutcome>(b.complete(act_request(w->catalog.at("ab"), personality("u1", {"a"}, {}))).result);
    EXPECT_EQ(o.predicted, Action::Like);
    o = std::get<ActOutcome>(b.complete(act_request(w->catalog.at("a"), personality("u1", {}, {"a"}))).result);
    EXPECT_EQ(o.predicted, Action::Dislike);
    o = std::get<ActOutcome>(b.complete(act_request(w->catalog.at("ab"), personality("u1", {"a"}, {"b"}))).result);
    EXPECT_EQ(o.predicted, Action::Dislike);
    EXPECT_TRUE(o.uncertain);
}

TEST(Oracle, UnknownItemOrUserIsLookupError) {
    auto w = world_of({item("a", {"a"})});
    OracleBackend b(w);
    EXPECT_THROW(b.complete(perceive_request(item("zzz", {"a"}))), LookupError);
    EXPECT_THROW(b.complete(act_request(w->catalog.at("a"), personality("stranger", {"a"}, {}))), LookupError);
}

TEST(Oracle, DeterministicResponseBytes) {
    auto w = world_of({item("a", {"a", "b"})});
    OracleBackend b1(w), b2(std::make_shared<SyntheticWorld>(*w));
    const auto req = act_request(w->catalog.at("a"), personality("u1", {"a"}, {"b"}));
    const auto r1 = b1.complete(req);
    const auto r2 = b2.complete(req);
    EXPECT_EQ(r1.raw_text, r2.raw_text);
    EXPECT_EQ(response_to_json(r1).dump(), response_to_json(r2).dump());
    EXPECT_EQ(b1.identity(), b2.identity());
}

TEST(Oracle, ConcurrentCallsAgree) {
    auto w = world_of({item("a", {"a", "b"})});
    OracleBackend b(w);
    const auto req = act_request(w->catalog.at("a"), personality("u1", {"a"}, {}));
    const auto expected = b.complete(req).raw_text;
    std::vector<std::thread> threads;
    std::atomic<int> mismatches{0};
    for (int t = 0; t < 8; ++t)
        threads.emplace_back([&] {
            for (int i = 0; i < 200; ++i)
                if (b.complete(req).raw_text != expected) ++mismatches;
        });
    for (auto& t : threads) t.join();
    EXPECT_EQ(mismatches.load(), 0);
}

TEST(SyntheticHuman, RuleAndNoiseDeterminism) {
    auto w = world_of({item("ab", {"a", "b"}), item("c", {"c"})}, {"a"}, {"c"});
    EXPECT_EQ(synthetic_human_action(*w, "u1", w->catalog.at("ab")), Action::Like);
    EXPECT_EQ(synthetic_human_action(*w, "u1", w->catalog.at("c")), Action::Dislike);
    w->users.at("u1").noise_rate = 0.5;
    w->seed = 9;
    const auto first = synthetic_human_action(*w, "u1", w->catalog.at("ab"));
    for (int i = 0; i < 10; ++i) EXPECT_EQ(synthetic_human_action(*w, "u1", w->catalog.at("ab")), first);
}

// --- remote -------------------------------------------------------------------

TEST(Remote, ParsesPerceiveReply) {
    auto t = std::make_shared<ScriptedTransport>();
    t->replies = {"DESCRIPTION: A family film about music.\nATTRIBUTES: family, music, animation"};
    RemoteBackend b(remote_config(), TemplateSet::defaults(), t, no_sleep());
    const auto r = b.complete(perceive_request(item("coco", {"family"})));
    const auto& p = std::get<PerceivedItem>(r.result);
    EXPECT_FALSE(p.description.empty());
    EXPECT_GE(p.attributes.size(), 1u);
    EXPECT_EQ(r.backend, BackendKind::Remote);
    EXPECT_EQ(r.retry_count, 0);
    EXPECT_NE(t->prompts.at(0).find("Title coco"), std::string::npos);
}

TEST(Remote, RetriesMalformedRepliesWithReminder) {
    auto t = std::make_shared<ScriptedTransport>();
    t->replies = {"I think it is nice.", "Sure! Here you go", "DESCRIPTION: ok\nATTRIBUTES: family"};
    RemoteBackend b(remote_config(), TemplateSet::defaults(), t, no_sleep());
    const auto r = b.complete(perceive_request(item("coco", {"family"})));
    EXPECT_EQ(r.retry_count, 2);
    ASSERT_EQ(t->prompts.size(), 3u);
    EXPECT_EQ(t->prompts[0].find(RemoteBackend::kFormatReminder), std::string::npos);
    EXPECT_NE(t->prompts[1].find(RemoteBackend::kFormatReminder), std::string::npos);
}

TEST(Remote, GivesUpAfterTwoFormatRetries) {
    auto t = std::make_shared<ScriptedTransport>();
    t->replies = {"nonsense"};
    RemoteBackend b(remote_config(), TemplateSet::defaults(), t, no_sleep());
    EXPECT_THROW(b.complete(perceive_request(item("coco", {"family"}))), MalformedResponse);
    EXPECT_EQ(t->calls, 3u);
}

TEST(Remote, TransportErrorsBackOffThenSucceed) {
    auto t = std::make_shared<ScriptedTransport>();
    t->replies = {"!transport", "!transport", "DESCRIPTION: ok\nATTRIBUTES: x"};
    std::vector<std::chrono::milliseconds> waits;
    RetryPolicy retry;
    retry.sleep = [&](std::chrono::milliseconds d) { waits.push_back(d); };
    RemoteBackend b(remote_config(), TemplateSet::defaults(), t, retry);
    EXPECT_NO_THROW(b.complete(perceive_request(item("coco", {"family"}))));
    ASSERT_EQ(waits.size(), 2u);
    EXPECT_LT(waits[0], waits[1]);
}

TEST(Remote, TransportErrorsExhausted) {
    auto t = std::make_shared<ScriptedTransport>();
    t->replies = {"!transport"};
    RemoteBackend b(remote_config(), TemplateSet::defaults(), t, no_sleep());
    EXPECT_THROW(b.complete(perceive_request(item("coco", {"family"}))), TransportError);
}

TEST(Remote, MissingCredentialsIsConfigError) {
    ::unsetenv("RAH_LLM_ENDPOINT");
    ::unsetenv("RAH_LLM_API_KEY");
    ::unsetenv("RAH_LLM_MODEL");
    EXPECT_THROW(RemoteConfig::from_env().validate(), ConfigError);
    auto cfg = remote_config();
    cfg.api_key.clear();
    EXPECT_THROW(RemoteBackend(cfg, TemplateSet::defaults(), std::make_shared<ScriptedTransport>()), ConfigError);
}

TEST(Remote, TemplateWithoutPlaceholdersIsConfigError) {
    auto templates = TemplateSet::defaults();
    templates.set(AgentKind::Perceive, "Describe the item.");
    auto t = std::make_shared<ScriptedTransport>();
    t->replies = {"DESCRIPTION: ok\nATTRIBUTES: x"};
    RemoteBackend b(remote_config(), templates, t, no_sleep());
    EXPECT_THROW(b.complete(perceive_request(item("coco", {"family"}))), ConfigError);
    EXPECT_EQ(t->calls, 0u);
}

TEST(Remote, UnknownPlaceholderIsConfigError) {
    auto templates = TemplateSet::defaults();
    templates.set(AgentKind::Perceive, "Item {{title}} by {{director}}");
    EXPECT_THROW(templates.render(AgentKind::Perceive, {{"title", "Coco"}}), ConfigError);
}

TEST(Remote, ShippedTemplatesMatchDefaults) {
    const auto loaded = TemplateSet::load(RAH_SOURCE_DIR "/templates");
    const auto defaults = TemplateSet::defaults();
    for (auto k : {AgentKind::Perceive, AgentKind::Learn, AgentKind::Act, AgentKind::Critic, AgentKind::Reflect})
        EXPECT_EQ(loaded.get(k), defaults.get(k)) << to_string(k);
}

TEST(ResponseGrammar, FormatThenParseRoundTripsOracleResults) {
    auto w = world_of({item("ab", {"a", "b"}), item("c", {"c"})}, {"a"});
    OracleBackend oracle(w);
    const auto ab = perceived(w->catalog.at("ab"));
    const auto x = interaction("u1", "ab", Action::Like);
    auto p = personality("u1", {"a"}, {"c"});
    for (auto& e : p.entries) e.created_at = p.stamp();
    ActOutcome wrong{"h", "p", "c", Action::Dislike, false};
    std::vector<AgentRequest> requests{
        perceive_request(w->catalog.at("ab")),
        AgentRequest{LearnInput{ab, x, p, std::nullopt}, {}},
        act_request(w->catalog.at("ab"), p),
        AgentRequest{CriticInput{ab, p, wrong, Action::Like}, {}},
        AgentRequest{ReflectInput{p, CandidateTraits{{trait(Action::Dislike, "a", "u1:ab")}, {}, "w", "w"}}, {}},
    };
    for (const auto& req : requests) {
        const auto truth = oracle.complete(req);
        const auto parsed = parse_response(req, format_response(truth.result));
        EXPECT_EQ(nlohmann::json(response_to_json(AgentResponse{parsed, "", BackendKind::Oracle, 0})["result"]),
                  response_to_json(truth)["result"])
            << to_string(req.kind());
    }
}

TEST(ResponseGrammar, MissingKeyIsMalformed) {
    const auto req = act_request(item("a", {"a"}), personality("u1", {}, {}));
    EXPECT_THROW(parse_response(req, "HYPOTHESIS: x\nPERCEPTION: y\nCOMMENT: z"), MalformedResponse);
    EXPECT_THROW(parse_response(req, "HYPOTHESIS: x\nPERCEPTION: y\nCOMMENT: z\nPREDICTION: maybe"), MalformedResponse);
}

// --- cache --------------------------------------------------------------------

TEST(Cache, SecondIdenticalRequestSkipsInnerBackend) {
    auto t = std::make_shared<ScriptedTransport>();
    t->replies = {"DESCRIPTION: ok\nATTRIBUTES: family"};
    auto counting = std::make_shared<CountingBackend>(
        std::make_shared<RemoteBackend>(remote_config(), TemplateSet::defaults(), t, no_sleep()));
    const auto dir = temp_dir("cache-hit");
    CachedBackend cache(counting, dir);
    const auto req = perceive_request(item("coco", {"family"}));
    const auto r1 = cache.complete(req);
    const auto r2 = cache.complete(req);
    EXPECT_EQ(t->calls, 1u);
    EXPECT_EQ(counting->calls, 1u);
    EXPECT_EQ(cache.hits(), 1u);
    EXPECT_EQ(response_to_json(r1), response_to_json(r2));
    std::filesystem::remove_all(dir);
}

TEST(Cache, DecodeParamsAreInTheKey) {
    auto w = world_of({item("a", {"a"})});
    CachedBackend cache(std::make_shared<OracleBackend>(w), temp_dir("cache-key"));
    EXPECT_NE(cache.key(perceive_request(w->catalog.at("a"), 0.0)), cache.key(perceive_request(w->catalog.at("a"), 0.7)));
    EXPECT_EQ(cache.key(perceive_request(w->catalog.at("a"), 0.0)), cache.key(perceive_request(w->catalog.at("a"), 0.0)));
}

TEST(Cache, BackendIdentityIsInTheKey) {
    auto w1 = world_of({item("a", {"a"})});
    auto w2 = world_of({item("a", {"a", "b"})});
    const auto dir = temp_dir("cache-id");
    CachedBackend c1(std::make_shared<OracleBackend>(w1), dir), c2(std::make_shared<OracleBackend>(w2), dir);
    const auto req = perceive_request(w1->catalog.at("a"));
    EXPECT_NE(c1.key(req), c2.key(req));
    std::filesystem::remove_all(dir);
}

TEST(Cache, TruncatedEntryIsRecomputedAndRewritten) {
    auto w = world_of({item("a", {"a", "b"})});
    auto counting = std::make_shared<CountingBackend>(std::make_shared<OracleBackend>(w));
    const auto dir = temp_dir("cache-trunc");
    CachedBackend cache(counting, dir);
    const auto req = perceive_request(w->catalog.at("a"));
    const auto good = cache.complete(req);
    const auto path = cache.path_for(cache.key(req));
    std::string original;
    {
        std::ifstream is(path);
        std::stringstream ss;
        ss << is.rdbuf();
        original = ss.str();
    }
    std::filesystem::resize_file(path, original.size() / 2);
    const auto again = cache.complete(req);
    EXPECT_EQ(counting->calls, 2u);
    EXPECT_EQ(response_to_json(again), response_to_json(good));
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    EXPECT_EQ(ss.str(), original);
    std::filesystem::remove_all(dir);
}

TEST(Cache, ConcurrentRequestsAllAgree) {
    auto w = world_of({item("a", {"a", "b"})});
    const auto dir = temp_dir("cache-conc");
    CachedBackend cache(std::make_shared<OracleBackend>(w), dir);
    const auto req = perceive_request(w->catalog.at("a"));
    const auto expected = OracleBackend(w).complete(req).raw_text;
    std::vector<std::thread> threads;
    std::atomic<int> bad{0};
    for (int t = 0; t < 8; ++t)
        threads.emplace_back([&] {
            for (int i = 0; i < 50; ++i)
                if (cache.complete(req).raw_text != expected) ++bad;
        });
    for (auto& t : threads) t.join();
    EXPECT_EQ(bad.load(), 0);
    std::filesystem::remove_all(dir);
}
