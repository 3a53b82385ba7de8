#include "helpers.hpp"

#include "rah/recsys.hpp"
#include "rah/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace rah;
using namespace testing_helpers;

namespace {

Catalog catalog_of(std::size_t n, std::size_t domains = 1) {
    static const DomainTag ds[] = {DomainTag::movie(), DomainTag::book(), DomainTag::game()};
    Catalog c;
    for (std::size_t i = 0; i < n; ++i) c.add(item("i" + std::to_string(i), {"t" + std::to_string(i % 3)}, ds[i % domains]));
    return c;
}

std::vector<UserId> user_ids(std::size_t n) {
    std::vector<UserId> out;
    for (std::size_t u = 0; u < n; ++u) out.push_back("u" + std::to_string(u));
    return out;
}

// Random Like/Dislike dataset for gradient and determinism checks.
RecDataset random_dataset(std::uint64_t seed, std::size_t users = 6, std::size_t items = 9) {
    RecDataset d(catalog_of(items, 3), user_ids(users));
    Rng rng(seed);
    for (std::uint32_t u = 0; u < users; ++u)
        for (std::uint32_t i = 0; i < items; ++i)
            if (rng.bernoulli(0.4)) d.add(u, i, rng.bernoulli(0.5) ? 1 : 0, 0.5 + rng.uniform());
    return d;
}

class FixedScores final : public Recommender {
public:
    explicit FixedScores(std::vector<double> s) : s_(std::move(s)) {
        n_users_ = 1;
        n_items_ = s_.size();
    }
    ModelKind kind() const noexcept override { return ModelKind::Popularity; }
    double score(std::uint32_t, std::uint32_t item) const override { return s_.at(item); }

private:
    void write_body(std::ostream&) const override {}
    std::vector<double> s_;
};

std::vector<std::uint32_t> all_items(std::size_t n) {
    std::vector<std::uint32_t> v(n);
    for (std::uint32_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

} // namespace

TEST(RecDatasetTest, IndicesAndWeights) {
    const auto c = catalog_of(4, 2);
    auto d = RecDataset::build(c, {interaction("b", "i1", Action::Like), interaction("a", "i2", Action::Dislike)}, {"c"});
    EXPECT_EQ(d.users(), (std::vector<UserId>{"a", "b", "c"}));
    EXPECT_EQ(d.item_index("i3"), 3u);
    EXPECT_EQ(d.n_domains(), 2u);
    EXPECT_EQ(d.domain_items(DomainTag::book()), (std::vector<std::uint32_t>{1, 3}));
    EXPECT_THROW(d.domain_items(DomainTag::game()), LookupError);
    EXPECT_THROW(d.user_index("zz"), LookupError);
    EXPECT_THROW(d.add(9, 0, 1), LookupError);
    EXPECT_THROW(d.add(0, 0, 1, 0.0), ValidationError);

    d.apply_item_weights({1.0, 3.0, 2.0, 1.0});
    ASSERT_EQ(d.examples().size(), 2u);
    EXPECT_DOUBLE_EQ(d.examples()[0].weight, 3.0);
    EXPECT_EQ(d.examples()[0].label, 1);
    EXPECT_DOUBLE_EQ(d.examples()[1].weight, 2.0);
    EXPECT_EQ(d.examples()[1].label, 0);
    EXPECT_THROW(d.apply_item_weights({1.0}), ValidationError);
    EXPECT_EQ(d.positives()[d.user_index("b")], std::set<std::uint32_t>{1});
}

TEST(Models, MFScoreArithmetic) {
    MFModel m(2, 3, 4);
    std::fill(m.params().begin(), m.params().end(), 0.0);
    m.global_bias() = 0.5;
    m.user_bias(1) = 0.2;
    m.item_bias(2) = 0.1;
    EXPECT_NEAR(m.score(1, 2), 0.8, 1e-12);
    m.user_factors(1)[0] = 2.0;
    m.item_factors(2)[0] = 0.5;
    EXPECT_NEAR(m.score(1, 2), 1.8, 1e-12);
    EXPECT_THROW(m.score(2, 0), LookupError);
    EXPECT_THROW(m.score(0, 3), LookupError);
}

TEST(Models, FMPairwiseMatchesBruteForce) {
    FMModel m(2, 2, {0, 0}, 1, 2);
    std::fill(m.params().begin(), m.params().end(), 0.0);
    const auto f = m.active_features(0, 1);
    m.factors(f[0])[0] = 1.0;
    m.factors(f[1])[0] = 1.0;
    EXPECT_NEAR(m.pairwise(0, 1), 1.0, 1e-12);

    Rng rng(3);
    FMModel r(5, 7, {0, 1, 2, 0, 1, 2, 0}, 3, 6);
    for (auto& p : r.params()) p = rng.uniform() * 2 - 1;
    for (std::uint32_t u = 0; u < 5; ++u)
        for (std::uint32_t i = 0; i < 7; ++i) {
            const auto a = r.active_features(u, i);
            double brute = 0.0;
            for (std::size_t x = 0; x < 3; ++x)
                for (std::size_t y = x + 1; y < 3; ++y)
                    for (int k = 0; k < r.dim(); ++k) brute += r.factors(a[x])[k] * r.factors(a[y])[k];
            EXPECT_NEAR(r.pairwise(u, i), brute, 1e-10);
            double linear = r.params()[0];
            for (auto feat : a) linear += r.linear(feat);
            EXPECT_NEAR(r.score(u, i), linear + brute, 1e-10);
        }
}

TEST(Models, KNNHandComputedScore) {
    // Users: 0 liked only item 1; 1 liked items 0 and 1; 2 liked item 0.
    // cos(0, 1) = 1 / sqrt(2 * 2) = 0.5.
    RecDataset d(catalog_of(3), user_ids(3));
    d.add(0, 1, 1);
    d.add(1, 0, 1);
    d.add(1, 1, 1);
    d.add(2, 0, 1);
    d.add(0, 2, 0);
    KNNModel m(3, 3, 1);
    m.fit(d);
    EXPECT_NEAR(m.similarity(0, 1), 0.5, 1e-12);
    EXPECT_NEAR(m.score(0, 0), 0.5, 1e-12);
    EXPECT_NEAR(m.score(2, 2), 0.0, 1e-12);
}

TEST(Models, PopularityOrderIsFrequencyOrder) {
    RecDataset d(catalog_of(4), user_ids(4));
    for (std::uint32_t u = 0; u < 4; ++u) d.add(u, 2, 1);
    for (std::uint32_t u = 0; u < 3; ++u) d.add(u, 0, 1);
    d.add(0, 3, 1);
    d.add(1, 1, 0);
    const auto m = fit(ModelKind::Popularity, d, FitParams{}, 1);
    EXPECT_EQ(rank(*m, 0, all_items(4), {}, 4), (std::vector<std::uint32_t>{2, 0, 3, 1}));
}

TEST(Ranking, OrderTiesAndExclusion) {
    FixedScores two({0.1, 0.9});
    EXPECT_EQ(rank(two, 0, all_items(2), {}), (std::vector<std::uint32_t>{1, 0}));
    FixedScores tie({0.5, 0.5, 0.7, 0.5});
    EXPECT_EQ(rank(tie, 0, all_items(4), {}), (std::vector<std::uint32_t>{2, 0, 1, 3}));
    EXPECT_EQ(rank(tie, 0, all_items(4), {2, 0}), (std::vector<std::uint32_t>{1, 3}));
    EXPECT_EQ(rank(tie, 0, all_items(4), {}, 2), (std::vector<std::uint32_t>{2, 0}));
    EXPECT_THROW(rank(tie, 0, {1}, {1}), ValidationError);
    EXPECT_THROW(rank(tie, 0, {}, {}), ValidationError);
}

TEST(Metrics, HandComputedValues) {
    EXPECT_DOUBLE_EQ(ndcg_at_k({4, 1, 2}, {4}), 1.0);
    EXPECT_DOUBLE_EQ(recall_at_k({4, 1, 2}, {4}), 1.0);
    EXPECT_NEAR(ndcg_at_k({1, 2, 4}, {4}), 0.5, 1e-12);
    std::vector<std::uint32_t> ranked{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
    EXPECT_NEAR(recall_at_k(ranked, {3, 7, 20, 21, 22}), 0.4, 1e-12);
    EXPECT_DOUBLE_EQ(ndcg_at_k(ranked, {10, 11}), 0.0);
    // Two relevant at ranks 1 and 3: (1 + 0.5) / (1 + 1/log2(3)).
    EXPECT_NEAR(ndcg_at_k({5, 6, 7}, {5, 7}), 1.5 / (1.0 + 1.0 / std::log2(3.0)), 1e-12);
}

TEST(Metrics, BoundedOnRandomRankings) {
    Rng rng(11);
    for (int t = 0; t < 1000; ++t) {
        auto ranked = all_items(30);
        rng.shuffle(ranked.begin(), ranked.end());
        ranked.resize(1 + rng.below(30));
        std::set<std::uint32_t> rel;
        const auto n = 1 + rng.below(12);
        while (rel.size() < n) rel.insert(static_cast<std::uint32_t>(rng.below(30)));
        const double nd = ndcg_at_k(ranked, rel), re = recall_at_k(ranked, rel);
        EXPECT_GE(nd, 0.0);
        EXPECT_LE(nd, 1.0 + 1e-12);
        EXPECT_GE(re, 0.0);
        EXPECT_LE(re, 1.0);
    }
}

TEST(Evaluate, MacroAverageSkipAndPermutationInvariance) {
    FixedScores s({0.9, 0.8, 0.7, 0.6});
    struct Multi final : Recommender {
        const FixedScores& inner;
        explicit Multi(const FixedScores& f) : inner(f) {
            n_users_ = 3;
            n_items_ = 4;
        }
        ModelKind kind() const noexcept override { return ModelKind::Popularity; }
        double score(std::uint32_t, std::uint32_t i) const override { return inner.score(0, i); }
        void write_body(std::ostream&) const override {}
    } m(s);
    std::vector<TestCase> test{{0, 0}, {1, 2}};
    std::vector<std::set<std::uint32_t>> train(3);
    auto r = evaluate(m, test, all_items(4), train);
    ASSERT_EQ(r.per_user.size(), 2u);
    EXPECT_NEAR(r.ndcg, (1.0 + 0.5) / 2, 1e-12);
    // Training positives are removed from the ranking: user 1 now sees item 2 at rank 2.
    train[1] = {0};
    r = evaluate(m, test, all_items(4), train);
    EXPECT_NEAR(r.per_user[1].ndcg, 1.0 / std::log2(3.0), 1e-12);
    std::reverse(test.begin(), test.end());
    const auto r2 = evaluate(m, test, all_items(4), train);
    EXPECT_EQ(r2.ndcg, r.ndcg);
    EXPECT_EQ(r2.recall, r.recall);

    const std::vector<RatedCase> rated{{0, 3, true}, {0, 0, false}, {1, 1, false}, {2, 2, true}};
    const auto rr = evaluate_rated(m, rated);
    ASSERT_EQ(rr.per_user.size(), 2u);
    EXPECT_NEAR(rr.per_user[0].ndcg, 1.0 / std::log2(3.0), 1e-12);
    EXPECT_DOUBLE_EQ(rr.per_user[1].ndcg, 1.0);
}

TEST(Training, GradientsMatchFiniteDifferences) {
    const auto d = random_dataset(5);
    for (auto kind : {ModelKind::MF, ModelKind::FM}) {
        EXPECT_LE(grad_check(kind, d, d.examples(), 1e-5, 17, 3), 1e-4) << to_string(kind);
        // Saturated examples: huge scores drive the loss to ~0.
        EXPECT_LE(grad_check(kind, d, d.examples(), 1e-5, 18, 1, 4, 0.0), 1e-4) << to_string(kind);
    }
}

TEST(Training, LossIsNonIncreasingWithSmallSteps) {
    const auto d = random_dataset(8);
    FitParams p;
    p.learning_rate = 0.005;
    p.epochs = 30;
    p.dim = 4;
    for (auto kind : {ModelKind::MF, ModelKind::FM}) {
        const auto m = fit(kind, d, p, 4);
        const auto& h = m->loss_history();
        ASSERT_EQ(h.size(), 30u);
        for (std::size_t e = 1; e < h.size(); ++e) EXPECT_LE(h[e], h[e - 1] + 1e-6) << to_string(kind) << " epoch " << e;
    }
}

TEST(Training, DeterministicAndPersistent) {
    const auto d = random_dataset(9);
    const auto dir = temp_dir("models");
    for (auto kind : all_model_kinds()) {
        const auto a = fit(kind, d, FitParams{}, 21);
        const auto b = fit(kind, d, FitParams{}, 21);
        std::ostringstream sa, sb;
        a->write(sa);
        b->write(sb);
        EXPECT_EQ(sa.str(), sb.str()) << to_string(kind);

        const auto path = dir / (std::string(to_string(kind)) + ".bin");
        a->save(path);
        const auto loaded = load_model(path);
        EXPECT_EQ(loaded->kind(), kind);
        for (std::uint32_t u = 0; u < d.n_users(); ++u)
            for (std::uint32_t i = 0; i < d.n_items(); ++i) EXPECT_EQ(loaded->score(u, i), a->score(u, i));

        const auto bytes = sa.str();
        std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
        EXPECT_THROW(read_model(truncated), DecodeError);
        auto bumped = bytes;
        bumped[4] = static_cast<char>(kModelVersion + 1);
        std::istringstream future(bumped);
        EXPECT_THROW(read_model(future), MigrationError);
    }
    std::istringstream junk("nope");
    EXPECT_THROW(read_model(junk), DecodeError);
    std::filesystem::remove_all(dir);
}

TEST(Training, MFSeparatesLikedTag) {
    // One user Likes every item tagged t0 and Dislikes the rest; others
    // provide background signal. Held-out t0 items must outrank the others.
    Catalog c;
    for (int i = 0; i < 30; ++i) c.add(item("i" + std::to_string(i), {"t" + std::to_string(i % 3)}));
    auto w = world_of({}, {"t0"}, {"t1", "t2"}, "target");
    w->catalog = c;
    w->users.emplace("other0", SyntheticUser{{"t0"}, {"t1", "t2"}, 0.0, UserRole::Background});
    w->users.emplace("other1", SyntheticUser{{"t0"}, {"t1", "t2"}, 0.0, UserRole::Background});
    std::vector<Interaction> xs;
    std::set<std::uint32_t> held_out;
    for (const auto& [u, _] : w->users)
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (u == "target" && i >= 24) {
                held_out.insert(static_cast<std::uint32_t>(i));
                continue;
            }
            const auto& it = c.items()[i];
            xs.push_back(interaction(u, it.id, synthetic_human_action(*w, u, it)));
        }
    const auto d = RecDataset::build(c, xs);
    FitParams p;
    p.epochs = 60;
    p.dim = 8;
    const auto m = fit(ModelKind::MF, d, p, 2);
    const auto target = d.user_index("target");
    std::vector<std::uint32_t> held(held_out.begin(), held_out.end());
    const auto ranked = rank(*m, target, held, {}, held.size());
    for (std::size_t r = 0; r < 2; ++r) EXPECT_EQ(ranked[r] % 3, 0u) << "rank " << r;
}

TEST(Training, RejectsBadParams) {
    FitParams p;
    p.dim = 0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = FitParams{};
    p.learning_rate = 0.0;
    EXPECT_THROW(p.validate(), ConfigError);
    EXPECT_EQ(model_kind_from_string("ItemKNN"), ModelKind::ItemKNN);
    EXPECT_THROW(model_kind_from_string("LightGCN"), ConfigError);
}

TEST(Training, DivergenceIsReported) {
    const auto d = random_dataset(12);
    FitParams p;
    p.learning_rate = 1e200;
    p.epochs = 5;
    try {
        fit(ModelKind::MF, d, p, 1);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch " + std::to_string(e.epoch())), std::string::npos);
        EXPECT_GE(e.epoch(), 1);
    }
}
