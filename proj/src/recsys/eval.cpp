#include "rah/recsys.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace rah {

std::vector<std::uint32_t> rank(const Recommender& model, std::uint32_t user, const std::vector<std::uint32_t>& candidates,
                                const std::set<std::uint32_t>& exclude, std::size_t k) {
    std::vector<std::pair<double, std::uint32_t>> scored;
    scored.reserve(candidates.size());
    for (auto i : candidates)
        if (!exclude.contains(i)) scored.emplace_back(model.score(user, i), i);
    if (scored.empty()) throw ValidationError("no candidates left to rank for user index " + std::to_string(user));
    auto better = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
    const auto n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);
    std::vector<std::uint32_t> out;
    out.reserve(n);
    for (std::size_t r = 0; r < n; ++r) out.push_back(scored[r].second);
    return out;
}

double ndcg_at_k(const std::vector<std::uint32_t>& ranked, const std::set<std::uint32_t>& relevant, std::size_t k) {
    if (relevant.empty()) return 0.0;
    double dcg = 0.0, idcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r)
        if (relevant.contains(ranked[r])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    for (std::size_t r = 0; r < std::min(k, relevant.size()); ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    return dcg / idcg;
}

double recall_at_k(const std::vector<std::uint32_t>& ranked, const std::set<std::uint32_t>& relevant, std::size_t k) {
    if (relevant.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) hits += relevant.contains(ranked[r]) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

EvalReport evaluate(const Recommender& model, const std::vector<TestCase>& test, const std::vector<std::uint32_t>& candidates,
                    const std::vector<std::set<std::uint32_t>>& train_positives, std::size_t k) {
    std::map<std::uint32_t, std::set<std::uint32_t>> relevant;
    for (const auto& t : test) relevant[t.user].insert(t.item);
    const std::set<std::uint32_t> pool(candidates.begin(), candidates.end());
    static const std::set<std::uint32_t> none;

    EvalReport report;
    for (auto& [user, items] : relevant) {
        const auto& exclude = user < train_positives.size() ? train_positives[user] : none;
        std::set<std::uint32_t> rel;
        for (auto i : items)
            if (pool.contains(i) && !exclude.contains(i)) rel.insert(i);
        if (rel.empty()) {
            spdlog::warn("evaluate: user index {} has no rankable relevant item; skipped", user);
            continue;
        }
        const auto ranked = rank(model, user, candidates, exclude, k);
        report.per_user.push_back({user, ndcg_at_k(ranked, rel, k), recall_at_k(ranked, rel, k)});
    }
    // Fixed user-index order keeps the reduction independent of test order.
    for (const auto& u : report.per_user) {
        report.ndcg += u.ndcg;
        report.recall += u.recall;
    }
    if (!report.per_user.empty()) {
        report.ndcg /= static_cast<double>(report.per_user.size());
        report.recall /= static_cast<double>(report.per_user.size());
    }
    return report;
}

EvalReport evaluate_rated(const Recommender& model, const std::vector<RatedCase>& test, std::size_t k) {
    std::map<std::uint32_t, std::pair<std::vector<std::uint32_t>, std::set<std::uint32_t>>> by_user;
    for (const auto& t : test) {
        auto& [candidates, rel] = by_user[t.user];
        candidates.push_back(t.item);
        if (t.relevant) rel.insert(t.item);
    }
    EvalReport report;
    static const std::set<std::uint32_t> none;
    for (const auto& [user, entry] : by_user) {
        const auto& [candidates, rel] = entry;
        if (rel.empty()) continue;
        const auto ranked = rank(model, user, candidates, none, k);
        report.per_user.push_back({user, ndcg_at_k(ranked, rel, k), recall_at_k(ranked, rel, k)});
    }
    for (const auto& u : report.per_user) {
        report.ndcg += u.ndcg;
        report.recall += u.recall;
    }
    if (!report.per_user.empty()) {
        report.ndcg /= static_cast<double>(report.per_user.size());
        report.recall /= static_cast<double>(report.per_user.size());
    }
    return report;
}

} // namespace rah
