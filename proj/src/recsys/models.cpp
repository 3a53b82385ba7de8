#include "rah/recsys.hpp"

#include "rah/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace rah {

namespace {

double softplus(double s) { return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }
double sigmoid(double s) {
    if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

} // namespace

void Recommender::check(std::uint32_t user, std::uint32_t item) const {
    if (user >= n_users_) throw LookupError("unknown user index " + std::to_string(user));
    if (item >= n_items_) throw LookupError("unknown item index " + std::to_string(item));
}

double FactorModel::example_objective(const Example& e, double l2) const {
    const double s = score(e.user, e.item);
    return e.weight * (softplus(s) - e.label * s) + 0.5 * l2 * example_penalty(e);
}

double FactorModel::objective(const std::vector<Example>& examples, double l2) const {
    double total = 0.0;
    for (const auto& e : examples) total += example_objective(e, l2);
    return total;
}

// --- MF ---------------------------------------------------------------------

MFModel::MFModel(std::size_t n_users, std::size_t n_items, int dim) : dim_(dim) {
    n_users_ = n_users;
    n_items_ = n_items;
    uf_ = 1 + n_users + n_items;
    if_ = uf_ + n_users * dim;
    theta_.assign(if_ + n_items * dim, 0.0);
}

double MFModel::score(std::uint32_t user, std::uint32_t item) const {
    check(user, item);
    const double* u = uf(user);
    const double* v = vf(item);
    double s = theta_[0] + theta_[1 + user] + theta_[1 + n_users_ + item];
    for (int k = 0; k < dim_; ++k) s += u[k] * v[k];
    return s;
}

double MFModel::example_penalty(const Example& e) const {
    const double bu = theta_[1 + e.user], bi = theta_[1 + n_users_ + e.item];
    double p = bu * bu + bi * bi;
    const double* u = uf(e.user);
    const double* v = vf(e.item);
    for (int k = 0; k < dim_; ++k) p += u[k] * u[k] + v[k] * v[k];
    return p;
}

void MFModel::example_gradient(const Example& e, double l2, std::vector<std::pair<std::size_t, double>>& out) const {
    const double g = e.weight * (sigmoid(score(e.user, e.item)) - e.label);
    const std::size_t bu = 1 + e.user, bi = 1 + n_users_ + e.item;
    out.emplace_back(0, g);
    out.emplace_back(bu, g + l2 * theta_[bu]);
    out.emplace_back(bi, g + l2 * theta_[bi]);
    const std::size_t uo = uf_ + e.user * dim_, vo = if_ + e.item * dim_;
    for (int k = 0; k < dim_; ++k) {
        out.emplace_back(uo + k, g * theta_[vo + k] + l2 * theta_[uo + k]);
        out.emplace_back(vo + k, g * theta_[uo + k] + l2 * theta_[vo + k]);
    }
}

// --- FM ---------------------------------------------------------------------

FMModel::FMModel(std::size_t n_users, std::size_t n_items, std::vector<std::uint32_t> item_domain, std::size_t n_domains, int dim)
    : item_domain_(std::move(item_domain)), n_domains_(n_domains), dim_(dim) {
    if (item_domain_.size() != n_items) throw ValidationError("FM item domain map does not match item count");
    n_users_ = n_users;
    n_items_ = n_items;
    n_features_ = n_users + n_items + n_domains;
    vf_ = 1 + n_features_;
    theta_.assign(vf_ + n_features_ * dim, 0.0);
}

std::array<std::size_t, 3> FMModel::active_features(std::uint32_t user, std::uint32_t item) const {
    check(user, item);
    return {user, n_users_ + item, n_users_ + n_items_ + item_domain_[item]};
}

double FMModel::pairwise(std::uint32_t user, std::uint32_t item) const {
    const auto f = active_features(user, item);
    double total = 0.0;
    for (int k = 0; k < dim_; ++k) {
        double sum = 0.0, sq = 0.0;
        for (auto feat : f) {
            const double v = theta_[vf_ + feat * dim_ + k];
            sum += v;
            sq += v * v;
        }
        total += sum * sum - sq;
    }
    return 0.5 * total;
}

double FMModel::score(std::uint32_t user, std::uint32_t item) const {
    const auto f = active_features(user, item);
    double s = theta_[0];
    for (auto feat : f) s += theta_[1 + feat];
    return s + pairwise(user, item);
}

double FMModel::example_penalty(const Example& e) const {
    double p = 0.0;
    for (auto feat : active_features(e.user, e.item)) {
        p += theta_[1 + feat] * theta_[1 + feat];
        for (int k = 0; k < dim_; ++k) p += theta_[vf_ + feat * dim_ + k] * theta_[vf_ + feat * dim_ + k];
    }
    return p;
}

void FMModel::example_gradient(const Example& e, double l2, std::vector<std::pair<std::size_t, double>>& out) const {
    const auto f = active_features(e.user, e.item);
    const double g = e.weight * (sigmoid(score(e.user, e.item)) - e.label);
    out.emplace_back(0, g);
    for (auto feat : f) out.emplace_back(1 + feat, g + l2 * theta_[1 + feat]);
    for (int k = 0; k < dim_; ++k) {
        double sum = 0.0;
        for (auto feat : f) sum += theta_[vf_ + feat * dim_ + k];
        for (auto feat : f) {
            const std::size_t idx = vf_ + feat * dim_ + k;
            out.emplace_back(idx, g * (sum - theta_[idx]) + l2 * theta_[idx]);
        }
    }
}

// --- ItemKNN ----------------------------------------------------------------

KNNModel::KNNModel(std::size_t n_users, std::size_t n_items, int k) : k_(k) {
    n_users_ = n_users;
    n_items_ = n_items;
    item_users_.resize(n_items);
    user_likes_.resize(n_users);
    neighbors_.resize(n_items);
}

void KNNModel::fit(const RecDataset& data) {
    for (auto& v : item_users_) v.clear();
    for (auto& v : user_likes_) v.clear();
    for (const auto& e : data.examples())
        if (e.label == 1) user_likes_[e.user].push_back(e.item);
    for (std::uint32_t u = 0; u < n_users_; ++u) {
        auto& likes = user_likes_[u];
        std::sort(likes.begin(), likes.end());
        likes.erase(std::unique(likes.begin(), likes.end()), likes.end());
        for (auto i : likes) item_users_[i].push_back(u);
    }
    std::vector<std::unordered_map<std::uint32_t, std::uint32_t>> co(n_items_);
    for (const auto& likes : user_likes_)
        for (std::size_t a = 0; a < likes.size(); ++a)
            for (std::size_t b = a + 1; b < likes.size(); ++b) {
                ++co[likes[a]][likes[b]];
                ++co[likes[b]][likes[a]];
            }
    for (std::uint32_t i = 0; i < n_items_; ++i) {
        auto& nb = neighbors_[i];
        nb.clear();
        for (const auto& [j, c] : co[i])
            nb.emplace_back(j, c / std::sqrt(static_cast<double>(item_users_[i].size()) * item_users_[j].size()));
        std::sort(nb.begin(), nb.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        if (nb.size() > static_cast<std::size_t>(k_)) nb.resize(k_);
    }
}

double KNNModel::similarity(std::uint32_t i, std::uint32_t j) const {
    if (i >= n_items_ || j >= n_items_) throw LookupError("unknown item index");
    if (i == j) return 1.0;
    const auto& a = item_users_[i];
    const auto& b = item_users_[j];
    if (a.empty() || b.empty()) return 0.0;
    std::size_t common = 0;
    for (std::size_t x = 0, y = 0; x < a.size() && y < b.size();) {
        if (a[x] < b[y]) ++x;
        else if (b[y] < a[x]) ++y;
        else ++common, ++x, ++y;
    }
    return common / std::sqrt(static_cast<double>(a.size()) * b.size());
}

double KNNModel::score(std::uint32_t user, std::uint32_t item) const {
    check(user, item);
    const auto& likes = user_likes_[user];
    double s = 0.0;
    for (const auto& [j, sim] : neighbors_[item])
        if (std::binary_search(likes.begin(), likes.end(), j)) s += sim;
    return s;
}

// --- Popularity ---------------------------------------------------------------

PopularityModel::PopularityModel(std::size_t n_users, std::size_t n_items) : counts_(n_items, 0.0) {
    n_users_ = n_users;
    n_items_ = n_items;
}

void PopularityModel::fit(const RecDataset& data) {
    std::fill(counts_.begin(), counts_.end(), 0.0);
    for (const auto& e : data.examples())
        if (e.label == 1) counts_[e.item] += 1.0;
}

double PopularityModel::score(std::uint32_t user, std::uint32_t item) const {
    check(user, item);
    return counts_[item];
}

// --- fitting ------------------------------------------------------------------

std::vector<Example> training_examples(const RecDataset& data, const FitParams& params, std::uint64_t seed) {
    std::vector<Example> out = data.examples();
    if (params.negatives == 0 || data.n_items() == 0) return out;
    std::vector<std::set<std::uint32_t>> labeled(data.n_users());
    for (const auto& e : data.examples()) labeled[e.user].insert(e.item);
    Rng rng(derive_seed(seed, "negatives"));
    for (const auto& e : data.examples()) {
        if (e.label != 1) continue;
        const auto& seen = labeled[e.user];
        if (seen.size() >= data.n_items()) continue;
        for (int s = 0; s < params.negatives; ++s) {
            std::uint32_t j;
            do {
                j = static_cast<std::uint32_t>(rng.below(data.n_items()));
            } while (seen.contains(j));
            out.push_back({e.user, j, 0, params.negative_weight});
        }
    }
    return out;
}

namespace {

void sgd(FactorModel& model, const std::vector<Example>& examples, const FitParams& params, std::uint64_t seed,
         std::vector<double>& history) {
    Rng init(derive_seed(seed, "init"));
    for (auto& t : model.params()) t = init.uniform(-0.01, 0.01);
    Rng order_rng(derive_seed(seed, "order"));
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::pair<std::size_t, double>> grad;
    auto& theta = model.params();
    for (int epoch = 1; epoch <= params.epochs; ++epoch) {
        order_rng.shuffle(order.begin(), order.end());
        for (auto idx : order) {
            grad.clear();
            model.example_gradient(examples[idx], params.l2, grad);
            for (const auto& [p, g] : grad) theta[p] -= params.learning_rate * g;
        }
        const double loss = model.objective(examples, params.l2);
        if (!std::isfinite(loss)) throw DivergenceError("training diverged at epoch " + std::to_string(epoch), epoch);
        history.push_back(loss);
    }
    for (double t : theta)
        if (!std::isfinite(t)) throw DivergenceError("non-finite parameter after epoch " + std::to_string(params.epochs), params.epochs);
}

} // namespace

std::unique_ptr<Recommender> fit(ModelKind kind, const RecDataset& data, const FitParams& params, std::uint64_t seed) {
    params.validate();
    if (data.empty()) throw ValidationError("cannot fit on an empty dataset");
    switch (kind) {
    case ModelKind::MF: {
        auto m = std::make_unique<MFModel>(data.n_users(), data.n_items(), params.dim);
        sgd(*m, training_examples(data, params, seed), params, seed, m->loss_history_);
        return m;
    }
    case ModelKind::FM: {
        std::vector<std::uint32_t> dom(data.n_items());
        for (std::uint32_t i = 0; i < data.n_items(); ++i) dom[i] = data.item_domain(i);
        auto m = std::make_unique<FMModel>(data.n_users(), data.n_items(), std::move(dom), data.n_domains(), params.dim);
        sgd(*m, training_examples(data, params, seed), params, seed, m->loss_history_);
        return m;
    }
    case ModelKind::ItemKNN: {
        auto m = std::make_unique<KNNModel>(data.n_users(), data.n_items(), params.knn_k);
        m->fit(data);
        return m;
    }
    case ModelKind::Popularity: {
        auto m = std::make_unique<PopularityModel>(data.n_users(), data.n_items());
        m->fit(data);
        return m;
    }
    }
    throw ConfigError("unknown model kind");
}

double grad_check(ModelKind kind, const RecDataset& data, const std::vector<Example>& sample, double epsilon,
                  std::uint64_t seed, int points, int dim, double l2) {
    std::unique_ptr<FactorModel> model;
    if (kind == ModelKind::MF) {
        model = std::make_unique<MFModel>(data.n_users(), data.n_items(), dim);
    } else if (kind == ModelKind::FM) {
        std::vector<std::uint32_t> dom(data.n_items());
        for (std::uint32_t i = 0; i < data.n_items(); ++i) dom[i] = data.item_domain(i);
        model = std::make_unique<FMModel>(data.n_users(), data.n_items(), std::move(dom), data.n_domains(), dim);
    } else {
        throw ValidationError("grad_check needs a differentiable model (MF or FM)");
    }
    auto& theta = model->params();
    double worst = 0.0;
    std::vector<std::pair<std::size_t, double>> sparse;
    for (int p = 0; p < points; ++p) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(p)));
        for (auto& t : theta) t = rng.uniform(-0.5, 0.5);
        std::map<std::size_t, double> analytic;
        for (const auto& e : sample) {
            sparse.clear();
            model->example_gradient(e, l2, sparse);
            for (const auto& [i, g] : sparse) analytic[i] += g;
        }
        for (const auto& [i, a] : analytic) {
            const double saved = theta[i];
            theta[i] = saved + epsilon;
            const double up = model->objective(sample, l2);
            theta[i] = saved - epsilon;
            const double down = model->objective(sample, l2);
            theta[i] = saved;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

} // namespace rah
