#pragma once

#include "rah/core.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace rah {

struct Example {
    std::uint32_t user = 0;
    std::uint32_t item = 0;
    std::uint8_t label = 0; // 1 ⟺ Like
    double weight = 1.0;
};

/// Dense user/item indices over a catalog plus labeled training examples.
/// Item indices follow catalog order, so every catalog item is rankable.
class RecDataset {
public:
    RecDataset() = default;
    RecDataset(const Catalog& catalog, std::vector<UserId> users);
    /// Users are the sorted distinct users of `interactions` plus `extra_users`.
    static RecDataset build(const Catalog& catalog, const std::vector<Interaction>& interactions,
                            const std::vector<UserId>& extra_users = {});

    void add(const Interaction& x, double weight = 1.0);
    void add(std::uint32_t user, std::uint32_t item, std::uint8_t label, double weight = 1.0);
    /// Multiplies each example's weight by weights[item]; labels are untouched.
    void apply_item_weights(const std::vector<double>& weights);

    std::uint32_t user_index(const UserId& u) const;
    std::uint32_t item_index(const ItemId& i) const;
    bool has_user(const UserId& u) const { return user_index_.contains(u); }

    std::size_t n_users() const noexcept { return users_.size(); }
    std::size_t n_items() const noexcept { return items_.size(); }
    std::size_t n_domains() const noexcept { return domains_.size(); }
    const std::vector<UserId>& users() const noexcept { return users_; }
    const std::vector<ItemId>& items() const noexcept { return items_; }
    const std::vector<DomainTag>& domains() const noexcept { return domains_; }
    std::uint32_t item_domain(std::uint32_t item) const { return item_domain_.at(item); }
    /// Item indices belonging to a domain, ascending.
    std::vector<std::uint32_t> domain_items(const DomainTag& d) const;

    const std::vector<Example>& examples() const noexcept { return examples_; }
    bool empty() const noexcept { return examples_.empty(); }
    /// Items each user has a Like example for.
    std::vector<std::set<std::uint32_t>> positives() const;

private:
    std::vector<UserId> users_;
    std::vector<ItemId> items_;
    std::vector<DomainTag> domains_;
    std::vector<std::uint32_t> item_domain_;
    std::unordered_map<UserId, std::uint32_t> user_index_;
    std::unordered_map<ItemId, std::uint32_t> item_index_;
    std::vector<Example> examples_;
};

enum class ModelKind : std::uint8_t { MF, FM, ItemKNN, Popularity };
std::string_view to_string(ModelKind k) noexcept;
ModelKind model_kind_from_string(std::string_view s);
inline const std::vector<ModelKind>& all_model_kinds() {
    static const std::vector<ModelKind> v{ModelKind::MF, ModelKind::FM, ModelKind::ItemKNN, ModelKind::Popularity};
    return v;
}

struct FitParams {
    int dim = 32;
    double learning_rate = 0.05;
    double l2 = 1e-4;
    int epochs = 20;
    int negatives = 4;             // sampled unobserved items per positive
    double negative_weight = 0.25; // weight of a sampled unobserved (explicit Dislikes keep weight 1)
    int knn_k = 20;

    void validate() const;
};

class Recommender {
public:
    virtual ~Recommender() = default;
    virtual ModelKind kind() const noexcept = 0;
    virtual double score(std::uint32_t user, std::uint32_t item) const = 0;
    std::size_t n_users() const noexcept { return n_users_; }
    std::size_t n_items() const noexcept { return n_items_; }

    /// Per-epoch training objective; empty for closed-form models.
    const std::vector<double>& loss_history() const noexcept { return loss_history_; }

    void save(const std::filesystem::path& path) const;
    void write(std::ostream& os) const;

protected:
    void check(std::uint32_t user, std::uint32_t item) const;
    virtual void write_body(std::ostream& os) const = 0;

    std::size_t n_users_ = 0;
    std::size_t n_items_ = 0;
    std::vector<double> loss_history_;

    friend std::unique_ptr<Recommender> read_model(std::istream& is);
    friend std::unique_ptr<Recommender> fit(ModelKind, const RecDataset&, const struct FitParams&, std::uint64_t);
};

/// Models trained by SGD on the weighted pointwise logistic objective
///   Σ_e w_e·[softplus(s_e) − y_e·s_e] + λ/2·Σ_e ‖θ(e)‖²
/// where θ(e) are the parameters example e touches (global bias excluded).
class FactorModel : public Recommender {
public:
    /// Sparse gradient of one example's term of the objective.
    virtual void example_gradient(const Example& e, double l2, std::vector<std::pair<std::size_t, double>>& out) const = 0;
    double example_objective(const Example& e, double l2) const;
    double objective(const std::vector<Example>& examples, double l2) const;

    std::vector<double>& params() noexcept { return theta_; }
    const std::vector<double>& params() const noexcept { return theta_; }

protected:
    virtual double example_penalty(const Example& e) const = 0;
    std::vector<double> theta_;
};

/// μ + b_u + b_i + U_u·V_i. Layout: [μ | b_u | b_i | U | V].
class MFModel final : public FactorModel {
public:
    MFModel(std::size_t n_users, std::size_t n_items, int dim);
    ModelKind kind() const noexcept override { return ModelKind::MF; }
    double score(std::uint32_t user, std::uint32_t item) const override;
    void example_gradient(const Example& e, double l2, std::vector<std::pair<std::size_t, double>>& out) const override;

    int dim() const noexcept { return dim_; }
    double& global_bias() { return theta_[0]; }
    double& user_bias(std::uint32_t u) { return theta_[1 + u]; }
    double& item_bias(std::uint32_t i) { return theta_[1 + n_users_ + i]; }
    double* user_factors(std::uint32_t u) { return theta_.data() + uf_ + u * dim_; }
    double* item_factors(std::uint32_t i) { return theta_.data() + if_ + i * dim_; }

private:
    double example_penalty(const Example& e) const override;
    void write_body(std::ostream& os) const override;
    const double* uf(std::uint32_t u) const { return theta_.data() + uf_ + u * dim_; }
    const double* vf(std::uint32_t i) const { return theta_.data() + if_ + i * dim_; }

    int dim_;
    std::size_t uf_, if_;
};

/// Features per example: user one-hot, item one-hot, item-domain one-hot.
/// w0 + Σ w_f + Σ_{f<g} <v_f, v_g>. Layout: [w0 | w | V].
class FMModel final : public FactorModel {
public:
    FMModel(std::size_t n_users, std::size_t n_items, std::vector<std::uint32_t> item_domain, std::size_t n_domains, int dim);
    ModelKind kind() const noexcept override { return ModelKind::FM; }
    double score(std::uint32_t user, std::uint32_t item) const override;
    void example_gradient(const Example& e, double l2, std::vector<std::pair<std::size_t, double>>& out) const override;

    int dim() const noexcept { return dim_; }
    std::size_t n_features() const noexcept { return n_features_; }
    std::array<std::size_t, 3> active_features(std::uint32_t user, std::uint32_t item) const;
    double* factors(std::size_t feature) { return theta_.data() + vf_ + feature * dim_; }
    double& linear(std::size_t feature) { return theta_[1 + feature]; }
    /// Pairwise term by the sum-of-squares identity.
    double pairwise(std::uint32_t user, std::uint32_t item) const;

private:
    double example_penalty(const Example& e) const override;
    void write_body(std::ostream& os) const override;

    std::vector<std::uint32_t> item_domain_;
    std::size_t n_domains_;
    int dim_;
    std::size_t n_features_, vf_;

    friend std::unique_ptr<Recommender> read_model(std::istream& is);
};

/// Σ_{j ∈ liked(u) ∩ topk(i)} sim(i, j), sim = cosine over the binary Like matrix.
class KNNModel final : public Recommender {
public:
    KNNModel(std::size_t n_users, std::size_t n_items, int k);
    ModelKind kind() const noexcept override { return ModelKind::ItemKNN; }
    double score(std::uint32_t user, std::uint32_t item) const override;
    double similarity(std::uint32_t i, std::uint32_t j) const;
    const std::vector<std::pair<std::uint32_t, double>>& neighbors(std::uint32_t i) const { return neighbors_.at(i); }

    void fit(const RecDataset& data);

private:
    void write_body(std::ostream& os) const override;

    int k_;
    std::vector<std::vector<std::uint32_t>> item_users_; // sorted
    std::vector<std::vector<std::uint32_t>> user_likes_; // sorted
    std::vector<std::vector<std::pair<std::uint32_t, double>>> neighbors_;

    friend std::unique_ptr<Recommender> read_model(std::istream& is);
};

/// Number of Like examples per item.
class PopularityModel final : public Recommender {
public:
    PopularityModel(std::size_t n_users, std::size_t n_items);
    ModelKind kind() const noexcept override { return ModelKind::Popularity; }
    double score(std::uint32_t user, std::uint32_t item) const override;
    void fit(const RecDataset& data);

private:
    void write_body(std::ostream& os) const override;
    std::vector<double> counts_;

    friend std::unique_ptr<Recommender> read_model(std::istream& is);
};

/// Deterministic given (data, params, seed). Throws DivergenceError on a non-finite epoch loss.
std::unique_ptr<Recommender> fit(ModelKind kind, const RecDataset& data, const FitParams& params, std::uint64_t seed);

/// Examples actually used to train a factor model: the labeled ones plus
/// `negatives` sampled unobserved items per positive, drawn once.
std::vector<Example> training_examples(const RecDataset& data, const FitParams& params, std::uint64_t seed);

/// Top-k by descending score, ties by ascending item index; excluded items never appear.
std::vector<std::uint32_t> rank(const Recommender& model, std::uint32_t user, const std::vector<std::uint32_t>& candidates,
                                const std::set<std::uint32_t>& exclude, std::size_t k = 10);

double ndcg_at_k(const std::vector<std::uint32_t>& ranked, const std::set<std::uint32_t>& relevant, std::size_t k = 10);
double recall_at_k(const std::vector<std::uint32_t>& ranked, const std::set<std::uint32_t>& relevant, std::size_t k = 10);

struct UserEval {
    std::uint32_t user = 0;
    double ndcg = 0.0;
    double recall = 0.0;
};

struct EvalReport {
    double ndcg = 0.0;
    double recall = 0.0;
    std::vector<UserEval> per_user; // ascending user index
};

struct TestCase {
    std::uint32_t user = 0;
    std::uint32_t item = 0;
};

/// Binary relevance over `test` (relevant pairs); each user ranks
/// `candidates` minus their training positives. Users without a relevant
/// item are skipped with a warning.
EvalReport evaluate(const Recommender& model, const std::vector<TestCase>& test, const std::vector<std::uint32_t>& candidates,
                    const std::vector<std::set<std::uint32_t>>& train_positives, std::size_t k = 10);

struct RatedCase {
    std::uint32_t user = 0;
    std::uint32_t item = 0;
    bool relevant = false;
};

/// Each user ranks only their own rated test items; relevant ones count as
/// hits. Users whose test items are all irrelevant are skipped.
EvalReport evaluate_rated(const Recommender& model, const std::vector<RatedCase>& test, std::size_t k = 10);

/// Max relative error between analytic and central-difference gradients of
/// the objective over `sample`, at `points` seeded random parameter vectors.
double grad_check(ModelKind kind, const RecDataset& data, const std::vector<Example>& sample, double epsilon,
                  std::uint64_t seed, int points = 1, int dim = 4, double l2 = 1e-2);

inline constexpr char kModelMagic[4] = {'R', 'A', 'H', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

std::unique_ptr<Recommender> read_model(std::istream& is);
std::unique_ptr<Recommender> load_model(const std::filesystem::path& path);

} // namespace rah
