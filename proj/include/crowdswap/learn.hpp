#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "crowdswap/agents.hpp"
#include "crowdswap/geo.hpp"
#include "crowdswap/random.hpp"

namespace crowdswap::learn {

inline constexpr std::size_t kNumFeatures = 9;
using FeatureArray = std::array<double, kNumFeatures>;

/// Worker capability (4 speeds), delivery state (distance, time left) and
/// environment (remaining route length by traffic state).
struct FeatureVector {
    double speed_now = 0.0;
    double speed_mean = 0.0;
    double speed_max = 0.0;
    double speed_min = 0.0;
    double remaining_dist_m = 0.0;
    double remaining_time_s = 0.0;
    double dist_normal_m = 0.0;
    double dist_slow_m = 0.0;
    double dist_jam_m = 0.0;

    FeatureArray to_array() const noexcept;
    static FeatureVector from_array(const FeatureArray& a) noexcept;
};

std::string_view feature_name(std::size_t i);

enum class FeatureCategory : std::uint8_t { Capability = 0, ParcelState = 1, Environment = 2 };
FeatureCategory category_of(std::size_t feature);
std::string_view to_string(FeatureCategory c) noexcept;

enum class Label : std::uint8_t { NotDelayed = 0, Delayed = 1 };

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Precision, recall and F1 of the Delayed class; every 0/0 yields 0.
Metrics classification_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) noexcept;

/// sqrt(R^2 ln(1/delta) / (2n)).
double hoeffding_bound(double range, double delta, double n);

// ---------------------------------------------------------------------------
// Models

class StreamModel {
public:
    virtual ~StreamModel() = default;

    /// Probability of Delayed; 0.5 before any training.
    virtual double predict_proba(const FeatureVector& x) const = 0;
    virtual void learn_one(const FeatureVector& x, Label y, double weight = 1.0) = 0;
    virtual std::uint64_t n_seen() const noexcept = 0;
    /// Impurity-decrease shares per feature. Throws Unsupported where the
    /// model has no such notion.
    virtual FeatureArray feature_importance() const;
    virtual std::unique_ptr<StreamModel> clone() const = 0;
    virtual std::string_view name() const noexcept = 0;
};

enum class LeafPrediction : std::uint8_t {
    /// Laplace-smoothed Delayed fraction of the leaf.
    Majority,
    /// Gaussian naive Bayes over the leaf statistics whenever it has been
    /// more accurate than the fraction on the leaf's own training items.
    NaiveBayesAdaptive,
};

std::string_view to_string(LeafPrediction p) noexcept;
std::optional<LeafPrediction> parse_leaf_prediction(std::string_view s) noexcept;

struct HoeffdingTreeParams {
    double delta = 1e-7;
    double grace_period = 200.0;
    double tie_threshold = 0.05;
    int n_split_points = 10;
    double min_branch_fraction = 0.01;
    double laplace_alpha = 1.0;
    int max_depth = 30;
    LeafPrediction leaf_prediction = LeafPrediction::NaiveBayesAdaptive;
    /// Features each leaf may split on, drawn at random per leaf; 0 means all.
    int max_features = 0;
    std::uint64_t seed = 0;
};

/// VFDT with per-leaf Gaussian class-conditional estimators for numeric
/// split candidates and information gain as the split merit.
class HoeffdingTree final : public StreamModel {
public:
    explicit HoeffdingTree(HoeffdingTreeParams params = {});

    double predict_proba(const FeatureVector& x) const override;
    void learn_one(const FeatureVector& x, Label y, double weight = 1.0) override;
    std::uint64_t n_seen() const noexcept override { return n_seen_; }
    FeatureArray feature_importance() const override;
    std::unique_ptr<StreamModel> clone() const override;
    std::string_view name() const noexcept override { return "hoeffding_tree"; }

    std::size_t n_leaves() const noexcept;
    std::size_t n_splits() const noexcept { return nodes_.size() / 2; }
    /// Unnormalized impurity decrease per feature: split merit times the
    /// weight routed through the split node over the tree's lifetime.
    FeatureArray raw_importance() const noexcept;

    /// Class counts of the leaf `x` falls into: {NotDelayed, Delayed}.
    std::array<double, 2> leaf_counts(const FeatureVector& x) const;
    const HoeffdingTreeParams& params() const noexcept { return params_; }

    /// Installs a leaf with the given class counts at the root (test helper
    /// for smoothing checks); discards any learned structure.
    void reset_with_counts(double not_delayed, double delayed);

private:
    struct Gaussian {
        double weight = 0.0;
        double mean = 0.0;
        double m2 = 0.0;
        double min = 0.0;
        double max = 0.0;

        void add(double x, double w) noexcept;
        double weight_below(double threshold) const noexcept;
    };

    struct Node {
        int feature = -1;
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        int depth = 0;
        std::array<double, 2> counts{};
        double weight_at_last_eval = 0.0;
        std::array<std::array<Gaussian, 2>, kNumFeatures> stats{};
        std::uint32_t feature_mask = 0;
        double mc_correct = 0.0;
        double nb_correct = 0.0;
        double merit = 0.0;
        double through = 0.0;

        bool is_leaf() const noexcept { return feature < 0; }
    };

    int sort_to_leaf(const FeatureArray& x) const noexcept;
    void attempt_split(int leaf);
    std::uint32_t draw_mask();
    double majority_proba(const Node& leaf) const noexcept;
    /// Negative when the leaf has no usable statistics.
    double naive_bayes_proba(const Node& leaf, const FeatureArray& x) const noexcept;

    HoeffdingTreeParams params_;
    Rng rng_;
    std::vector<Node> nodes_;
    std::uint64_t n_seen_ = 0;
};

struct KnnParams {
    int k = 10;
    std::size_t window_size = 1000;
};

/// Sliding-window k nearest neighbours over running z-score normalized features.
class WindowKnn final : public StreamModel {
public:
    explicit WindowKnn(KnnParams params = {});

    double predict_proba(const FeatureVector& x) const override;
    void learn_one(const FeatureVector& x, Label y, double weight = 1.0) override;
    std::uint64_t n_seen() const noexcept override { return n_seen_; }
    std::unique_ptr<StreamModel> clone() const override;
    std::string_view name() const noexcept override { return "knn"; }

    std::size_t window_fill() const noexcept { return window_.size(); }
    const FeatureVector& oldest() const { return window_.front().x; }

private:
    struct Item {
        FeatureVector x;
        FeatureArray values;
        Label y;
    };

    KnnParams params_;
    std::deque<Item> window_;
    FeatureArray mean_{};
    FeatureArray m2_{};
    std::uint64_t n_seen_ = 0;
};

/// Member defaults of the forest: faster growing trees on random feature
/// subspaces, as is usual for online random forests.
HoeffdingTreeParams forest_member_defaults() noexcept;

struct ForestParams {
    int n_trees = 20;
    HoeffdingTreeParams tree = forest_member_defaults();
    /// Poisson(1) online bagging; false trains every member with weight 1.
    bool poisson_weighting = true;
};

/// Online-bagged ensemble of Hoeffding trees; probability is the member mean.
class OnlineForest final : public StreamModel {
public:
    OnlineForest(ForestParams params, std::uint64_t seed);

    double predict_proba(const FeatureVector& x) const override;
    void learn_one(const FeatureVector& x, Label y, double weight = 1.0) override;
    std::uint64_t n_seen() const noexcept override { return n_seen_; }
    FeatureArray feature_importance() const override;
    std::unique_ptr<StreamModel> clone() const override;
    std::string_view name() const noexcept override { return "forest"; }

    const std::vector<HoeffdingTree>& members() const noexcept { return trees_; }

private:
    ForestParams params_;
    std::vector<HoeffdingTree> trees_;
    Rng rng_;
    std::uint64_t n_seen_ = 0;
};

enum class ModelKind : std::uint8_t { HoeffdingTree, WindowKnn, OnlineForest };

std::string_view to_string(ModelKind k) noexcept;
std::optional<ModelKind> parse_model_kind(std::string_view s) noexcept;

struct ModelConfig {
    ModelKind kind = ModelKind::OnlineForest;
    HoeffdingTreeParams tree;                               ///< standalone tree
    HoeffdingTreeParams forest_tree = forest_member_defaults(); ///< forest members
    KnnParams knn;
    int n_trees = 20;
};

std::unique_ptr<StreamModel> make_model(const ModelConfig& config, std::uint64_t seed);

/// Sums per-feature weights into {capability, parcel_state, environment}.
std::array<double, 3> aggregate_importance(const FeatureArray& weights) noexcept;

// ---------------------------------------------------------------------------
// Feature extraction

/// Features for `task` as served under `plan` (the agent's stops in visiting
/// order). Remaining distance runs from the agent's position through the plan
/// up to the task's last stop; traffic comes from the grid along that path.
FeatureVector extract_features(const agents::WorkerAgent& agent,
                               std::span<const agents::Waypoint> plan, int task, double deadline,
                               const geo::TrafficGrid& grid, double now);

/// Convenience for a single task: uses the agent's current plan and appends
/// the task's locations from `next_index` on when the agent does not hold it.
FeatureVector extract_features(const agents::WorkerAgent& agent, const traces::TaskSpec& spec,
                               int task, int next_index, const geo::TrafficGrid& grid,
                               double now);

// ---------------------------------------------------------------------------
// Prequential evaluation

struct PredictionKey {
    std::string worker_id;
    std::string task_id;
    std::uint64_t seq = 0;

    friend auto operator<=>(const PredictionKey&, const PredictionKey&) = default;
};

struct PendingPrediction {
    PredictionKey key;
    FeatureVector features;
    double predicted = 0.5;
    double issued_at = 0.0;
};

struct HistoryPoint {
    std::uint64_t n_seen = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Test-then-train bookkeeping: a prediction is recorded when issued; the
/// model learns the item only when its label resolves.
class PrequentialEvaluator {
public:
    explicit PrequentialEvaluator(std::uint64_t history_every = 100, double threshold = 0.5);

    /// Predicts with the current model and parks the item until its label is known.
    double issue(const StreamModel& model, PredictionKey key, const FeatureVector& x, double now);
    void issue(PendingPrediction pending);

    /// Scores the parked prediction, then trains `model` on the item.
    /// Throws DoubleResolution for a key resolved before, UnknownKey otherwise.
    void resolve(const PredictionKey& key, Label truth, StreamModel& model);
    /// Closes an item without scoring or training it.
    void withdraw(const PredictionKey& key);

    bool pending(const PredictionKey& key) const { return pending_.contains(key); }
    std::size_t n_pending() const noexcept { return pending_.size(); }
    std::uint64_t n_resolved() const noexcept { return tp_ + fp_ + fn_ + tn_; }
    std::uint64_t tp() const noexcept { return tp_; }
    std::uint64_t fp() const noexcept { return fp_; }
    std::uint64_t fn() const noexcept { return fn_; }
    std::uint64_t tn() const noexcept { return tn_; }
    Metrics metrics() const noexcept { return classification_metrics(tp_, fp_, fn_); }
    const std::vector<HistoryPoint>& f1_history() const noexcept { return history_; }
    /// (predicted, true) for every scored item, in resolution order.
    const std::vector<std::pair<Label, Label>>& log() const noexcept { return log_; }

    /// `n_seen,precision,recall,f1` rows.
    std::string history_csv() const;

private:
    std::uint64_t history_every_;
    double threshold_;
    std::map<PredictionKey, PendingPrediction> pending_;
    std::set<PredictionKey> closed_;
    std::vector<std::pair<Label, Label>> log_;
    std::vector<HistoryPoint> history_;
    std::uint64_t tp_ = 0, fp_ = 0, fn_ = 0, tn_ = 0;
};

/// One global model, or one model per worker created on first use.
class Predictor {
public:
    Predictor(ModelConfig config, std::uint64_t seed, bool shared = true);

    double predict(const std::string& worker_id, const FeatureVector& x) const;
    StreamModel& model_for(const std::string& worker_id);
    const StreamModel* find(const std::string& worker_id) const;
    bool shared() const noexcept { return shared_; }
    const ModelConfig& config() const noexcept { return config_; }

    /// Feature importance of the global model, or the mean over per-worker
    /// models that have split. Throws Unsupported for KNN.
    FeatureArray feature_importance() const;

private:
    ModelConfig config_;
    std::uint64_t seed_;
    bool shared_;
    std::unique_ptr<StreamModel> global_;
    std::map<std::string, std::unique_ptr<StreamModel>> per_worker_;
};

} // namespace crowdswap::learn
