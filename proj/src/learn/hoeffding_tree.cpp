#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "crowdswap/error.hpp"
#include "crowdswap/learn.hpp"

namespace crowdswap::learn {

namespace {

double entropy(double a, double b) noexcept {
    const double total = a + b;
    if (total <= 0.0)
        return 0.0;
    double h = 0.0;
    for (double c : {a, b})
        if (c > 0.0) {
            const double p = c / total;
            h -= p * std::log2(p);
        }
    return h;
}

} // namespace

void HoeffdingTree::Gaussian::add(double x, double w) noexcept {
    if (weight == 0.0) {
        min = max = x;
    } else {
        min = std::min(min, x);
        max = std::max(max, x);
    }
    weight += w;
    const double delta = x - mean;
    mean += w * delta / weight;
    m2 += w * delta * (x - mean);
}

double HoeffdingTree::Gaussian::weight_below(double threshold) const noexcept {
    if (weight <= 0.0 || threshold < min)
        return 0.0;
    if (threshold >= max)
        return weight;
    const double var = weight > 1.0 ? m2 / (weight - 1.0) : 0.0;
    if (var <= 0.0)
        return threshold >= mean ? weight : 0.0;
    const double z = (threshold - mean) / std::sqrt(var);
    return weight * 0.5 * std::erfc(-z / std::sqrt(2.0));
}

std::string_view to_string(LeafPrediction p) noexcept {
    return p == LeafPrediction::Majority ? "majority" : "naive_bayes_adaptive";
}

std::optional<LeafPrediction> parse_leaf_prediction(std::string_view s) noexcept {
    if (s == "majority")
        return LeafPrediction::Majority;
    if (s == "naive_bayes_adaptive")
        return LeafPrediction::NaiveBayesAdaptive;
    return std::nullopt;
}

HoeffdingTreeParams forest_member_defaults() noexcept {
    HoeffdingTreeParams p;
    p.delta = 0.01;
    p.grace_period = 20.0;
    p.max_features = 2;
    return p;
}

HoeffdingTree::HoeffdingTree(HoeffdingTreeParams params) : params_(params), rng_(params.seed) {
    if (!(params_.delta > 0.0 && params_.delta < 1.0) || !(params_.grace_period > 0.0) ||
        params_.n_split_points < 1 || !(params_.laplace_alpha >= 0.0) ||
        params_.max_features < 0)
        throw InvalidArgument("invalid Hoeffding tree parameters");
    nodes_.emplace_back();
    nodes_[0].feature_mask = draw_mask();
}

std::uint32_t HoeffdingTree::draw_mask() {
    constexpr std::uint32_t all = (1u << kNumFeatures) - 1u;
    const auto m = static_cast<std::size_t>(params_.max_features);
    if (m == 0 || m >= kNumFeatures)
        return all;
    std::array<std::size_t, kNumFeatures> idx{};
    for (std::size_t i = 0; i < kNumFeatures; ++i)
        idx[i] = i;
    // Partial Fisher-Yates.
    std::uint32_t mask = 0;
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, kNumFeatures - 1);
        std::swap(idx[i], idx[pick(rng_)]);
        mask |= 1u << idx[i];
    }
    return mask;
}

int HoeffdingTree::sort_to_leaf(const FeatureArray& x) const noexcept {
    int idx = 0;
    while (!nodes_[static_cast<std::size_t>(idx)].is_leaf()) {
        const Node& n = nodes_[static_cast<std::size_t>(idx)];
        idx = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return idx;
}

double HoeffdingTree::majority_proba(const Node& leaf) const noexcept {
    const double a = params_.laplace_alpha;
    const double total = leaf.counts[0] + leaf.counts[1];
    if (total + 2.0 * a <= 0.0)
        return 0.5;
    return (leaf.counts[1] + a) / (total + 2.0 * a);
}

double HoeffdingTree::naive_bayes_proba(const Node& leaf, const FeatureArray& x) const noexcept {
    const double total = leaf.counts[0] + leaf.counts[1];
    if (total <= 0.0)
        return -1.0;
    if (leaf.counts[0] <= 0.0 || leaf.counts[1] <= 0.0)
        return leaf.counts[1] > 0.0 ? 1.0 : 0.0;
    std::array<double, 2> logp{};
    for (std::size_t c = 0; c < 2; ++c) {
        logp[c] = std::log(leaf.counts[c] / total);
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            const auto& g = leaf.stats[f][c];
            // Features without spread in either class carry no usable likelihood.
            if (g.weight <= 1.0)
                continue;
            const double var = g.m2 / (g.weight - 1.0);
            if (!(var > 0.0))
                continue;
            const double d = x[f] - g.mean;
            const double lp = -0.5 * std::log(2.0 * M_PI * var) - d * d / (2.0 * var);
            if (std::isfinite(lp))
                logp[c] += lp;
        }
    }
    const double m = std::max(logp[0], logp[1]);
    const double e0 = std::exp(logp[0] - m), e1 = std::exp(logp[1] - m);
    return e1 / (e0 + e1);
}

double HoeffdingTree::predict_proba(const FeatureVector& x) const {
    const auto values = x.to_array();
    const Node& leaf = nodes_[static_cast<std::size_t>(sort_to_leaf(values))];
    if (params_.leaf_prediction == LeafPrediction::NaiveBayesAdaptive &&
        leaf.nb_correct >= leaf.mc_correct) {
        const double p = naive_bayes_proba(leaf, values);
        if (p >= 0.0)
            return p;
    }
    return majority_proba(leaf);
}

std::array<double, 2> HoeffdingTree::leaf_counts(const FeatureVector& x) const {
    return nodes_[static_cast<std::size_t>(sort_to_leaf(x.to_array()))].counts;
}

void HoeffdingTree::learn_one(const FeatureVector& x, Label y, double weight) {
    ++n_seen_;
    if (!(weight > 0.0))
        return;
    const auto values = x.to_array();
    int leaf_idx = 0;
    while (!nodes_[static_cast<std::size_t>(leaf_idx)].is_leaf()) {
        Node& n = nodes_[static_cast<std::size_t>(leaf_idx)];
        n.through += weight;
        leaf_idx = values[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    Node& leaf = nodes_[static_cast<std::size_t>(leaf_idx)];
    const auto cls = static_cast<std::size_t>(y);
    if (params_.leaf_prediction == LeafPrediction::NaiveBayesAdaptive) {
        const bool delayed = y == Label::Delayed;
        if ((majority_proba(leaf) > 0.5) == delayed)
            leaf.mc_correct += weight;
        const double nb = naive_bayes_proba(leaf, values);
        if (nb >= 0.0 && (nb > 0.5) == delayed)
            leaf.nb_correct += weight;
    }
    leaf.counts[cls] += weight;
    for (std::size_t f = 0; f < kNumFeatures; ++f)
        leaf.stats[f][cls].add(values[f], weight);
    const double total = leaf.counts[0] + leaf.counts[1];
    if (total - leaf.weight_at_last_eval >= params_.grace_period &&
        leaf.depth < params_.max_depth) {
        attempt_split(leaf_idx);
        nodes_[static_cast<std::size_t>(leaf_idx)].weight_at_last_eval = total;
    }
}

void HoeffdingTree::attempt_split(int leaf_idx) {
    const Node& leaf = nodes_[static_cast<std::size_t>(leaf_idx)];
    if (leaf.counts[0] <= 0.0 || leaf.counts[1] <= 0.0)
        return;
    const double total = leaf.counts[0] + leaf.counts[1];
    const double h0 = entropy(leaf.counts[0], leaf.counts[1]);

    struct Candidate {
        double merit = -std::numeric_limits<double>::infinity();
        double threshold = 0.0;
        std::array<double, 2> left{};
        std::array<double, 2> right{};
    };
    std::array<Candidate, kNumFeatures> best{};

    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (!(leaf.feature_mask & (1u << f)))
            continue;
        const auto& st = leaf.stats[f];
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& g : st)
            if (g.weight > 0.0) {
                lo = std::min(lo, g.min);
                hi = std::max(hi, g.max);
            }
        if (!(lo < hi))
            continue;
        for (int i = 1; i <= params_.n_split_points; ++i) {
            const double thr = lo + (hi - lo) * i / (params_.n_split_points + 1);
            std::array<double, 2> left{}, right{};
            for (std::size_t c = 0; c < 2; ++c) {
                left[c] = st[c].weight_below(thr);
                right[c] = st[c].weight - left[c];
            }
            const double wl = left[0] + left[1];
            const double wr = right[0] + right[1];
            if (wl / total < params_.min_branch_fraction ||
                wr / total < params_.min_branch_fraction)
                continue;
            const double merit =
                h0 - wl / total * entropy(left[0], left[1]) - wr / total * entropy(right[0], right[1]);
            if (merit > best[f].merit)
                best[f] = {merit, thr, left, right};
        }
    }

    std::size_t best_f = 0;
    for (std::size_t f = 1; f < kNumFeatures; ++f)
        if (best[f].merit > best[best_f].merit)
            best_f = f;
    // The "no split" alternative has merit 0.
    double second = 0.0;
    for (std::size_t f = 0; f < kNumFeatures; ++f)
        if (f != best_f)
            second = std::max(second, best[f].merit);

    const Candidate& winner = best[best_f];
    if (!(winner.merit > 0.0))
        return;
    const double eps = hoeffding_bound(1.0, params_.delta, total);
    if (!(winner.merit - second > eps || eps < params_.tie_threshold))
        return;

    const int depth = leaf.depth + 1;
    const auto left_idx = static_cast<int>(nodes_.size());
    Node left_node, right_node;
    left_node.depth = right_node.depth = depth;
    left_node.counts = winner.left;
    right_node.counts = winner.right;
    left_node.weight_at_last_eval = winner.left[0] + winner.left[1];
    right_node.weight_at_last_eval = winner.right[0] + winner.right[1];
    left_node.feature_mask = draw_mask();
    right_node.feature_mask = draw_mask();
    const double threshold = winner.threshold;
    nodes_.push_back(left_node);
    nodes_.push_back(right_node);

    Node& parent = nodes_[static_cast<std::size_t>(leaf_idx)];
    parent.feature = static_cast<int>(best_f);
    parent.threshold = threshold;
    parent.left = left_idx;
    parent.right = left_idx + 1;
    parent.stats = {};
    parent.merit = winner.merit;
    parent.through = total;
}

FeatureArray HoeffdingTree::raw_importance() const noexcept {
    FeatureArray gain{};
    for (const Node& n : nodes_)
        if (!n.is_leaf())
            gain[static_cast<std::size_t>(n.feature)] += n.merit * n.through;
    return gain;
}

FeatureArray HoeffdingTree::feature_importance() const {
    const auto gain = raw_importance();
    double sum = 0.0;
    for (double g : gain)
        sum += g;
    FeatureArray out{};
    if (sum <= 0.0)
        return out;
    for (std::size_t f = 0; f < kNumFeatures; ++f)
        out[f] = gain[f] / sum;
    return out;
}

std::size_t HoeffdingTree::n_leaves() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

std::unique_ptr<StreamModel> HoeffdingTree::clone() const {
    return std::make_unique<HoeffdingTree>(*this);
}

void HoeffdingTree::reset_with_counts(double not_delayed, double delayed) {
    nodes_.assign(1, Node{});
    nodes_[0].feature_mask = draw_mask();
    nodes_[0].counts = {not_delayed, delayed};
    nodes_[0].weight_at_last_eval = not_delayed + delayed;
}

} // namespace crowdswap::learn
