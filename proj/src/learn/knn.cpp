#include <algorithm>
#include <cmath>
#include <utility>

#include "crowdswap/error.hpp"
#include "crowdswap/learn.hpp"

namespace crowdswap::learn {

WindowKnn::WindowKnn(KnnParams params) : params_(params) {
    if (params_.k < 1 || params_.window_size < 1)
        throw InvalidArgument("knn needs k >= 1 and window_size >= 1");
}

void WindowKnn::learn_one(const FeatureVector& x, Label y, double weight) {
    ++n_seen_;
    if (!(weight > 0.0))
        return;
    const auto values = x.to_array();
    // Welford over every item ever learned.
    const auto n = static_cast<double>(n_seen_);
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        const double delta = values[f] - mean_[f];
        mean_[f] += delta / n;
        m2_[f] += delta * (values[f] - mean_[f]);
    }
    window_.push_back({x, values, y});
    while (window_.size() > params_.window_size)
        window_.pop_front();
}

double WindowKnn::predict_proba(const FeatureVector& x) const {
    if (window_.empty())
        return 0.5;
    const auto values = x.to_array();
    FeatureArray inv_sd;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        const double var = n_seen_ > 1 ? m2_[f] / static_cast<double>(n_seen_ - 1) : 0.0;
        inv_sd[f] = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    }
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(window_.size());
    for (std::size_t i = 0; i < window_.size(); ++i) {
        double d2 = 0.0;
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            const double z = (values[f] - window_[i].values[f]) * inv_sd[f];
            d2 += z * z;
        }
        dist.emplace_back(d2, i);
    }
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(params_.k), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::size_t delayed = 0;
    for (std::size_t i = 0; i < k; ++i)
        if (window_[dist[i].second].y == Label::Delayed)
            ++delayed;
    return static_cast<double>(delayed) / static_cast<double>(k);
}

std::unique_ptr<StreamModel> WindowKnn::clone() const {
    return std::make_unique<WindowKnn>(*this);
}

OnlineForest::OnlineForest(ForestParams params, std::uint64_t seed)
    : params_(params), rng_(seed) {
    if (params_.n_trees < 1)
        throw InvalidArgument("forest needs at least one tree");
    trees_.reserve(static_cast<std::size_t>(params_.n_trees));
    for (int i = 0; i < params_.n_trees; ++i) {
        auto tp = params_.tree;
        tp.seed = derive_seed(seed, static_cast<std::uint64_t>(i) + 1);
        trees_.emplace_back(tp);
    }
}

double OnlineForest::predict_proba(const FeatureVector& x) const {
    double sum = 0.0;
    for (const auto& t : trees_)
        sum += t.predict_proba(x);
    return sum / static_cast<double>(trees_.size());
}

void OnlineForest::learn_one(const FeatureVector& x, Label y, double weight) {
    ++n_seen_;
    std::poisson_distribution<int> poisson(1.0);
    for (auto& t : trees_) {
        const int k = params_.poisson_weighting ? poisson(rng_) : 1;
        if (k > 0)
            t.learn_one(x, y, weight * k);
    }
}

FeatureArray OnlineForest::feature_importance() const {
    FeatureArray sum{};
    int contributing = 0;
    for (const auto& t : trees_) {
        if (t.n_splits() == 0)
            continue;
        const auto imp = t.feature_importance();
        for (std::size_t f = 0; f < kNumFeatures; ++f)
            sum[f] += imp[f];
        ++contributing;
    }
    if (contributing > 0)
        for (auto& v : sum)
            v /= contributing;
    return sum;
}

std::unique_ptr<StreamModel> OnlineForest::clone() const {
    return std::make_unique<OnlineForest>(*this);
}

} // namespace crowdswap::learn
