#include <cmath>

#include "crowdswap/error.hpp"
#include "crowdswap/learn.hpp"

namespace crowdswap::learn {

FeatureArray FeatureVector::to_array() const noexcept {
    return {speed_now,        speed_mean,       speed_max,     speed_min,  remaining_dist_m,
            remaining_time_s, dist_normal_m,    dist_slow_m,   dist_jam_m};
}

FeatureVector FeatureVector::from_array(const FeatureArray& a) noexcept {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]};
}

std::string_view feature_name(std::size_t i) {
    static constexpr std::array<std::string_view, kNumFeatures> names{
        "speed_now",        "speed_mean",    "speed_max",   "speed_min", "remaining_dist_m",
        "remaining_time_s", "dist_normal_m", "dist_slow_m", "dist_jam_m"};
    if (i >= kNumFeatures)
        throw InvalidArgument("feature index out of range");
    return names[i];
}

FeatureCategory category_of(std::size_t feature) {
    if (feature < 4)
        return FeatureCategory::Capability;
    if (feature < 6)
        return FeatureCategory::ParcelState;
    if (feature < kNumFeatures)
        return FeatureCategory::Environment;
    throw InvalidArgument("feature index out of range");
}

std::string_view to_string(FeatureCategory c) noexcept {
    switch (c) {
    case FeatureCategory::Capability: return "capability";
    case FeatureCategory::ParcelState: return "parcel_state";
    case FeatureCategory::Environment: return "environment";
    }
    return "capability";
}

Metrics classification_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) noexcept {
    Metrics m;
    const auto tpd = static_cast<double>(tp);
    if (tp + fp > 0)
        m.precision = tpd / static_cast<double>(tp + fp);
    if (tp + fn > 0)
        m.recall = tpd / static_cast<double>(tp + fn);
    if (m.precision + m.recall > 0.0)
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

double hoeffding_bound(double range, double delta, double n) {
    if (!(n >= 1.0) || !(delta > 0.0 && delta < 1.0) || !(range > 0.0))
        throw InvalidArgument("hoeffding_bound needs n >= 1, 0 < delta < 1, R > 0");
    return std::sqrt(range * range * std::log(1.0 / delta) / (2.0 * n));
}

std::array<double, 3> aggregate_importance(const FeatureArray& weights) noexcept {
    std::array<double, 3> out{};
    for (std::size_t i = 0; i < kNumFeatures; ++i)
        out[static_cast<std::size_t>(category_of(i))] += weights[i];
    return out;
}

FeatureArray StreamModel::feature_importance() const {
    throw Unsupported(std::string(name()) + " does not provide feature importance");
}

std::string_view to_string(ModelKind k) noexcept {
    switch (k) {
    case ModelKind::HoeffdingTree: return "hoeffding_tree";
    case ModelKind::WindowKnn: return "knn";
    case ModelKind::OnlineForest: return "forest";
    }
    return "forest";
}

std::optional<ModelKind> parse_model_kind(std::string_view s) noexcept {
    if (s == "hoeffding_tree")
        return ModelKind::HoeffdingTree;
    if (s == "knn")
        return ModelKind::WindowKnn;
    if (s == "forest")
        return ModelKind::OnlineForest;
    return std::nullopt;
}

std::unique_ptr<StreamModel> make_model(const ModelConfig& config, std::uint64_t seed) {
    switch (config.kind) {
    case ModelKind::HoeffdingTree: return std::make_unique<HoeffdingTree>(config.tree);
    case ModelKind::WindowKnn: return std::make_unique<WindowKnn>(config.knn);
    case ModelKind::OnlineForest:
        return std::make_unique<OnlineForest>(ForestParams{config.n_trees, config.forest_tree, true},
                                              seed);
    }
    throw InvalidArgument("unknown model kind");
}

} // namespace crowdswap::learn
