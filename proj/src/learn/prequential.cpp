#include <sstream>

#include "crowdswap/error.hpp"
#include "crowdswap/learn.hpp"

namespace crowdswap::learn {

namespace {

std::string describe(const PredictionKey& key) {
    return "(" + key.worker_id + ", " + key.task_id + ", #" + std::to_string(key.seq) + ")";
}

} // namespace

PrequentialEvaluator::PrequentialEvaluator(std::uint64_t history_every, double threshold)
    : history_every_(history_every), threshold_(threshold) {
    if (history_every_ == 0)
        throw InvalidArgument("history_every must be positive");
}

double PrequentialEvaluator::issue(const StreamModel& model, PredictionKey key,
                                   const FeatureVector& x, double now) {
    const double p = model.predict_proba(x);
    issue(PendingPrediction{std::move(key), x, p, now});
    return p;
}

void PrequentialEvaluator::issue(PendingPrediction pending) {
    if (pending_.contains(pending.key) || closed_.contains(pending.key))
        throw InvalidArgument("prediction key " + describe(pending.key) + " issued twice");
    auto key = pending.key;
    pending_.emplace(std::move(key), std::move(pending));
}

void PrequentialEvaluator::resolve(const PredictionKey& key, Label truth, StreamModel& model) {
    auto it = pending_.find(key);
    if (it == pending_.end()) {
        if (closed_.contains(key))
            throw DoubleResolution("prediction " + describe(key) + " already resolved");
        throw UnknownKey("no pending prediction " + describe(key));
    }
    const PendingPrediction item = std::move(it->second);
    pending_.erase(it);
    closed_.insert(key);

    const Label predicted = item.predicted > threshold_ ? Label::Delayed : Label::NotDelayed;
    if (predicted == Label::Delayed)
        (truth == Label::Delayed ? tp_ : fp_)++;
    else
        (truth == Label::Delayed ? fn_ : tn_)++;
    log_.emplace_back(predicted, truth);
    model.learn_one(item.features, truth);

    if (n_resolved() % history_every_ == 0) {
        const auto m = metrics();
        history_.push_back({n_resolved(), m.precision, m.recall, m.f1});
    }
}

void PrequentialEvaluator::withdraw(const PredictionKey& key) {
    auto it = pending_.find(key);
    if (it == pending_.end()) {
        if (closed_.contains(key))
            throw DoubleResolution("prediction " + describe(key) + " already resolved");
        throw UnknownKey("no pending prediction " + describe(key));
    }
    pending_.erase(it);
    closed_.insert(key);
}

std::string PrequentialEvaluator::history_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "n_seen,precision,recall,f1\n";
    for (const auto& h : history_)
        out << h.n_seen << ',' << h.precision << ',' << h.recall << ',' << h.f1 << '\n';
    return out.str();
}

Predictor::Predictor(ModelConfig config, std::uint64_t seed, bool shared)
    : config_(config), seed_(seed), shared_(shared) {
    if (shared_)
        global_ = make_model(config_, seed_);
}

double Predictor::predict(const std::string& worker_id, const FeatureVector& x) const {
    if (const auto* m = find(worker_id))
        return m->predict_proba(x);
    return 0.5;
}

const StreamModel* Predictor::find(const std::string& worker_id) const {
    if (shared_)
        return global_.get();
    auto it = per_worker_.find(worker_id);
    return it == per_worker_.end() ? nullptr : it->second.get();
}

StreamModel& Predictor::model_for(const std::string& worker_id) {
    if (shared_)
        return *global_;
    auto it = per_worker_.find(worker_id);
    if (it == per_worker_.end()) {
        const auto stream = per_worker_.size() + 1;
        it = per_worker_.emplace(worker_id, make_model(config_, derive_seed(seed_, stream))).first;
    }
    return *it->second;
}

FeatureArray Predictor::feature_importance() const {
    if (shared_)
        return global_->feature_importance();
    if (config_.kind == ModelKind::WindowKnn)
        throw Unsupported("knn does not provide feature importance");
    FeatureArray sum{};
    int contributing = 0;
    for (const auto& [id, model] : per_worker_) {
        const auto imp = model->feature_importance();
        double total = 0.0;
        for (double v : imp)
            total += v;
        if (total <= 0.0)
            continue;
        for (std::size_t f = 0; f < kNumFeatures; ++f)
            sum[f] += imp[f];
        ++contributing;
    }
    if (contributing > 0)
        for (auto& v : sum)
            v /= contributing;
    return sum;
}

} // namespace crowdswap::learn
