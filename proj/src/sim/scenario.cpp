#include <algorithm>
#include <cmath>
#include <string>

#include "crowdswap/error.hpp"
#include "crowdswap/sim.hpp"

namespace crowdswap::sim {

std::string_view to_string(ScenarioKind k) noexcept {
    return k == ScenarioKind::Crowdshipping ? "crowdshipping" : "crowdsensing";
}

std::optional<ScenarioKind> parse_scenario_kind(std::string_view s) noexcept {
    if (s == "crowdshipping")
        return ScenarioKind::Crowdshipping;
    if (s == "crowdsensing")
        return ScenarioKind::Crowdsensing;
    return std::nullopt;
}

std::string_view to_string(StrategyKind k) noexcept {
    switch (k) {
    case StrategyKind::Not: return "not";
    case StrategyKind::Random: return "random";
    case StrategyKind::Forced: return "forced";
    case StrategyKind::Collaborative: return "collaborative";
    case StrategyKind::Att: return "att";
    }
    return "not";
}

std::optional<StrategyKind> parse_strategy(std::string_view s) noexcept {
    for (auto k : {StrategyKind::Not, StrategyKind::Random, StrategyKind::Forced,
                   StrategyKind::Collaborative, StrategyKind::Att})
        if (to_string(k) == s)
            return k;
    return std::nullopt;
}

namespace {

void require(bool ok, const char* field, const std::string& what) {
    if (!ok)
        throw ConfigError(field, what);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }
bool positive(double v) { return std::isfinite(v) && v > 0.0; }
bool probability(double v) { return v >= 0.0 && v <= 1.0; }

} // namespace

void validate(const Scenario& s) {
    require(positive(s.duration_s), "duration_s", "must be positive");
    require(positive(s.dt_s), "dt_s", "must be positive");
    require(positive(s.grid.cell_size_m), "grid.cell_size_m", "must be positive");
    require(positive(s.grid.update_period_s), "grid.update_period_s", "must be positive");
    try {
        geo::validate_transition(s.grid.transition);
    } catch (const Error& e) {
        throw ConfigError("grid.transition", e.what());
    }
    if (s.workers.traces_path.empty()) {
        require(s.workers.count >= 0, "workers.count", "must be non-negative");
        double sum = 0.0;
        for (double f : s.workers.mode_mix) {
            require(finite_nonneg(f), "workers.mode_mix", "fractions must be non-negative");
            sum += f;
        }
        require(std::abs(sum - 1.0) < 1e-9, "workers.mode_mix", "fractions must sum to 1");
        require(s.workers.synth.min_legs >= 1 && s.workers.synth.max_legs >= s.workers.synth.min_legs,
                "workers.legs", "need 1 <= min_legs <= max_legs");
        require(positive(s.workers.synth.sample_interval_s), "workers.sample_interval_s",
                "must be positive");
    }
    if (s.tasks_path.empty()) {
        require(finite_nonneg(s.tasks.rate_per_hour), "tasks.rate_per_hour", "must be non-negative");
        require(s.tasks.total >= 0, "tasks.total", "must be non-negative");
        require(s.tasks.total == 0 || s.tasks.rate_per_hour > 0.0, "tasks.rate_per_hour",
                "must be positive when tasks are generated");
        require(positive(s.tasks.deadline_s), "tasks.deadline_s", "must be positive");
        require(finite_nonneg(s.tasks.reward), "tasks.reward", "must be non-negative");
        require(finite_nonneg(s.tasks.penalty), "tasks.penalty", "must be non-negative");
        require(s.tasks.chain_length >= 1, "tasks.chain_length", "must be at least 1");
        require(positive(s.tasks.chain_spacing_m), "tasks.chain_spacing_m", "must be positive");
    }
    require(probability(s.incidents.probability), "incidents.probability", "must lie in [0, 1]");
    require(positive(s.incidents.period_s), "incidents.period_s", "must be positive");
    require(finite_nonneg(s.incidents.min_duration_s) &&
                s.incidents.max_duration_s >= s.incidents.min_duration_s,
            "incidents.duration_s", "need 0 <= min <= max");
    require(finite_nonneg(s.move.moto.normal_mps) && finite_nonneg(s.move.moto.slow_mps),
            "agents.motorbike", "speeds must be non-negative");
    require(positive(s.move.service_radius_m), "agents.service_radius_m", "must be positive");
    for (double c : s.costs.cost_per_meter)
        require(finite_nonneg(c), "econ.cost_per_meter", "must be non-negative");
    require(finite_nonneg(s.costs.fixed_cost_per_task), "econ.fixed_cost_per_task",
            "must be non-negative");
    require(probability(s.strategy.p_transfer), "strategy.p_transfer", "must lie in [0, 1]");
    require(finite_nonneg(s.strategy.forced_margin), "strategy.forced_margin",
            "must be non-negative");
    require(positive(s.strategy.review_period_s), "strategy.review_period_s", "must be positive");
    require(positive(s.strategy.collaborative_period_s), "strategy.collaborative_period_s",
            "must be positive");
    require(s.strategy.neighborhood_radius_m > 0.0, "strategy.neighborhood_radius_m",
            "must be positive");
    require(positive(s.predictor.sample_period_s), "predictor.sample_period_s", "must be positive");
    const auto& m = s.predictor.model;
    require(m.n_trees >= 1, "predictor.n_trees", "must be at least 1");
    require(m.knn.k >= 1, "predictor.k", "must be at least 1");
    require(m.knn.window_size >= static_cast<std::size_t>(m.knn.k), "predictor.window_size", "must be at least k");
    require(m.tree.delta > 0.0 && m.tree.delta < 1.0, "predictor.delta", "must lie in (0, 1)");
    require(m.tree.grace_period >= 1, "predictor.grace_period", "must be at least 1");
}

Scenario default_crowdshipping() {
    Scenario s;
    s.name = "crowdshipping";
    s.kind = ScenarioKind::Crowdshipping;
    s.area = geo::Area::rect(geo::BBox::around({40.4168, -3.7038}, 4000.0, 4000.0));
    s.duration_s = 3.0 * 3600.0;
    s.workers.count = 3000;
    s.tasks.kind = traces::TaskKind::Parcel;
    s.tasks.rate_per_hour = 200.0;
    s.tasks.total = 600;
    s.tasks.deadline_s = 1000.0;
    s.strategy.kind = StrategyKind::Not;
    s.predictor.model.kind = learn::ModelKind::OnlineForest;
    return s;
}

Scenario default_crowdsensing(int variant) {
    if (variant < 1 || variant > 3)
        throw InvalidArgument("crowdsensing variant must be 1, 2 or 3");
    Scenario s;
    s.name = "scenario" + std::to_string(variant);
    s.kind = ScenarioKind::Crowdsensing;
    s.area = geo::Area::disc({40.4168, -3.7038}, 1500.0);
    s.duration_s = 12.0 * 3600.0;
    s.workers.count = 3000;
    s.tasks.kind = traces::TaskKind::SensingChain;
    s.tasks.rate_per_hour = variant == 2 ? 100.0 : 50.0;
    s.tasks.total = variant == 2 ? 1200 : 600;
    s.tasks.deadline_s = 1800.0;
    s.tasks.reward = 5.0;
    s.tasks.penalty = 5.0;
    s.incidents.probability = variant == 3 ? 0.10 : 0.05;
    s.incidents.min_duration_s = 600.0;
    s.incidents.max_duration_s = 1800.0;
    s.costs.cost_per_meter = {0.003, 0.0015, 0.00225};
    s.strategy.kind = StrategyKind::Att;
    s.strategy.forced_margin = 0.2;
    s.predictor.model.kind = learn::ModelKind::OnlineForest;
    return s;
}

Stat mean_std(std::span<const double> values) noexcept {
    Stat st;
    if (values.empty())
        return st;
    double sum = 0.0;
    for (double v : values)
        sum += v;
    st.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values)
            ss += (v - st.mean) * (v - st.mean);
        st.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return st;
}

double Report::cdf(double x) const noexcept {
    if (pooled_profits.empty())
        return 0.0;
    const auto it = std::upper_bound(pooled_profits.begin(), pooled_profits.end(), x);
    return static_cast<double>(it - pooled_profits.begin()) /
           static_cast<double>(pooled_profits.size());
}

Report summarize(std::span<const RunResult> runs) {
    if (runs.empty())
        throw InvalidArgument("summarize needs at least one run");
    Report r;
    r.scenario = runs.front().scenario;
    r.strategy = runs.front().strategy;
    r.predictor = runs.front().predictor;
    r.n_runs = static_cast<int>(runs.size());
    auto column = [&](auto get) {
        std::vector<double> v;
        v.reserve(runs.size());
        for (const auto& run : runs)
            v.push_back(static_cast<double>(get(run)));
        return mean_std(v);
    };
    r.delay_rate = column([](const RunResult& x) { return x.delay_rate; });
    r.mean_completion_s = column([](const RunResult& x) { return x.mean_completion_s; });
    r.n_transfers = column([](const RunResult& x) { return x.n_transfers; });
    r.n_reassigned_tasks = column([](const RunResult& x) { return x.n_reassigned_tasks; });
    r.mean_profit = column([](const RunResult& x) { return x.mean_profit; });
    r.f1 = column([](const RunResult& x) { return x.prediction.f1; });
    for (const auto& run : runs)
        for (const auto& p : run.profits)
            r.pooled_profits.push_back(p.profit);
    std::sort(r.pooled_profits.begin(), r.pooled_profits.end());
    r.frac_nonpositive = r.cdf(0.0);
    return r;
}

} // namespace crowdswap::sim
