#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdswap/agents.hpp"
#include "crowdswap/coord.hpp"
#include "crowdswap/econ.hpp"
#include "crowdswap/geo.hpp"
#include "crowdswap/learn.hpp"
#include "crowdswap/traces.hpp"

namespace crowdswap::sim {

enum class ScenarioKind : std::uint8_t { Crowdshipping, Crowdsensing };
enum class StrategyKind : std::uint8_t { Not, Random, Forced, Collaborative, Att };

std::string_view to_string(ScenarioKind k) noexcept;
std::optional<ScenarioKind> parse_scenario_kind(std::string_view s) noexcept;
std::string_view to_string(StrategyKind k) noexcept;
std::optional<StrategyKind> parse_strategy(std::string_view s) noexcept;

struct GridConfig {
    double cell_size_m = 500.0;
    double update_period_s = 60.0;
    geo::TransitionMatrix transition = geo::default_transition();
    geo::TrafficState initial = geo::TrafficState::Normal;
};

struct WorkerSource {
    /// Empty path: synthesize `count` rides over the area.
    std::string traces_path;
    int count = 3000;
    traces::ModeMix mode_mix{0.4, 0.3, 0.3};
    traces::SynthOptions synth;
};

struct IncidentConfig {
    double probability = 0.0; ///< per active agent per period
    double period_s = 60.0;
    double min_duration_s = 120.0;
    double max_duration_s = 600.0;
};

struct StrategyConfig {
    StrategyKind kind = StrategyKind::Not;
    double p_transfer = 0.005;
    double forced_margin = 0.05;
    /// How often a held task is reconsidered by ATT and Forced.
    double review_period_s = 30.0;
    /// How often couriers look for better candidates.
    double collaborative_period_s = 10.0;
    double neighborhood_radius_m = std::numeric_limits<double>::infinity();
};

/// What happens to a holder's unresolved predictions when the task moves away.
enum class TransferLabels {
    /// Drop them; they never reach the evaluator.
    Withdraw,
    /// Resolve them with the holder's own outcome had it kept the task: delayed iff
    /// the remaining route at free-flow speed would miss the deadline.
    Counterfactual,
};

struct PredictorConfig {
    learn::ModelConfig model;
    bool shared = true;
    double sample_period_s = 60.0;
    TransferLabels transfer_labels = TransferLabels::Counterfactual;
};

struct Scenario {
    std::string name = "scenario";
    ScenarioKind kind = ScenarioKind::Crowdshipping;
    std::uint64_t seed = 1;
    double duration_s = 3.0 * 3600.0;
    double dt_s = 1.0;
    geo::Area area = geo::Area::rect(geo::BBox::around({40.4168, -3.7038}, 3000.0, 3000.0));
    GridConfig grid;
    WorkerSource workers;
    traces::TaskGenParams tasks;
    /// Non-empty: load tasks from this JSON file instead of generating them.
    std::string tasks_path;
    IncidentConfig incidents;
    agents::MoveParams move;
    econ::CostParams costs;
    StrategyConfig strategy;
    PredictorConfig predictor;
    bool record_events = true;
};

/// Throws ConfigError naming the offending field.
void validate(const Scenario& s);

Scenario default_crowdshipping();
/// Crowdsensing scenario 1 (base), 2 (doubled load) or 3 (hostile).
Scenario default_crowdsensing(int variant = 1);

struct WorkerProfit {
    std::string worker_id;
    double profit = 0.0;
};

struct RunResult {
    std::string scenario;
    std::string kind;
    std::string strategy;
    std::string predictor;
    std::uint64_t seed = 0;

    int n_workers = 0;
    int n_tasks = 0;
    int n_in_time = 0;
    int n_late = 0;
    int n_expired = 0;
    double delay_rate = 0.0;
    double mean_completion_s = 0.0;

    int n_transfers = 0;
    int n_reassigned_tasks = 0;
    int in_time_after_transfer = 0;
    int delayed_after_transfer = 0;
    int n_auctions = 0;
    int n_incidents = 0;

    /// Workers with at least one non-zero ledger posting.
    std::vector<WorkerProfit> profits;
    double mean_profit = 0.0;
    double frac_nonpositive = 0.0;

    double total_rewards = 0.0;
    double total_penalties = 0.0;
    double total_costs = 0.0;
    double total_payments = 0.0; ///< net transfer payments, zero when conserved
    double conservation_error = 0.0;

    std::uint64_t n_predictions = 0;
    learn::Metrics prediction;
    std::vector<learn::HistoryPoint> f1_history;
    std::optional<learn::FeatureArray> feature_importance;

    double end_time_s = 0.0;
    /// JSON lines; not part of the result document.
    std::vector<std::string> events;
};

RunResult run(const Scenario& scenario);

/// Each listed agent independently suffers an incident with `probability`;
/// an incident immobilizes it for U[min, max] seconds from `now`. Draws one
/// uniform per agent, plus one for the duration on a hit. Returns the number
/// of hits and appends the hit agents to `hits` when given.
int apply_incidents(std::span<agents::WorkerAgent> workers, std::span<const int> active,
                    double probability, double now, const IncidentConfig& cfg, Rng& rng,
                    std::vector<int>* hits = nullptr);

struct Stat {
    double mean = 0.0;
    double std = 0.0;
};

struct Report {
    std::string scenario;
    std::string strategy;
    std::string predictor;
    int n_runs = 0;
    Stat delay_rate;
    Stat mean_completion_s;
    Stat n_transfers;
    Stat n_reassigned_tasks;
    Stat mean_profit;
    Stat f1;
    /// Pooled participant profits over all runs, ascending.
    std::vector<double> pooled_profits;
    double frac_nonpositive = 0.0;

    /// Fraction of pooled profits <= x.
    double cdf(double x) const noexcept;
};

/// Throws InvalidArgument for an empty list.
Report summarize(std::span<const RunResult> runs);

/// Sample mean and standard deviation (0 for a single value).
Stat mean_std(std::span<const double> values) noexcept;

} // namespace crowdswap::sim
