#pragma once

#include <array>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "crowdswap/agents.hpp"
#include "crowdswap/geo.hpp"

namespace crowdswap::econ {

struct CostParams {
    /// EUR per meter of detour, indexed by Mode.
    std::array<double, 3> cost_per_meter{0.004, 0.002, 0.003};
    double fixed_cost_per_task = 0.25;

    double per_meter(traces::Mode mode) const noexcept {
        return cost_per_meter[static_cast<std::size_t>(mode)];
    }
};

struct PricedTask {
    std::string task_id;
    double reward = 0.0;
    double penalty = 0.0;
};

/// sum of rewards of successes minus penalties of failures.
/// Throws MissingOutcome when a task has no outcome.
double revenue(std::span<const PricedTask> tasks, const std::map<std::string, bool>& outcomes);

/// Locations of one task that are still to be visited, in order.
using Chain = std::span<const geo::Location>;

/// Largest task set solved exactly; larger sets fall back to a heuristic.
inline constexpr std::size_t kExactCostLimit = 8;

/// Extra distance for visiting every chain on the way from `from` to `to`.
/// Chains are contiguous blocks; the block order is optimal and the set may
/// be split into independently detoured groups when that is cheaper, which
/// keeps the result subadditive.
double marginal_detour_m(geo::Location from, geo::Location to, std::span<const Chain> chains);

/// Detour of one fixed visiting order (no reordering, no grouping).
double ordered_detour_m(geo::Location from, geo::Location to, std::span<const Chain> chains);

/// cost_per_meter[mode] * marginal detour + fixed_cost_per_task * |S|.
double cost(const agents::WorkerAgent& worker, std::span<const Chain> chains,
            const CostParams& params);

/// A task as seen by a utility computation.
struct PlannedTask {
    int task = -1;
    std::span<const geo::Location> remaining;
    int first_index = 0; ///< index of remaining.front() within the task's locations
    double deadline = 0.0;
    double reward = 0.0;
    double penalty = 0.0;
};

/// Expected outcome E[O_j] of `task` when the worker follows `plan`.
using SuccessFn = std::function<double(const agents::WorkerAgent& worker,
                                       std::span<const agents::Waypoint> plan,
                                       const PlannedTask& task)>;

/// Stops for the tasks in the given order, each task as one block.
std::vector<agents::Waypoint> plan_for(std::span<const PlannedTask> tasks);

/// -E[C] + sum E[O_j] r_j - sum (1 - E[O_j]) p_j with deterministic cost.
double expected_utility(const agents::WorkerAgent& worker, std::span<const PlannedTask> tasks,
                        const SuccessFn& success, const CostParams& params);

/// Realized utility for known outcomes (one per task, in order).
double realized_utility(const agents::WorkerAgent& worker, std::span<const PlannedTask> tasks,
                        std::span<const bool> outcomes, const CostParams& params);

} // namespace crowdswap::econ
