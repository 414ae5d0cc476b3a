#include "crowdswap/econ.hpp"

#include <algorithm>
#include <limits>

#include "crowdswap/error.hpp"

namespace crowdswap::econ {

double revenue(std::span<const PricedTask> tasks, const std::map<std::string, bool>& outcomes) {
    double total = 0.0;
    for (const auto& t : tasks) {
        auto it = outcomes.find(t.task_id);
        if (it == outcomes.end())
            throw MissingOutcome("no outcome for task " + t.task_id);
        total += it->second ? t.reward : -t.penalty;
    }
    return total;
}

namespace {

struct Block {
    geo::Location first;
    geo::Location last;
    double internal_m = 0.0;
};

std::vector<Block> blocks_of(std::span<const Chain> chains) {
    std::vector<Block> out;
    for (const auto& c : chains) {
        if (c.empty())
            continue;
        out.push_back({c.front(), c.back(), geo::polyline_length_m(c)});
    }
    return out;
}

} // namespace

double ordered_detour_m(geo::Location from, geo::Location to, std::span<const Chain> chains) {
    const auto blocks = blocks_of(chains);
    if (blocks.empty())
        return 0.0;
    double len = 0.0;
    geo::Location at = from;
    for (const auto& b : blocks) {
        len += geo::distance_m(at, b.first) + b.internal_m;
        at = b.last;
    }
    len += geo::distance_m(at, to);
    return std::max(0.0, len - geo::distance_m(from, to));
}

double marginal_detour_m(geo::Location from, geo::Location to, std::span<const Chain> chains) {
    const auto blocks = blocks_of(chains);
    const std::size_t n = blocks.size();
    if (n == 0)
        return 0.0;
    const double direct = geo::distance_m(from, to);

    if (n > kExactCostLimit) {
        double separate = 0.0;
        for (const auto& b : blocks)
            separate += std::max(
                0.0, geo::distance_m(from, b.first) + b.internal_m + geo::distance_m(b.last, to) -
                         direct);
        return std::min(separate, ordered_detour_m(from, to, chains));
    }

    constexpr double kInf = std::numeric_limits<double>::infinity();
    const std::size_t full = std::size_t{1} << n;

    // Shortest from -> blocks(mask) path ending after block `last`.
    std::vector<double> path(full * n, kInf);
    for (std::size_t i = 0; i < n; ++i)
        path[(std::size_t{1} << i) * n + i] =
            geo::distance_m(from, blocks[i].first) + blocks[i].internal_m;
    std::vector<double> hop(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            hop[i * n + j] = geo::distance_m(blocks[i].last, blocks[j].first) + blocks[j].internal_m;
    for (std::size_t mask = 1; mask < full; ++mask)
        for (std::size_t last = 0; last < n; ++last) {
            const double cur = path[mask * n + last];
            if (cur == kInf)
                continue;
            for (std::size_t next = 0; next < n; ++next) {
                if (mask & (std::size_t{1} << next))
                    continue;
                const std::size_t m2 = mask | (std::size_t{1} << next);
                path[m2 * n + next] = std::min(path[m2 * n + next], cur + hop[last * n + next]);
            }
        }

    // Best detour per subset, then the cheapest grouping of the subset.
    std::vector<double> best(full, 0.0);
    for (std::size_t mask = 1; mask < full; ++mask) {
        double route = kInf;
        for (std::size_t last = 0; last < n; ++last)
            if (mask & (std::size_t{1} << last))
                route = std::min(route, path[mask * n + last] + geo::distance_m(blocks[last].last, to));
        best[mask] = std::max(0.0, route - direct);
        const std::size_t low = mask & (~mask + 1);
        for (std::size_t sub = (mask - 1) & mask; sub > 0; sub = (sub - 1) & mask) {
            if (!(sub & low))
                continue;
            best[mask] = std::min(best[mask], best[sub] + best[mask ^ sub]);
        }
    }
    return best[full - 1];
}

double cost(const agents::WorkerAgent& worker, std::span<const Chain> chains,
            const CostParams& params) {
    if (chains.empty())
        return 0.0;
    return params.per_meter(worker.mode) *
               marginal_detour_m(worker.position, worker.destination(), chains) +
           params.fixed_cost_per_task * static_cast<double>(chains.size());
}

std::vector<agents::Waypoint> plan_for(std::span<const PlannedTask> tasks) {
    std::vector<agents::Waypoint> plan;
    for (const auto& t : tasks)
        for (std::size_t i = 0; i < t.remaining.size(); ++i)
            plan.push_back({t.remaining[i], t.task, t.first_index + static_cast<int>(i)});
    return plan;
}

namespace {

double set_cost(const agents::WorkerAgent& worker, std::span<const PlannedTask> tasks,
                const CostParams& params) {
    std::vector<Chain> chains;
    chains.reserve(tasks.size());
    for (const auto& t : tasks)
        chains.push_back(t.remaining);
    return cost(worker, chains, params);
}

} // namespace

double expected_utility(const agents::WorkerAgent& worker, std::span<const PlannedTask> tasks,
                        const SuccessFn& success, const CostParams& params) {
    if (tasks.empty())
        return 0.0;
    const auto plan = plan_for(tasks);
    double eu = -set_cost(worker, tasks, params);
    for (const auto& t : tasks) {
        const double eo = success(worker, plan, t);
        eu += eo * t.reward - (1.0 - eo) * t.penalty;
    }
    return eu;
}

double realized_utility(const agents::WorkerAgent& worker, std::span<const PlannedTask> tasks,
                        std::span<const bool> outcomes, const CostParams& params) {
    if (outcomes.size() != tasks.size())
        throw MissingOutcome("one outcome per task is required");
    double u = -set_cost(worker, tasks, params);
    for (std::size_t i = 0; i < tasks.size(); ++i)
        u += outcomes[i] ? tasks[i].reward : -tasks[i].penalty;
    return u;
}

} // namespace crowdswap::econ
