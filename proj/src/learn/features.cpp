#include "crowdswap/learn.hpp"

namespace crowdswap::learn {

FeatureVector extract_features(const agents::WorkerAgent& agent,
                               std::span<const agents::Waypoint> plan, int task, double deadline,
                               const geo::TrafficGrid& grid, double now) {
    FeatureVector x;
    x.speed_now = agent.speed_now;
    x.speed_mean = agent.speed_stats.mean;
    x.speed_max = agent.speed_stats.max;
    x.speed_min = agent.speed_stats.min;
    x.remaining_time_s = deadline - now;

    std::size_t through = 0;
    for (std::size_t i = 0; i < plan.size(); ++i)
        if (plan[i].task == task)
            through = i + 1;
    const auto path = agents::plan_polyline(agent.position, plan, through);
    const auto dense = geo::densify(path, grid.cell_size_m() / 2.0);
    const auto profile = grid.route_traffic_profile(dense);
    x.dist_normal_m = profile.normal_m;
    x.dist_slow_m = profile.slow_m;
    x.dist_jam_m = profile.jam_m;
    x.remaining_dist_m = profile.total_m();
    return x;
}

FeatureVector extract_features(const agents::WorkerAgent& agent, const traces::TaskSpec& spec,
                               int task, int next_index, const geo::TrafficGrid& grid,
                               double now) {
    auto plan = agents::planned_stops(agent);
    if (!agent.holds(task))
        for (auto i = static_cast<std::size_t>(next_index); i < spec.locations.size(); ++i)
            plan.push_back({spec.locations[i], task, static_cast<int>(i)});
    return extract_features(agent, plan, task, spec.deadline, grid, now);
}

} // namespace crowdswap::learn
