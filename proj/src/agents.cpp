#include "crowdswap/agents.hpp"

#include <algorithm>

#include "crowdswap/error.hpp"

namespace crowdswap::agents {

double mode_speed(Mode mode, geo::TrafficState state, const MotorbikeSpeeds& moto) noexcept {
    switch (mode) {
    case Mode::Walk: return 2.0;
    case Mode::Bike: return 5.0;
    case Mode::Motorbike:
        switch (state) {
        case geo::TrafficState::Normal: return moto.normal_mps;
        case geo::TrafficState::Slow: return moto.slow_mps;
        case geo::TrafficState::Jam: return 0.0;
        }
    }
    return 0.0;
}

void SpeedStats::observe(double v) noexcept {
    if (count == 0) {
        max = min = v;
    } else {
        max = std::max(max, v);
        min = std::min(min, v);
    }
    ++count;
    sum += v;
    mean = sum / static_cast<double>(count);
}

bool WorkerAgent::holds(int task) const noexcept {
    return std::binary_search(tasks.begin(), tasks.end(), task);
}

geo::Location WorkerAgent::destination() const noexcept {
    return route.empty() ? position : route.back().loc;
}

WorkerAgent make_agent(const traces::Trace& trace) {
    if (trace.points.size() < 2)
        throw InvalidArgument("trace " + trace.worker_id + " has fewer than two points");
    WorkerAgent a;
    a.id = trace.worker_id;
    a.mode = trace.mode;
    a.position = trace.points.front().loc;
    a.route.reserve(trace.points.size() - 1);
    for (std::size_t i = 1; i < trace.points.size(); ++i)
        a.route.push_back({trace.points[i].loc});
    return a;
}

namespace {

void serve_nearby(WorkerAgent& agent, double radius_m, std::vector<StopArrival>& arrivals) {
    std::size_t served = 0;
    while (served < agent.route.size() && agent.route[served].is_stop() &&
           geo::distance_m(agent.position, agent.route[served].loc) <= radius_m) {
        arrivals.push_back({agent.route[served].task, agent.route[served].index});
        ++served;
    }
    agent.route.erase(agent.route.begin(), agent.route.begin() + static_cast<std::ptrdiff_t>(served));
}

} // namespace

AdvanceResult advance(WorkerAgent& agent, double dt_s, const geo::TrafficGrid& grid, double now,
                      const MoveParams& params) {
    AdvanceResult result;
    if (!agent.active)
        return result;

    const double speed =
        agent.immobilized(now)
            ? 0.0
            : mode_speed(agent.mode, grid.state(grid.cell_of_clamped(agent.position)), params.moto);
    agent.speed_now = speed;
    agent.speed_stats.observe(speed);

    const geo::Location start = agent.position;
    const geo::Location dest = agent.destination();
    serve_nearby(agent, params.service_radius_m, result.arrivals);

    double budget = speed * dt_s;
    std::size_t consumed = 0;
    while (budget > 0.0 && consumed < agent.route.size()) {
        const Waypoint& next = agent.route[consumed];
        const double d = geo::distance_m(agent.position, next.loc);
        if (d <= budget) {
            agent.position = next.loc;
            budget -= d;
            result.moved_m += d;
            if (next.is_stop())
                result.arrivals.push_back({next.task, next.index});
            ++consumed;
        } else {
            agent.position = geo::lerp(agent.position, next.loc, budget / d);
            result.moved_m += budget;
            budget = 0.0;
        }
    }
    agent.route.erase(agent.route.begin(), agent.route.begin() + static_cast<std::ptrdiff_t>(consumed));
    serve_nearby(agent, params.service_radius_m, result.arrivals);

    agent.odometer_m += result.moved_m;
    result.progress_m = geo::distance_m(start, dest) - geo::distance_m(agent.position, dest);
    if (agent.route.empty())
        agent.active = false;
    return result;
}

std::vector<geo::Location> detour_route(const WorkerAgent& agent,
                                        std::span<const geo::Location> via) {
    if (via.empty()) {
        std::vector<geo::Location> out{agent.position};
        for (const auto& w : agent.route)
            out.push_back(w.loc);
        return out;
    }
    std::vector<geo::Location> out{agent.position};
    out.insert(out.end(), via.begin(), via.end());
    out.push_back(agent.destination());
    return out;
}

std::vector<Waypoint> planned_stops(const WorkerAgent& agent) {
    std::vector<Waypoint> out;
    for (const auto& w : agent.route)
        if (w.is_stop())
            out.push_back(w);
    return out;
}

void set_plan(WorkerAgent& agent, std::vector<Waypoint> stops) {
    const geo::Location dest = agent.destination();
    stops.push_back({dest});
    agent.route = std::move(stops);
}

std::vector<geo::Location> plan_polyline(geo::Location from, std::span<const Waypoint> stops,
                                         std::size_t count) {
    std::vector<geo::Location> out{from};
    for (std::size_t i = 0; i < count && i < stops.size(); ++i)
        out.push_back(stops[i].loc);
    return out;
}

} // namespace crowdswap::agents
