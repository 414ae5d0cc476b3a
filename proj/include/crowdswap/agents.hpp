#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "crowdswap/geo.hpp"
#include "crowdswap/traces.hpp"

namespace crowdswap::agents {

using traces::Mode;

struct MotorbikeSpeeds {
    double normal_mps = 10.0;
    double slow_mps = 3.0;
};

/// Walkers and cyclists ignore road traffic; motorbikes stop dead in a jam.
double mode_speed(Mode mode, geo::TrafficState state, const MotorbikeSpeeds& moto = {}) noexcept;

/// Running aggregate of every observed instantaneous speed.
struct SpeedStats {
    double mean = 0.0;
    double max = 0.0;
    double min = 0.0;
    double sum = 0.0;
    std::uint64_t count = 0;

    void observe(double v) noexcept;
};

/// Route vertex. A non-negative `task` marks the service stop for
/// `locations[index]` of that task.
struct Waypoint {
    geo::Location loc;
    int task = -1;
    int index = 0;

    bool is_stop() const noexcept { return task >= 0; }
};

struct WorkerAgent {
    std::string id;
    Mode mode = Mode::Walk;
    geo::Location position;
    std::vector<Waypoint> route;  ///< remaining; back() is the rider's own destination
    double speed_now = 0.0;
    SpeedStats speed_stats;
    std::vector<int> tasks;  ///< sorted task indices currently held
    double ledger = 0.0;
    bool active = false;
    double immobilized_until = -std::numeric_limits<double>::infinity();
    double odometer_m = 0.0;

    bool has_tasks() const noexcept { return !tasks.empty(); }
    bool holds(int task) const noexcept;
    geo::Location destination() const noexcept;
    bool immobilized(double now) const noexcept { return now < immobilized_until; }
};

/// Builds an inactive agent positioned at the first trace point.
WorkerAgent make_agent(const traces::Trace& trace);

struct StopArrival {
    int task = -1;
    int index = 0;
};

struct AdvanceResult {
    double moved_m = 0.0;
    /// Decrease of the straight-line distance to the rider's own destination.
    double progress_m = 0.0;
    std::vector<StopArrival> arrivals;
};

struct MoveParams {
    MotorbikeSpeeds moto;
    double service_radius_m = 5.0;
};

/// Moves an active agent along its route for `dt_s` seconds at the speed of
/// its mode in the traffic state of its current cell (0 while immobilized).
/// Consumes waypoints, reports task stops reached, and deactivates the agent
/// at the end of its route.
AdvanceResult advance(WorkerAgent& agent, double dt_s, const geo::TrafficGrid& grid, double now,
                      const MoveParams& params = {});

/// position -> via (in order) -> own destination, as straight legs.
std::vector<geo::Location> detour_route(const WorkerAgent& agent,
                                        std::span<const geo::Location> via);

/// Service stops still ahead of the agent, in visiting order.
std::vector<Waypoint> planned_stops(const WorkerAgent& agent);

/// Replaces the route by `stops` followed by the own destination.
void set_plan(WorkerAgent& agent, std::vector<Waypoint> stops);

/// Polyline from the agent position through `stops`.
std::vector<geo::Location> plan_polyline(geo::Location from, std::span<const Waypoint> stops,
                                         std::size_t count);

} // namespace crowdswap::agents
