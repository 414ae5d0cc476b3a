#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowdswap/geo.hpp"
#include "crowdswap/random.hpp"

namespace crowdswap::traces {

enum class Mode : std::uint8_t { Walk = 0, Bike = 1, Motorbike = 2 };

std::string_view to_string(Mode m) noexcept;
std::optional<Mode> parse_mode(std::string_view s) noexcept;

/// Nominal free-flow speed used to time synthetic GPS points.
double nominal_speed(Mode m) noexcept;

struct TracePoint {
    geo::Location loc;
    double t_s = 0.0;
};

/// One recorded ride. Timestamps strictly increase; at least two points.
struct Trace {
    std::string worker_id;
    Mode mode = Mode::Bike;
    double start_time = 0.0;
    std::vector<TracePoint> points;
};

struct LoadedTraces {
    std::vector<Trace> traces;
    std::size_t dropped = 0; ///< rides rejected for non-monotone time or too few points
};

/// Reads the `worker_id,mode,t_s,lat,lon` CSV. Rows of one worker form one
/// ride. Throws EmptyFile or ParseError.
LoadedTraces load_traces(const std::filesystem::path& path);

/// Writes the CSV with shortest round-trip number formatting.
void save_traces(const std::filesystem::path& path, const std::vector<Trace>& traces);

/// Fractions over {walk, bike, motorbike}.
using ModeMix = std::array<double, 3>;

struct SynthOptions {
    int min_legs = 1;
    int max_legs = 3;
    double sample_interval_s = 30.0;
};

/// Random-waypoint rides with Poisson arrivals over [0, duration_s).
/// Worker ids are zero-padded so lexicographic order equals arrival order.
std::vector<Trace> synth_traces(int n_workers, const geo::Area& area, double duration_s,
                                const ModeMix& mode_mix, Rng& rng, const SynthOptions& opts = {});

enum class TaskKind : std::uint8_t { Parcel = 0, SensingChain = 1 };

std::string_view to_string(TaskKind k) noexcept;
std::optional<TaskKind> parse_task_kind(std::string_view s) noexcept;

struct TaskSpec {
    std::string task_id;
    TaskKind kind = TaskKind::Parcel;
    std::vector<geo::Location> locations; ///< parcel: origin, destination; chain: visit order
    double release_time = 0.0;
    double deadline = 0.0;
    double reward = 0.0;
    double penalty = 0.0;
};

/// Throws InvalidArgument when a TaskSpec breaks its invariants.
void validate(const TaskSpec& task);

struct TaskGenParams {
    TaskKind kind = TaskKind::Parcel;
    double rate_per_hour = 50.0;
    int total = 600;
    double deadline_s = 1800.0;
    double reward = 5.0;
    double penalty = 5.0;
    int chain_length = 3;
    double chain_spacing_m = 500.0;
};

/// Poisson releases at the given rate. Chains are collinear with fixed
/// spacing, random anchor and bearing, resampled until they fit the area.
/// Throws AreaTooSmall when a chain cannot fit.
std::vector<TaskSpec> gen_tasks(const TaskGenParams& params, const geo::Area& area, Rng& rng);

void save_tasks(const std::filesystem::path& path, const std::vector<TaskSpec>& tasks);
std::vector<TaskSpec> load_tasks(const std::filesystem::path& path);

std::string to_json(const std::vector<TaskSpec>& tasks);
std::vector<TaskSpec> tasks_from_json(std::string_view text);

} // namespace crowdswap::traces
