#include "crowdswap/traces.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "crowdswap/error.hpp"

namespace crowdswap::traces {

namespace {

constexpr std::string_view kTraceHeader = "worker_id,mode,t_s,lat,lon";

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

bool parse_double(std::string_view s, double& out) {
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && std::isfinite(out);
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string padded_id(char prefix, std::size_t i, std::size_t n) {
    std::string digits = std::to_string(i);
    const std::size_t width = std::max<std::size_t>(4, std::to_string(n).size());
    if (digits.size() < width)
        digits.insert(0, width - digits.size(), '0');
    return std::string(1, prefix) + digits;
}

Mode draw_mode(const ModeMix& mix, Rng& rng) {
    const double u = uniform01(rng);
    if (u < mix[0])
        return Mode::Walk;
    if (u < mix[0] + mix[1])
        return Mode::Bike;
    return mix[2] > 0.0 ? Mode::Motorbike : (mix[1] > 0.0 ? Mode::Bike : Mode::Walk);
}

} // namespace

std::string_view to_string(Mode m) noexcept {
    switch (m) {
    case Mode::Walk: return "walk";
    case Mode::Bike: return "bike";
    case Mode::Motorbike: return "motorbike";
    }
    return "walk";
}

std::optional<Mode> parse_mode(std::string_view s) noexcept {
    if (s == "walk")
        return Mode::Walk;
    if (s == "bike")
        return Mode::Bike;
    if (s == "motorbike")
        return Mode::Motorbike;
    return std::nullopt;
}

double nominal_speed(Mode m) noexcept {
    switch (m) {
    case Mode::Walk: return 2.0;
    case Mode::Bike: return 5.0;
    case Mode::Motorbike: return 10.0;
    }
    return 2.0;
}

LoadedTraces load_traces(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open trace file " + path.string());

    std::string line;
    if (!std::getline(in, line))
        throw EmptyFile("trace file " + path.string() + " is empty");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != kTraceHeader)
        throw ParseError("expected header '" + std::string(kTraceHeader) + "'", 1);

    struct Ride {
        Trace trace;
        bool monotone = true;
    };
    std::vector<Ride> rides;
    std::unordered_map<std::string, std::size_t> by_id;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto fields = split_csv(line);
        if (fields.size() != 5)
            throw ParseError("expected 5 fields, got " + std::to_string(fields.size()), line_no);
        if (fields[0].empty())
            throw ParseError("empty worker_id", line_no);
        const auto mode = parse_mode(fields[1]);
        if (!mode)
            throw ParseError("unknown mode '" + std::string(fields[1]) + "'", line_no);
        TracePoint pt;
        if (!parse_double(fields[2], pt.t_s))
            throw ParseError("bad t_s '" + std::string(fields[2]) + "'", line_no);
        if (!parse_double(fields[3], pt.loc.lat) || !parse_double(fields[4], pt.loc.lon) ||
            !geo::is_valid(pt.loc))
            throw ParseError("bad coordinates", line_no);

        const std::string id(fields[0]);
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            it = by_id.emplace(id, rides.size()).first;
            Ride r;
            r.trace.worker_id = id;
            r.trace.mode = *mode;
            rides.push_back(std::move(r));
        }
        Ride& ride = rides[it->second];
        if (ride.trace.mode != *mode)
            throw ParseError("worker '" + id + "' changes mode mid-ride", line_no);
        if (!ride.trace.points.empty() && !(pt.t_s > ride.trace.points.back().t_s))
            ride.monotone = false;
        ride.trace.points.push_back(pt);
    }
    if (rides.empty())
        throw EmptyFile("trace file " + path.string() + " has no data rows");

    LoadedTraces out;
    for (auto& r : rides) {
        if (!r.monotone || r.trace.points.size() < 2) {
            ++out.dropped;
            continue;
        }
        r.trace.start_time = r.trace.points.front().t_s;
        out.traces.push_back(std::move(r.trace));
    }
    std::stable_sort(out.traces.begin(), out.traces.end(), [](const Trace& a, const Trace& b) {
        if (a.start_time != b.start_time)
            return a.start_time < b.start_time;
        return a.worker_id < b.worker_id;
    });
    return out;
}

void save_traces(const std::filesystem::path& path, const std::vector<Trace>& traces) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write trace file " + path.string());
    out << kTraceHeader << '\n';
    for (const auto& t : traces) {
        const auto mode = to_string(t.mode);
        for (const auto& p : t.points)
            out << t.worker_id << ',' << mode << ',' << format_double(p.t_s) << ','
                << format_double(p.loc.lat) << ',' << format_double(p.loc.lon) << '\n';
    }
}

std::vector<Trace> synth_traces(int n_workers, const geo::Area& area, double duration_s,
                                const ModeMix& mode_mix, Rng& rng, const SynthOptions& opts) {
    double mix_sum = 0.0;
    for (double f : mode_mix) {
        if (!(f >= 0.0))
            throw InvalidArgument("mode_mix fractions must be non-negative");
        mix_sum += f;
    }
    if (std::abs(mix_sum - 1.0) > 1e-9)
        throw InvalidArgument("mode_mix must sum to 1");
    if (n_workers < 0 || !(duration_s > 0.0) || opts.min_legs < 1 ||
        opts.max_legs < opts.min_legs || !(opts.sample_interval_s > 0.0))
        throw InvalidArgument("invalid synthetic trace parameters");

    std::vector<double> arrivals(static_cast<std::size_t>(n_workers));
    for (auto& a : arrivals)
        a = uniform(rng, 0.0, duration_s);
    std::sort(arrivals.begin(), arrivals.end());

    std::vector<Trace> out;
    out.reserve(arrivals.size());
    for (std::size_t i = 0; i < arrivals.size(); ++i) {
        Trace t;
        t.worker_id = padded_id('w', i, arrivals.size());
        t.mode = draw_mode(mode_mix, rng);
        t.start_time = arrivals[i];

        std::vector<geo::Location> corners{area.sample(rng)};
        const int legs = std::uniform_int_distribution<int>(opts.min_legs, opts.max_legs)(rng);
        for (int k = 0; k < legs; ++k)
            corners.push_back(area.sample(rng));

        const double speed = nominal_speed(t.mode);
        const double step_m = speed * opts.sample_interval_s;
        t.points.push_back({corners.front(), t.start_time});
        double travelled = 0.0;  // arc length at the start of the current leg
        double next_mark = step_m;
        for (std::size_t k = 1; k < corners.size(); ++k) {
            const double len = geo::distance_m(corners[k - 1], corners[k]);
            while (next_mark < travelled + len) {
                const double f = (next_mark - travelled) / len;
                t.points.push_back(
                    {geo::lerp(corners[k - 1], corners[k], f), t.start_time + next_mark / speed});
                next_mark += step_m;
            }
            travelled += len;
        }
        const double t_end = t.start_time + travelled / speed;
        if (t_end - t.points.back().t_s > 1e-6)
            t.points.push_back({corners.back(), t_end});
        if (t.points.size() < 2)  // zero-length ride
            t.points.push_back({corners.back(), t.start_time + opts.sample_interval_s});
        out.push_back(std::move(t));
    }
    return out;
}

std::string_view to_string(TaskKind k) noexcept {
    return k == TaskKind::Parcel ? "Parcel" : "SensingChain";
}

std::optional<TaskKind> parse_task_kind(std::string_view s) noexcept {
    if (s == "Parcel")
        return TaskKind::Parcel;
    if (s == "SensingChain")
        return TaskKind::SensingChain;
    return std::nullopt;
}

void validate(const TaskSpec& task) {
    if (!(task.deadline > task.release_time))
        throw InvalidArgument("task " + task.task_id + ": deadline must follow release_time");
    if (task.kind == TaskKind::Parcel && task.locations.size() != 2)
        throw InvalidArgument("task " + task.task_id + ": a parcel needs exactly 2 locations");
    if (task.kind == TaskKind::SensingChain && task.locations.empty())
        throw InvalidArgument("task " + task.task_id + ": a sensing chain needs a location");
    if (!(task.reward >= 0.0) || !(task.penalty >= 0.0))
        throw InvalidArgument("task " + task.task_id + ": reward and penalty must be >= 0");
    for (const auto& loc : task.locations)
        if (!geo::is_valid(loc))
            throw InvalidArgument("task " + task.task_id + ": invalid location");
}

std::vector<TaskSpec> gen_tasks(const TaskGenParams& params, const geo::Area& area, Rng& rng) {
    if (params.total < 0)
        throw InvalidArgument("total must be non-negative");
    if (params.total == 0)
        return {};
    if (!(params.rate_per_hour > 0.0))
        throw InvalidArgument("rate_per_hour must be positive");
    if (!(params.deadline_s > 0.0) || !(params.reward >= 0.0) || !(params.penalty >= 0.0))
        throw InvalidArgument("deadline must be positive; reward and penalty non-negative");
    const double chain_len_m = (params.chain_length - 1) * params.chain_spacing_m;
    if (params.kind == TaskKind::SensingChain) {
        if (params.chain_length < 1)
            throw InvalidArgument("chain_length must be >= 1");
        if (chain_len_m > area.max_extent_m())
            throw AreaTooSmall("a " + std::to_string(chain_len_m) +
                               " m chain cannot fit in the operating area");
    }

    const double rate_per_s = params.rate_per_hour / 3600.0;
    std::vector<TaskSpec> out;
    out.reserve(static_cast<std::size_t>(params.total));
    double t = 0.0;
    for (int i = 0; i < params.total; ++i) {
        t += exponential(rng, rate_per_s);
        TaskSpec task;
        task.task_id = padded_id('t', static_cast<std::size_t>(i), static_cast<std::size_t>(params.total));
        task.kind = params.kind;
        task.release_time = t;
        task.deadline = t + params.deadline_s;
        task.reward = params.reward;
        task.penalty = params.penalty;
        if (params.kind == TaskKind::Parcel) {
            task.locations.push_back(area.sample(rng));
            task.locations.push_back(area.sample(rng));
        } else {
            constexpr int kMaxAttempts = 100000;
            int attempt = 0;
            for (; attempt < kMaxAttempts; ++attempt) {
                const auto anchor = area.sample(rng);
                const double bearing = uniform(rng, 0.0, 2.0 * std::numbers::pi);
                task.locations.assign(1, anchor);
                bool fits = true;
                for (int k = 1; k < params.chain_length && fits; ++k) {
                    const auto p = geo::travel(anchor, bearing, k * params.chain_spacing_m);
                    fits = area.contains(p);
                    task.locations.push_back(p);
                }
                if (fits)
                    break;
            }
            if (attempt == kMaxAttempts)
                throw AreaTooSmall("could not place a sensing chain inside the area");
        }
        out.push_back(std::move(task));
    }
    return out;
}

namespace {

nlohmann::json task_to_json(const TaskSpec& t) {
    nlohmann::json locs = nlohmann::json::array();
    for (const auto& l : t.locations)
        locs.push_back({{"lat", l.lat}, {"lon", l.lon}});
    return {{"task_id", t.task_id},   {"kind", std::string(to_string(t.kind))},
            {"locations", locs},      {"release_time", t.release_time},
            {"deadline", t.deadline}, {"reward", t.reward},
            {"penalty", t.penalty}};
}

} // namespace

std::string to_json(const std::vector<TaskSpec>& tasks) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : tasks)
        arr.push_back(task_to_json(t));
    return arr.dump(2);
}

std::vector<TaskSpec> tasks_from_json(std::string_view text) {
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what(), 0);
    }
    if (!arr.is_array())
        throw ParseError("task file must hold a JSON array", 0);
    std::vector<TaskSpec> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& j = arr[i];
        try {
            TaskSpec t;
            t.task_id = j.at("task_id").get<std::string>();
            const auto kind = parse_task_kind(j.at("kind").get<std::string>());
            if (!kind)
                throw InvalidArgument("unknown task kind");
            t.kind = *kind;
            for (const auto& l : j.at("locations"))
                t.locations.push_back({l.at("lat").get<double>(), l.at("lon").get<double>()});
            t.release_time = j.at("release_time").get<double>();
            t.deadline = j.at("deadline").get<double>();
            t.reward = j.at("reward").get<double>();
            t.penalty = j.at("penalty").get<double>();
            validate(t);
            out.push_back(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("task #" + std::to_string(i) + ": " + e.what(), 0);
        } catch (const InvalidArgument& e) {
            throw ParseError("task #" + std::to_string(i) + ": " + e.what(), 0);
        }
    }
    return out;
}

void save_tasks(const std::filesystem::path& path, const std::vector<TaskSpec>& tasks) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write task file " + path.string());
    out << to_json(tasks) << '\n';
}

std::vector<TaskSpec> load_tasks(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open task file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const auto text = ss.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw EmptyFile("task file " + path.string() + " is empty");
    return tasks_from_json(text);
}

} // namespace crowdswap::traces
