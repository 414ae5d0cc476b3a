#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "crowdswap/config.hpp"
#include "crowdswap/error.hpp"
#include "crowdswap/report.hpp"
#include "crowdswap/sim.hpp"
#include "crowdswap/traces.hpp"

namespace fs = std::filesystem;
using namespace crowdswap;

namespace {

void setup_logging() {
    spdlog::set_level(spdlog::level::warn);
    if (const char* lvl = std::getenv("CROWDSWAP_LOG")) {
        const std::string s = lvl;
        if (s == "error")
            spdlog::set_level(spdlog::level::err);
        else if (s == "warn")
            spdlog::set_level(spdlog::level::warn);
        else if (s == "info")
            spdlog::set_level(spdlog::level::info);
        else if (s == "debug")
            spdlog::set_level(spdlog::level::debug);
        else
            spdlog::warn("ignoring CROWDSWAP_LOG={}", s);
    }
    spdlog::set_pattern("[%l] %v");
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << content;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

void apply_overrides(sim::Scenario& s, const std::string& strategy, const std::string& predictor) {
    if (!strategy.empty()) {
        const auto k = sim::parse_strategy(strategy);
        if (!k)
            throw ConfigError("strategy", "unknown strategy '" + strategy + "'");
        s.strategy.kind = *k;
    }
    if (!predictor.empty()) {
        const auto k = learn::parse_model_kind(predictor);
        if (!k)
            throw ConfigError("predictor", "unknown model '" + predictor + "'");
        s.predictor.model.kind = *k;
    }
}

struct SimulateArgs {
    std::string config;
    std::string variant;
    std::string strategy;
    std::string predictor;
    std::string out;
    std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a) {
    const auto cfg = config::load_config(a.config);
    auto s = a.variant.empty() ? cfg.scenario : cfg.find(a.variant);
    if (a.seed)
        s.seed = *a.seed;
    apply_overrides(s, a.strategy, a.predictor);
    s.record_events = cfg.output.events;
    const fs::path out = a.out.empty() ? fs::path(cfg.output.dir) : fs::path(a.out);

    spdlog::info("running {} ({}, seed {})", s.name, sim::to_string(s.strategy.kind), s.seed);
    const auto r = sim::run(s);
    write_file(out / "result.json", report::to_json(r) + "\n");
    if (cfg.output.events)
        write_file(out / "events.jsonl", report::events_jsonl(r));
    if (cfg.output.stream_log)
        write_file(out / "stream_log.csv", report::stream_log_csv(r));
    std::cout << "delay " << 100.0 * r.delay_rate << "%  completion " << r.mean_completion_s / 60.0
              << " min  transfers " << r.n_transfers << "  mean profit " << r.mean_profit
              << "  f1 " << r.prediction.f1 << "\n";
    return 0;
}

struct SweepArgs {
    std::string config;
    std::string strategies;
    std::string scenarios;
    std::string predictor;
    std::string out;
    int runs = 30;
    int jobs = 1;
};

int cmd_sweep(const SweepArgs& a) {
    if (a.runs < 1)
        throw ConfigError("--runs", "must be at least 1");
    if (a.jobs < 1)
        throw ConfigError("--jobs", "must be at least 1");
    const auto cfg = config::load_config(a.config);

    std::vector<std::string> scen_names = split(a.scenarios);
    if (scen_names.empty()) {
        scen_names.push_back(cfg.scenario.name);
        for (const auto& [n, _] : cfg.variants)
            scen_names.push_back(n);
    }
    std::vector<std::string> strat_names = split(a.strategies);
    if (strat_names.empty())
        strat_names.push_back(std::string(sim::to_string(cfg.scenario.strategy.kind)));

    struct Cell {
        sim::Scenario scenario;
        std::vector<std::optional<sim::RunResult>> runs;
        std::vector<std::string> errors;
    };
    std::vector<Cell> cells;
    for (const auto& sn : scen_names)
        for (const auto& st : strat_names) {
            auto s = cfg.find(sn);
            apply_overrides(s, st, a.predictor);
            s.record_events = false;
            sim::validate(s);
            cells.push_back({s, std::vector<std::optional<sim::RunResult>>(a.runs),
                             std::vector<std::string>(a.runs)});
        }

    const std::size_t total = cells.size() * static_cast<std::size_t>(a.runs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t job; (job = next.fetch_add(1)) < total;) {
            auto& cell = cells[job / a.runs];
            const auto i = job % a.runs;
            auto s = cell.scenario;
            s.seed = cell.scenario.seed + i;
            try {
                cell.runs[i] = sim::run(s);
            } catch (const std::exception& e) {
                cell.errors[i] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int j = 1; j < std::min<int>(a.jobs, static_cast<int>(total)); ++j)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();

    const fs::path out = a.out.empty() ? fs::path(cfg.output.dir) : fs::path(a.out);
    bool failed = false;
    std::vector<sim::Report> reports;
    std::string failures;
    for (const auto& cell : cells) {
        std::vector<sim::RunResult> ok;
        for (std::size_t i = 0; i < cell.runs.size(); ++i) {
            if (cell.runs[i])
                ok.push_back(*cell.runs[i]);
            else {
                failed = true;
                failures += fmt::format("{},{},{},\"{}\"\n", cell.scenario.name,
                                        sim::to_string(cell.scenario.strategy.kind),
                                        cell.scenario.seed + i, cell.errors[i]);
                spdlog::error("{} / {} seed {}: {}", cell.scenario.name,
                              sim::to_string(cell.scenario.strategy.kind), cell.scenario.seed + i,
                              cell.errors[i]);
            }
        }
        if (ok.empty())
            continue;
        auto rep = sim::summarize(ok);
        write_file(out / fmt::format("report_{}_{}.json", rep.scenario, rep.strategy),
                   report::to_json(rep) + "\n");
        reports.push_back(std::move(rep));
    }
    const auto table = report::comparison_csv(reports);
    write_file(out / "comparison.csv", table);
    if (failed)
        write_file(out / "failures.csv", "scenario,strategy,seed,error\n" + failures);

    // Charts: grouped by scenario, one series per strategy.
    std::vector<std::string> groups = scen_names;
    std::vector<report::BarSeries> delay, profit;
    for (const auto& st : strat_names) {
        report::BarSeries d{st, {}}, p{st, {}};
        for (const auto& sn : scen_names) {
            double dv = 0.0, pv = 0.0;
            for (const auto& r : reports)
                if (r.scenario == sn && r.strategy == st) {
                    dv = 100.0 * r.delay_rate.mean;
                    pv = r.mean_profit.mean;
                }
            d.values.push_back(dv);
            p.values.push_back(pv);
        }
        delay.push_back(std::move(d));
        profit.push_back(std::move(p));
    }
    write_file(out / "delay.svg", report::bar_chart_svg("Delayed tasks", "delay %", groups, delay));
    write_file(out / "profit.svg",
               report::bar_chart_svg("Mean worker profit", "EUR", groups, profit));
    for (const auto& sn : scen_names) {
        std::vector<report::CdfSeries> cdf;
        for (const auto& r : reports)
            if (r.scenario == sn)
                cdf.push_back({r.strategy, r.pooled_profits});
        write_file(out / fmt::format("profit_cdf_{}.svg", sn),
                   report::cdf_chart_svg("Worker profit distribution (" + sn + ")", "profit EUR",
                                         cdf));
    }
    std::cout << table;
    return failed ? 1 : 0;
}

struct SynthArgs {
    int workers = 100;
    std::string area = "40.4168,-3.7038,1500";
    std::string out;
    std::string mode_mix = "0.4,0.3,0.3";
    double duration_s = 3600.0;
    std::uint64_t seed = 1;
};

std::vector<double> numbers(const std::string& s, const char* flag) {
    std::vector<double> v;
    for (const auto& item : split(s)) {
        try {
            v.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError(flag, "not a number: " + item);
        }
    }
    return v;
}

int cmd_synth(const SynthArgs& a) {
    const auto v = numbers(a.area, "--area");
    geo::Area area = geo::Area::disc({0, 0}, 1.0);
    if (v.size() == 3)
        area = geo::Area::disc({v[0], v[1]}, v[2]);
    else if (v.size() == 4)
        area = geo::Area::rect(geo::BBox::around({v[0], v[1]}, v[2], v[3]));
    else
        throw ConfigError("--area", "expected lat,lon,radius_m or lat,lon,width_m,height_m");
    const auto m = numbers(a.mode_mix, "--mode-mix");
    if (m.size() != 3)
        throw ConfigError("--mode-mix", "expected walk,bike,motorbike fractions");
    if (a.workers < 0)
        throw ConfigError("--workers", "must be non-negative");
    Rng rng(a.seed);
    const auto traces = traces::synth_traces(a.workers, area, a.duration_s, {m[0], m[1], m[2]}, rng);
    if (fs::path(a.out).has_parent_path())
        fs::create_directories(fs::path(a.out).parent_path());
    traces::save_traces(a.out, traces);
    std::cout << "wrote " << traces.size() << " traces to " << a.out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Agent-based crowdsourcing simulator with online learning and task transfers"};
    app.require_subcommand(1);

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "Run one scenario");
    simulate->add_option("config", sim_args.config, "Scenario YAML")->required();
    simulate->add_option("--seed", sim_args.seed, "Override the scenario seed");
    simulate->add_option("--out", sim_args.out, "Output directory");
    simulate->add_option("--variant", sim_args.variant, "Named variant from the config");
    simulate->add_option("--strategy", sim_args.strategy, "not|random|forced|collaborative|att");
    simulate->add_option("--predictor", sim_args.predictor, "hoeffding_tree|knn|forest");

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep", "Run strategies x scenarios x seeds");
    sweep->add_option("config", sweep_args.config, "Scenario YAML")->required();
    sweep->add_option("--strategies", sweep_args.strategies, "Comma-separated strategies");
    sweep->add_option("--scenarios", sweep_args.scenarios, "Comma-separated scenario names");
    sweep->add_option("--runs", sweep_args.runs, "Seeds per cell");
    sweep->add_option("--jobs", sweep_args.jobs, "Parallel runs");
    sweep->add_option("--predictor", sweep_args.predictor, "hoeffding_tree|knn|forest");
    sweep->add_option("--out", sweep_args.out, "Output directory");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate synthetic worker traces");
    synth->add_option("--workers", synth_args.workers, "Number of rides");
    synth->add_option("--area", synth_args.area, "lat,lon,radius_m or lat,lon,width_m,height_m");
    synth->add_option("--out", synth_args.out, "Trace CSV path")->required();
    synth->add_option("--duration", synth_args.duration_s, "Arrival window in seconds");
    synth->add_option("--mode-mix", synth_args.mode_mix, "walk,bike,motorbike fractions");
    synth->add_option("--seed", synth_args.seed, "RNG seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*simulate)
            return cmd_simulate(sim_args);
        if (*sweep)
            return cmd_sweep(sweep_args);
        if (*synth)
            return cmd_synth(synth_args);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
