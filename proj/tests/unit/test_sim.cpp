#include <cmath>
#include <vector>

#include <doctest.h>

#include "crowdswap/error.hpp"
#include "crowdswap/report.hpp"
#include "crowdswap/sim.hpp"
#include "helpers.hpp"

using namespace crowdswap;
using namespace crowdswap::sim;

namespace {

const geo::Location kSol{40.4169, -3.7035};

Scenario small_shipping(StrategyKind kind, std::uint64_t seed) {
    auto s = default_crowdshipping();
    s.seed = seed;
    s.duration_s = 3600.0;
    s.workers.count = 400;
    s.tasks.total = 60;
    s.tasks.rate_per_hour = 60.0;
    s.strategy.kind = kind;
    return s;
}

Scenario small_sensing(StrategyKind kind, std::uint64_t seed) {
    auto s = default_crowdsensing(3);
    s.seed = seed;
    s.duration_s = 3600.0;
    s.workers.count = 300;
    s.tasks.total = 40;
    s.strategy.kind = kind;
    s.predictor.model.n_trees = 4;
    return s;
}

} // namespace

TEST_CASE("apply_incidents") {
    std::vector<agents::WorkerAgent> ws(100);
    std::vector<int> active(100);
    for (int i = 0; i < 100; ++i)
        active[i] = i;
    IncidentConfig cfg;
    Rng rng(1);

    for (int minute = 0; minute < 50; ++minute)
        CHECK(apply_incidents(ws, active, 0.0, minute * 60.0, cfg, rng) == 0);
    for (const auto& w : ws)
        CHECK_FALSE(w.immobilized(3000.0));

    for (int minute = 0; minute < 5; ++minute) {
        const double now = minute * 60.0;
        CHECK(apply_incidents(ws, active, 1.0, now, cfg, rng) == 100);
        for (const auto& w : ws) {
            CHECK(w.immobilized(now));
            CHECK(w.immobilized_until >= now + cfg.min_duration_s);
        }
    }

    // 10^4 agent-minutes at 5%: Binomial mean 500, sd sqrt(475).
    int hits = 0;
    for (int minute = 0; minute < 100; ++minute)
        hits += apply_incidents(ws, active, 0.05, minute * 60.0, cfg, rng);
    CHECK(std::abs(hits - 500.0) <= 3.0 * std::sqrt(10000 * 0.05 * 0.95));
}

TEST_CASE("run without tasks") {
    auto s = small_shipping(StrategyKind::Not, 1);
    s.tasks.total = 0;
    const auto r = run(s);
    CHECK(r.n_tasks == 0);
    CHECK(r.delay_rate == 0.0);
    CHECK(r.profits.empty());
    CHECK(r.total_rewards == 0.0);
    CHECK(r.total_costs == 0.0);
    CHECK(r.conservation_error == 0.0);
}

TEST_CASE("a walker cannot make 10 km in 30 minutes") {
    testing::TempDir dir("walker");
    const auto far = geo::travel(kSol, 0.0, 10000.0);
    traces::Trace t;
    t.worker_id = "solo";
    t.mode = traces::Mode::Walk;
    t.points = {{kSol, 0.0}, {far, 5000.0}};
    traces::save_traces(dir.file("w.csv"), {t});
    traces::TaskSpec task;
    task.task_id = "p";
    task.locations = {kSol, far};
    task.release_time = 0.0;
    task.deadline = 1800.0;
    task.reward = task.penalty = 5.0;
    traces::save_tasks(dir.file("t.json"), {task});

    auto s = default_crowdshipping();
    s.area = geo::Area::rect(geo::BBox::around(geo::travel(kSol, 0.0, 5000.0), 2000, 12000));
    s.workers.traces_path = dir.file("w.csv").string();
    s.tasks_path = dir.file("t.json").string();
    s.duration_s = 600.0;
    const auto r = run(s);
    CHECK(r.n_tasks == 1);
    CHECK(r.n_in_time == 0);
    CHECK(r.delay_rate == 1.0);
    REQUIRE(r.profits.size() == 1);
    CHECK(r.profits[0].profit < 0.0);
    CHECK(std::abs(r.conservation_error) < 1e-9);
}

TEST_CASE("runs are deterministic and conserve money") {
    for (auto kind : {StrategyKind::Not, StrategyKind::Collaborative, StrategyKind::Random}) {
        const auto a = run(small_shipping(kind, 4));
        const auto b = run(small_shipping(kind, 4));
        CHECK(report::to_json(a) == report::to_json(b));
        CHECK(report::events_jsonl(a) == report::events_jsonl(b));
        CHECK(std::abs(a.conservation_error) < 1e-9);
        CHECK(a.in_time_after_transfer + a.delayed_after_transfer == a.n_reassigned_tasks);
    }
    for (auto kind : {StrategyKind::Forced, StrategyKind::Att}) {
        const auto a = run(small_sensing(kind, 2));
        const auto b = run(small_sensing(kind, 2));
        CHECK(report::to_json(a) == report::to_json(b));
        CHECK(std::abs(a.conservation_error) < 1e-9);
        CHECK(std::abs(a.total_payments) < 1e-9);
        CHECK(a.n_late + a.n_expired + a.n_in_time == a.n_tasks);
    }
    const auto c = run(small_shipping(StrategyKind::Not, 5));
    CHECK(report::to_json(c) != report::to_json(run(small_shipping(StrategyKind::Not, 4))));
}

TEST_CASE("summarize") {
    RunResult a;
    a.delay_rate = 0.2;
    a.mean_profit = 1.5;
    a.profits = {{"x", 2.0}, {"y", 1.0}};
    const std::vector<RunResult> one{a};
    auto rep = summarize(one);
    CHECK(rep.n_runs == 1);
    CHECK(rep.delay_rate.mean == 0.2);
    CHECK(rep.delay_rate.std == 0.0);
    CHECK(rep.mean_profit.mean == 1.5);
    CHECK(rep.frac_nonpositive == 0.0);
    CHECK_THROWS_AS(summarize(std::vector<RunResult>{}), InvalidArgument);

    Rng rng(8);
    std::vector<RunResult> many(5);
    std::vector<double> all;
    for (auto& r : many)
        for (int i = 0; i < 40; ++i) {
            const double p = std::round(uniform(rng, -5, 5) * 4) / 4;
            r.profits.push_back({"w" + std::to_string(i), p});
            all.push_back(p);
        }
    rep = summarize(many);
    for (double x : {-5.0, -1.25, 0.0, 0.3, 2.5, 5.0}) {
        const auto count = std::count_if(all.begin(), all.end(), [x](double p) { return p <= x; });
        CHECK(rep.cdf(x) == doctest::Approx(static_cast<double>(count) / all.size()));
    }
}

TEST_CASE("scenario validation") {
    auto s = default_crowdshipping();
    CHECK_NOTHROW(validate(s));
    s.tasks.reward = -1.0;
    try {
        validate(s);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "tasks.reward");
    }
    CHECK_THROWS_AS(default_crowdsensing(4), InvalidArgument);
    CHECK(default_crowdsensing(2).tasks.total == 1200);
    CHECK(default_crowdsensing(3).incidents.probability == doctest::Approx(0.10));
}
