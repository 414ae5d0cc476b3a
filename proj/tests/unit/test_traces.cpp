#include <cmath>
#include <set>

#include <doctest.h>

#include "crowdswap/error.hpp"
#include "crowdswap/traces.hpp"
#include "helpers.hpp"

using namespace crowdswap;
using namespace crowdswap::traces;

namespace {

const geo::Location kSol{40.4169, -3.7035};

} // namespace

TEST_CASE("load_traces") {
    testing::TempDir dir("traces");
    const auto one = dir.file("one.csv");
    testing::write_file(one, "worker_id,mode,t_s,lat,lon\n"
                             "a,bike,0,40.4169,-3.7035\n"
                             "a,bike,30,40.4170,-3.7030\n");
    auto loaded = load_traces(one);
    REQUIRE(loaded.traces.size() == 1);
    CHECK(loaded.traces[0].points.size() == 2);
    CHECK(loaded.traces[0].mode == Mode::Bike);
    CHECK(loaded.traces[0].start_time == 0.0);
    CHECK(loaded.dropped == 0);

    const auto bad = dir.file("bad.csv");
    testing::write_file(bad, "worker_id,mode,t_s,lat,lon\n"
                             "a,walk,10,40.4169,-3.7035\n"
                             "a,walk,5,40.4170,-3.7030\n"
                             "b,motorbike,0,40.4169,-3.7035\n"
                             "b,motorbike,20,40.4171,-3.7030\n");
    loaded = load_traces(bad);
    REQUIRE(loaded.traces.size() == 1);
    CHECK(loaded.traces[0].worker_id == "b");
    CHECK(loaded.dropped == 1);

    const auto empty = dir.file("empty.csv");
    testing::write_file(empty, "");
    CHECK_THROWS_AS(load_traces(empty), EmptyFile);

    const auto garbage = dir.file("garbage.csv");
    testing::write_file(garbage, "worker_id,mode,t_s,lat,lon\na,car,0,40,-3\n");
    try {
        load_traces(garbage);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("save and load round-trip") {
    Rng rng(7);
    const auto area = geo::Area::disc(kSol, 2000.0);
    const auto traces = synth_traces(1000, area, 3600.0, {0.4, 0.3, 0.3}, rng);
    testing::TempDir dir("roundtrip");
    const auto p = dir.file("t.csv");
    save_traces(p, traces);
    const auto back = load_traces(p);
    REQUIRE(back.traces.size() == traces.size());
    CHECK(back.dropped == 0);
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& a = traces[i];
        const auto& b = back.traces[i];
        CHECK(a.worker_id == b.worker_id);
        CHECK(a.mode == b.mode);
        REQUIRE(a.points.size() == b.points.size());
        for (std::size_t k = 0; k < a.points.size(); ++k) {
            CHECK(a.points[k].t_s == b.points[k].t_s);
            CHECK(a.points[k].loc == b.points[k].loc);
        }
    }
    const auto p2 = dir.file("t2.csv");
    save_traces(p2, back.traces);
    CHECK(testing::read_file(p) == testing::read_file(p2));
}

TEST_CASE("synth_traces") {
    Rng rng(1);
    const auto area = geo::Area::rect(geo::BBox::around(kSol, 3000, 3000));
    CHECK(synth_traces(0, area, 3600.0, {0.4, 0.3, 0.3}, rng).empty());

    const auto walkers = synth_traces(50, area, 3600.0, {1, 0, 0}, rng);
    REQUIRE(walkers.size() == 50);
    for (const auto& t : walkers) {
        CHECK(t.mode == Mode::Walk);
        CHECK(t.points.size() >= 2);
        for (std::size_t k = 1; k < t.points.size(); ++k) {
            const double d = geo::distance_m(t.points[k - 1].loc, t.points[k].loc);
            const double dt = t.points[k].t_s - t.points[k - 1].t_s;
            REQUIRE(dt > 0.0);
            // Straight legs at 2 m/s; a corner inside the interval only shortens the chord.
            CHECK(d / dt <= 2.0 * (1.0 + 1e-3));
            if (k + 1 < t.points.size() && t.points.size() > 3)
                CHECK(dt == doctest::Approx(30.0));
        }
        for (const auto& p : t.points)
            CHECK(area.bbox().contains(p.loc));
    }

    Rng r1(42), r2(42);
    const auto a = synth_traces(100, area, 3600.0, {0.4, 0.3, 0.3}, r1);
    const auto b = synth_traces(100, area, 3600.0, {0.4, 0.3, 0.3}, r2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].worker_id == b[i].worker_id);
        CHECK(a[i].points.size() == b[i].points.size());
        CHECK(a[i].points.back().loc == b[i].points.back().loc);
    }
    // Ids sort like arrival times.
    for (std::size_t i = 1; i < a.size(); ++i) {
        CHECK(a[i - 1].worker_id < a[i].worker_id);
        CHECK(a[i - 1].start_time <= a[i].start_time);
    }
    CHECK_THROWS_AS(synth_traces(5, area, 3600.0, {0.5, 0.5, 0.5}, rng), InvalidArgument);
}

TEST_CASE("gen_tasks sensing chains") {
    Rng rng(9);
    const auto area = geo::Area::disc(kSol, 1500.0);
    TaskGenParams p;
    p.kind = TaskKind::SensingChain;
    p.total = 300;
    p.deadline_s = 1800.0;
    p.reward = 5.0;
    p.penalty = 5.0;
    const auto tasks = gen_tasks(p, area, rng);
    REQUIRE(tasks.size() == 300);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& t = tasks[i];
        ids.insert(t.task_id);
        REQUIRE(t.locations.size() == 3);
        CHECK(geo::distance_m(t.locations[0], t.locations[1]) == doctest::Approx(500.0).epsilon(0.002));
        CHECK(geo::distance_m(t.locations[1], t.locations[2]) == doctest::Approx(500.0).epsilon(0.002));
        // Collinear: the ends are 1000 m apart.
        CHECK(geo::distance_m(t.locations[0], t.locations[2]) == doctest::Approx(1000.0).epsilon(0.002));
        for (const auto& l : t.locations)
            CHECK(area.contains(l));
        CHECK(t.deadline - t.release_time == doctest::Approx(1800.0));
        CHECK(t.reward == 5.0);
        CHECK(t.penalty == 5.0);
        if (i > 0)
            CHECK(tasks[i - 1].release_time <= t.release_time);
        CHECK_NOTHROW(validate(t));
    }
    CHECK(ids.size() == tasks.size());

    // Mean gap of a Poisson process at 50/h is 72 s.
    const double span = tasks.back().release_time - tasks.front().release_time;
    CHECK(span / (tasks.size() - 1) == doctest::Approx(72.0).epsilon(0.15));

    const auto tiny = geo::Area::disc(kSol, 300.0);
    CHECK_THROWS_AS(gen_tasks(p, tiny, rng), AreaTooSmall);
}

TEST_CASE("gen_tasks parcels and json") {
    Rng rng(2);
    const auto area = geo::Area::rect(geo::BBox::around(kSol, 4000, 4000));
    TaskGenParams p;
    p.total = 20;
    const auto tasks = gen_tasks(p, area, rng);
    REQUIRE(tasks.size() == 20);
    for (const auto& t : tasks) {
        CHECK(t.kind == TaskKind::Parcel);
        CHECK(t.locations.size() == 2);
    }
    const auto back = tasks_from_json(to_json(tasks));
    REQUIRE(back.size() == tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        CHECK(back[i].task_id == tasks[i].task_id);
        CHECK(back[i].locations == tasks[i].locations);
        CHECK(back[i].deadline == tasks[i].deadline);
    }
    CHECK_THROWS_AS(tasks_from_json("{}"), ParseError);

    TaskSpec broken = tasks[0];
    broken.deadline = broken.release_time - 1.0;
    CHECK_THROWS_AS(validate(broken), InvalidArgument);
}
