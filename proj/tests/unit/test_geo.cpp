#include <array>
#include <cmath>
#include <numbers>

#include <doctest.h>

#include "crowdswap/error.hpp"
#include "crowdswap/geo.hpp"

using namespace crowdswap;
using namespace crowdswap::geo;

namespace {

const Location kSol{40.4169, -3.7035};
const Location kRetiro{40.4153, -3.6845};

TransitionMatrix identity() {
    return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
}

TrafficGrid grid4(const TransitionMatrix& m = default_transition()) {
    return make_grid(BBox::around(kSol, 2000.0, 2000.0), 500.0, m, TrafficState::Normal, 60.0);
}

} // namespace

TEST_CASE("distance_m") {
    CHECK(distance_m(kSol, kSol) == 0.0);
    // Spherical haversine with R = 6371 km, evaluated outside this code base.
    CHECK(distance_m(kSol, kRetiro) == doctest::Approx(1618.329).epsilon(1e-6));
    CHECK(distance_m(kSol, kRetiro) == doctest::Approx(distance_m(kRetiro, kSol)));
}

TEST_CASE("travel and lerp") {
    const auto p = travel(kSol, std::numbers::pi / 2, 750.0);
    CHECK(distance_m(kSol, p) == doctest::Approx(750.0).epsilon(1e-6));
    CHECK(p.lon > kSol.lon);
    CHECK(lerp(kSol, kRetiro, 0.0) == kSol);
    CHECK(lerp(kSol, kRetiro, 1.0) == kRetiro);
}

TEST_CASE("densify keeps the length") {
    const std::array<Location, 3> pts{kSol, kRetiro, travel(kRetiro, 0.0, 400.0)};
    const auto d = densify(pts, 100.0);
    CHECK(d.size() > pts.size());
    for (std::size_t i = 1; i < d.size(); ++i)
        CHECK(distance_m(d[i - 1], d[i]) <= 100.0 + 1e-6);
    CHECK(polyline_length_m(d) == doctest::Approx(polyline_length_m(pts)).epsilon(1e-6));
}

TEST_CASE("make_grid") {
    const auto g = grid4();
    CHECK(g.rows() == 4);
    CHECK(g.cols() == 4);
    CHECK(g.size() == 16);
    for (auto s : g.states())
        CHECK(s == TrafficState::Normal);

    TransitionMatrix bad = default_transition();
    bad[0] = {0.5, 0.5, 0.1};
    CHECK_THROWS_AS(grid4(bad), NonStochasticMatrix);
    bad[0] = {1.2, -0.2, 0.0};
    CHECK_THROWS_AS(grid4(bad), NonStochasticMatrix);

    BBox flat{40.0, -3.0, 40.0, -2.9};
    CHECK_THROWS_AS(make_grid(flat, 500.0, default_transition(), TrafficState::Normal, 60.0),
                    DegenerateBBox);
    CHECK_THROWS_AS(
        make_grid(BBox::around(kSol, 1000, 1000), 0.0, default_transition(), TrafficState::Normal, 60),
        InvalidArgument);
}

TEST_CASE("cell_of") {
    const auto g = grid4();
    const auto& b = g.bbox();
    CHECK(g.cell_of({b.min_lat, b.min_lon}) == CellIndex{0, 0});
    CHECK(g.cell_of({b.max_lat, b.max_lon}) == CellIndex{3, 3});
    CHECK_THROWS_AS(g.cell_of({b.max_lat + 0.01, b.min_lon}), OutOfArea);

    // Floor division on projected meters, computed without the grid.
    const double lat_m = kEarthRadiusM * std::numbers::pi / 180.0;
    const double lon_m = lat_m * std::cos(b.center().lat * std::numbers::pi / 180.0);
    auto oracle = [&](Location p) {
        return CellIndex{static_cast<int>(std::floor((p.lat - b.min_lat) * lat_m / 500.0 + 1e-9)),
                         static_cast<int>(std::floor((p.lon - b.min_lon) * lon_m / 500.0 + 1e-9))};
    };
    const Location center = b.center();
    CHECK(oracle(center) == CellIndex{2, 2});
    CHECK(g.cell_of(center) == oracle(center));
    for (double f : {0.1, 0.37, 0.5, 0.74, 0.99}) {
        const Location p{b.min_lat + f * (b.max_lat - b.min_lat),
                         b.min_lon + (1 - f) * (b.max_lon - b.min_lon)};
        CHECK(g.cell_of(p) == oracle(p));
    }
    // Half-open cells: a shared edge belongs to the cell starting there.
    const Location edge{b.min_lat + 100.0 / lat_m, b.min_lon + 500.0 / lon_m};
    CHECK(g.cell_of(edge) == oracle(edge));
}

TEST_CASE("step_traffic") {
    Rng rng(3);
    auto g = grid4(identity());
    g.set_state({1, 2}, TrafficState::Jam);
    g.set_state({3, 0}, TrafficState::Slow);
    for (int i = 0; i < 50; ++i)
        g.step_traffic(rng);
    CHECK(g.state({1, 2}) == TrafficState::Jam);
    CHECK(g.state({3, 0}) == TrafficState::Slow);
    CHECK(g.state({0, 0}) == TrafficState::Normal);

    auto m = identity();
    m[0] = {0, 1, 0};
    auto h = grid4(m);
    h.step_traffic(rng);
    for (auto s : h.states())
        CHECK(s == TrafficState::Slow);
}

TEST_CASE("step_traffic matches the stationary distribution") {
    // Left eigenvector of the default matrix for eigenvalue 1 (numpy).
    const std::array<double, 3> stationary{0.601852, 0.268519, 0.129630};
    auto g = make_grid(BBox::around(kSol, 100, 100), 500.0, default_transition(),
                       TrafficState::Normal, 60.0);
    REQUIRE(g.size() == 1);
    Rng rng(11);
    std::array<double, 3> freq{};
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        g.step_traffic(rng);
        freq[static_cast<std::size_t>(g.state({0, 0}))] += 1.0 / n;
    }
    for (std::size_t s = 0; s < 3; ++s)
        CHECK(std::abs(freq[s] - stationary[s]) < 0.01);
}

TEST_CASE("route_traffic_profile") {
    auto g = grid4();
    const auto& b = g.bbox();
    const Location a{b.min_lat + 0.001, b.min_lon + 0.001};
    const Location c{b.max_lat - 0.001, b.max_lon - 0.001};
    const Location mid{b.min_lat + 0.001, b.max_lon - 0.001};
    const std::array<Location, 3> route{a, mid, c};
    const double len = polyline_length_m(route);

    auto p = g.route_traffic_profile(route);
    CHECK(p.normal_m == doctest::Approx(len));
    CHECK(p.slow_m == 0.0);
    CHECK(p.jam_m == 0.0);

    const std::array<Location, 1> single{a};
    CHECK(g.route_traffic_profile(single).total_m() == 0.0);

    // Jam the cell holding the first segment's midpoint; oracle by midpoints.
    g.set_state(g.cell_of(lerp(a, mid, 0.5)), TrafficState::Jam);
    p = g.route_traffic_profile(route);
    CHECK(p.jam_m == doctest::Approx(distance_m(a, mid)));
    CHECK(p.normal_m == doctest::Approx(distance_m(mid, c)));
    CHECK(p.total_m() == doctest::Approx(len));
}

TEST_CASE("area") {
    Rng rng(5);
    const auto disc = Area::disc(kSol, 1500.0);
    for (int i = 0; i < 1000; ++i) {
        const auto p = disc.sample(rng);
        CHECK(distance_m(kSol, p) <= 1500.0 + 1e-6);
        CHECK(disc.contains(p));
    }
    const auto rect = Area::rect(BBox::around(kSol, 2000, 1000));
    for (int i = 0; i < 1000; ++i)
        CHECK(rect.bbox().contains(rect.sample(rng)));
    CHECK(rect.bbox().width_m() == doctest::Approx(2000.0).epsilon(1e-6));
}
