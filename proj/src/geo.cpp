#include "crowdswap/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "crowdswap/error.hpp"

namespace crowdswap::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kMetersPerDegree = kEarthRadiusM * kDegToRad;

} // namespace

bool is_valid(Location loc) noexcept {
    return std::isfinite(loc.lat) && std::isfinite(loc.lon) && loc.lat >= -90.0 &&
           loc.lat <= 90.0 && loc.lon >= -180.0 && loc.lon <= 180.0;
}

double distance_m(Location a, Location b) noexcept {
    const double phi1 = a.lat * kDegToRad;
    const double phi2 = b.lat * kDegToRad;
    const double dphi = (b.lat - a.lat) * kDegToRad;
    const double dlambda = (b.lon - a.lon) * kDegToRad;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

Location lerp(Location a, Location b, double f) noexcept {
    return {a.lat + (b.lat - a.lat) * f, a.lon + (b.lon - a.lon) * f};
}

Location travel(Location origin, double bearing_rad, double dist_m) noexcept {
    const double delta = dist_m / kEarthRadiusM;
    const double phi1 = origin.lat * kDegToRad;
    const double lambda1 = origin.lon * kDegToRad;
    const double phi2 = std::asin(std::sin(phi1) * std::cos(delta) +
                                  std::cos(phi1) * std::sin(delta) * std::cos(bearing_rad));
    const double lambda2 =
        lambda1 + std::atan2(std::sin(bearing_rad) * std::sin(delta) * std::cos(phi1),
                             std::cos(delta) - std::sin(phi1) * std::sin(phi2));
    return {phi2 / kDegToRad, lambda2 / kDegToRad};
}

double polyline_length_m(std::span<const Location> points) noexcept {
    double total = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        total += distance_m(points[i - 1], points[i]);
    return total;
}

std::vector<Location> densify(std::span<const Location> points, double max_segment_m) {
    std::vector<Location> out;
    if (points.empty())
        return out;
    out.reserve(points.size());
    out.push_back(points.front());
    for (std::size_t i = 1; i < points.size(); ++i) {
        const double len = distance_m(points[i - 1], points[i]);
        const auto pieces = static_cast<int>(std::ceil(len / max_segment_m));
        for (int k = 1; k < pieces; ++k)
            out.push_back(lerp(points[i - 1], points[i], static_cast<double>(k) / pieces));
        out.push_back(points[i]);
    }
    return out;
}

bool BBox::contains(Location loc) const noexcept {
    return loc.lat >= min_lat && loc.lat <= max_lat && loc.lon >= min_lon && loc.lon <= max_lon;
}

Location BBox::center() const noexcept {
    return {(min_lat + max_lat) / 2.0, (min_lon + max_lon) / 2.0};
}

double BBox::height_m() const noexcept { return (max_lat - min_lat) * kMetersPerDegree; }

double BBox::width_m() const noexcept {
    return (max_lon - min_lon) * kMetersPerDegree * std::cos(center().lat * kDegToRad);
}

BBox BBox::around(Location center, double width_m, double height_m) {
    const double dlat = height_m / 2.0 / kMetersPerDegree;
    const double dlon = width_m / 2.0 / (kMetersPerDegree * std::cos(center.lat * kDegToRad));
    return {center.lat - dlat, center.lon - dlon, center.lat + dlat, center.lon + dlon};
}

Area Area::rect(BBox box) {
    if (!(box.max_lat > box.min_lat) || !(box.max_lon > box.min_lon))
        throw DegenerateBBox("area box has zero or negative extent");
    Area a;
    a.bbox_ = box;
    a.center_ = box.center();
    return a;
}

Area Area::disc(Location center, double radius_m) {
    if (!(radius_m > 0.0))
        throw DegenerateBBox("disc radius must be positive");
    Area a;
    a.disc_ = true;
    a.center_ = center;
    a.radius_m_ = radius_m;
    a.bbox_ = BBox::around(center, 2.0 * radius_m, 2.0 * radius_m);
    return a;
}

bool Area::contains(Location loc) const noexcept {
    if (disc_)
        return distance_m(center_, loc) <= radius_m_;
    return bbox_.contains(loc);
}

Location Area::sample(Rng& rng) const {
    for (;;) {
        const Location loc{uniform(rng, bbox_.min_lat, bbox_.max_lat),
                           uniform(rng, bbox_.min_lon, bbox_.max_lon)};
        if (contains(loc))
            return loc;
    }
}

double Area::max_extent_m() const noexcept {
    if (disc_)
        return 2.0 * radius_m_;
    return std::hypot(bbox_.width_m(), bbox_.height_m());
}

std::string_view to_string(TrafficState s) noexcept {
    switch (s) {
    case TrafficState::Normal: return "normal";
    case TrafficState::Slow: return "slow";
    case TrafficState::Jam: return "jam";
    }
    return "normal";
}

std::optional<TrafficState> parse_traffic_state(std::string_view s) noexcept {
    if (s == "normal")
        return TrafficState::Normal;
    if (s == "slow")
        return TrafficState::Slow;
    if (s == "jam")
        return TrafficState::Jam;
    return std::nullopt;
}

TransitionMatrix default_transition() noexcept {
    return {{{0.90, 0.08, 0.02}, {0.20, 0.70, 0.10}, {0.05, 0.25, 0.70}}};
}

void validate_transition(const TransitionMatrix& m) {
    for (std::size_t r = 0; r < 3; ++r) {
        double sum = 0.0;
        for (double p : m[r]) {
            if (!(p >= 0.0))
                throw NonStochasticMatrix("transition row " + std::to_string(r) +
                                          " has a negative entry");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw NonStochasticMatrix("transition row " + std::to_string(r) + " sums to " +
                                      std::to_string(sum));
    }
}

TrafficGrid make_grid(const BBox& bbox, double cell_size_m, const TransitionMatrix& transition,
                      TrafficState initial_state, double update_period_s) {
    if (!(bbox.max_lat > bbox.min_lat) || !(bbox.max_lon > bbox.min_lon))
        throw DegenerateBBox("grid box has zero or negative extent");
    if (!(cell_size_m > 0.0))
        throw InvalidArgument("cell_size_m must be positive");
    if (!(update_period_s > 0.0))
        throw InvalidArgument("update_period_s must be positive");
    validate_transition(transition);

    TrafficGrid g;
    g.bbox_ = bbox;
    g.cell_size_m_ = cell_size_m;
    g.update_period_s_ = update_period_s;
    g.transition_ = transition;
    g.lat_to_m_ = kMetersPerDegree;
    g.lon_to_m_ = kMetersPerDegree * std::cos(bbox.center().lat * kDegToRad);
    // Tolerate round-off so that an exact multiple of the cell size does not
    // produce an extra sliver row.
    g.rows_ = std::max(1, static_cast<int>(std::ceil(bbox.height_m() / cell_size_m - 1e-9)));
    g.cols_ = std::max(1, static_cast<int>(std::ceil(bbox.width_m() / cell_size_m - 1e-9)));
    g.cells_.assign(static_cast<std::size_t>(g.rows_) * static_cast<std::size_t>(g.cols_),
                    initial_state);
    return g;
}

double TrafficGrid::north_m(Location loc) const noexcept {
    return (loc.lat - bbox_.min_lat) * lat_to_m_;
}

double TrafficGrid::east_m(Location loc) const noexcept {
    return (loc.lon - bbox_.min_lon) * lon_to_m_;
}

CellIndex TrafficGrid::cell_of(Location loc) const {
    if (!bbox_.contains(loc))
        throw OutOfArea("location (" + std::to_string(loc.lat) + ", " + std::to_string(loc.lon) +
                        ") is outside the grid");
    return cell_of_clamped(loc);
}

CellIndex TrafficGrid::cell_of_clamped(Location loc) const noexcept {
    // Same round-off tolerance as the row and column counts.
    const auto row = static_cast<int>(std::floor(north_m(loc) / cell_size_m_ + 1e-9));
    const auto col = static_cast<int>(std::floor(east_m(loc) / cell_size_m_ + 1e-9));
    return {std::clamp(row, 0, rows_ - 1), std::clamp(col, 0, cols_ - 1)};
}

Location TrafficGrid::cell_center(CellIndex c) const noexcept {
    return {bbox_.min_lat + (c.row + 0.5) * cell_size_m_ / lat_to_m_,
            bbox_.min_lon + (c.col + 0.5) * cell_size_m_ / lon_to_m_};
}

void TrafficGrid::step_traffic(Rng& rng) {
    for (auto& cell : cells_) {
        const auto& row = transition_[static_cast<std::size_t>(cell)];
        const double u = uniform01(rng);
        if (u < row[0])
            cell = TrafficState::Normal;
        else if (u < row[0] + row[1])
            cell = TrafficState::Slow;
        else if (row[2] > 0.0)
            cell = TrafficState::Jam;
        else
            cell = row[1] > 0.0 ? TrafficState::Slow : TrafficState::Normal;
    }
}

TrafficProfile TrafficGrid::route_traffic_profile(std::span<const Location> polyline) const {
    TrafficProfile profile;
    for (const auto& p : polyline)
        if (!bbox_.contains(p))
            throw OutOfArea("route point outside the grid");
    for (std::size_t i = 1; i < polyline.size(); ++i) {
        const double len = distance_m(polyline[i - 1], polyline[i]);
        switch (state(cell_of_clamped(lerp(polyline[i - 1], polyline[i], 0.5)))) {
        case TrafficState::Normal: profile.normal_m += len; break;
        case TrafficState::Slow: profile.slow_m += len; break;
        case TrafficState::Jam: profile.jam_m += len; break;
        }
    }
    return profile;
}

} // namespace crowdswap::geo
