#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "crowdswap/random.hpp"

namespace crowdswap::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;

/// WGS84 position in degrees.
struct Location {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const Location&, const Location&) = default;
};

bool is_valid(Location loc) noexcept;

/// Great-circle (haversine) distance in meters.
double distance_m(Location a, Location b) noexcept;

/// Linear interpolation in coordinate space; exact enough at city scale.
Location lerp(Location a, Location b, double f) noexcept;

/// Point reached from `origin` after `dist_m` meters along `bearing_rad`
/// (clockwise from north) on the sphere.
Location travel(Location origin, double bearing_rad, double dist_m) noexcept;

/// Total length of a polyline.
double polyline_length_m(std::span<const Location> points) noexcept;

/// Splits every segment longer than `max_segment_m` into equal pieces.
std::vector<Location> densify(std::span<const Location> points, double max_segment_m);

struct BBox {
    double min_lat = 0.0;
    double min_lon = 0.0;
    double max_lat = 0.0;
    double max_lon = 0.0;

    bool contains(Location loc) const noexcept;
    Location center() const noexcept;
    double height_m() const noexcept;
    double width_m() const noexcept;

    /// Box of the given metric size centered on `center`.
    static BBox around(Location center, double width_m, double height_m);
};

/// Operating area: an axis-aligned box or a disc.
class Area {
public:
    static Area rect(BBox box);
    static Area disc(Location center, double radius_m);

    bool is_disc() const noexcept { return disc_; }
    const BBox& bbox() const noexcept { return bbox_; }
    Location center() const noexcept { return center_; }
    double radius_m() const noexcept { return radius_m_; }

    bool contains(Location loc) const noexcept;
    Location sample(Rng& rng) const;

    /// Longest straight segment guaranteed to fit somewhere in the area.
    double max_extent_m() const noexcept;

private:
    Area() = default;
    BBox bbox_;
    Location center_;
    double radius_m_ = 0.0;
    bool disc_ = false;
};

enum class TrafficState : std::uint8_t { Normal = 0, Slow = 1, Jam = 2 };

std::string_view to_string(TrafficState s) noexcept;
std::optional<TrafficState> parse_traffic_state(std::string_view s) noexcept;

/// Row-stochastic; row = current state, column = next state.
using TransitionMatrix = std::array<std::array<double, 3>, 3>;

TransitionMatrix default_transition() noexcept;

/// Throws NonStochasticMatrix unless every row is non-negative and sums to 1 within 1e-9.
void validate_transition(const TransitionMatrix& m);

struct CellIndex {
    int row = 0;
    int col = 0;

    friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Remaining-route length split by the traffic state of the cells traversed.
struct TrafficProfile {
    double normal_m = 0.0;
    double slow_m = 0.0;
    double jam_m = 0.0;

    double total_m() const noexcept { return normal_m + slow_m + jam_m; }
};

class TrafficGrid {
public:
    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return cells_.size(); }
    const BBox& bbox() const noexcept { return bbox_; }
    double cell_size_m() const noexcept { return cell_size_m_; }
    double update_period_s() const noexcept { return update_period_s_; }
    const TransitionMatrix& transition() const noexcept { return transition_; }

    TrafficState state(CellIndex c) const { return cells_[flat(c)]; }
    void set_state(CellIndex c, TrafficState s) { cells_[flat(c)] = s; }
    std::span<const TrafficState> states() const noexcept { return cells_; }

    /// Cells are half-open [k*size, (k+1)*size) in projected meters; the
    /// far edge of the box belongs to the last row/column. Throws OutOfArea.
    CellIndex cell_of(Location loc) const;
    /// Like cell_of but snaps outside points to the nearest border cell.
    CellIndex cell_of_clamped(Location loc) const noexcept;
    Location cell_center(CellIndex c) const noexcept;
    std::size_t flat(CellIndex c) const noexcept {
        return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(cols_) +
               static_cast<std::size_t>(c.col);
    }

    /// Every cell draws its next state from the row of its current state,
    /// one uniform per cell in row-major order.
    void step_traffic(Rng& rng);

    /// Attributes each segment to the state of the cell holding its midpoint.
    TrafficProfile route_traffic_profile(std::span<const Location> polyline) const;

    /// Projected meters north/east of the box's south-west corner.
    double north_m(Location loc) const noexcept;
    double east_m(Location loc) const noexcept;

private:
    friend TrafficGrid make_grid(const BBox&, double, const TransitionMatrix&, TrafficState,
                                 double);
    BBox bbox_;
    double cell_size_m_ = 0.0;
    double update_period_s_ = 0.0;
    double lat_to_m_ = 0.0;
    double lon_to_m_ = 0.0;
    int rows_ = 0;
    int cols_ = 0;
    TransitionMatrix transition_{};
    std::vector<TrafficState> cells_;
};

/// Throws DegenerateBBox, NonStochasticMatrix, or InvalidArgument.
TrafficGrid make_grid(const BBox& bbox, double cell_size_m, const TransitionMatrix& transition,
                      TrafficState initial_state, double update_period_s);

} // namespace crowdswap::geo
