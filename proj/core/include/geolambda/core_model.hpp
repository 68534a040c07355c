#pragma once

// Domain types and grid arithmetic shared by every layer of the engine.
//
// Coordinates are WGS84 degrees. Grids are square in degrees; row 0 is the
// northernmost row and values are stored row-major.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geolambda/error.hpp"

namespace geolambda {

using Seq = std::uint64_t;
using EpochSeconds = std::int64_t;

inline constexpr double kThreeArcSeconds = 1.0 / 1200.0;
inline constexpr double kDefaultNodata = -9999.0;

enum class Source { checkin, tweet, sensor, open_data };

std::string_view to_string(Source s) noexcept;
std::optional<Source> parse_source(std::string_view s) noexcept;

struct GeoEvent {
    std::string event_id;
    Source source = Source::checkin;
    EpochSeconds ts = 0;
    double lat = 0.0;
    double lon = 0.0;
    std::optional<std::string> venue_id;
    std::map<std::string, std::string> attributes;

    friend bool operator==(const GeoEvent&, const GeoEvent&) = default;
};

class BoundingBox {
public:
    /// Throws Error{InvalidArgument} on an empty, inverted, out-of-range or
    /// antimeridian-crossing box.
    static BoundingBox make(double min_lat, double min_lon, double max_lat, double max_lon);

    double min_lat() const noexcept { return min_lat_; }
    double min_lon() const noexcept { return min_lon_; }
    double max_lat() const noexcept { return max_lat_; }
    double max_lon() const noexcept { return max_lon_; }

    /// Point membership, half-open to the east and to the south so that a
    /// lattice of adjacent boxes assigns every point to exactly one of them.
    bool contains(double lat, double lon) const noexcept {
        return lat > min_lat_ && lat <= max_lat_ && lon >= min_lon_ && lon < max_lon_;
    }
    bool contains(const BoundingBox& other) const noexcept {
        return other.min_lat_ >= min_lat_ && other.max_lat_ <= max_lat_ &&
               other.min_lon_ >= min_lon_ && other.max_lon_ <= max_lon_;
    }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

private:
    BoundingBox(double a, double b, double c, double d)
        : min_lat_(a), min_lon_(b), max_lat_(c), max_lon_(d) {}

    double min_lat_;
    double min_lon_;
    double max_lat_;
    double max_lon_;
};

struct GridDims {
    std::int64_t ncols = 0;
    std::int64_t nrows = 0;
    friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// ceil(span / cellsize) per axis. A span within 1e-9 cells of an exact
/// multiple counts as that multiple, so 0.05 deg at 1/1200 deg is 60 cells.
GridDims grid_dims(const BoundingBox& bbox, double cellsize);

struct Cell {
    std::int64_t row = 0;
    std::int64_t col = 0;
    friend auto operator<=>(const Cell&, const Cell&) = default;
};

class GridSpec {
public:
    static GridSpec make(const BoundingBox& bbox, double cellsize = kThreeArcSeconds);

    const BoundingBox& bbox() const noexcept { return bbox_; }
    double cellsize() const noexcept { return cellsize_; }
    std::int64_t ncols() const noexcept { return ncols_; }
    std::int64_t nrows() const noexcept { return nrows_; }
    std::size_t cell_count() const noexcept { return static_cast<std::size_t>(ncols_ * nrows_); }

    /// Outer edges of the cell lattice. West and north coincide with the bbox;
    /// east and south may overshoot it when the span is not a cell multiple.
    double west() const noexcept { return bbox_.min_lon(); }
    double north() const noexcept { return bbox_.max_lat(); }
    double east() const noexcept { return west() + static_cast<double>(ncols_) * cellsize_; }
    double south() const noexcept { return north() - static_cast<double>(nrows_) * cellsize_; }

    std::size_t index(Cell c) const noexcept {
        return static_cast<std::size_t>(c.row * ncols_ + c.col);
    }
    Cell cell_at(std::size_t index) const noexcept {
        const auto i = static_cast<std::int64_t>(index);
        return {i / ncols_, i % ncols_};
    }

    /// (lat, lon) of the cell centre.
    std::pair<double, double> center(Cell c) const noexcept;

    /// Same lattice: equal dimensions and edges/cellsize equal to within 1e-9 deg.
    bool same_grid(const GridSpec& other) const noexcept;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;

private:
    GridSpec(BoundingBox bbox, double cellsize, std::int64_t ncols, std::int64_t nrows)
        : bbox_(bbox), cellsize_(cellsize), ncols_(ncols), nrows_(nrows) {}

    BoundingBox bbox_;
    double cellsize_;
    std::int64_t ncols_;
    std::int64_t nrows_;
};

/// The cell containing (lat, lon), or nothing when the point is outside the
/// bbox. Columns are half-open to the east and rows half-open to the south, so
/// points on the northern or western outer edge land in row 0 / col 0 and the
/// eastern and southern edges belong to the neighbouring (absent) grid.
std::optional<Cell> cell_of(double lat, double lon, const GridSpec& spec) noexcept;

class RasterGrid {
public:
    explicit RasterGrid(GridSpec spec, double fill = 0.0, double nodata = kDefaultNodata);
    /// Throws Error{InvalidArgument} if the value count does not match the grid
    /// or a data value is not finite.
    RasterGrid(GridSpec spec, std::vector<double> values, double nodata = kDefaultNodata);

    const GridSpec& spec() const noexcept { return spec_; }
    double nodata() const noexcept { return nodata_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::vector<double>& values() noexcept { return values_; }

    double& at(Cell c) noexcept { return values_[spec_.index(c)]; }
    double at(Cell c) const noexcept { return values_[spec_.index(c)]; }

    bool is_nodata(std::size_t i) const noexcept { return values_[i] == nodata_; }

    /// Sum over data cells.
    double sum() const noexcept;

    friend bool operator==(const RasterGrid&, const RasterGrid&) = default;

private:
    GridSpec spec_;
    std::vector<double> values_;
    double nodata_;
};

class TimeWindow {
public:
    /// Throws Error{InvalidArgument} unless start < end.
    static TimeWindow make(EpochSeconds start, EpochSeconds end);

    EpochSeconds start() const noexcept { return start_; }
    EpochSeconds end() const noexcept { return end_; }
    EpochSeconds length() const noexcept { return end_ - start_; }
    bool contains(EpochSeconds ts) const noexcept { return ts >= start_ && ts < end_; }
    bool contains(const TimeWindow& w) const noexcept { return w.start_ >= start_ && w.end_ <= end_; }
    bool overlaps(const TimeWindow& w) const noexcept { return start_ < w.end_ && w.start_ < end_; }

    friend bool operator==(const TimeWindow&, const TimeWindow&) = default;

private:
    TimeWindow(EpochSeconds s, EpochSeconds e) : start_(s), end_(e) {}
    EpochSeconds start_;
    EpochSeconds end_;
};

/// A labelled absolute time window, e.g. "game-hours" around a kickoff.
struct ScenarioSpec {
    std::string name;
    TimeWindow window;
    friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

}  // namespace geolambda
