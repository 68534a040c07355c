#include "geolambda/core_model.hpp"

#include <algorithm>
#include <cmath>

namespace geolambda {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::DuplicateEvent: return "DuplicateEvent";
        case ErrorCode::StorageFailure: return "StorageFailure";
        case ErrorCode::IngestFailed: return "IngestFailed";
        case ErrorCode::ReplayFailed: return "ReplayFailed";
        case ErrorCode::NameTaken: return "NameTaken";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::UnknownView: return "UnknownView";
        case ErrorCode::BinMismatch: return "BinMismatch";
        case ErrorCode::OutOfOrderSeq: return "OutOfOrderSeq";
        case ErrorCode::FloorRegression: return "FloorRegression";
        case ErrorCode::WatermarkMismatch: return "WatermarkMismatch";
        case ErrorCode::OutOfBounds: return "OutOfBounds";
        case ErrorCode::DegenerateDensity: return "DegenerateDensity";
        case ErrorCode::SpecMismatch: return "SpecMismatch";
        case ErrorCode::OverlappingScenarios: return "OverlappingScenarios";
        case ErrorCode::NoObservations: return "NoObservations";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

std::string_view to_string(Source s) noexcept {
    switch (s) {
        case Source::checkin: return "checkin";
        case Source::tweet: return "tweet";
        case Source::sensor: return "sensor";
        case Source::open_data: return "open_data";
    }
    return "unknown";
}

std::optional<Source> parse_source(std::string_view s) noexcept {
    if (s == "checkin") return Source::checkin;
    if (s == "tweet") return Source::tweet;
    if (s == "sensor") return Source::sensor;
    if (s == "open_data") return Source::open_data;
    return std::nullopt;
}

BoundingBox BoundingBox::make(double min_lat, double min_lon, double max_lat, double max_lon) {
    for (double v : {min_lat, min_lon, max_lat, max_lon}) {
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "bbox coordinate is not finite", "bbox");
    }
    if (min_lat < -90.0 || max_lat > 90.0) {
        throw Error(ErrorCode::InvalidArgument, "bbox latitude outside [-90, 90]", "bbox");
    }
    if (min_lon < -180.0 || max_lon > 180.0) {
        throw Error(ErrorCode::InvalidArgument, "bbox longitude outside [-180, 180]", "bbox");
    }
    if (!(min_lat < max_lat)) throw Error(ErrorCode::InvalidArgument, "bbox requires min_lat < max_lat", "bbox");
    if (!(min_lon < max_lon)) {
        throw Error(ErrorCode::InvalidArgument,
                    "bbox requires min_lon < max_lon (antimeridian crossing is not supported)", "bbox");
    }
    return BoundingBox(min_lat, min_lon, max_lat, max_lon);
}

namespace {

std::int64_t cells_for_span(double span, double cellsize) {
    const double n = span / cellsize;
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(n - 1e-9)));
}

}  // namespace

GridDims grid_dims(const BoundingBox& bbox, double cellsize) {
    if (!(cellsize > 0.0) || !std::isfinite(cellsize)) {
        throw Error(ErrorCode::InvalidArgument, "cellsize must be positive", "cellsize");
    }
    return {cells_for_span(bbox.max_lon() - bbox.min_lon(), cellsize),
            cells_for_span(bbox.max_lat() - bbox.min_lat(), cellsize)};
}

GridSpec GridSpec::make(const BoundingBox& bbox, double cellsize) {
    const auto dims = grid_dims(bbox, cellsize);
    return GridSpec(bbox, cellsize, dims.ncols, dims.nrows);
}

std::pair<double, double> GridSpec::center(Cell c) const noexcept {
    return {north() - (static_cast<double>(c.row) + 0.5) * cellsize_,
            west() + (static_cast<double>(c.col) + 0.5) * cellsize_};
}

bool GridSpec::same_grid(const GridSpec& other) const noexcept {
    constexpr double tol = 1e-9;
    return ncols_ == other.ncols_ && nrows_ == other.nrows_ &&
           std::abs(cellsize_ - other.cellsize_) <= tol && std::abs(west() - other.west()) <= tol &&
           std::abs(north() - other.north()) <= tol;
}

std::optional<Cell> cell_of(double lat, double lon, const GridSpec& spec) noexcept {
    if (!spec.bbox().contains(lat, lon)) return std::nullopt;
    auto col = static_cast<std::int64_t>(std::floor((lon - spec.west()) / spec.cellsize()));
    auto row = static_cast<std::int64_t>(std::floor((spec.north() - lat) / spec.cellsize()));
    // Rounding at the far edges of an exact-multiple span.
    col = std::clamp<std::int64_t>(col, 0, spec.ncols() - 1);
    row = std::clamp<std::int64_t>(row, 0, spec.nrows() - 1);
    return Cell{row, col};
}

RasterGrid::RasterGrid(GridSpec spec, double fill, double nodata)
    : spec_(spec), values_(spec.cell_count(), fill), nodata_(nodata) {}

RasterGrid::RasterGrid(GridSpec spec, std::vector<double> values, double nodata)
    : spec_(spec), values_(std::move(values)), nodata_(nodata) {
    if (values_.size() != spec_.cell_count()) {
        throw Error(ErrorCode::InvalidArgument, "raster value count does not match ncols x nrows", "values");
    }
    for (double v : values_) {
        if (v != nodata_ && !std::isfinite(v)) {
            throw Error(ErrorCode::InvalidArgument, "raster contains a non-finite data value", "values");
        }
    }
}

double RasterGrid::sum() const noexcept {
    double total = 0.0;
    for (double v : values_) {
        if (v != nodata_) total += v;
    }
    return total;
}

TimeWindow TimeWindow::make(EpochSeconds start, EpochSeconds end) {
    if (!(start < end)) throw Error(ErrorCode::InvalidArgument, "time window requires start < end", "window");
    return TimeWindow(start, end);
}

}  // namespace geolambda
