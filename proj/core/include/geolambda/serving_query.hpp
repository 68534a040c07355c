#pragma once

// Merges published batch views with speed-layer snapshots and answers
// structured queries against one merged snapshot.

#include <optional>
#include <string>
#include <vector>

#include "geolambda/batch_layer.hpp"
#include "geolambda/speed_layer.hpp"

namespace geolambda {

struct MergedView {
    ViewDescriptor descriptor;
    RasterGrid counts;
    BinnedCounts binned;
    VenueBins venues;
    Seq batch_watermark = 0;
    /// Realtime ceiling the merge covers.
    Seq as_of_seq = 0;
    EpochSeconds freshness = 0;
};

enum class Aggregate { grid, total, per_venue, top_k };

std::string_view to_string(Aggregate a) noexcept;
std::optional<Aggregate> parse_aggregate(std::string_view s) noexcept;

struct QueryRequest {
    std::string view;
    std::optional<BoundingBox> sub_bbox;
    /// Must lie inside the view window on bin_width boundaries.
    std::optional<TimeWindow> sub_window;
    Aggregate aggregate = Aggregate::total;
    std::int64_t k = 10;
};

struct RankedCell {
    Cell cell;
    double lat = 0.0;
    double lon = 0.0;
    double count = 0.0;
    friend bool operator==(const RankedCell&, const RankedCell&) = default;
};

struct QueryResult {
    Aggregate aggregate = Aggregate::total;
    std::optional<RasterGrid> grid;
    double total = 0.0;
    /// per_venue: bins restricted to the requested window, starting at venue_bin_start.
    VenueBins venues;
    EpochSeconds venue_bin_start = 0;
    EpochSeconds bin_width = 0;
    std::vector<RankedCell> cells;
    Seq batch_watermark = 0;
    Seq as_of_seq = 0;
    EpochSeconds freshness = 0;
};

class ServingLayer {
public:
    ServingLayer(const PublishedViews& published, const SpeedLayer& speed) : published_(published), speed_(speed) {}

    /// Published batch view plus a realtime snapshot whose floor is pinned to
    /// that batch watermark. Throws Error{UnknownView}, or
    /// Error{WatermarkMismatch} if the layers keep moving under it.
    MergedView merge(const std::string& view) const;

    /// Throws Error{UnknownView}, Error{OutOfBounds} for a sub-region or
    /// sub-window outside the view, Error{InvalidArgument} for k < 1.
    QueryResult query(const QueryRequest& request) const;

    /// Evaluates a request against an existing snapshot.
    static QueryResult evaluate(const MergedView& merged, const QueryRequest& request);

private:
    const PublishedViews& published_;
    const SpeedLayer& speed_;
};

/// Cells of spec whose centres fall inside sub_bbox, as a contiguous crop.
/// Throws Error{OutOfBounds} if sub_bbox is not inside the grid bbox or
/// covers no cell centre.
struct CellRange {
    std::int64_t row0 = 0, row1 = 0;  // inclusive
    std::int64_t col0 = 0, col1 = 0;  // inclusive
};
CellRange cells_within(const GridSpec& spec, const BoundingBox& sub_bbox);

RasterGrid crop(const RasterGrid& raster, const CellRange& range);

}  // namespace geolambda
