#include "geolambda/serving_query.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

namespace geolambda {

std::string_view to_string(Aggregate a) noexcept {
    switch (a) {
        case Aggregate::grid: return "grid";
        case Aggregate::total: return "total";
        case Aggregate::per_venue: return "per_venue";
        case Aggregate::top_k: return "top_k";
    }
    return "unknown";
}

std::optional<Aggregate> parse_aggregate(std::string_view s) noexcept {
    if (s == "grid") return Aggregate::grid;
    if (s == "total") return Aggregate::total;
    if (s == "per_venue") return Aggregate::per_venue;
    if (s == "top_k") return Aggregate::top_k;
    return std::nullopt;
}

namespace {

constexpr int kMergeAttempts = 64;

MergedView combine(const PublishedView& p, const RealtimeView& rt) {
    const auto& batch = *p.batch;
    MergedView m{batch.descriptor, batch.counts, batch.binned, p.venues->bins, batch.watermark, rt.ceiling, 0};
    m.freshness =
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();

    const auto n = m.descriptor.spec.cell_count();
    auto& values = m.counts.values();
    for (const auto& [key, count] : rt.cells) {
        m.binned[key] += count;
        values[key % n] += static_cast<double>(count);
    }
    const auto nbins = static_cast<std::size_t>(m.descriptor.bin_count());
    for (const auto& [vb, count] : rt.venue_bins) {
        auto [it, inserted] = m.venues.try_emplace(vb.first, nbins, 0);
        it->second[static_cast<std::size_t>(vb.second)] += count;
    }
    return m;
}

}  // namespace

MergedView ServingLayer::merge(const std::string& view) const {
    for (int attempt = 0; attempt < kMergeAttempts; ++attempt) {
        const auto published = published_.get(view);
        const auto watermark = published.watermark();
        const auto realtime = speed_.snapshot(view, watermark);
        // Compaction already moved past this batch: a newer one is published.
        if (realtime.floor != watermark) continue;
        return combine(published, realtime);
    }
    throw Error(ErrorCode::WatermarkMismatch,
                fmt::format("realtime floor of '{}' does not match its published batch watermark", view), "view");
}

CellRange cells_within(const GridSpec& spec, const BoundingBox& sub) {
    constexpr double eps = 1e-12;
    const auto& b = spec.bbox();
    if (sub.min_lat() < b.min_lat() - eps || sub.max_lat() > b.max_lat() + eps || sub.min_lon() < b.min_lon() - eps ||
        sub.max_lon() > b.max_lon() + eps) {
        throw Error(ErrorCode::OutOfBounds, "sub_bbox extends outside the view bbox", "sub_bbox");
    }
    const double cs = spec.cellsize();
    CellRange r;
    r.col0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil((sub.min_lon() - spec.west()) / cs - 0.5)));
    r.col1 = std::min<std::int64_t>(spec.ncols() - 1,
                                    static_cast<std::int64_t>(std::floor((sub.max_lon() - spec.west()) / cs - 0.5)));
    r.row0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil((spec.north() - sub.max_lat()) / cs - 0.5)));
    r.row1 = std::min<std::int64_t>(spec.nrows() - 1,
                                    static_cast<std::int64_t>(std::floor((spec.north() - sub.min_lat()) / cs - 0.5)));
    if (r.col0 > r.col1 || r.row0 > r.row1) {
        throw Error(ErrorCode::OutOfBounds, "sub_bbox contains no cell centre", "sub_bbox");
    }
    return r;
}

RasterGrid crop(const RasterGrid& raster, const CellRange& range) {
    const auto& s = raster.spec();
    const double cs = s.cellsize();
    const auto bbox = BoundingBox::make(s.north() - static_cast<double>(range.row1 + 1) * cs,
                                        s.west() + static_cast<double>(range.col0) * cs,
                                        s.north() - static_cast<double>(range.row0) * cs,
                                        s.west() + static_cast<double>(range.col1 + 1) * cs);
    const auto spec = GridSpec::make(bbox, cs);
    RasterGrid out(spec, 0.0, raster.nodata());
    for (std::int64_t r = range.row0; r <= range.row1; ++r) {
        for (std::int64_t c = range.col0; c <= range.col1; ++c) {
            out.at({r - range.row0, c - range.col0}) = raster.at({r, c});
        }
    }
    return out;
}

QueryResult ServingLayer::query(const QueryRequest& request) const {
    return evaluate(merge(request.view), request);
}

QueryResult ServingLayer::evaluate(const MergedView& merged, const QueryRequest& request) {
    const auto& d = merged.descriptor;
    QueryResult result;
    result.aggregate = request.aggregate;
    result.batch_watermark = merged.batch_watermark;
    result.as_of_seq = merged.as_of_seq;
    result.freshness = merged.freshness;
    result.bin_width = d.bin_width;

    std::int64_t first_bin = 0;
    std::int64_t last_bin = d.bin_count();
    if (request.sub_window) {
        const auto& w = *request.sub_window;
        if (!d.window.contains(w)) {
            throw Error(ErrorCode::OutOfBounds, "sub_window extends outside the view window", "sub_window");
        }
        if ((w.start() - d.window.start()) % d.bin_width != 0 || (w.end() - d.window.start()) % d.bin_width != 0) {
            throw Error(ErrorCode::OutOfBounds,
                        fmt::format("sub_window must align to {} s bin boundaries", d.bin_width), "sub_window");
        }
        first_bin = (w.start() - d.window.start()) / d.bin_width;
        last_bin = (w.end() - d.window.start()) / d.bin_width;
    }
    std::optional<CellRange> range;
    if (request.sub_bbox) range = cells_within(d.spec, *request.sub_bbox);
    if (request.aggregate == Aggregate::top_k && request.k < 1) {
        throw Error(ErrorCode::InvalidArgument, "k must be at least 1", "k");
    }

    if (request.aggregate == Aggregate::per_venue) {
        result.venue_bin_start = d.window.start() + first_bin * d.bin_width;
        for (const auto& [venue, bins] : merged.venues) {
            result.venues.emplace(venue, std::vector<std::int64_t>(bins.begin() + first_bin, bins.begin() + last_bin));
        }
        return result;
    }

    const RasterGrid full = request.sub_window ? to_raster(d.spec, merged.binned, first_bin, last_bin) : merged.counts;
    const CellRange whole{0, d.spec.nrows() - 1, 0, d.spec.ncols() - 1};
    const auto& rg = range ? *range : whole;

    switch (request.aggregate) {
        case Aggregate::grid:
            result.grid = range ? crop(full, rg) : full;
            result.total = result.grid->sum();
            break;
        case Aggregate::total:
            for (std::int64_t r = rg.row0; r <= rg.row1; ++r) {
                for (std::int64_t c = rg.col0; c <= rg.col1; ++c) result.total += full.at({r, c});
            }
            break;
        case Aggregate::top_k: {
            std::vector<RankedCell> cells;
            for (std::int64_t r = rg.row0; r <= rg.row1; ++r) {
                for (std::int64_t c = rg.col0; c <= rg.col1; ++c) {
                    const double v = full.at({r, c});
                    result.total += v;
                    if (v > 0.0) {
                        const auto [lat, lon] = d.spec.center({r, c});
                        cells.push_back({{r, c}, lat, lon, v});
                    }
                }
            }
            const auto k = std::min<std::size_t>(cells.size(), static_cast<std::size_t>(request.k));
            std::partial_sort(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(k), cells.end(),
                              [](const RankedCell& a, const RankedCell& b) {
                                  if (a.count != b.count) return a.count > b.count;
                                  return a.cell < b.cell;
                              });
            cells.resize(k);
            result.cells = std::move(cells);
            break;
        }
        case Aggregate::per_venue: break;
    }
    return result;
}

}  // namespace geolambda
