#pragma once

// View descriptors and the count aggregates shared by the batch, speed and
// serving layers. Every view counts events per (time bin, cell) so that
// sub-window queries stay exact; the per-cell raster is the sum over bins.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "geolambda/core_model.hpp"

namespace geolambda {

inline constexpr EpochSeconds kDefaultBinWidth = 1800;

struct ViewDescriptor {
    std::string name;
    GridSpec spec;
    TimeWindow window;
    std::optional<Source> source_filter;
    std::optional<ScenarioSpec> scenario;
    /// Width of the time bins used for venue tables and sub-window queries.
    EpochSeconds bin_width = kDefaultBinWidth;
    /// Venues reported even when they have no events.
    std::vector<std::string> venues;

    std::int64_t bin_count() const noexcept { return window.length() / bin_width; }

    friend bool operator==(const ViewDescriptor&, const ViewDescriptor&) = default;
};

/// Throws Error{InvalidArgument} for a bad name or non-positive bin width and
/// Error{BinMismatch} if bin_width does not tile the window.
void validate(const ViewDescriptor& d);

/// JSON form of a descriptor, as accepted by POST /views.
std::string to_json(const ViewDescriptor& d);

/// Accepts a single descriptor object, an array of them, or {"views": [...]}.
/// Throws Error{ParseError} for malformed JSON and Error{InvalidArgument}
/// naming the offending field.
std::vector<ViewDescriptor> parse_view_descriptors(std::string_view json_text);

/// Where a single event lands in a view, if it passes the view's window,
/// scenario, source and bbox filters.
struct Contribution {
    std::uint64_t key = 0;  // bin * cell_count + cell index
    std::int64_t bin = 0;
    std::optional<std::string> venue;
};

std::optional<Contribution> contribution(const ViewDescriptor& d, const GeoEvent& event);

/// Sparse counts keyed by bin * cell_count + cell index.
using BinnedCounts = std::unordered_map<std::uint64_t, std::int64_t>;

/// Dense per-venue bin counts; each vector has descriptor.bin_count() entries.
using VenueBins = std::map<std::string, std::vector<std::int64_t>>;

/// Folds a binned count map into a per-cell raster.
RasterGrid to_raster(const GridSpec& spec, const BinnedCounts& counts);

/// Sum of binned counts whose bin lies in [first_bin, last_bin).
RasterGrid to_raster(const GridSpec& spec, const BinnedCounts& counts, std::int64_t first_bin,
                     std::int64_t last_bin);

}  // namespace geolambda
