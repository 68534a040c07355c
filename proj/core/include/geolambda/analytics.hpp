#pragma once

// Case-study analytics over count rasters and venue time series:
// rasterization, truncated quartic KDE, population scaling, dasymetric
// addition onto a baseline, scenario splitting and unit occupancy curves.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "geolambda/core_model.hpp"

namespace geolambda {

/// One count per event inside the grid bbox, at its cell_of cell.
RasterGrid rasterize(std::span<const GeoEvent> events, const GridSpec& spec);

struct KernelTap {
    std::int64_t drow = 0;
    std::int64_t dcol = 0;
    double weight = 0.0;
};

/// Taps of the quartic kernel (1 - (d/h)^2)^2 for cell-centre distance d < h
/// with h = radius_cells, normalized to sum to 1. Taps with zero weight are
/// omitted. Throws Error{InvalidArgument} for radius_cells < 1.
std::vector<KernelTap> quartic_kernel(int radius_cells);

/// Scatters every data cell's mass through the quartic kernel. Near the edge
/// (or next to nodata) the in-grid share of the kernel is renormalized to 1,
/// so the output mass equals the input mass. Nodata cells stay nodata and
/// receive nothing.
RasterGrid kde(const RasterGrid& raster, int radius_cells = 2);

/// density * total_population / sum(density). Throws Error{DegenerateDensity}
/// when the density has no mass but a population is requested, and
/// Error{InvalidArgument} for a negative or non-finite population.
RasterGrid scale_to_population(const RasterGrid& density, double total_population);

/// Cellwise baseline + modeled. Baseline nodata stays nodata; modeled nodata
/// adds nothing. Throws Error{SpecMismatch} unless both share a lattice.
RasterGrid dasymetric_add(const RasterGrid& baseline, const RasterGrid& modeled);

/// baseline + scale_to_population(kde(counts, radius), population).
RasterGrid population_grid(const RasterGrid& counts, const RasterGrid& baseline, double population,
                           int radius_cells = 2);

/// Events grouped by the scenario whose window holds their ts; events in no
/// window are dropped. Every scenario gets an entry. Throws
/// Error{OverlappingScenarios} if two windows intersect, Error{InvalidArgument}
/// on duplicate names.
std::map<std::string, std::vector<GeoEvent>> split_by_scenario(std::span<const GeoEvent> events,
                                                               std::span<const ScenarioSpec> scenarios);

/// Differences of a cumulative counter; negative steps clamp to 0.
std::vector<std::int64_t> cumulative_to_interval(std::span<const std::int64_t> cumulative);

struct OccupancyBin {
    EpochSeconds start = 0;
    double estimate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct OccupancyCurve {
    std::string venue_id;
    EpochSeconds bin_width = 1800;
    std::vector<OccupancyBin> bins;
    /// Days that contributed (all-zero days are excluded).
    std::size_t n_days = 0;
    std::uint64_t seed = 0;
};

struct OccupancyOptions {
    double confidence = 0.95;
    int resamples = 1000;
    std::uint64_t seed = 0;
    std::string venue_id;
    EpochSeconds bin_width = 1800;
    /// Start of bin 0; bin i starts at first_bin_start + i * bin_width.
    EpochSeconds first_bin_start = 0;
};

/// Unit occupancy curve. Each day is divided by its own peak bin, the days
/// are averaged and the mean curve is rescaled to peak 1. Bounds come from a
/// percentile bootstrap over days (seeded, so reproducible) and are widened
/// if needed to contain the point estimate.
///
/// Throws Error{NoObservations} if every day is all zero and
/// Error{InvalidArgument} for ragged days, confidence outside (0, 1) or
/// resamples < 1.
OccupancyCurve occupancy_curve(const std::vector<std::vector<std::int64_t>>& per_day_bins,
                               const OccupancyOptions& options = {});

}  // namespace geolambda
