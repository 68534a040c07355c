#include "geolambda/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <fmt/format.h>

namespace geolambda {

RasterGrid rasterize(std::span<const GeoEvent> events, const GridSpec& spec) {
    RasterGrid out(spec);
    for (const auto& e : events) {
        if (auto c = cell_of(e.lat, e.lon, spec)) out.at(*c) += 1.0;
    }
    return out;
}

std::vector<KernelTap> quartic_kernel(int radius_cells) {
    if (radius_cells < 1) throw Error(ErrorCode::InvalidArgument, "kernel radius must be >= 1", "radius");
    const double h2 = static_cast<double>(radius_cells) * radius_cells;
    std::vector<KernelTap> taps;
    double total = 0.0;
    for (std::int64_t dr = -radius_cells; dr <= radius_cells; ++dr) {
        for (std::int64_t dc = -radius_cells; dc <= radius_cells; ++dc) {
            const double d2 = static_cast<double>(dr * dr + dc * dc);
            if (d2 >= h2) continue;
            const double u = 1.0 - d2 / h2;
            taps.push_back({dr, dc, u * u});
            total += u * u;
        }
    }
    for (auto& t : taps) t.weight /= total;
    return taps;
}

RasterGrid kde(const RasterGrid& raster, int radius_cells) {
    const auto taps = quartic_kernel(radius_cells);
    const auto& spec = raster.spec();
    const auto nrows = spec.nrows();
    const auto ncols = spec.ncols();
    const auto& in = raster.values();

    RasterGrid out(spec, 0.0, raster.nodata());
    auto& dst = out.values();
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (raster.is_nodata(i)) dst[i] = raster.nodata();
    }

    auto receives = [&](std::int64_t r, std::int64_t c) {
        return r >= 0 && r < nrows && c >= 0 && c < ncols && !raster.is_nodata(static_cast<std::size_t>(r * ncols + c));
    };

    for (std::int64_t r = 0; r < nrows; ++r) {
        for (std::int64_t c = 0; c < ncols; ++c) {
            const auto i = static_cast<std::size_t>(r * ncols + c);
            const double mass = in[i];
            if (mass == 0.0 || raster.is_nodata(i)) continue;
            double in_grid = 0.0;
            for (const auto& t : taps) {
                if (receives(r + t.drow, c + t.dcol)) in_grid += t.weight;
            }
            const double scale = mass / in_grid;
            for (const auto& t : taps) {
                const auto rr = r + t.drow;
                const auto cc = c + t.dcol;
                if (receives(rr, cc)) dst[static_cast<std::size_t>(rr * ncols + cc)] += t.weight * scale;
            }
        }
    }
    return out;
}

RasterGrid scale_to_population(const RasterGrid& density, double total_population) {
    if (!(total_population >= 0.0) || !std::isfinite(total_population)) {
        throw Error(ErrorCode::InvalidArgument, "population must be a non-negative number", "population");
    }
    RasterGrid out = density;
    const double mass = density.sum();
    if (total_population == 0.0) {
        for (std::size_t i = 0; i < out.values().size(); ++i) {
            if (!out.is_nodata(i)) out.values()[i] = 0.0;
        }
        return out;
    }
    if (!(mass > 0.0)) throw Error(ErrorCode::DegenerateDensity, "density has no mass to scale", "density");
    const double factor = total_population / mass;
    for (std::size_t i = 0; i < out.values().size(); ++i) {
        if (!out.is_nodata(i)) out.values()[i] *= factor;
    }
    return out;
}

RasterGrid dasymetric_add(const RasterGrid& baseline, const RasterGrid& modeled) {
    if (!baseline.spec().same_grid(modeled.spec())) {
        throw Error(ErrorCode::SpecMismatch, "baseline and modeled rasters are on different grids", "baseline");
    }
    RasterGrid out = baseline;
    auto& v = out.values();
    const auto& m = modeled.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (baseline.is_nodata(i) || modeled.is_nodata(i)) continue;
        v[i] += m[i];
    }
    return out;
}

RasterGrid population_grid(const RasterGrid& counts, const RasterGrid& baseline, double population,
                           int radius_cells) {
    return dasymetric_add(baseline, scale_to_population(kde(counts, radius_cells), population));
}

std::map<std::string, std::vector<GeoEvent>> split_by_scenario(std::span<const GeoEvent> events,
                                                               std::span<const ScenarioSpec> scenarios) {
    std::map<std::string, std::vector<GeoEvent>> out;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        for (std::size_t j = i + 1; j < scenarios.size(); ++j) {
            if (scenarios[i].window.overlaps(scenarios[j].window)) {
                throw Error(ErrorCode::OverlappingScenarios,
                            fmt::format("scenarios '{}' and '{}' overlap", scenarios[i].name, scenarios[j].name),
                            "scenarios");
            }
        }
        if (!out.emplace(scenarios[i].name, std::vector<GeoEvent>{}).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate scenario name '" + scenarios[i].name + "'", "scenarios");
        }
    }
    for (const auto& e : events) {
        for (const auto& s : scenarios) {
            if (s.window.contains(e.ts)) {
                out[s.name].push_back(e);
                break;
            }
        }
    }
    return out;
}

std::vector<std::int64_t> cumulative_to_interval(std::span<const std::int64_t> cumulative) {
    std::vector<std::int64_t> out;
    out.reserve(cumulative.size());
    for (std::size_t i = 0; i < cumulative.size(); ++i) {
        out.push_back(i == 0 ? cumulative[0] : std::max<std::int64_t>(0, cumulative[i] - cumulative[i - 1]));
    }
    return out;
}

namespace {

using Curve = std::vector<double>;

// Mean of the selected peak-normalized days, rescaled to peak 1.
Curve unit_curve(const std::vector<Curve>& days, const std::vector<std::size_t>& pick) {
    Curve mean(days.front().size(), 0.0);
    for (auto d : pick) {
        for (std::size_t b = 0; b < mean.size(); ++b) mean[b] += days[d][b];
    }
    const double peak = *std::max_element(mean.begin(), mean.end());
    for (auto& v : mean) v /= peak;
    return mean;
}

// Linear interpolation between order statistics (sample quantile type 7).
double quantile(std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

OccupancyCurve occupancy_curve(const std::vector<std::vector<std::int64_t>>& per_day_bins,
                               const OccupancyOptions& options) {
    if (per_day_bins.empty()) throw Error(ErrorCode::NoObservations, "no days observed", "days");
    if (!(options.confidence > 0.0 && options.confidence < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "confidence must lie in (0, 1)", "confidence");
    }
    if (options.resamples < 1) throw Error(ErrorCode::InvalidArgument, "resamples must be >= 1", "resamples");
    const auto nbins = per_day_bins.front().size();
    std::vector<Curve> days;
    for (const auto& day : per_day_bins) {
        if (day.size() != nbins) throw Error(ErrorCode::InvalidArgument, "days have differing bin counts", "days");
        const auto peak = day.empty() ? 0 : *std::max_element(day.begin(), day.end());
        if (std::any_of(day.begin(), day.end(), [](auto v) { return v < 0; })) {
            throw Error(ErrorCode::InvalidArgument, "counts must be non-negative", "days");
        }
        if (peak <= 0) continue;
        Curve c(nbins);
        for (std::size_t b = 0; b < nbins; ++b) c[b] = static_cast<double>(day[b]) / static_cast<double>(peak);
        days.push_back(std::move(c));
    }
    if (days.empty()) throw Error(ErrorCode::NoObservations, "every day has zero counts", "days");

    std::vector<std::size_t> all(days.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto estimate = unit_curve(days, all);

    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick_day(0, days.size() - 1);
    std::vector<std::vector<double>> samples(nbins, std::vector<double>(static_cast<std::size_t>(options.resamples)));
    std::vector<std::size_t> pick(days.size());
    for (int b = 0; b < options.resamples; ++b) {
        for (auto& p : pick) p = pick_day(rng);
        const auto curve = unit_curve(days, pick);
        for (std::size_t i = 0; i < nbins; ++i) samples[i][static_cast<std::size_t>(b)] = curve[i];
    }

    OccupancyCurve out{options.venue_id, options.bin_width, {}, days.size(), options.seed};
    const double alpha = (1.0 - options.confidence) / 2.0;
    for (std::size_t i = 0; i < nbins; ++i) {
        auto& s = samples[i];
        std::sort(s.begin(), s.end());
        const double est = estimate[i];
        const double lo = std::clamp(std::min(quantile(s, alpha), est), 0.0, 1.0);
        const double hi = std::clamp(std::max(quantile(s, 1.0 - alpha), est), 0.0, 1.0);
        out.bins.push_back({options.first_bin_start + static_cast<EpochSeconds>(i) * options.bin_width, est, lo, hi});
    }
    return out;
}

}  // namespace geolambda
