#include "geolambda/views.hpp"

#include <regex>

namespace geolambda {

void validate(const ViewDescriptor& d) {
    static const std::regex pattern(R"([A-Za-z0-9_.\-]+)");
    if (!std::regex_match(d.name, pattern)) {
        throw Error(ErrorCode::InvalidArgument, "view names must match [A-Za-z0-9_.-]+", "name");
    }
    if (d.bin_width <= 0) throw Error(ErrorCode::InvalidArgument, "bin_width must be positive", "bin_width");
    if (d.window.length() % d.bin_width != 0) {
        throw Error(ErrorCode::BinMismatch, "bin_width does not tile the view window", "bin_width");
    }
}

std::optional<Contribution> contribution(const ViewDescriptor& d, const GeoEvent& event) {
    if (!d.window.contains(event.ts)) return std::nullopt;
    if (d.scenario && !d.scenario->window.contains(event.ts)) return std::nullopt;
    if (d.source_filter && *d.source_filter != event.source) return std::nullopt;
    const auto cell = cell_of(event.lat, event.lon, d.spec);
    if (!cell) return std::nullopt;
    const std::int64_t bin = (event.ts - d.window.start()) / d.bin_width;
    const auto key = static_cast<std::uint64_t>(bin) * d.spec.cell_count() + d.spec.index(*cell);
    return Contribution{key, bin, event.venue_id};
}

RasterGrid to_raster(const GridSpec& spec, const BinnedCounts& counts) {
    RasterGrid out(spec);
    auto& v = out.values();
    const auto n = spec.cell_count();
    for (const auto& [key, count] : counts) v[key % n] += static_cast<double>(count);
    return out;
}

RasterGrid to_raster(const GridSpec& spec, const BinnedCounts& counts, std::int64_t first_bin,
                     std::int64_t last_bin) {
    RasterGrid out(spec);
    auto& v = out.values();
    const auto n = spec.cell_count();
    for (const auto& [key, count] : counts) {
        const auto bin = static_cast<std::int64_t>(key / n);
        if (bin >= first_bin && bin < last_bin) v[key % n] += static_cast<double>(count);
    }
    return out;
}

}  // namespace geolambda
