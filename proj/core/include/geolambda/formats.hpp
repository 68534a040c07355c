#pragma once

// Wire and disk formats: ESRI ASCII grids for rasters, NDJSON for events and
// CSV for tabular products. Numbers are printed with 10 significant digits
// except event coordinates, which round-trip exactly.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "geolambda/core_model.hpp"

namespace geolambda {

enum class ExportFormat { asc, csv, ndjson };

std::string_view to_string(ExportFormat f) noexcept;
/// Throws Error{InvalidArgument, field "format"} on an unknown name.
ExportFormat parse_export_format(std::string_view s);

inline constexpr int kExportSignificantDigits = 10;

/// Formats a value with kExportSignificantDigits significant digits.
std::string format_value(double v);

// ---- ESRI ASCII grid -------------------------------------------------------

/// Six header lines (NCOLS, NROWS, XLLCORNER, YLLCORNER, CELLSIZE,
/// NODATA_VALUE) followed by one line per row, north first.
void write_asc_header(std::ostream& out, const RasterGrid& raster);
void write_asc_row(std::ostream& out, const RasterGrid& raster, std::int64_t row);
void write_asc(std::ostream& out, const RasterGrid& raster);

/// Accepts either corner or centre registration and case-insensitive keys.
/// Throws Error{ParseError}.
RasterGrid read_asc(std::istream& in);

// ---- NDJSON events ---------------------------------------------------------

/// One RawRecord object without a trailing newline.
std::string to_ndjson(const GeoEvent& event);

// ---- CSV tables ------------------------------------------------------------

struct VenueBinRow {
    std::string venue_id;
    EpochSeconds bin_start = 0;
    std::int64_t count = 0;
    friend bool operator==(const VenueBinRow&, const VenueBinRow&) = default;
};

struct OccupancyRow {
    EpochSeconds bin_start = 0;
    double estimate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

void write_venue_csv_header(std::ostream& out);
void write_venue_csv_row(std::ostream& out, const VenueBinRow& row);
std::vector<VenueBinRow> read_venue_csv(std::istream& in);

void write_occupancy_csv(std::ostream& out, const std::vector<OccupancyRow>& rows);
std::vector<OccupancyRow> read_occupancy_csv(std::istream& in);

}  // namespace geolambda
