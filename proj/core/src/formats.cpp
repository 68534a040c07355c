#include "geolambda/formats.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "event_json.hpp"

namespace geolambda {

std::string_view to_string(ExportFormat f) noexcept {
    switch (f) {
        case ExportFormat::asc: return "asc";
        case ExportFormat::csv: return "csv";
        case ExportFormat::ndjson: return "ndjson";
    }
    return "unknown";
}

ExportFormat parse_export_format(std::string_view s) {
    if (s == "asc") return ExportFormat::asc;
    if (s == "csv") return ExportFormat::csv;
    if (s == "ndjson") return ExportFormat::ndjson;
    throw Error(ErrorCode::InvalidArgument, fmt::format("unknown export format '{}'", s), "format");
}

std::string format_value(double v) { return fmt::format("{:.{}g}", v, kExportSignificantDigits); }

namespace {

// Georeferencing is printed at full precision so a re-read lattice is the same
// lattice; only cell values are held to the export precision.
std::string format_coord(double v) { return fmt::format("{:.17g}", v); }

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

double parse_double(std::string_view token, const char* what) {
    double v = 0.0;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw Error(ErrorCode::ParseError, fmt::format("cannot parse {} from '{}'", what, token), what);
    }
    return v;
}

std::int64_t parse_int(std::string_view token, const char* what) {
    std::int64_t v = 0;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw Error(ErrorCode::ParseError, fmt::format("cannot parse {} from '{}'", what, token), what);
    }
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c != '"') {
                cur.push_back(c);
            } else if (i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else {
                quoted = false;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (quoted) throw Error(ErrorCode::ParseError, "unterminated quoted csv field", "row");
    out.push_back(std::move(cur));
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q.push_back('"');
        q.push_back(c);
    }
    q.push_back('"');
    return q;
}

}  // namespace

void write_asc_header(std::ostream& out, const RasterGrid& raster) {
    const auto& s = raster.spec();
    out << "NCOLS " << s.ncols() << '\n'
        << "NROWS " << s.nrows() << '\n'
        << "XLLCORNER " << format_coord(s.west()) << '\n'
        << "YLLCORNER " << format_coord(s.south()) << '\n'
        << "CELLSIZE " << format_coord(s.cellsize()) << '\n'
        << "NODATA_VALUE " << format_value(raster.nodata()) << '\n';
}

void write_asc_row(std::ostream& out, const RasterGrid& raster, std::int64_t row) {
    const auto ncols = raster.spec().ncols();
    std::string line;
    for (std::int64_t c = 0; c < ncols; ++c) {
        if (c) line.push_back(' ');
        line += format_value(raster.at({row, c}));
    }
    line.push_back('\n');
    out << line;
}

void write_asc(std::ostream& out, const RasterGrid& raster) {
    write_asc_header(out, raster);
    for (std::int64_t r = 0; r < raster.spec().nrows(); ++r) write_asc_row(out, raster, r);
}

RasterGrid read_asc(std::istream& in) {
    std::int64_t ncols = -1, nrows = -1;
    double xll = NAN, yll = NAN, cellsize = NAN, nodata = kDefaultNodata;
    bool x_center = false, y_center = false;

    // Header keys are read until the first token that is not a known key.
    std::string token;
    while (in >> token) {
        const auto key = lower(token);
        std::string value;
        if (key == "ncols" || key == "nrows" || key == "xllcorner" || key == "xllcenter" || key == "yllcorner" ||
            key == "yllcenter" || key == "cellsize" || key == "nodata_value") {
            if (!(in >> value)) throw Error(ErrorCode::ParseError, "truncated asc header", key);
        } else {
            break;
        }
        if (key == "ncols") ncols = parse_int(value, "ncols");
        else if (key == "nrows") nrows = parse_int(value, "nrows");
        else if (key == "xllcorner") xll = parse_double(value, "xllcorner");
        else if (key == "xllcenter") xll = parse_double(value, "xllcenter"), x_center = true;
        else if (key == "yllcorner") yll = parse_double(value, "yllcorner");
        else if (key == "yllcenter") yll = parse_double(value, "yllcenter"), y_center = true;
        else if (key == "cellsize") cellsize = parse_double(value, "cellsize");
        else nodata = parse_double(value, "nodata_value");
        token.clear();
    }
    if (ncols <= 0 || nrows <= 0 || std::isnan(xll) || std::isnan(yll) || !(cellsize > 0.0)) {
        throw Error(ErrorCode::ParseError, "asc header incomplete or invalid", "header");
    }
    if (x_center) xll -= cellsize / 2.0;
    if (y_center) yll -= cellsize / 2.0;

    const auto bbox = BoundingBox::make(yll, xll, yll + static_cast<double>(nrows) * cellsize,
                                        xll + static_cast<double>(ncols) * cellsize);
    const auto spec = GridSpec::make(bbox, cellsize);
    if (spec.ncols() != ncols || spec.nrows() != nrows) {
        throw Error(ErrorCode::ParseError, "asc header dimensions are inconsistent", "header");
    }

    std::vector<double> values;
    values.reserve(spec.cell_count());
    if (!token.empty()) values.push_back(parse_double(token, "value"));
    while (values.size() < spec.cell_count() && in >> token) values.push_back(parse_double(token, "value"));
    if (values.size() != spec.cell_count()) {
        throw Error(ErrorCode::ParseError,
                    fmt::format("asc body has {} values, expected {}", values.size(), spec.cell_count()), "values");
    }
    return RasterGrid(spec, std::move(values), nodata);
}

std::string to_ndjson(const GeoEvent& event) { return detail::event_to_json(event).dump(); }

void write_venue_csv_header(std::ostream& out) { out << "venue_id,bin_start,count\n"; }

void write_venue_csv_row(std::ostream& out, const VenueBinRow& row) {
    out << csv_field(row.venue_id) << ',' << row.bin_start << ',' << row.count << '\n';
}

std::vector<VenueBinRow> read_venue_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty csv", "header");
    std::vector<VenueBinRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 3) throw Error(ErrorCode::ParseError, "venue csv rows need 3 fields", "row");
        rows.push_back({f[0], parse_int(f[1], "bin_start"), parse_int(f[2], "count")});
    }
    return rows;
}

void write_occupancy_csv(std::ostream& out, const std::vector<OccupancyRow>& rows) {
    out << "bin_start,estimate,ci_low,ci_high\n";
    for (const auto& r : rows) {
        out << r.bin_start << ',' << format_value(r.estimate) << ',' << format_value(r.ci_low) << ','
            << format_value(r.ci_high) << '\n';
    }
}

std::vector<OccupancyRow> read_occupancy_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty csv", "header");
    std::vector<OccupancyRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 4) throw Error(ErrorCode::ParseError, "occupancy csv rows need 4 fields", "row");
        rows.push_back({parse_int(f[0], "bin_start"), parse_double(f[1], "estimate"), parse_double(f[2], "ci_low"),
                        parse_double(f[3], "ci_high")});
    }
    return rows;
}

}  // namespace geolambda
