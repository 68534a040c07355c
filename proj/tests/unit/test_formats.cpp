#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "geolambda/formats.hpp"
#include "geolambda/ingestion.hpp"
#include "test_support.hpp"

using namespace geolambda;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::StorageFailure;
}

bool same_to_10_digits(double a, double b) {
    if (a == b) return true;
    return std::abs(a - b) <= 5e-10 * std::max(std::abs(a), std::abs(b));
}

}  // namespace

TEST_CASE("asc layout of a 2 x 2 raster") {
    const double cs = kThreeArcSeconds;
    const auto spec = GridSpec::make(BoundingBox::make(35.0, -84.0, 35.0 + 2 * cs, -84.0 + 2 * cs));
    RasterGrid r(spec, {1, 2, 3.25, kDefaultNodata});
    std::ostringstream out;
    write_asc(out, r);
    std::istringstream in(out.str());
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    REQUIRE(lines.size() == 8);
    CHECK(lines[0] == "NCOLS 2");
    CHECK(lines[1] == "NROWS 2");
    CHECK(lines[2].rfind("XLLCORNER -84", 0) == 0);
    CHECK(lines[3].rfind("YLLCORNER 35", 0) == 0);
    CHECK(lines[4].rfind("CELLSIZE 0.000833333", 0) == 0);
    CHECK(lines[5] == "NODATA_VALUE -9999");
    CHECK(lines[6] == "1 2");  // the northern row first
    CHECK(lines[7] == "3.25 -9999");
}

TEST_CASE("asc round trip keeps 10 significant digits and the exact grid") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1e6, 1e6), lat(-60, 60), lon(-170, 170);
    for (int trial = 0; trial < 50; ++trial) {
        const double la = lat(rng), lo = lon(rng);
        const auto spec = GridSpec::make(BoundingBox::make(la, lo, la + 0.01 + 0.02 * (trial % 5), lo + 0.013));
        RasterGrid r(spec);
        for (auto& v : r.values()) v = (rng() % 7 == 0) ? kDefaultNodata : u(rng) / (1 + rng() % 1000);
        std::ostringstream out;
        write_asc(out, r);
        std::istringstream in(out.str());
        const auto back = read_asc(in);
        CHECK(back.spec().same_grid(spec));
        CHECK(back.nodata() == r.nodata());
        for (std::size_t i = 0; i < r.values().size(); ++i) REQUIRE(same_to_10_digits(back.values()[i], r.values()[i]));
        // A second trip is exact: printed values are fixed points.
        std::ostringstream again;
        write_asc(again, back);
        CHECK(again.str() == out.str());
    }
}

TEST_CASE("asc reader accepts centre registration and lower-case keys") {
    const std::string text =
        "ncols 2\nnrows 1\nxllcenter 10.5\nyllcenter 20.5\ncellsize 1\nnodata_value -1\n4 -1\n";
    std::istringstream in(text);
    const auto r = read_asc(in);
    CHECK(r.spec().west() == 10.0);
    CHECK(r.spec().south() == 20.0);
    CHECK(r.nodata() == -1.0);
    CHECK(r.sum() == 4.0);
    std::istringstream bad("NCOLS 2\nNROWS 2\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 1\n1 2 3\n");
    CHECK(code_of([&] { read_asc(bad); }) == ErrorCode::ParseError);
    std::istringstream junk("hello");
    CHECK(code_of([&] { read_asc(junk); }) == ErrorCode::ParseError);
}

TEST_CASE("ndjson round trip is lossless") {
    std::mt19937_64 rng(8);
    auto events = testing::random_events(rng, 300);
    events[5].attributes = {{"text", "line\nbreak \"quoted\" \xf0\x9f\x8f\x88"}, {"k", ""}};
    for (const auto& e : events) CHECK(validate(to_ndjson(e)) == e);
    CHECK(to_ndjson(events[5]).find('\n') == std::string::npos);
}

TEST_CASE("venue csv round trip") {
    const std::vector<VenueBinRow> rows{{"stadium", 1378551600, 8}, {"venue, with comma", 1378553400, 0},
                                        {"q\"uote", 1, 123456789012}};
    std::ostringstream out;
    write_venue_csv_header(out);
    for (const auto& r : rows) write_venue_csv_row(out, r);
    CHECK(out.str().rfind("venue_id,bin_start,count\n", 0) == 0);
    std::istringstream in(out.str());
    CHECK(read_venue_csv(in) == rows);
}

TEST_CASE("occupancy csv round trip at 10 digits") {
    const std::vector<OccupancyRow> rows{{0, 0.0, 0.0, 0.0}, {1800, 0.123456789012345, 0.1, 0.2}, {3600, 1.0, 0.9, 1.0}};
    std::ostringstream out;
    write_occupancy_csv(out, rows);
    CHECK(out.str().rfind("bin_start,estimate,ci_low,ci_high\n", 0) == 0);
    std::istringstream in(out.str());
    const auto back = read_occupancy_csv(in);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].bin_start == rows[i].bin_start);
        CHECK(same_to_10_digits(back[i].estimate, rows[i].estimate));
        CHECK(same_to_10_digits(back[i].ci_low, rows[i].ci_low));
        CHECK(same_to_10_digits(back[i].ci_high, rows[i].ci_high));
    }
}

TEST_CASE("export format names") {
    CHECK(parse_export_format("asc") == ExportFormat::asc);
    CHECK(parse_export_format("ndjson") == ExportFormat::ndjson);
    CHECK(code_of([] { parse_export_format("tiff"); }) == ErrorCode::InvalidArgument);
}
