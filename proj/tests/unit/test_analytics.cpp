#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "geolambda/analytics.hpp"
#include "geolambda/gameday.hpp"
#include "test_support.hpp"

using namespace geolambda;
using geolambda::testing::make_event;

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

GridSpec grid(std::int64_t ncols, std::int64_t nrows) {
    const double cs = kThreeArcSeconds;
    return GridSpec::make(BoundingBox::make(35.0, -84.0, 35.0 + static_cast<double>(nrows) * cs,
                                            -84.0 + static_cast<double>(ncols) * cs),
                          cs);
}

struct Tap {
    int dr, dc;
    double w;
};

std::vector<Tap> oracle_taps(int radius) {
    std::ifstream in(testing::oracle_dir() / ("kde_impulse_r" + std::to_string(radius) + ".txt"));
    REQUIRE(in.good());
    std::vector<Tap> taps;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        Tap t{};
        ls >> t.dr >> t.dc >> t.w;
        taps.push_back(t);
    }
    return taps;
}

RasterGrid random_raster(std::mt19937_64& rng, const GridSpec& spec) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RasterGrid r(spec);
    for (auto& v : r.values()) v = u(rng) < 0.6 ? 0.0 : std::floor(50.0 * u(rng));
    return r;
}

}  // namespace

TEST_CASE("rasterize") {
    const auto spec = testing::test_grid();
    CHECK(rasterize({}, spec).sum() == 0);
    std::vector<GeoEvent> three(3, make_event("x", 10, 35.95, -83.92));
    const auto r = rasterize(three, spec);
    CHECK(r.at(*cell_of(35.95, -83.92, spec)) == 3);
    CHECK(r.sum() == 3);

    std::mt19937_64 rng(1);
    const auto events = testing::random_events(rng, 5000);
    std::int64_t inside = 0;
    for (const auto& e : events) inside += spec.bbox().contains(e.lat, e.lon) ? 1 : 0;
    CHECK(rasterize(events, spec).sum() == static_cast<double>(inside));
}

TEST_CASE("quartic kernel taps match the brute-force oracle") {
    for (int radius : {1, 2, 3, 5}) {
        const auto taps = quartic_kernel(radius);
        double sum = 0;
        for (const auto& t : taps) sum += t.weight;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
        for (const auto& o : oracle_taps(radius)) {
            double w = 0;
            for (const auto& t : taps) {
                if (t.drow == o.dr && t.dcol == o.dc) w = t.weight;
            }
            CHECK(std::abs(w - o.w) <= 1e-12);
        }
    }
    CHECK(code_of([] { quartic_kernel(0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("KDE impulse response") {
    const auto spec = grid(11, 9);
    RasterGrid impulse(spec);
    impulse.at({4, 5}) = 1.0;
    const auto out = kde(impulse, 2);
    CHECK(std::abs(out.at({4, 5}) - 1.0 / 4.25) <= 1e-12);
    CHECK(std::abs(out.at({3, 5}) - 0.5625 / 4.25) <= 1e-12);
    CHECK(std::abs(out.at({4, 6}) - 0.5625 / 4.25) <= 1e-12);
    CHECK(std::abs(out.at({5, 6}) - 0.25 / 4.25) <= 1e-12);
    CHECK(out.at({4, 7}) == 0.0);
    CHECK(out.at({2, 5}) == 0.0);
    for (const auto& o : oracle_taps(2)) CHECK(std::abs(out.at({4 + o.dr, 5 + o.dc}) - o.w) <= 1e-12);

    RasterGrid corner(spec);
    corner.at({0, 0}) = 1.0;
    CHECK(std::abs(kde(corner, 2).sum() - 1.0) <= 1e-15);
    CHECK(kde(RasterGrid(spec), 2).sum() == 0.0);
    CHECK(code_of([&] { kde(impulse, 0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("KDE keeps nodata cells and never spreads mass onto them") {
    const auto spec = grid(5, 5);
    RasterGrid r(spec);
    r.at({2, 2}) = 10.0;
    r.at({2, 3}) = kDefaultNodata;
    const auto out = kde(r, 2);
    CHECK(out.at({2, 3}) == kDefaultNodata);
    CHECK(std::abs(out.sum() - 10.0) <= 1e-12);
}

TEST_CASE("property: KDE conservation, linearity and translation") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::int64_t> dim(1, 30);
    std::uniform_real_distribution<double> coef(-3.0, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto spec = grid(dim(rng), dim(rng));
        const int radius = 1 + trial % 4;
        const auto r1 = random_raster(rng, spec);
        const auto r2 = random_raster(rng, spec);
        const auto k1 = kde(r1, radius);
        const auto k2 = kde(r2, radius);
        CHECK(std::abs(k1.sum() - r1.sum()) <= 1e-9 * std::max(1.0, r1.sum()));

        const double a = coef(rng), b = coef(rng);
        RasterGrid mix(spec);
        for (std::size_t i = 0; i < mix.values().size(); ++i) mix.values()[i] = a * r1.values()[i] + b * r2.values()[i];
        const auto km = kde(mix, radius);
        for (std::size_t i = 0; i < km.values().size(); ++i) {
            REQUIRE(std::abs(km.values()[i] - (a * k1.values()[i] + b * k2.values()[i])) <= 1e-9);
        }
    }
    // Interior impulses shifted by one cell give shifted responses.
    const auto spec = grid(20, 20);
    for (int radius : {1, 2, 3}) {
        RasterGrid a(spec), b(spec);
        a.at({8, 8}) = 1.0;
        b.at({9, 8}) = 1.0;
        const auto ka = kde(a, radius), kb = kde(b, radius);
        for (std::int64_t r = 0; r < 19; ++r) {
            for (std::int64_t c = 0; c < 20; ++c) REQUIRE(std::abs(ka.at({r, c}) - kb.at({r + 1, c})) <= 1e-9);
        }
    }
}

TEST_CASE("scale_to_population") {
    const auto spec = grid(2, 2);
    RasterGrid uniform(spec, 1.0);
    const auto scaled = scale_to_population(uniform, 100.0);
    for (double v : scaled.values()) CHECK(v == 25.0);
    CHECK(scale_to_population(RasterGrid(spec), 0.0).sum() == 0.0);
    CHECK(scale_to_population(uniform, 0.0).sum() == 0.0);
    CHECK(code_of([&] { scale_to_population(RasterGrid(spec), 5.0); }) == ErrorCode::DegenerateDensity);
    CHECK(code_of([&] { scale_to_population(uniform, -1.0); }) == ErrorCode::InvalidArgument);

    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        const auto r = kde(random_raster(rng, grid(25, 25)), 2);
        if (r.sum() == 0) continue;
        CHECK(std::abs(scale_to_population(r, 102455.0).sum() - 102455.0) <= 1e-9 * 102455.0);
    }
}

TEST_CASE("dasymetric_add") {
    const auto spec = grid(2, 2);
    RasterGrid base(spec, {1.0, kDefaultNodata, 3.0, 4.0});
    CHECK(dasymetric_add(base, RasterGrid(spec)) == base);
    RasterGrid modeled(spec, {0.5, 5.0, 1.0, 2.0});
    const auto out = dasymetric_add(base, modeled);
    CHECK(out.values() == std::vector<double>{1.5, kDefaultNodata, 4.0, 6.0});
    // Data-cell sum is baseline plus modeled over those cells.
    CHECK(out.sum() == base.sum() + 0.5 + 1.0 + 2.0);
    CHECK(code_of([&] { dasymetric_add(base, RasterGrid(grid(3, 2))); }) == ErrorCode::SpecMismatch);
}

TEST_CASE("split_by_scenario") {
    const std::vector<ScenarioSpec> scenarios{{"a", TimeWindow::make(100, 200)}, {"b", TimeWindow::make(200, 300)}};
    const std::vector<GeoEvent> events{make_event("1", 100, 0, 0), make_event("2", 199, 0, 0),
                                       make_event("3", 200, 0, 0), make_event("4", 300, 0, 0),
                                       make_event("5", 50, 0, 0)};
    const auto split = split_by_scenario(events, scenarios);
    CHECK(split.at("a").size() == 2);
    CHECK(split.at("b").size() == 1);
    CHECK(split.at("b")[0].event_id == "3");
    const std::vector<ScenarioSpec> overlapping{{"a", TimeWindow::make(100, 201)}, {"b", TimeWindow::make(200, 300)}};
    CHECK(code_of([&] { split_by_scenario(events, overlapping); }) == ErrorCode::OverlappingScenarios);
}

TEST_CASE("game-day scenario split matches the manifest phase totals") {
    const auto day = generate_gameday();
    const std::vector<ScenarioSpec> scenarios{day.game_hours, day.non_game_hours};
    const auto split = split_by_scenario(day.events, scenarios);
    std::map<std::string, std::map<Source, std::int64_t>> totals;
    for (const auto& [name, evs] : split) {
        for (const auto& e : evs) ++totals[name][e.source];
    }
    const auto manifest = nlohmann::json::parse(day.manifest_json());
    for (const char* name : {"game-hours", "non-game-hours"}) {
        const auto& phase = manifest.at("phase_totals").at(name);
        CHECK(totals[name][Source::checkin] == phase.at("checkin").get<std::int64_t>());
        CHECK(totals[name][Source::tweet] == phase.at("tweet").get<std::int64_t>());
    }
}

TEST_CASE("cumulative_to_interval") {
    const std::vector<std::int64_t> cum{3, 5, 5, 9};
    CHECK(cumulative_to_interval(cum) == std::vector<std::int64_t>{3, 2, 0, 4});
    CHECK(cumulative_to_interval({}).empty());
    const std::vector<std::int64_t> dip{4, 6, 5, 8};
    CHECK(cumulative_to_interval(dip) == std::vector<std::int64_t>{4, 2, 0, 3});
    std::mt19937_64 rng(9);
    std::vector<std::int64_t> mono{0};
    for (int i = 0; i < 100; ++i) mono.push_back(mono.back() + static_cast<std::int64_t>(rng() % 7));
    const auto out = cumulative_to_interval(mono);
    CHECK(std::accumulate(out.begin(), out.end(), std::int64_t{0}) == mono.back());
}

TEST_CASE("occupancy curve examples") {
    SUBCASE("one day") {
        const auto c = occupancy_curve({{0, 5, 10, 5}}, {.seed = 1});
        REQUIRE(c.bins.size() == 4);
        const std::vector<double> expected{0.0, 0.5, 1.0, 0.5};
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(c.bins[i].estimate == expected[i]);
            CHECK(c.bins[i].ci_low == expected[i]);
            CHECK(c.bins[i].ci_high == expected[i]);
        }
        CHECK(c.n_days == 1);
    }
    SUBCASE("identical days give zero width") {
        const auto c = occupancy_curve({{1, 4, 2}, {1, 4, 2}, {1, 4, 2}}, {.seed = 3});
        for (const auto& b : c.bins) CHECK(b.ci_high - b.ci_low == 0.0);
    }
    SUBCASE("all-zero days are excluded and all-zero input has no observations") {
        const auto c = occupancy_curve({{0, 0, 0}, {1, 2, 4}}, {.seed = 3});
        CHECK(c.n_days == 1);
        CHECK(c.bins[2].estimate == 1.0);
        CHECK(code_of([] { occupancy_curve({{0, 0}, {0, 0}}); }) == ErrorCode::NoObservations);
        CHECK(code_of([] { occupancy_curve({}); }) == ErrorCode::NoObservations);
    }
    SUBCASE("ragged days are rejected") {
        CHECK(code_of([] { occupancy_curve({{1, 2}, {1}}); }) == ErrorCode::InvalidArgument);
    }
    SUBCASE("bin starts follow the options") {
        const auto c = occupancy_curve({{1, 2}}, {.venue_id = "m", .bin_width = 600, .first_bin_start = 1000});
        CHECK(c.venue_id == "m");
        CHECK(c.bins[1].start == 1600);
    }
}

TEST_CASE("property: occupancy invariants, determinism and scale invariance") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 60; ++trial) {
        const auto days = 1 + rng() % 10;
        const auto nbins = 1 + rng() % 30;
        std::vector<std::vector<std::int64_t>> data(days, std::vector<std::int64_t>(nbins));
        for (auto& d : data) {
            for (auto& v : d) v = static_cast<std::int64_t>(rng() % 20) - 8;
            for (auto& v : d) v = std::max<std::int64_t>(v, 0);
        }
        data[0][rng() % nbins] = 3;
        const OccupancyOptions opts{.confidence = 0.9, .resamples = 300, .seed = trial + 1u};
        const auto c = occupancy_curve(data, opts);
        double peak = 0;
        for (const auto& b : c.bins) {
            REQUIRE(0.0 <= b.ci_low);
            REQUIRE(b.ci_low <= b.estimate);
            REQUIRE(b.estimate <= b.ci_high);
            REQUIRE(b.ci_high <= 1.0);
            peak = std::max(peak, b.estimate);
        }
        CHECK(peak == 1.0);

        const auto again = occupancy_curve(data, opts);
        auto scaled = data;
        const auto factor = static_cast<std::int64_t>(2 + rng() % 9);
        for (auto& d : scaled) {
            for (auto& v : d) v *= factor;
        }
        const auto cs = occupancy_curve(scaled, opts);
        for (std::size_t i = 0; i < nbins; ++i) {
            CHECK(again.bins[i].ci_low == c.bins[i].ci_low);
            CHECK(again.bins[i].ci_high == c.bins[i].ci_high);
            CHECK(cs.bins[i].estimate == doctest::Approx(c.bins[i].estimate).epsilon(1e-12));
            CHECK(cs.bins[i].ci_low == doctest::Approx(c.bins[i].ci_low).epsilon(1e-12));
            CHECK(cs.bins[i].ci_high == doctest::Approx(c.bins[i].ci_high).epsilon(1e-12));
        }
    }
}
