#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

#include "geolambda/batch_layer.hpp"
#include "geolambda/formats.hpp"
#include "geolambda/gameday.hpp"
#include "test_support.hpp"

using namespace geolambda;

TEST_CASE("the same seed writes byte-identical files") {
    testing::TempDir a, b;
    write_gameday(generate_gameday(), a.path());
    write_gameday(generate_gameday(), b.path());
    for (const char* f : {"events.ndjson", "manifest.json", "baseline.asc", "baseline.meta.json", "views.json"}) {
        INFO(f);
        CHECK(testing::slurp(a.path() / f) == testing::slurp(b.path() / f));
    }
    GameDayConfig other;
    other.seed = 8;
    CHECK(generate_gameday(other).events != generate_gameday().events);
}

TEST_CASE("game-day shape") {
    const auto day = generate_gameday();
    REQUIRE(day.venues.size() == 96);
    CHECK(day.venues.front().stadium);
    for (std::size_t i = 1; i < day.venues.size(); ++i) CHECK_FALSE(day.venues[i].stadium);
    CHECK(day.window.length() == 86400);
    CHECK(day.game_hours.window.start() < day.config.kickoff);
    CHECK(day.game_hours.window.end() > day.config.kickoff);
    CHECK_FALSE(day.game_hours.window.overlaps(day.non_game_hours.window));

    // The stadium bbox holds the stadium and sits inside the grid.
    CHECK(day.stadium_bbox.contains(day.config.stadium_lat, day.config.stadium_lon));
    CHECK(cell_of(day.config.stadium_lat, day.config.stadium_lon, day.grid).has_value());

    std::set<std::string> ids;
    for (std::size_t i = 0; i < day.events.size(); ++i) {
        const auto& e = day.events[i];
        REQUIRE(cell_of(e.lat, e.lon, day.grid).has_value());
        REQUIRE(day.window.contains(e.ts));
        REQUIRE(ids.insert(e.event_id).second);
        if (i > 0) REQUIRE(std::pair(day.events[i - 1].ts, day.events[i - 1].event_id) < std::pair(e.ts, e.event_id));
    }

    CHECK(day.baseline.spec() == day.grid);
    CHECK(day.baseline.sum() == doctest::Approx(day.config.baseline_total).epsilon(1e-12));
}

TEST_CASE("venue counts in the manifest match the events") {
    const auto day = generate_gameday();
    std::map<std::string, std::vector<std::int64_t>> seen;
    for (const auto& v : day.venues) seen[v.id].assign(v.counts.size(), 0);
    for (const auto& e : day.events) {
        if (e.source != Source::checkin) continue;
        REQUIRE(e.venue_id);
        ++seen.at(*e.venue_id)[static_cast<std::size_t>((e.ts - day.window.start()) / day.config.bin_width)];
    }
    for (const auto& v : day.venues) CHECK(seen.at(v.id) == v.counts);

    const auto curve = day.true_unit_curve(day.venues.front().id);
    CHECK(*std::max_element(curve.begin(), curve.end()) == 1.0);
}

TEST_CASE("raw count rasters equal the frozen fold of the seed-7 manifest") {
    const auto day = generate_gameday();
    std::map<std::string, std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t>> expected;
    std::ifstream in(testing::oracle_dir() / "gameday_seed7_fold.txt");
    REQUIRE(in);
    std::string view;
    std::int64_t row = 0, col = 0, count = 0;
    while (in >> view >> row >> col >> count) expected[view][{row, col}] = count;
    REQUIRE(expected.size() == 7);

    Archive archive;
    for (const auto& e : day.events) archive.append(e);
    for (const auto& d : day.descriptors()) {
        INFO(d.name);
        const auto v = build_batch_view(archive, d, archive.high_watermark());
        std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> got;
        for (std::int64_t r = 0; r < d.spec.nrows(); ++r) {
            for (std::int64_t c = 0; c < d.spec.ncols(); ++c) {
                const auto x = v.counts.at({r, c});
                if (x != 0) got[{r, c}] = static_cast<std::int64_t>(x);
            }
        }
        CHECK(got == expected.at(d.name));
    }
}
