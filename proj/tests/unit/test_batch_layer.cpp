#include <doctest.h>

#include <thread>

#include "geolambda/batch_layer.hpp"
#include "geolambda/gameday.hpp"
#include "geolambda/ingestion.hpp"
#include "geolambda/speed_layer.hpp"
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

/// Straightforward count of archive events passing a descriptor's filters.
std::int64_t passing(const std::vector<GeoEvent>& events, const ViewDescriptor& d) {
    std::int64_t n = 0;
    for (const auto& e : events) {
        if (!d.window.contains(e.ts)) continue;
        if (d.scenario && !d.scenario->window.contains(e.ts)) continue;
        if (d.source_filter && e.source != *d.source_filter) continue;
        if (!d.spec.bbox().contains(e.lat, e.lon)) continue;
        ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("empty archive builds an all-zero view at watermark 0") {
    Archive archive;
    const auto v = build_batch_view(archive, testing::test_descriptor(), 0);
    CHECK(v.watermark == 0);
    CHECK(v.counts.sum() == 0);
    CHECK(v.counts.spec() == testing::test_grid());
    CHECK(code_of([&] { build_batch_view(archive, testing::test_descriptor(), 1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("one event inside the view sets exactly one cell") {
    Archive archive;
    const auto d = testing::test_descriptor();
    archive.append(make_event("one", d.window.start() + 10, 35.951, -83.921));
    const auto v = build_batch_view(archive, d, 1);
    CHECK(v.counts.sum() == 1);
    const auto cell = *cell_of(35.951, -83.921, d.spec);
    CHECK(v.counts.at(cell) == 1);
}

TEST_CASE("batch views are deterministic and conserve filtered counts") {
    std::mt19937_64 rng(3);
    const auto events = testing::random_events(rng, 3000);
    Archive archive;
    for (const auto& e : events) archive.append(e);
    const auto w = testing::test_window();
    const ScenarioSpec evening{"evening", TimeWindow::make(w.start() + 18 * 3600, w.start() + 22 * 3600)};
    for (const auto& d : {testing::test_descriptor("all"), testing::test_descriptor("tweets", Source::tweet),
                          testing::test_descriptor("evening", std::nullopt, evening),
                          testing::test_descriptor("evening_sensor", Source::sensor, evening)}) {
        const auto a = build_batch_view(archive, d, 3000);
        const auto b = build_batch_view(archive, d, 3000);
        CHECK(a.counts == b.counts);
        CHECK(a.binned == b.binned);
        CHECK(a.counts.sum() == static_cast<double>(passing(events, d)));
        for (double v : a.counts.values()) CHECK(v == std::floor(v));

        // Prefix builds ignore later appends.
        const std::vector<GeoEvent> prefix(events.begin(), events.begin() + 1234);
        CHECK(build_batch_view(archive, d, 1234).counts.sum() == static_cast<double>(passing(prefix, d)));
    }
}

TEST_CASE("venue views") {
    Archive archive;
    const auto d = testing::test_descriptor();
    SUBCASE("30-minute bins over a day give 48 bins per venue") {
        const auto v = build_venue_view(archive, d, 1800, 0);
        REQUIRE(v.bins.size() == 3);
        for (const auto& [id, bins] : v.bins) {
            CHECK(bins.size() == 48);
            CHECK(std::count(bins.begin(), bins.end(), 0) == 48);
        }
    }
    SUBCASE("bin width must tile the window") {
        CHECK(code_of([&] { build_venue_view(archive, d, 7, 0); }) == ErrorCode::BinMismatch);
        CHECK(code_of([&] { build_venue_view(archive, d, 0, 0); }) == ErrorCode::BinMismatch);
    }
    SUBCASE("events land in their venue and bin") {
        archive.append(make_event("1", d.window.start() + 1799, 35.95, -83.92, Source::checkin, "venue-a"));
        archive.append(make_event("2", d.window.start() + 1800, 35.95, -83.92, Source::checkin, "venue-a"));
        archive.append(make_event("3", d.window.start() + 1800, 35.95, -83.92, Source::tweet));
        archive.append(make_event("4", d.window.end() - 1, 35.95, -83.92, Source::tweet, "venue-b"));
        const auto v = build_venue_view(archive, d, 1800, 4);
        CHECK(v.bins.at("venue-a")[0] == 1);
        CHECK(v.bins.at("venue-a")[1] == 1);
        CHECK(v.bins.at("venue-b")[47] == 1);
        CHECK(v.bins.at("venue-c") == std::vector<std::int64_t>(48, 0));
    }
}

TEST_CASE("game-day manifest venue totals equal venue view row sums") {
    const auto day = generate_gameday();
    Archive archive;
    for (const auto& e : day.events) archive.append(e);
    const auto d = day.descriptors().front();
    const auto v = build_venue_view(archive, d, day.config.bin_width, archive.high_watermark());
    for (const auto& venue : day.venues) {
        CHECK(v.bins.at(venue.id) == venue.counts);
    }
}

TEST_CASE("view registry persists and validates") {
    testing::TempDir dir;
    {
        ViewRegistry reg(dir.path());
        reg.add(testing::test_descriptor("a"));
        reg.add(testing::test_descriptor("b", Source::tweet));
        CHECK(code_of([&] { reg.add(testing::test_descriptor("a")); }) == ErrorCode::NameTaken);
        auto bad = testing::test_descriptor("c");
        bad.bin_width = 7;
        CHECK(code_of([&] { reg.add(bad); }) == ErrorCode::BinMismatch);
        bad = testing::test_descriptor("bad name!");
        CHECK(code_of([&] { reg.add(bad); }) == ErrorCode::InvalidArgument);
        CHECK(code_of([&] { reg.get("zzz"); }) == ErrorCode::UnknownView);
    }
    ViewRegistry reloaded(dir.path());
    REQUIRE(reloaded.list().size() == 2);
    CHECK(reloaded.get("a") == testing::test_descriptor("a"));
    CHECK(reloaded.get("b") == testing::test_descriptor("b", Source::tweet));
}

TEST_CASE("descriptor JSON round trip") {
    const auto w = testing::test_window();
    const auto d = testing::test_descriptor("x", Source::open_data,
                                            ScenarioSpec{"late", TimeWindow::make(w.start() + 3600, w.end())});
    const auto back = parse_view_descriptors(to_json(d));
    REQUIRE(back.size() == 1);
    CHECK(back[0] == d);
    CHECK(parse_view_descriptors("[" + to_json(d) + "," + to_json(testing::test_descriptor("y")) + "]").size() == 2);
    CHECK(code_of([] { parse_view_descriptors("{"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { parse_view_descriptors(R"({"name":"q"})"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("published watermarks never move backwards") {
    Archive archive;
    for (int i = 0; i < 5; ++i) archive.append(make_event(std::to_string(i), testing::test_window().start(), 35.95, -83.92));
    const auto d = testing::test_descriptor();
    PublishedViews published;
    auto make = [&](Seq k) {
        return PublishedView{std::make_shared<const BatchView>(build_batch_view(archive, d, k)),
                             std::make_shared<const VenueView>(build_venue_view(archive, d, 1800, k))};
    };
    published.publish(make(4));
    published.publish(make(2));
    CHECK(published.get("v").watermark() == 4);
    published.publish(make(5));
    CHECK(published.get("v").watermark() == 5);
    CHECK(code_of([&] { published.get("w"); }) == ErrorCode::UnknownView);
}

TEST_CASE("recompute publishes then compacts the speed layer") {
    Archive archive;
    SpeedLayer speed;
    ViewRegistry registry;
    PublishedViews published;
    Ingestor ingestor(archive, speed);
    BatchLayer batch(archive, registry, published, speed);
    const auto d = testing::test_descriptor();
    registry.add(d);
    speed.register_view(d, 0);
    std::mt19937_64 rng(8);
    for (const auto& e : testing::random_events(rng, 400)) ingestor.ingest(e);

    const auto first = batch.recompute("v");
    CHECK(first.watermark() == 400);
    CHECK(speed.snapshot("v").floor == 400);
    CHECK(speed.snapshot("v").total() == 0);
    CHECK(speed.retained("v") == 0);

    // No new events: the rebuilt view is identical.
    const auto again = batch.recompute("v");
    CHECK(again.batch->counts == first.batch->counts);
    CHECK(again.venues->bins == first.venues->bins);

    CHECK(code_of([&] { batch.recompute("missing"); }) == ErrorCode::UnknownView);
}

TEST_CASE("the recompute loop runs until stopped") {
    Archive archive;
    SpeedLayer speed;
    ViewRegistry registry;
    PublishedViews published;
    Ingestor ingestor(archive, speed);
    BatchLayer batch(archive, registry, published, speed);
    const auto d = testing::test_descriptor();
    registry.add(d);
    speed.register_view(d, 0);
    {
        std::jthread loop([&](std::stop_token st) { batch.run_recompute_loop(std::chrono::milliseconds(10), st); });
        for (int i = 0; i < 50; ++i) {
            ingestor.ingest(make_event("l" + std::to_string(i), d.window.start() + i, 35.95, -83.92));
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
        }
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
        auto watermark = [&] { return published.contains("v") ? published.get("v").watermark() : 0; };
        while (watermark() < 50 && std::chrono::steady_clock::now() < deadline) {
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
    }
    CHECK(batch.cycles() >= 2);
    CHECK(published.get("v").watermark() == 50);
    CHECK(published.get("v").batch->counts.sum() == 50);
}
