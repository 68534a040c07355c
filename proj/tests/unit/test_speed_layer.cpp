#include <doctest.h>

#include <atomic>
#include <thread>

#include "geolambda/batch_layer.hpp"
#include "geolambda/gameday.hpp"
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

/// Sum of per-cell contributions of archive entries with seq in (lo, hi].
std::int64_t archive_count(const Archive& archive, const ViewDescriptor& d, Seq lo, Seq hi) {
    std::int64_t n = 0;
    archive.for_each(lo, hi, [&](const ArchiveEntry& e) { n += contribution(d, e.event) ? 1 : 0; });
    return n;
}

}  // namespace

TEST_CASE("fresh realtime view is empty at its floor") {
    SpeedLayer speed;
    speed.register_view(testing::test_descriptor(), 42);
    const auto s = speed.snapshot("v");
    CHECK(s.cells.empty());
    CHECK(s.venue_bins.empty());
    CHECK(s.floor == 42);
    CHECK(s.ceiling == 42);
    CHECK(code_of([&] { speed.snapshot("w"); }) == ErrorCode::UnknownView);
    CHECK(code_of([&] { speed.register_view(testing::test_descriptor(), 0); }) == ErrorCode::NameTaken);
}

TEST_CASE("apply") {
    SpeedLayer speed;
    const auto d = testing::test_descriptor();
    speed.register_view(d, 0);
    speed.register_view(testing::test_descriptor("tweets", Source::tweet), 0);

    SUBCASE("outside every view only advances ceilings") {
        speed.apply(make_event("o", d.window.start(), 10.0, 10.0), 1);
        CHECK(speed.snapshot("v").total() == 0);
        CHECK(speed.snapshot("v").ceiling == 1);
        CHECK(speed.snapshot("tweets").ceiling == 1);
    }
    SUBCASE("inside one view bumps one cell") {
        speed.apply(make_event("i", d.window.start() + 5, 35.95, -83.92, Source::checkin, "venue-a"), 1);
        const auto s = speed.snapshot("v");
        CHECK(s.total() == 1);
        CHECK(s.cells.size() == 1);
        CHECK(s.venue_bins.at({"venue-a", 0}) == 1);
        CHECK(speed.snapshot("tweets").total() == 0);
    }
    SUBCASE("out-of-order sequence numbers are refused") {
        speed.apply(make_event("a", d.window.start(), 35.95, -83.92), 5);
        CHECK(code_of([&] { speed.apply(make_event("b", d.window.start(), 35.95, -83.92), 5); }) ==
              ErrorCode::OutOfOrderSeq);
        CHECK(code_of([&] { speed.apply(make_event("b", d.window.start(), 35.95, -83.92), 3); }) ==
              ErrorCode::OutOfOrderSeq);
        CHECK(speed.snapshot("v").total() == 1);
    }
    SUBCASE("consecutive snapshots without applies are identical") {
        speed.apply(make_event("a", d.window.start(), 35.95, -83.92), 1);
        const auto a = speed.snapshot("v");
        const auto b = speed.snapshot("v");
        CHECK(a.cells == b.cells);
        CHECK(a.venue_bins == b.venue_bins);
        CHECK(a.ceiling == b.ceiling);
    }
}

TEST_CASE("compact") {
    std::mt19937_64 rng(21);
    const auto events = testing::random_events(rng, 1000);
    Archive archive;
    SpeedLayer speed;
    const auto d = testing::test_descriptor();
    speed.register_view(d, 0);
    for (const auto& e : events) speed.apply(e, archive.append(e));
    const Seq ceiling = archive.high_watermark();

    SUBCASE("to the current floor is a no-op") {
        const auto before = speed.snapshot("v");
        speed.compact("v", 0);
        CHECK(speed.snapshot("v").cells == before.cells);
    }
    SUBCASE("to a mid sequence leaves exactly the tail") {
        for (Seq k : {Seq{1}, Seq{250}, Seq{600}, Seq{999}}) {
            speed.compact("v", k);
            const auto s = speed.snapshot("v");
            CHECK(s.floor == k);
            CHECK(s.total() == archive_count(archive, d, k, ceiling));
            // Footprint: one retained delta per tail contribution.
            CHECK(speed.retained("v") == static_cast<std::size_t>(archive_count(archive, d, k, ceiling)));
            CHECK(s.cells.size() <= speed.retained("v"));
        }
        CHECK(code_of([&] { speed.compact("v", 10); }) == ErrorCode::FloorRegression);
    }
    SUBCASE("to the ceiling empties the view") {
        speed.compact("v", ceiling);
        CHECK(speed.snapshot("v").cells.empty());
        CHECK(speed.snapshot("v").venue_bins.empty());
        CHECK(speed.retained("v") == 0);
    }
    SUBCASE("past the ceiling empties the view and lifts the ceiling") {
        speed.compact("v", ceiling + 10);
        CHECK(speed.snapshot("v").cells.empty());
        CHECK(speed.snapshot("v").ceiling == ceiling + 10);
    }
    SUBCASE("pinned snapshots subtract without compacting") {
        const auto s = speed.snapshot("v", Seq{400});
        CHECK(s.floor == 400);
        CHECK(s.total() == archive_count(archive, d, 400, ceiling));
        CHECK(speed.snapshot("v").floor == 0);
        CHECK(speed.snapshot("v").total() == archive_count(archive, d, 0, ceiling));
    }
}

TEST_CASE("game-day events applied to the speed layer equal the batch fold") {
    const auto day = generate_gameday();
    Archive archive;
    SpeedLayer speed;
    for (const auto& d : day.descriptors()) speed.register_view(d, 0);
    for (const auto& e : day.events) speed.apply(e, archive.append(e));
    for (const auto& d : day.descriptors()) {
        const auto batch = build_batch_view(archive, d, archive.high_watermark());
        CHECK(speed.snapshot(d.name).cells == batch.binned);
    }
}

TEST_CASE("snapshots under heavy apply load are consistent") {
    Archive archive;
    SpeedLayer speed;
    const auto d = testing::test_descriptor();
    speed.register_view(d, 0);
    std::mt19937_64 rng(4);
    const auto events = testing::random_events(rng, 20000);
    std::atomic<bool> done = false;
    std::jthread applier([&] {
        for (const auto& e : events) speed.apply(e, archive.append(e));
        done = true;
    });
    int checked = 0;
    while (!done || checked == 0) {
        const auto s = speed.snapshot("v");
        REQUIRE(s.total() == archive_count(archive, d, s.floor, s.ceiling));
        ++checked;
    }
    CHECK(checked > 0);
}

TEST_CASE("an event compacted past before it is applied is not counted twice") {
    SpeedLayer speed;
    const auto d = testing::test_descriptor();
    speed.register_view(d, 0);
    speed.apply(make_event("a", d.window.start(), 35.95, -83.92), 1);
    // A batch already covering seq 2 was published and compacted before the
    // ingest thread got to apply seq 2.
    speed.compact("v", 2);
    CHECK(speed.snapshot("v").ceiling == 2);
    speed.apply(make_event("b", d.window.start(), 35.95, -83.92), 2);
    CHECK(speed.snapshot("v").total() == 0);
    speed.apply(make_event("c", d.window.start(), 35.95, -83.92), 3);
    CHECK(speed.snapshot("v").total() == 1);
    CHECK(speed.snapshot("v").ceiling == 3);
}
