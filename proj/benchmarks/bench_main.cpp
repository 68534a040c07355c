#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "geolambda/analytics.hpp"
#include "geolambda/batch_layer.hpp"
#include "geolambda/ingestion.hpp"
#include "geolambda/serving_query.hpp"
#include "geolambda/speed_layer.hpp"

#include "test_support.hpp"

using namespace geolambda;

namespace {

RasterGrid random_counts(std::int64_t n, std::uint64_t seed) {
    const double cs = kThreeArcSeconds;
    const auto spec = GridSpec::make(BoundingBox::make(35.0, -84.0, 35.0 + n * cs, -84.0 + n * cs), cs);
    RasterGrid r(spec);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : r.values()) v = u(rng) < 0.8 ? 0.0 : std::floor(40.0 * u(rng));
    return r;
}

void BM_Kde(benchmark::State& state) {
    const auto raster = random_counts(state.range(0), 1);
    const int radius = static_cast<int>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(kde(raster, radius));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(raster.values().size()));
}
BENCHMARK(BM_Kde)->Args({65, 2})->Args({256, 2})->Args({256, 5})->Unit(benchmark::kMicrosecond);

void BM_Ingest(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const auto events = testing::random_events(rng, 20000);
    const auto d = testing::test_descriptor();
    for (auto _ : state) {
        state.PauseTiming();
        Archive archive;
        SpeedLayer speed;
        speed.register_view(d, 0);
        Ingestor ingestor(archive, speed);
        state.ResumeTiming();
        for (const auto& e : events) ingestor.ingest(e);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(events.size()));
}
BENCHMARK(BM_Ingest)->Unit(benchmark::kMillisecond);

void BM_BatchBuild(benchmark::State& state) {
    std::mt19937_64 rng(3);
    Archive archive;
    for (const auto& e : testing::random_events(rng, static_cast<std::size_t>(state.range(0)))) archive.append(e);
    const auto d = testing::test_descriptor();
    for (auto _ : state) benchmark::DoNotOptimize(build_batch_view(archive, d, archive.high_watermark()));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BatchBuild)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_Merge(benchmark::State& state) {
    std::mt19937_64 rng(4);
    const auto events = testing::random_events(rng, 50000);
    const auto tail = static_cast<std::size_t>(state.range(0));
    const auto k = events.size() - tail;
    const auto d = testing::test_descriptor();
    Archive archive;
    SpeedLayer speed;
    PublishedViews published;
    ServingLayer serving(published, speed);
    for (std::size_t i = 0; i < k; ++i) archive.append(events[i]);
    published.publish({std::make_shared<const BatchView>(build_batch_view(archive, d, k)),
                       std::make_shared<const VenueView>(build_venue_view(archive, d, d.bin_width, k))});
    speed.register_view(d, k);
    for (std::size_t i = k; i < events.size(); ++i) speed.apply(events[i], archive.append(events[i]));
    for (auto _ : state) benchmark::DoNotOptimize(serving.merge("v"));
}
BENCHMARK(BM_Merge)->Arg(100)->Arg(10000)->Unit(benchmark::kMicrosecond);

void BM_Occupancy(benchmark::State& state) {
    std::mt19937_64 rng(5);
    std::poisson_distribution<std::int64_t> arrivals(20.0);
    std::vector<std::vector<std::int64_t>> days(8, std::vector<std::int64_t>(48));
    for (auto& day : days)
        for (auto& b : day) b = arrivals(rng);
    for (auto _ : state) benchmark::DoNotOptimize(occupancy_curve(days, {.resamples = 1000, .seed = 1}));
}
BENCHMARK(BM_Occupancy)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
