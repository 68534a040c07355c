#pragma once

// One process worth of engine: archive, reference rasters, view registry,
// batch and speed layers and the serving merge, wired together.

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "geolambda/analytics.hpp"
#include "geolambda/batch_layer.hpp"
#include "geolambda/geodata_store.hpp"
#include "geolambda/ingestion.hpp"
#include "geolambda/serving_query.hpp"
#include "geolambda/speed_layer.hpp"

namespace geolambda {

struct EngineOptions {
    /// Empty runs fully in memory.
    std::filesystem::path data_dir;
    std::size_t segment_entries = 100'000;
    bool sync = false;
    std::function<bool(const GeoEvent&)> fail_write;
};

struct ViewStatus {
    ViewDescriptor descriptor;
    Seq watermark = 0;
    EpochSeconds built_at = 0;
    Seq realtime_ceiling = 0;
    std::size_t realtime_retained = 0;
};

struct LineError {
    std::size_t line = 0;
    ErrorCode code = ErrorCode::ValidationError;
    std::string message;
    std::string field;
};

struct BulkIngestReport {
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
    /// Lines that were not JSON at all (a subset of rejected).
    std::uint64_t unparseable = 0;
    Seq last_seq = 0;
    std::vector<LineError> errors;  // first few only
};

struct OccupancyQuery {
    std::string venue_id;
    EpochSeconds bin_width = 1800;
    EpochSeconds day_length = 86400;
    /// Day d covers [origin + d * day_length, origin + (d+1) * day_length).
    EpochSeconds origin = 0;
    std::optional<Source> source;
    double confidence = 0.95;
    int resamples = 1000;
    std::uint64_t seed = 0;
};

class Engine {
public:
    explicit Engine(EngineOptions options = {});
    ~Engine();

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    Seq ingest(GeoEvent event);
    /// Validates and ingests each non-empty line of an NDJSON body.
    BulkIngestReport ingest_ndjson(std::string_view body);

    /// Registers a view and serves it immediately: the batch view is built at
    /// the current high watermark with ingestion paused, and the realtime
    /// view starts at that watermark.
    ViewStatus register_view(const ViewDescriptor& descriptor);
    std::vector<ViewStatus> views() const;
    ViewStatus view_status(const std::string& name) const;

    /// One-shot batch rebuild at the current high watermark.
    PublishedView build_view(const std::string& name);
    std::size_t recompute_all() { return batch_.recompute_all(); }

    void start_recompute_loop(std::chrono::milliseconds interval);
    void stop_recompute_loop();

    MergedView merge(const std::string& view) const { return serving_.merge(view); }
    QueryResult query(const QueryRequest& request) const { return serving_.query(request); }

    /// Per-day venue bins from the archive fed to occupancy_curve().
    OccupancyCurve occupancy(const OccupancyQuery& q) const;

    /// Archive entries of a view up to a seq, in seq order.
    std::vector<ArchiveEntry> view_events(const ViewDescriptor& d, Seq up_to) const;

    Archive& archive() noexcept { return *archive_; }
    const Archive& archive() const noexcept { return *archive_; }
    ReferenceStore& references() noexcept { return references_; }
    const ReferenceStore& references() const noexcept { return references_; }
    const ViewRegistry& registry() const noexcept { return registry_; }
    const SpeedLayer& speed() const noexcept { return speed_; }
    const PublishedViews& published() const noexcept { return published_; }

private:
    void serve_view(const ViewDescriptor& d);

    std::unique_ptr<Archive> archive_;
    ReferenceStore references_;
    ViewRegistry registry_;
    SpeedLayer speed_;
    PublishedViews published_;
    Ingestor ingestor_;
    BatchLayer batch_;
    ServingLayer serving_;
    std::jthread recompute_;
};

}  // namespace geolambda
