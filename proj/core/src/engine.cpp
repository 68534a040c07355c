#include "geolambda/engine.hpp"

#include <map>

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace geolambda {

namespace {

constexpr std::size_t kMaxReportedErrors = 20;

ArchiveOptions archive_options(const EngineOptions& o) {
    return {o.data_dir, o.segment_entries, o.sync, o.fail_write};
}

}  // namespace

Engine::Engine(EngineOptions options)
    : archive_(std::make_unique<Archive>(archive_options(options))),
      references_(options.data_dir),
      registry_(options.data_dir),
      ingestor_(*archive_, speed_),
      batch_(*archive_, registry_, published_, speed_),
      serving_(published_, speed_) {
    for (const auto& d : registry_.list()) serve_view(d);
    spdlog::debug("engine ready: {} archived events, {} views", archive_->high_watermark(), registry_.list().size());
}

Engine::~Engine() { stop_recompute_loop(); }

Seq Engine::ingest(GeoEvent event) { return ingestor_.ingest(std::move(event)); }

BulkIngestReport Engine::ingest_ndjson(std::string_view body) {
    BulkIngestReport report;
    std::size_t line_no = 0;
    auto note = [&](const Error& e, bool unparseable) {
        ++report.rejected;
        if (unparseable) ++report.unparseable;
        if (report.errors.size() < kMaxReportedErrors) {
            report.errors.push_back({line_no, unparseable ? ErrorCode::ParseError : e.code(), e.what(), e.field()});
        }
    };
    while (!body.empty()) {
        const auto nl = body.find('\n');
        auto line = body.substr(0, nl);
        body = nl == std::string_view::npos ? std::string_view{} : body.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        GeoEvent event;
        try {
            event = validate(line);
        } catch (const Error& e) {
            note(e, !nlohmann::json::accept(line));
            continue;
        }
        try {
            report.last_seq = ingest(std::move(event));
            ++report.accepted;
        } catch (const Error& e) {
            note(e, false);
        }
    }
    return report;
}

void Engine::serve_view(const ViewDescriptor& d) {
    ingestor_.exclusive([&] {
        const auto watermark = archive_->high_watermark();
        PublishedView view{
            std::make_shared<const BatchView>(build_batch_view(*archive_, d, watermark)),
            std::make_shared<const VenueView>(build_venue_view(*archive_, d, d.bin_width, watermark)),
        };
        published_.publish(view);
        speed_.register_view(d, watermark);
    });
}

ViewStatus Engine::register_view(const ViewDescriptor& descriptor) {
    registry_.add(descriptor);
    try {
        serve_view(descriptor);
    } catch (...) {
        registry_.remove(descriptor.name);
        published_.erase(descriptor.name);
        speed_.unregister_view(descriptor.name);
        throw;
    }
    return view_status(descriptor.name);
}

ViewStatus Engine::view_status(const std::string& name) const {
    const auto d = registry_.get(name);
    const auto p = published_.get(name);
    const auto rt = speed_.snapshot(name);
    return {d, p.watermark(), p.batch->built_at, rt.ceiling, speed_.retained(name)};
}

std::vector<ViewStatus> Engine::views() const {
    std::vector<ViewStatus> out;
    for (const auto& d : registry_.list()) {
        try {
            out.push_back(view_status(d.name));
        } catch (const Error&) {
            // Registered but not yet served.
        }
    }
    return out;
}

PublishedView Engine::build_view(const std::string& name) { return batch_.recompute(name); }

void Engine::start_recompute_loop(std::chrono::milliseconds interval) {
    stop_recompute_loop();
    recompute_ = std::jthread([this, interval](std::stop_token stop) { batch_.run_recompute_loop(interval, stop); });
}

void Engine::stop_recompute_loop() {
    if (recompute_.joinable()) {
        recompute_.request_stop();
        recompute_.join();
    }
}

OccupancyCurve Engine::occupancy(const OccupancyQuery& q) const {
    if (q.bin_width <= 0 || q.day_length <= 0 || q.day_length % q.bin_width != 0) {
        throw Error(ErrorCode::BinMismatch, "bin width must tile the day length", "bin");
    }
    const auto nbins = static_cast<std::size_t>(q.day_length / q.bin_width);
    std::map<std::int64_t, std::vector<std::int64_t>> days;
    archive_->for_each(0, archive_->high_watermark(), [&](const ArchiveEntry& entry) {
        const auto& e = entry.event;
        if (!e.venue_id || *e.venue_id != q.venue_id) return;
        if (q.source && e.source != *q.source) return;
        const auto rel = e.ts - q.origin;
        const auto day = rel >= 0 ? rel / q.day_length : -((-rel + q.day_length - 1) / q.day_length);
        const auto bin = (rel - day * q.day_length) / q.bin_width;
        auto [it, inserted] = days.try_emplace(day, nbins, 0);
        ++it->second[static_cast<std::size_t>(bin)];
    });
    if (days.empty()) {
        throw Error(ErrorCode::NoObservations, "no events for venue '" + q.venue_id + "'", "venue");
    }
    std::vector<std::vector<std::int64_t>> per_day;
    for (auto& [day, bins] : days) per_day.push_back(std::move(bins));
    OccupancyOptions opts;
    opts.confidence = q.confidence;
    opts.resamples = q.resamples;
    opts.seed = q.seed;
    opts.venue_id = q.venue_id;
    opts.bin_width = q.bin_width;
    opts.first_bin_start = q.origin + days.begin()->first * q.day_length;
    return occupancy_curve(per_day, opts);
}

std::vector<ArchiveEntry> Engine::view_events(const ViewDescriptor& d, Seq up_to) const {
    std::vector<ArchiveEntry> out;
    archive_->for_each(0, up_to, [&](const ArchiveEntry& entry) {
        if (contribution(d, entry.event)) out.push_back(entry);
    });
    return out;
}

}  // namespace geolambda
