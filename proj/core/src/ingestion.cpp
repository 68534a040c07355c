#include "geolambda/ingestion.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "event_json.hpp"
#include "geolambda/geodata_store.hpp"
#include "geolambda/speed_layer.hpp"

namespace geolambda {

GeoEvent validate(std::string_view raw_record) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(raw_record);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ValidationError, std::string("record: not valid JSON: ") + e.what(), "record");
    }
    return detail::event_from_json(obj);
}

Seq Ingestor::ingest(GeoEvent event) {
    std::lock_guard lock(mutex_);
    Seq seq = 0;
    try {
        seq = archive_.append(event);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DuplicateEvent) throw;
        throw Error(ErrorCode::IngestFailed, std::string("ingest failed: ") + e.what());
    }
    speed_.apply(event, seq);
    return seq;
}

ReplayReport replay(const ReplaySpec& spec, const IngestSink& sink, std::stop_token stop) {
    if (!(spec.speed_factor >= 0.0) || !std::isfinite(spec.speed_factor)) {
        throw Error(ErrorCode::ReplayFailed, "speed factor must be >= 0", "speed_factor");
    }
    using clock = std::chrono::steady_clock;
    ReplayReport report;

    do {
        std::ifstream in(spec.path);
        if (!in) throw Error(ErrorCode::ReplayFailed, "cannot read " + spec.path.string(), "path");

        const auto wall_start = clock::now();
        std::optional<EpochSeconds> first_ts;
        std::string line;
        while (!stop.stop_requested() && std::getline(in, line)) {
            if (line.empty() || line == "\r") continue;
            GeoEvent event;
            try {
                event = validate(line);
            } catch (const Error& e) {
                ++report.rejected;
                spdlog::debug("replay: rejected line: {}", e.what());
                continue;
            }
            if (spec.speed_factor > 0.0) {
                if (!first_ts) first_ts = event.ts;
                const double offset = static_cast<double>(event.ts - *first_ts) / spec.speed_factor;
                if (offset > 0.0) {
                    std::this_thread::sleep_until(
                        wall_start + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(offset)));
                }
            }
            try {
                report.last_seq = sink(std::move(event));
                ++report.accepted;
            } catch (const Error& e) {
                ++report.rejected;
                spdlog::debug("replay: sink rejected event: {}", e.what());
            }
        }
        if (in.bad()) throw Error(ErrorCode::ReplayFailed, "read error on " + spec.path.string(), "path");
    } while (spec.loop && !stop.stop_requested());
    return report;
}

}  // namespace geolambda
