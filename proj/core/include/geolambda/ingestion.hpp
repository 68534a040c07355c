#pragma once

// Record validation, dual dispatch of accepted events to the archive and the
// speed layer, and file replay standing in for live harvesters.

#include <filesystem>
#include <functional>
#include <mutex>
#include <stop_token>
#include <string_view>

#include "geolambda/core_model.hpp"

namespace geolambda {

class Archive;
class SpeedLayer;

/// Parses and checks one NDJSON RawRecord. Unknown keys are ignored and
/// attributes are kept verbatim. Throws Error{ValidationError} naming the
/// field at fault (or "record" when the line is not a JSON object).
GeoEvent validate(std::string_view raw_record);

class Ingestor {
public:
    Ingestor(Archive& archive, SpeedLayer& speed) : archive_(archive), speed_(speed) {}

    /// Appends to the archive and applies to the speed layer before
    /// returning the sequence number. On Error{DuplicateEvent} or
    /// Error{IngestFailed} neither side has seen the event.
    Seq ingest(GeoEvent event);

    /// Runs fn with ingestion paused, e.g. to register a view at an exact
    /// watermark.
    template <typename Fn>
    decltype(auto) exclusive(Fn&& fn) {
        std::lock_guard lock(mutex_);
        return std::forward<Fn>(fn)();
    }

private:
    Archive& archive_;
    SpeedLayer& speed_;
    std::mutex mutex_;  // the single serialization point assigning seqs
};

struct ReplaySpec {
    std::filesystem::path path;
    /// Event-time to wall-time ratio; 0 replays as fast as possible.
    double speed_factor = 0.0;
    /// Start over at end of file until stop is requested.
    bool loop = false;
};

struct ReplayReport {
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
    Seq last_seq = 0;
};

using IngestSink = std::function<Seq(GeoEvent)>;

/// Feeds the file through sink in file order, pacing by event timestamps
/// divided by speed_factor. Malformed lines and sink errors count as
/// rejected. Throws Error{ReplayFailed} if the file cannot be read or the
/// spec is invalid.
ReplayReport replay(const ReplaySpec& spec, const IngestSink& sink, std::stop_token stop = {});

}  // namespace geolambda
