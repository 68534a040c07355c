#pragma once

// The archive: an append-only, segmented NDJSON event log with an in-memory
// index, plus a registry of immutable reference rasters.
//
// On-disk layout under the data directory:
//   archive/segment-<n>.ndjson      {"seq":N,"event":{...}} per line
//   reference/<name>.asc            ESRI ASCII grid
//   reference/<name>.meta.json      flat string map

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_set>
#include <vector>

#include "geolambda/core_model.hpp"

namespace geolambda {

struct ArchiveEntry {
    Seq seq = 0;
    GeoEvent event;
    friend bool operator==(const ArchiveEntry&, const ArchiveEntry&) = default;
};

struct ArchiveOptions {
    /// Empty keeps the archive in memory only.
    std::filesystem::path dir;
    std::size_t segment_entries = 100'000;
    /// fdatasync after every append.
    bool sync = false;
    /// Test hook: returning true makes the next write fail as if the disk did.
    std::function<bool(const GeoEvent&)> fail_write;
};

class Archive {
public:
    /// Opens (and recovers) the archive. A torn trailing line in the newest
    /// segment is truncated away; any other corruption or a gap in the
    /// sequence numbers throws Error{StorageFailure}.
    explicit Archive(ArchiveOptions options = {});
    ~Archive();

    Archive(const Archive&) = delete;
    Archive& operator=(const Archive&) = delete;

    /// Durably appends and returns high_watermark()+1.
    /// Throws Error{DuplicateEvent} or Error{StorageFailure}; on either the
    /// archive is unchanged.
    Seq append(GeoEvent event);

    /// Entries with window.start <= ts < window.end, inside bbox when given
    /// and seq <= up_to when given, in seq order.
    std::vector<ArchiveEntry> scan(const TimeWindow& window, const std::optional<BoundingBox>& bbox = std::nullopt,
                                   std::optional<Seq> up_to = std::nullopt) const;

    /// Visits every entry with seq in (after, up_to] in seq order. The visitor
    /// runs under the reader lock and must not call back into the archive.
    void for_each(Seq after, Seq up_to, const std::function<void(const ArchiveEntry&)>& visit) const;

    Seq high_watermark() const;
    bool contains(const std::string& event_id) const;
    std::size_t segment_count() const;

private:
    void recover();
    void open_segment(std::size_t index);
    void write_line(const std::string& line);

    ArchiveOptions options_;
    mutable std::shared_mutex mutex_;
    std::vector<ArchiveEntry> entries_;  // entries_[i].seq == i + 1
    std::unordered_set<std::string> ids_;
    int fd_ = -1;
    std::size_t segment_index_ = 0;
    std::size_t segment_fill_ = 0;
};

struct ReferenceRaster {
    std::string name;
    RasterGrid raster;
    std::map<std::string, std::string> metadata;
};

/// Registry of read-only baseline rasters. Registered rasters are never
/// mutated; readers share one immutable copy.
class ReferenceStore {
public:
    /// Empty dir keeps the registry in memory only; otherwise existing
    /// reference/<name>.asc files are loaded.
    explicit ReferenceStore(std::filesystem::path dir = {});

    /// Throws Error{NameTaken}, or Error{InvalidArgument} for names that are
    /// not [A-Za-z0-9_.-]+.
    void register_reference(const std::string& name, RasterGrid raster,
                            std::map<std::string, std::string> metadata = {});

    /// Throws Error{NotFound}.
    std::shared_ptr<const ReferenceRaster> get_reference(const std::string& name) const;

    std::vector<std::string> names() const;

private:
    std::filesystem::path dir_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<const ReferenceRaster>> rasters_;
};

}  // namespace geolambda
