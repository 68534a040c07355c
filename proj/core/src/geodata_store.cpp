#include "geolambda/geodata_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>

#include <fmt/format.h>

#include "event_json.hpp"
#include "geolambda/formats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace geolambda {

namespace {

std::string segment_name(std::size_t index) { return fmt::format("segment-{}.ndjson", index); }

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::StorageFailure, "cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

[[noreturn]] void storage_error(const std::string& what) {
    throw Error(ErrorCode::StorageFailure, what + ": " + std::strerror(errno));
}

}  // namespace

Archive::Archive(ArchiveOptions options) : options_(std::move(options)) {
    if (options_.segment_entries == 0) options_.segment_entries = 1;
    if (!options_.dir.empty()) recover();
}

Archive::~Archive() {
    if (fd_ >= 0) ::close(fd_);
}

void Archive::recover() {
    const auto dir = options_.dir / "archive";
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::StorageFailure, "cannot create " + dir.string() + ": " + ec.message());

    static const std::regex pattern(R"(segment-(\d+)\.ndjson)");
    std::vector<std::size_t> segments;
    for (const auto& de : fs::directory_iterator(dir)) {
        std::smatch m;
        const auto name = de.path().filename().string();
        if (std::regex_match(name, m, pattern)) segments.push_back(std::stoull(m[1].str()));
    }
    std::sort(segments.begin(), segments.end());

    for (std::size_t i = 0; i < segments.size(); ++i) {
        const bool newest = i + 1 == segments.size();
        const auto path = dir / segment_name(segments[i]);
        const auto content = read_file(path);
        std::size_t pos = 0;
        std::size_t good_end = 0;
        std::size_t lines = 0;
        while (pos < content.size()) {
            const auto nl = content.find('\n', pos);
            const bool complete = nl != std::string::npos;
            const auto line = content.substr(pos, complete ? nl - pos : std::string::npos);
            try {
                if (!complete) throw std::runtime_error("torn line");
                const auto obj = json::parse(line);
                ArchiveEntry entry{obj.at("seq").get<Seq>(), detail::event_from_json(obj.at("event"))};
                if (entry.seq != entries_.size() + 1) {
                    throw Error(ErrorCode::StorageFailure,
                                fmt::format("{}: sequence gap, found {} after {}", path.string(), entry.seq,
                                            entries_.size()));
                }
                if (!ids_.insert(entry.event.event_id).second) {
                    throw Error(ErrorCode::StorageFailure,
                                fmt::format("{}: duplicate event_id {}", path.string(), entry.event.event_id));
                }
                entries_.push_back(std::move(entry));
            } catch (const Error&) {
                throw;
            } catch (const std::exception& e) {
                const bool last_line = !complete || nl + 1 == content.size();
                if (!(newest && last_line)) {
                    throw Error(ErrorCode::StorageFailure,
                                fmt::format("{}: corrupt entry at byte {}: {}", path.string(), pos, e.what()));
                }
                // Torn write from a crash mid-append.
                fs::resize_file(path, good_end);
                break;
            }
            ++lines;
            pos = nl + 1;
            good_end = pos;
        }
        if (newest) {
            segment_index_ = segments[i];
            segment_fill_ = lines;
        }
    }
    if (segments.empty()) segment_index_ = 1;
    open_segment(segment_index_);
}

void Archive::open_segment(std::size_t index) {
    if (fd_ >= 0) ::close(fd_);
    const auto path = options_.dir / "archive" / segment_name(index);
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) storage_error("cannot open " + path.string());
    segment_index_ = index;
}

void Archive::write_line(const std::string& line) {
    if (segment_fill_ >= options_.segment_entries) {
        open_segment(segment_index_ + 1);
        segment_fill_ = 0;
    }
    struct stat st {};
    if (::fstat(fd_, &st) != 0) storage_error("fstat failed");
    const off_t before = st.st_size;

    std::size_t written = 0;
    while (written < line.size()) {
        const auto n = ::write(fd_, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            const int saved = errno;
            [[maybe_unused]] auto rc = ::ftruncate(fd_, before);
            errno = saved;
            storage_error("append failed");
        }
        written += static_cast<std::size_t>(n);
    }
    if (options_.sync && ::fdatasync(fd_) != 0) {
        const int saved = errno;
        [[maybe_unused]] auto rc = ::ftruncate(fd_, before);
        errno = saved;
        storage_error("fdatasync failed");
    }
    ++segment_fill_;
}

Seq Archive::append(GeoEvent event) {
    std::unique_lock lock(mutex_);
    if (ids_.contains(event.event_id)) {
        throw Error(ErrorCode::DuplicateEvent, "duplicate event_id " + event.event_id, "event_id");
    }
    const Seq seq = entries_.size() + 1;
    if (options_.fail_write && options_.fail_write(event)) {
        throw Error(ErrorCode::StorageFailure, "injected storage failure");
    }
    if (fd_ >= 0) {
        json line = {{"seq", seq}, {"event", detail::event_to_json(event)}};
        write_line(line.dump() + "\n");
    }
    ids_.insert(event.event_id);
    entries_.push_back({seq, std::move(event)});
    return seq;
}

std::vector<ArchiveEntry> Archive::scan(const TimeWindow& window, const std::optional<BoundingBox>& bbox,
                                        std::optional<Seq> up_to) const {
    std::vector<ArchiveEntry> out;
    std::shared_lock lock(mutex_);
    const auto limit = std::min<std::size_t>(entries_.size(), up_to.value_or(entries_.size()));
    for (std::size_t i = 0; i < limit; ++i) {
        const auto& e = entries_[i].event;
        if (!window.contains(e.ts)) continue;
        if (bbox && !bbox->contains(e.lat, e.lon)) continue;
        out.push_back(entries_[i]);
    }
    return out;
}

void Archive::for_each(Seq after, Seq up_to, const std::function<void(const ArchiveEntry&)>& visit) const {
    std::shared_lock lock(mutex_);
    const auto limit = std::min<std::size_t>(entries_.size(), up_to);
    for (std::size_t i = after; i < limit; ++i) visit(entries_[i]);
}

Seq Archive::high_watermark() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

bool Archive::contains(const std::string& event_id) const {
    std::shared_lock lock(mutex_);
    return ids_.contains(event_id);
}

std::size_t Archive::segment_count() const {
    std::shared_lock lock(mutex_);
    return fd_ >= 0 ? segment_index_ : 0;
}

// ---------------------------------------------------------------------------

namespace {

bool valid_reference_name(const std::string& name) {
    static const std::regex pattern(R"([A-Za-z0-9_.\-]+)");
    return std::regex_match(name, pattern) && name != "." && name != "..";
}

}  // namespace

ReferenceStore::ReferenceStore(fs::path dir) : dir_(std::move(dir)) {
    if (dir_.empty()) return;
    const auto refdir = dir_ / "reference";
    std::error_code ec;
    fs::create_directories(refdir, ec);
    if (ec) throw Error(ErrorCode::StorageFailure, "cannot create " + refdir.string() + ": " + ec.message());
    for (const auto& de : fs::directory_iterator(refdir)) {
        if (de.path().extension() != ".asc") continue;
        const auto name = de.path().stem().string();
        std::ifstream in(de.path());
        auto raster = read_asc(in);
        std::map<std::string, std::string> meta;
        const auto meta_path = refdir / (name + ".meta.json");
        if (fs::exists(meta_path)) meta = json::parse(read_file(meta_path)).get<std::map<std::string, std::string>>();
        rasters_.emplace(name, std::make_shared<const ReferenceRaster>(ReferenceRaster{name, std::move(raster), meta}));
    }
}

void ReferenceStore::register_reference(const std::string& name, RasterGrid raster,
                                        std::map<std::string, std::string> metadata) {
    if (!valid_reference_name(name)) {
        throw Error(ErrorCode::InvalidArgument, "reference names must match [A-Za-z0-9_.-]+", "name");
    }
    std::unique_lock lock(mutex_);
    if (rasters_.contains(name)) throw Error(ErrorCode::NameTaken, "reference '" + name + "' already exists", "name");
    if (!dir_.empty()) {
        const auto refdir = dir_ / "reference";
        const auto tmp = refdir / (name + ".asc.tmp");
        {
            std::ofstream out(tmp);
            write_asc(out, raster);
            if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + tmp.string());
        }
        {
            std::ofstream out(refdir / (name + ".meta.json"));
            out << json(metadata).dump(2) << '\n';
        }
        fs::rename(tmp, refdir / (name + ".asc"));
    }
    rasters_.emplace(name,
                     std::make_shared<const ReferenceRaster>(ReferenceRaster{name, std::move(raster), std::move(metadata)}));
}

std::shared_ptr<const ReferenceRaster> ReferenceStore::get_reference(const std::string& name) const {
    std::shared_lock lock(mutex_);
    auto it = rasters_.find(name);
    if (it == rasters_.end()) throw Error(ErrorCode::NotFound, "no reference raster named '" + name + "'", "name");
    return it->second;
}

std::vector<std::string> ReferenceStore::names() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [k, v] : rasters_) out.push_back(k);
    return out;
}

}  // namespace geolambda
