#include "geolambda/batch_layer.hpp"

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "descriptor_json.hpp"
#include "geolambda/speed_layer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace geolambda {

namespace {

EpochSeconds now_epoch() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void check_up_to(const Archive& archive, Seq up_to) {
    const auto hwm = archive.high_watermark();
    if (up_to > hwm) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("up_to {} exceeds high watermark {}", up_to, hwm),
                    "up_to");
    }
}

}  // namespace

BatchView build_batch_view(const Archive& archive, const ViewDescriptor& descriptor, Seq up_to) {
    check_up_to(archive, up_to);
    BatchView view{descriptor, up_to, RasterGrid(descriptor.spec), {}, now_epoch()};
    archive.for_each(0, up_to, [&](const ArchiveEntry& entry) {
        if (auto c = contribution(descriptor, entry.event)) ++view.binned[c->key];
    });
    view.counts = to_raster(descriptor.spec, view.binned);
    return view;
}

VenueView build_venue_view(const Archive& archive, const ViewDescriptor& descriptor, EpochSeconds bin_width,
                           Seq up_to) {
    if (bin_width <= 0 || descriptor.window.length() % bin_width != 0) {
        throw Error(ErrorCode::BinMismatch,
                    fmt::format("bin width {} does not tile a {} s window", bin_width, descriptor.window.length()),
                    "bin_width");
    }
    check_up_to(archive, up_to);
    auto d = descriptor;
    d.bin_width = bin_width;
    const auto nbins = static_cast<std::size_t>(d.bin_count());

    VenueView view{d.name, d.window.start(), bin_width, {}, up_to};
    for (const auto& v : d.venues) view.bins.emplace(v, std::vector<std::int64_t>(nbins, 0));
    archive.for_each(0, up_to, [&](const ArchiveEntry& entry) {
        auto c = contribution(d, entry.event);
        if (!c || !c->venue) return;
        auto [it, inserted] = view.bins.try_emplace(*c->venue, nbins, 0);
        ++it->second[static_cast<std::size_t>(c->bin)];
    });
    return view;
}

// ---------------------------------------------------------------------------

ViewRegistry::ViewRegistry(fs::path dir) : dir_(std::move(dir)) {
    if (dir_.empty()) return;
    std::error_code ec;
    fs::create_directories(dir_, ec);
    const auto path = dir_ / "views.json";
    if (!fs::exists(path)) return;
    std::ifstream in(path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::StorageFailure, "cannot parse " + path.string() + ": " + e.what());
    }
    for (const auto& obj : doc.at("views")) {
        auto d = detail::descriptor_from_json(obj);
        validate(d);
        views_.emplace(d.name, std::move(d));
    }
}

void ViewRegistry::persist() const {
    if (dir_.empty()) return;
    json doc = {{"views", json::array()}};
    for (const auto& [name, d] : views_) doc["views"].push_back(detail::descriptor_to_json(d));
    const auto tmp = dir_ / "views.json.tmp";
    {
        std::ofstream out(tmp);
        out << doc.dump(2) << '\n';
        if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + tmp.string());
    }
    fs::rename(tmp, dir_ / "views.json");
}

void ViewRegistry::add(const ViewDescriptor& descriptor) {
    validate(descriptor);
    std::unique_lock lock(mutex_);
    if (views_.contains(descriptor.name)) {
        throw Error(ErrorCode::NameTaken, "view '" + descriptor.name + "' already exists", "name");
    }
    views_.emplace(descriptor.name, descriptor);
    try {
        persist();
    } catch (...) {
        views_.erase(descriptor.name);
        throw;
    }
}

void ViewRegistry::remove(const std::string& name) {
    std::unique_lock lock(mutex_);
    if (views_.erase(name)) persist();
}

ViewDescriptor ViewRegistry::get(const std::string& name) const {
    std::shared_lock lock(mutex_);
    auto it = views_.find(name);
    if (it == views_.end()) throw Error(ErrorCode::UnknownView, "unknown view '" + name + "'", "view");
    return it->second;
}

bool ViewRegistry::contains(const std::string& name) const {
    std::shared_lock lock(mutex_);
    return views_.contains(name);
}

std::vector<ViewDescriptor> ViewRegistry::list() const {
    std::shared_lock lock(mutex_);
    std::vector<ViewDescriptor> out;
    for (const auto& [name, d] : views_) out.push_back(d);
    return out;
}

// ---------------------------------------------------------------------------

void PublishedViews::publish(PublishedView view) {
    std::lock_guard lock(mutex_);
    auto& slot = views_[view.batch->descriptor.name];
    if (slot.batch && slot.batch->watermark > view.batch->watermark) return;
    slot = std::move(view);
}

void PublishedViews::erase(const std::string& name) {
    std::lock_guard lock(mutex_);
    views_.erase(name);
}

PublishedView PublishedViews::get(const std::string& name) const {
    std::lock_guard lock(mutex_);
    auto it = views_.find(name);
    if (it == views_.end()) throw Error(ErrorCode::UnknownView, "no published view '" + name + "'", "view");
    return it->second;
}

bool PublishedViews::contains(const std::string& name) const {
    std::lock_guard lock(mutex_);
    return views_.contains(name);
}

// ---------------------------------------------------------------------------

BatchLayer::BatchLayer(const Archive& archive, const ViewRegistry& registry, PublishedViews& published,
                       SpeedLayer& speed)
    : archive_(archive), registry_(registry), published_(published), speed_(speed) {}

PublishedView BatchLayer::recompute(const std::string& name) {
    const auto descriptor = registry_.get(name);
    const auto watermark = archive_.high_watermark();
    PublishedView view{
        std::make_shared<const BatchView>(build_batch_view(archive_, descriptor, watermark)),
        std::make_shared<const VenueView>(build_venue_view(archive_, descriptor, descriptor.bin_width, watermark)),
    };
    if (!registry_.contains(name)) throw Error(ErrorCode::UnknownView, "view '" + name + "' was removed", "view");

    // Publish first, then compact: an event is always covered by at least one
    // layer, and the serving merge reads realtime strictly above the
    // published watermark.
    published_.publish(view);
    const auto current = published_.get(name);
    try {
        speed_.compact(name, current.watermark());
    } catch (const Error& e) {
        if (e.code() != ErrorCode::FloorRegression) throw;
    }
    return current;
}

std::size_t BatchLayer::recompute_all() {
    std::size_t published = 0;
    for (const auto& d : registry_.list()) {
        try {
            recompute(d.name);
            ++published;
        } catch (const std::exception& e) {
            spdlog::warn("batch rebuild of view '{}' failed: {}", d.name, e.what());
        }
    }
    ++cycles_;
    return published;
}

void BatchLayer::run_recompute_loop(std::chrono::milliseconds interval, std::stop_token stop) {
    std::mutex m;
    std::condition_variable_any cv;
    while (!stop.stop_requested()) {
        recompute_all();
        std::unique_lock lock(m);
        cv.wait_for(lock, stop, interval, [] { return false; });
    }
}

}  // namespace geolambda
