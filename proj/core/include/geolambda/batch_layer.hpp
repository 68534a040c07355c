#pragma once

// Batch views: full recomputation over the archive prefix up to a watermark,
// published by atomic pointer swap.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <stop_token>
#include <string>
#include <vector>

#include "geolambda/geodata_store.hpp"
#include "geolambda/views.hpp"

namespace geolambda {

class SpeedLayer;

struct BatchView {
    ViewDescriptor descriptor;
    Seq watermark = 0;
    RasterGrid counts;
    BinnedCounts binned;
    EpochSeconds built_at = 0;
};

struct VenueView {
    std::string name;
    EpochSeconds window_start = 0;
    EpochSeconds bin_width = kDefaultBinWidth;
    VenueBins bins;
    Seq watermark = 0;
};

/// counts = rasterize of the archive prefix <= up_to passing the descriptor's
/// filters. Pure in the archive prefix. Throws Error{InvalidArgument} if
/// up_to exceeds the high watermark.
BatchView build_batch_view(const Archive& archive, const ViewDescriptor& descriptor, Seq up_to);

/// Per-venue counts in bins of bin_width over the descriptor window; events
/// without a venue_id are skipped and descriptor venues always appear.
/// Throws Error{BinMismatch} unless bin_width tiles the window.
VenueView build_venue_view(const Archive& archive, const ViewDescriptor& descriptor, EpochSeconds bin_width,
                           Seq up_to);

/// Descriptor registry persisted as views.json in the data directory.
class ViewRegistry {
public:
    explicit ViewRegistry(std::filesystem::path dir = {});

    /// Throws Error{NameTaken} plus the validate() errors.
    void add(const ViewDescriptor& descriptor);
    void remove(const std::string& name);
    /// Throws Error{UnknownView}.
    ViewDescriptor get(const std::string& name) const;
    bool contains(const std::string& name) const;
    std::vector<ViewDescriptor> list() const;

private:
    void persist() const;

    std::filesystem::path dir_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, ViewDescriptor> views_;
};

/// The batch side of the serving registry: the latest published batch and
/// venue view per name, swapped atomically.
struct PublishedView {
    std::shared_ptr<const BatchView> batch;
    std::shared_ptr<const VenueView> venues;
    Seq watermark() const noexcept { return batch ? batch->watermark : 0; }
};

class PublishedViews {
public:
    /// Watermarks never move backwards; an older publication is ignored.
    void publish(PublishedView view);
    void erase(const std::string& name);
    /// Throws Error{UnknownView} if nothing has been published under name.
    PublishedView get(const std::string& name) const;
    bool contains(const std::string& name) const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, PublishedView> views_;
};

/// Builds and publishes every registered view, then compacts the speed layer
/// up to the published watermark.
class BatchLayer {
public:
    BatchLayer(const Archive& archive, const ViewRegistry& registry, PublishedViews& published, SpeedLayer& speed);

    /// Rebuilds one view at the current high watermark.
    /// Throws Error{UnknownView} if it was unregistered meanwhile.
    PublishedView recompute(const std::string& name);
    /// Rebuilds everything; failures are logged and leave the previous
    /// publication in place. Returns the number of views published.
    std::size_t recompute_all();

    /// Calls recompute_all() every interval until stop is requested.
    void run_recompute_loop(std::chrono::milliseconds interval, std::stop_token stop);

    std::uint64_t cycles() const noexcept { return cycles_.load(); }

private:
    const Archive& archive_;
    const ViewRegistry& registry_;
    PublishedViews& published_;
    SpeedLayer& speed_;
    std::atomic<std::uint64_t> cycles_{0};
};

}  // namespace geolambda
