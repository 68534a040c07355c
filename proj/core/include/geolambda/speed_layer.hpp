#pragma once

// The real-time layer: small incremental per-view aggregates covering only
// events newer than each view's batch watermark.
//
// Each view keeps a ring of per-event deltas so that raising its floor
// subtracts exactly the contributions being handed over to the batch layer.

#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geolambda/views.hpp"

namespace geolambda {

struct RealtimeView {
    std::string name;
    /// Sparse (bin, cell) counts; keys with zero count are absent.
    BinnedCounts cells;
    /// Sparse (venue, bin) counts; zero entries are absent.
    std::map<std::pair<std::string, std::int64_t>, std::int64_t> venue_bins;
    Seq floor = 0;    // exclusive lower bound
    Seq ceiling = 0;  // highest seq covered: applied, or compacted past

    std::int64_t total() const noexcept;
};

class SpeedLayer {
public:
    /// Registers a view whose realtime part starts empty at `floor`.
    /// Throws Error{NameTaken}.
    void register_view(const ViewDescriptor& descriptor, Seq floor);
    void unregister_view(const std::string& name);

    /// Applies one event to every view whose filters it passes and advances
    /// every ceiling to seq. Views whose floor is already at or above seq skip
    /// it. Throws Error{OutOfOrderSeq} (nothing applied) unless seq is above
    /// every seq applied so far.
    void apply(const GeoEvent& event, Seq seq);

    /// Consistent copy. With min_floor above the view's floor the copy has
    /// the contributions at or below min_floor removed, as if compacted.
    /// Throws Error{UnknownView}.
    RealtimeView snapshot(const std::string& name, std::optional<Seq> min_floor = std::nullopt) const;

    /// Drops contributions with seq <= new_floor. A floor above the ceiling
    /// empties the view. Throws Error{UnknownView} or Error{FloorRegression}.
    void compact(const std::string& name, Seq new_floor);

    /// Number of retained per-event deltas (the footprint).
    std::size_t retained(const std::string& name) const;

    /// Highest seq applied across the layer.
    Seq ceiling() const;

private:
    struct Delta {
        Seq seq;
        std::uint64_t key;
        std::int64_t bin;
        std::optional<std::string> venue;
    };
    struct State {
        ViewDescriptor descriptor;
        RealtimeView view;
        std::deque<Delta> deltas;
    };

    static void subtract(RealtimeView& view, const Delta& d);
    State& find(const std::string& name);
    const State& find(const std::string& name) const;

    mutable std::mutex mutex_;
    std::map<std::string, State> views_;
    Seq ceiling_ = 0;
};

}  // namespace geolambda
