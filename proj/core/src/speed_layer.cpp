#include "geolambda/speed_layer.hpp"

#include <fmt/format.h>

namespace geolambda {

std::int64_t RealtimeView::total() const noexcept {
    std::int64_t t = 0;
    for (const auto& [k, c] : cells) t += c;
    return t;
}

void SpeedLayer::register_view(const ViewDescriptor& descriptor, Seq floor) {
    std::lock_guard lock(mutex_);
    if (views_.contains(descriptor.name)) {
        throw Error(ErrorCode::NameTaken, "realtime view '" + descriptor.name + "' already registered", "name");
    }
    State st{descriptor, {}, {}};
    st.view.name = descriptor.name;
    st.view.floor = floor;
    st.view.ceiling = std::max(floor, ceiling_);
    views_.emplace(descriptor.name, std::move(st));
}

void SpeedLayer::unregister_view(const std::string& name) {
    std::lock_guard lock(mutex_);
    views_.erase(name);
}

SpeedLayer::State& SpeedLayer::find(const std::string& name) {
    auto it = views_.find(name);
    if (it == views_.end()) throw Error(ErrorCode::UnknownView, "unknown view '" + name + "'", "view");
    return it->second;
}

const SpeedLayer::State& SpeedLayer::find(const std::string& name) const {
    auto it = views_.find(name);
    if (it == views_.end()) throw Error(ErrorCode::UnknownView, "unknown view '" + name + "'", "view");
    return it->second;
}

void SpeedLayer::apply(const GeoEvent& event, Seq seq) {
    std::lock_guard lock(mutex_);
    if (seq <= ceiling_) {
        throw Error(ErrorCode::OutOfOrderSeq, fmt::format("seq {} is not above ceiling {}", seq, ceiling_), "seq");
    }
    for (auto& [name, st] : views_) {
        // A batch built from the archive may already cover seq: the archive
        // append precedes this call, so compaction can overtake it.
        if (seq > st.view.floor) {
            if (auto c = contribution(st.descriptor, event)) {
                ++st.view.cells[c->key];
                if (c->venue) ++st.view.venue_bins[{*c->venue, c->bin}];
                st.deltas.push_back({seq, c->key, c->bin, std::move(c->venue)});
            }
        }
        st.view.ceiling = std::max(st.view.ceiling, seq);
    }
    ceiling_ = seq;
}

void SpeedLayer::subtract(RealtimeView& view, const Delta& d) {
    if (auto it = view.cells.find(d.key); it != view.cells.end() && --it->second == 0) view.cells.erase(it);
    if (d.venue) {
        auto it = view.venue_bins.find({*d.venue, d.bin});
        if (it != view.venue_bins.end() && --it->second == 0) view.venue_bins.erase(it);
    }
}

RealtimeView SpeedLayer::snapshot(const std::string& name, std::optional<Seq> min_floor) const {
    std::lock_guard lock(mutex_);
    const auto& st = find(name);
    RealtimeView out = st.view;
    if (min_floor && *min_floor > out.floor) {
        for (const auto& d : st.deltas) {
            if (d.seq > *min_floor) break;
            subtract(out, d);
        }
        out.floor = *min_floor;
        out.ceiling = std::max(out.ceiling, out.floor);
    }
    return out;
}

void SpeedLayer::compact(const std::string& name, Seq new_floor) {
    std::lock_guard lock(mutex_);
    auto& st = find(name);
    if (new_floor < st.view.floor) {
        throw Error(ErrorCode::FloorRegression,
                    fmt::format("cannot lower floor of '{}' from {} to {}", name, st.view.floor, new_floor), "floor");
    }
    while (!st.deltas.empty() && st.deltas.front().seq <= new_floor) {
        subtract(st.view, st.deltas.front());
        st.deltas.pop_front();
    }
    st.view.floor = new_floor;
    st.view.ceiling = std::max(st.view.ceiling, new_floor);
}

std::size_t SpeedLayer::retained(const std::string& name) const {
    std::lock_guard lock(mutex_);
    return find(name).deltas.size();
}

Seq SpeedLayer::ceiling() const {
    std::lock_guard lock(mutex_);
    return ceiling_;
}

}  // namespace geolambda
