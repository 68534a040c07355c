#include "geolambda/gameday.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "descriptor_json.hpp"
#include "geolambda/formats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace geolambda {

double meters_per_degree_lat() { return std::numbers::pi * kEarthRadiusMeters / 180.0; }

BoundingBox circumscribing_bbox(double lat, double lon, double radius_m) {
    const double dlat = radius_m / meters_per_degree_lat();
    const double dlon = radius_m / (meters_per_degree_lat() * std::cos(lat * std::numbers::pi / 180.0));
    return BoundingBox::make(lat - dlat, lon - dlon, lat + dlat, lon + dlon);
}

namespace {

constexpr double kHour = 3600.0;

// Hours from kickoff to the centre of bin i.
double bin_hour(const GameDay& g, std::size_t i) {
    const double centre = static_cast<double>(g.window.start()) +
                          (static_cast<double>(i) + 0.5) * static_cast<double>(g.config.bin_width);
    return (centre - static_cast<double>(g.config.kickoff)) / kHour;
}

// Relative check-in rate at bars and restaurants: tailgating build-up peaking
// before kickoff, a lull while the game is on, then the evening crowd.
double venue_profile(double h) {
    if (h < -9.0) return 0.15;
    if (h < -1.0) return 0.15 + 0.85 * (h + 9.0) / 8.0;
    if (h < 3.5) return 0.35;
    if (h < 6.0) return 0.8;
    return std::max(0.1, 0.8 - 0.1 * (h - 6.0));
}

// Relative check-in rate at the stadium, peaking mid-game.
double stadium_profile(double h) {
    if (h < -4.0) return 0.02;
    if (h < -0.5) return 0.02 + 0.5 * (h + 4.0) / 3.5;
    if (h < 3.5) return 1.0 - 0.3 * std::abs(h - 1.25) / 2.0;
    if (h < 5.0) return 0.2;
    return 0.02;
}

struct Offset {
    double lat;
    double lon;
};

// Metres to degrees around a reference latitude.
Offset to_degrees(double north_m, double east_m, double ref_lat) {
    const double m = meters_per_degree_lat();
    return {north_m / m, east_m / (m * std::cos(ref_lat * std::numbers::pi / 180.0))};
}

std::vector<double> integerize(const std::vector<double>& weights, double total) {
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    const auto target = static_cast<std::int64_t>(std::llround(total));
    std::vector<double> out(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double share = weights[i] / sum * static_cast<double>(target);
        const double fl = std::floor(share);
        out[i] = fl;
        assigned += static_cast<std::int64_t>(fl);
        remainders.emplace_back(share - fl, i);
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::int64_t k = 0; k < target - assigned; ++k) out[remainders[static_cast<std::size_t>(k)].second] += 1.0;
    return out;
}

}  // namespace

GameDay generate_gameday(const GameDayConfig& config) {
    if (config.venue_count < 1) throw Error(ErrorCode::InvalidArgument, "venue_count must be >= 1", "venue_count");
    if (config.bin_width <= 0 || (24 * 3600) % config.bin_width != 0) {
        throw Error(ErrorCode::BinMismatch, "bin width must tile 24 hours", "bin_width");
    }
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    const auto study = circumscribing_bbox(config.stadium_lat, config.stadium_lon, config.radius_m);
    const auto dims = grid_dims(study, kThreeArcSeconds);
    const double cs = kThreeArcSeconds;
    const double north = config.stadium_lat + static_cast<double>(dims.nrows) * cs / 2.0;
    const double west = config.stadium_lon - static_cast<double>(dims.ncols) * cs / 2.0;
    const auto grid = GridSpec::make(
        BoundingBox::make(north - static_cast<double>(dims.nrows) * cs, west, north,
                          west + static_cast<double>(dims.ncols) * cs),
        cs);

    const auto stadium_half = to_degrees(280.0, 280.0, config.stadium_lat);
    const auto stadium_bbox =
        BoundingBox::make(config.stadium_lat - stadium_half.lat, config.stadium_lon - stadium_half.lon,
                          config.stadium_lat + stadium_half.lat, config.stadium_lon + stadium_half.lon);

    const auto window = TimeWindow::make(config.kickoff - 12 * 3600, config.kickoff + 12 * 3600);
    const ScenarioSpec game{"game-hours", TimeWindow::make(config.kickoff - 1800, config.kickoff + 3 * 3600 + 1800)};
    const ScenarioSpec non_game{"non-game-hours", TimeWindow::make(window.start(), config.kickoff - 1800)};

    GameDay g{config, study, grid, stadium_bbox, window, game, non_game, {}, {}, RasterGrid(grid)};
    const auto nbins = static_cast<std::size_t>(window.length() / config.bin_width);

    // Venues: the stadium, then bars and restaurants spread over the study
    // circle outside the stadium footprint.
    std::vector<double> venue_weight;
    g.venues.push_back({"stadium", config.stadium_lat, config.stadium_lon, true, {}, {}});
    venue_weight.push_back(0.0);
    for (int v = 0; v < config.venue_count; ++v) {
        double r = 0.0, theta = 0.0;
        do {
            r = 0.95 * config.radius_m * std::sqrt(unit(rng));
            theta = 2.0 * std::numbers::pi * unit(rng);
        } while (r < 400.0);
        const auto off = to_degrees(r * std::sin(theta), r * std::cos(theta), config.stadium_lat);
        g.venues.push_back({fmt::format("venue-{:02d}", v + 1), config.stadium_lat + off.lat,
                            config.stadium_lon + off.lon, false, {}, {}});
        venue_weight.push_back(std::exp(0.5 * normal(rng)));
    }

    for (std::size_t v = 0; v < g.venues.size(); ++v) {
        auto& venue = g.venues[v];
        venue.expected.resize(nbins);
        for (std::size_t b = 0; b < nbins; ++b) {
            const double h = bin_hour(g, b);
            venue.expected[b] = venue.stadium ? config.stadium_peak_checkins * stadium_profile(h)
                                              : config.venue_peak_checkins * venue_weight[v] * venue_profile(h);
        }
    }

    auto bin_ts = [&](std::size_t b) {
        std::uniform_int_distribution<EpochSeconds> in_bin(0, config.bin_width - 1);
        return window.start() + static_cast<EpochSeconds>(b) * config.bin_width + in_bin(rng);
    };
    auto jitter = [&](double lat, double lon, double sigma_m) {
        const auto off = to_degrees(sigma_m * normal(rng), sigma_m * normal(rng), config.stadium_lat);
        return std::pair{lat + off.lat, lon + off.lon};
    };
    std::discrete_distribution<std::size_t> pick_venue(venue_weight.begin(), venue_weight.end());

    std::uint64_t checkin_n = 0;
    for (auto& venue : g.venues) {
        venue.counts.resize(nbins);
        for (std::size_t b = 0; b < nbins; ++b) {
            std::poisson_distribution<std::int64_t> arrivals(venue.expected[b]);
            const auto n = venue.expected[b] > 0.0 ? arrivals(rng) : 0;
            venue.counts[b] = n;
            for (std::int64_t k = 0; k < n; ++k) {
                GeoEvent e;
                e.event_id = fmt::format("gd{}-c-{:06d}", config.seed, ++checkin_n);
                e.source = Source::checkin;
                e.ts = bin_ts(b);
                e.lat = venue.lat;
                e.lon = venue.lon;
                e.venue_id = venue.id;
                g.events.push_back(std::move(e));
            }
        }
    }

    // Tweets: stadium-centred during the game, around venues or anywhere in
    // the study circle otherwise.
    const auto game_bins = static_cast<double>(game.window.length() / config.bin_width);
    double other_weight = 0.0;
    for (std::size_t b = 0; b < nbins; ++b) {
        const auto start = window.start() + static_cast<EpochSeconds>(b) * config.bin_width;
        if (!game.window.contains(start)) other_weight += venue_profile(bin_hour(g, b));
    }
    std::uint64_t tweet_n = 0;
    for (std::size_t b = 0; b < nbins; ++b) {
        const auto start = window.start() + static_cast<EpochSeconds>(b) * config.bin_width;
        const bool in_game = game.window.contains(start);
        const double lambda = in_game ? config.game_hour_tweets / game_bins
                                      : config.other_tweets * venue_profile(bin_hour(g, b)) / other_weight;
        std::poisson_distribution<std::int64_t> arrivals(lambda);
        const auto n = arrivals(rng);
        for (std::int64_t k = 0; k < n; ++k) {
            std::pair<double, double> where;
            do {  // jitter near the rim can leave the grid; draw again
                const double u = unit(rng);
                if (in_game && u < 0.85) {
                    where = jitter(config.stadium_lat, config.stadium_lon, 70.0);
                } else if (u < (in_game ? 1.0 : 0.7)) {
                    const auto& venue = g.venues[pick_venue(rng)];
                    where = jitter(venue.lat, venue.lon, 50.0);
                } else {
                    const double r = config.radius_m * std::sqrt(unit(rng));
                    const double theta = 2.0 * std::numbers::pi * unit(rng);
                    const auto off = to_degrees(r * std::sin(theta), r * std::cos(theta), config.stadium_lat);
                    where = {config.stadium_lat + off.lat, config.stadium_lon + off.lon};
                }
            } while (!grid.bbox().contains(where.first, where.second));
            GeoEvent e;
            e.event_id = fmt::format("gd{}-t-{:06d}", config.seed, ++tweet_n);
            e.source = Source::tweet;
            e.ts = bin_ts(b);
            e.lat = where.first;
            e.lon = where.second;
            g.events.push_back(std::move(e));
        }
    }
    std::sort(g.events.begin(), g.events.end(), [](const GeoEvent& a, const GeoEvent& b) {
        if (a.ts != b.ts) return a.ts < b.ts;
        return a.event_id < b.event_id;
    });

    // Nighttime baseline: a few residential neighbourhoods over a thin
    // uniform floor, almost nobody living inside the stadium.
    std::vector<double> weights(grid.cell_count(), 1.0);
    struct Hood {
        double row, col, sigma, peak;
    };
    std::vector<Hood> hoods;
    for (int k = 0; k < 5; ++k) {
        hoods.push_back({unit(rng) * static_cast<double>(grid.nrows()), unit(rng) * static_cast<double>(grid.ncols()),
                         4.0 + 6.0 * unit(rng), 20.0 + 40.0 * unit(rng)});
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const auto cell = grid.cell_at(i);
        for (const auto& hd : hoods) {
            const double dr = static_cast<double>(cell.row) - hd.row;
            const double dc = static_cast<double>(cell.col) - hd.col;
            weights[i] += hd.peak * std::exp(-(dr * dr + dc * dc) / (2.0 * hd.sigma * hd.sigma));
        }
        const auto [lat, lon] = grid.center(cell);
        if (stadium_bbox.contains(lat, lon)) weights[i] *= 0.02;
    }
    g.baseline = RasterGrid(grid, integerize(weights, config.baseline_total));
    return g;
}

std::vector<ViewDescriptor> GameDay::descriptors() const {
    std::vector<std::string> venue_ids;
    for (const auto& v : venues) venue_ids.push_back(v.id);
    std::vector<ViewDescriptor> out;
    out.push_back({"gameday", grid, window, std::nullopt, std::nullopt, config.bin_width, venue_ids});
    for (const auto* s : {&game_hours, &non_game_hours}) {
        std::string base = s->name;
        std::replace(base.begin(), base.end(), '-', '_');
        out.push_back({base, grid, window, std::nullopt, *s, config.bin_width, venue_ids});
        out.push_back({base + "_tweet", grid, window, Source::tweet, *s, config.bin_width, {}});
        out.push_back({base + "_checkin", grid, window, Source::checkin, *s, config.bin_width, venue_ids});
    }
    return out;
}

std::vector<double> GameDay::true_unit_curve(const std::string& venue_id) const {
    for (const auto& v : venues) {
        if (v.id != venue_id) continue;
        const double peak = *std::max_element(v.expected.begin(), v.expected.end());
        std::vector<double> out;
        for (double x : v.expected) out.push_back(x / peak);
        return out;
    }
    throw Error(ErrorCode::NotFound, "no venue '" + venue_id + "'", "venue");
}

std::string GameDay::manifest_json() const {
    json venues_json = json::array();
    for (const auto& v : venues) {
        venues_json.push_back({{"id", v.id},
                               {"lat", v.lat},
                               {"lon", v.lon},
                               {"stadium", v.stadium},
                               {"checkins", v.counts},
                               {"expected", v.expected}});
    }
    json tweets = json::array();
    std::map<std::string, std::map<std::string, std::int64_t>> phase;
    for (const auto& e : events) {
        if (e.source == Source::tweet) tweets.push_back({e.ts, e.lat, e.lon});
        const char* name = game_hours.window.contains(e.ts)       ? "game-hours"
                           : non_game_hours.window.contains(e.ts) ? "non-game-hours"
                                                                  : "other";
        ++phase[name][std::string(to_string(e.source))];
    }
    json doc = {
        {"seed", config.seed},
        {"kickoff", config.kickoff},
        {"bin_width", config.bin_width},
        {"window", {{"start", window.start()}, {"end", window.end()}}},
        {"stadium", {{"lat", config.stadium_lat}, {"lon", config.stadium_lon}}},
        {"stadium_bbox", detail::bbox_to_json(stadium_bbox)},
        {"study_bbox", detail::bbox_to_json(study_bbox)},
        {"grid",
         {{"bbox", detail::bbox_to_json(grid.bbox())},
          {"cellsize", grid.cellsize()},
          {"ncols", grid.ncols()},
          {"nrows", grid.nrows()}}},
        {"scenarios",
         {{"game-hours", {{"start", game_hours.window.start()}, {"end", game_hours.window.end()}}},
          {"non-game-hours", {{"start", non_game_hours.window.start()}, {"end", non_game_hours.window.end()}}}}},
        {"attendance",
         {{"game-hours", config.game_hours_attendance}, {"non-game-hours", config.non_game_hours_attendance}}},
        {"baseline_total", baseline.sum()},
        {"event_count", events.size()},
        {"phase_totals", phase},
        {"venues", venues_json},
        {"tweets", tweets},
    };
    return doc.dump(1);
}

void write_gameday(const GameDay& day, const fs::path& dir) {
    fs::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + (dir / name).string());
        return out;
    };
    {
        auto out = open("events.ndjson");
        for (const auto& e : day.events) out << to_ndjson(e) << '\n';
    }
    {
        auto out = open("manifest.json");
        out << day.manifest_json() << '\n';
    }
    {
        auto out = open("baseline.asc");
        write_asc(out, day.baseline);
    }
    {
        auto out = open("baseline.meta.json");
        out << json({{"description", "synthetic nighttime baseline population"},
                     {"vintage", "synthetic"},
                     {"seed", std::to_string(day.config.seed)}})
                   .dump(2)
            << '\n';
    }
    {
        json doc = {{"views", json::array()}};
        for (const auto& d : day.descriptors()) doc["views"].push_back(detail::descriptor_to_json(d));
        auto out = open("views.json");
        out << doc.dump(2) << '\n';
    }
}

}  // namespace geolambda
