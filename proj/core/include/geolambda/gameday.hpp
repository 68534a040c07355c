#pragma once

// Seeded synthetic "game day": a stadium, 95 venues within a 1.5-mile radius,
// Poisson check-in and tweet arrivals over the 24 hours around a kickoff, a
// nighttime baseline raster and the ground-truth manifest for all of it.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "geolambda/core_model.hpp"
#include "geolambda/views.hpp"

namespace geolambda {

inline constexpr double kEarthRadiusMeters = 6371008.8;
inline constexpr double kMileMeters = 1609.344;

/// Spherical-earth metres per degree of latitude.
double meters_per_degree_lat();
/// Square bbox circumscribing a circle of radius_m around (lat, lon).
BoundingBox circumscribing_bbox(double lat, double lon, double radius_m);

struct GameDayConfig {
    std::uint64_t seed = 7;
    double stadium_lat = 35.9550;
    double stadium_lon = -83.9250;
    double radius_m = 1.5 * kMileMeters;
    int venue_count = 95;
    /// 2013-09-07 23:00:00 UTC (19:00 local).
    EpochSeconds kickoff = 1378594800;
    EpochSeconds bin_width = 1800;
    /// Expected stadium check-ins in its busiest 30-minute bin.
    double stadium_peak_checkins = 400.0;
    /// Expected check-ins per venue in its busiest bin, before venue weighting.
    double venue_peak_checkins = 12.0;
    double game_hour_tweets = 6000.0;
    double other_tweets = 5000.0;
    double baseline_total = 40000.0;
    double game_hours_attendance = 102455.0;
    double non_game_hours_attendance = 60000.0;
};

struct GameDayVenue {
    std::string id;
    double lat = 0.0;
    double lon = 0.0;
    bool stadium = false;
    /// Expected check-ins per bin over the day window.
    std::vector<double> expected;
    /// Realized check-ins per bin.
    std::vector<std::int64_t> counts;
};

struct GameDay {
    GameDayConfig config;
    BoundingBox study_bbox;  // circumscribes the study circle
    GridSpec grid;           // study area snapped to whole cells around the stadium
    BoundingBox stadium_bbox;
    TimeWindow window;
    ScenarioSpec game_hours;
    ScenarioSpec non_game_hours;
    std::vector<GameDayVenue> venues;  // the stadium first
    std::vector<GeoEvent> events;      // in file order (by ts, then id)
    RasterGrid baseline;

    /// Views over the day: all events, each scenario, and each scenario x
    /// {tweet, checkin} (the four raw count rasters).
    std::vector<ViewDescriptor> descriptors() const;

    /// expected / max(expected) for a venue.
    std::vector<double> true_unit_curve(const std::string& venue_id) const;

    /// Ground truth as JSON text: venues with per-bin check-in counts, every
    /// tweet as [ts, lat, lon], per-scenario per-source totals, the grid, the
    /// stadium bbox and the scenario populations.
    std::string manifest_json() const;
};

GameDay generate_gameday(const GameDayConfig& config = {});

/// Writes events.ndjson, manifest.json, baseline.asc, baseline.meta.json and
/// views.json into dir.
void write_gameday(const GameDay& day, const std::filesystem::path& dir);

}  // namespace geolambda
