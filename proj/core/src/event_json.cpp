#include "event_json.hpp"

#include <cmath>

namespace geolambda::detail {

using nlohmann::json;

json event_to_json(const GeoEvent& event) {
    json obj = {
        {"event_id", event.event_id},
        {"source", std::string(to_string(event.source))},
        {"ts", event.ts},
        {"lat", event.lat},
        {"lon", event.lon},
    };
    if (event.venue_id) obj["venue_id"] = *event.venue_id;
    if (!event.attributes.empty()) obj["attributes"] = event.attributes;
    return obj;
}

namespace {

[[noreturn]] void reject(const std::string& field, const std::string& why) {
    throw Error(ErrorCode::ValidationError, field + ": " + why, field);
}

const json& required(const json& obj, const char* field) {
    auto it = obj.find(field);
    if (it == obj.end() || it->is_null()) reject(field, "missing field");
    return *it;
}

double coordinate(const json& obj, const char* field, double bound) {
    const auto& v = required(obj, field);
    if (!v.is_number()) reject(field, "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d) || d < -bound || d > bound) reject(field, "out of range");
    return d;
}

}  // namespace

GeoEvent event_from_json(const json& obj) {
    if (!obj.is_object()) reject("record", "must be a JSON object");

    GeoEvent event;

    const auto& id = required(obj, "event_id");
    if (!id.is_string() || id.get_ref<const std::string&>().empty()) reject("event_id", "must be a non-empty string");
    event.event_id = id.get<std::string>();

    const auto& src = required(obj, "source");
    if (!src.is_string()) reject("source", "must be a string");
    const auto parsed = parse_source(src.get_ref<const std::string&>());
    if (!parsed) reject("source", "unknown source '" + src.get<std::string>() + "'");
    event.source = *parsed;

    const auto& ts = required(obj, "ts");
    if (ts.is_number_integer()) {
        event.ts = ts.get<std::int64_t>();
    } else if (ts.is_number_float() && std::trunc(ts.get<double>()) == ts.get<double>() &&
               std::abs(ts.get<double>()) < 9.0e15) {
        event.ts = static_cast<std::int64_t>(ts.get<double>());
    } else {
        reject("ts", "must be integer epoch seconds");
    }
    if (event.ts <= 0) reject("ts", "must be positive");

    event.lat = coordinate(obj, "lat", 90.0);
    event.lon = coordinate(obj, "lon", 180.0);

    if (auto it = obj.find("venue_id"); it != obj.end() && !it->is_null()) {
        if (!it->is_string()) reject("venue_id", "must be a string");
        event.venue_id = it->get<std::string>();
    }
    if (auto it = obj.find("attributes"); it != obj.end() && !it->is_null()) {
        if (!it->is_object()) reject("attributes", "must be an object of strings");
        for (const auto& [k, v] : it->items()) {
            if (!v.is_string()) reject("attributes", "value of '" + k + "' must be a string");
            event.attributes.emplace(k, v.get<std::string>());
        }
    }
    return event;
}

}  // namespace geolambda::detail
