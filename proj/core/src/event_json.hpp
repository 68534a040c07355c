#pragma once

// nlohmann/json codec for GeoEvent, shared by ingestion, the archive and the
// exporters. Not installed.

#include <json.hpp>

#include "geolambda/core_model.hpp"

namespace geolambda::detail {

nlohmann::json event_to_json(const GeoEvent& event);

/// Validates a parsed RawRecord object. Throws Error{ValidationError} naming
/// the offending field.
GeoEvent event_from_json(const nlohmann::json& obj);

}  // namespace geolambda::detail
