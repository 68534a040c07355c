#pragma once

#include <json.hpp>

#include "geolambda/views.hpp"

namespace geolambda::detail {

nlohmann::json descriptor_to_json(const ViewDescriptor& d);

/// Throws Error{InvalidArgument} naming the offending field.
ViewDescriptor descriptor_from_json(const nlohmann::json& obj);

nlohmann::json bbox_to_json(const BoundingBox& b);
BoundingBox bbox_from_json(const nlohmann::json& obj);

}  // namespace geolambda::detail
