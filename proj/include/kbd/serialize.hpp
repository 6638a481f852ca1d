#pragma once

#include <string>

#include <json.hpp>

#include "kbd/value.hpp"

// JSON encodings shared by the KB, report and scene documents.
namespace kbd {

nlohmann::ordered_json vec_json(const Vec3& v);
Vec3 vec_from_json(const nlohmann::ordered_json& j, const std::string& where);

/// center, axes, half_extents, plus the 8 corners (ignored on read).
nlohmann::ordered_json box_json(const BoundingBox& b);
BoundingBox box_from_json(const nlohmann::ordered_json& j, const std::string& where);

/// Single-key object tagged ref/string/int/real/bool/point2/box.
nlohmann::ordered_json value_json(const Value& v);
Value value_from_json(const nlohmann::ordered_json& j, const std::string& where);

}  // namespace kbd
