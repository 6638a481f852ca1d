#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "kbd/box.hpp"

namespace kbd {

/// Reference to a KB individual.
struct Ref {
    std::string name;
    bool operator==(const Ref&) const = default;
};

/// Object of an assertion or a bound variable. Strings double as the
/// case-sensitive enum tags used in rules (Vertical, Big, Semantic, ...).
using Value = std::variant<Ref, std::string, std::int64_t, double, bool, Vec2, BoundingBox>;

bool is_number(const Value& v);
/// Numeric value of an int or real; throws std::invalid_argument otherwise.
double as_number(const Value& v);

/// Structural equality, except that ints and reals compare numerically.
bool values_equal(const Value& a, const Value& b);

/// Canonical text of a value, distinct per kind and exact for reals. Used as
/// a set/memo key.
std::string value_key(const Value& v);

/// Human-readable rendering for logs and rule listings.
std::string display(const Value& v);

const char* kind_name(const Value& v);

}  // namespace kbd
