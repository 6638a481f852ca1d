#include "kbd/value.hpp"

#include <cstdio>
#include <stdexcept>

namespace kbd {

namespace {

std::string exact(double d) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
}

std::string short_real(double d) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", d);
    return buf;
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

bool is_number(const Value& v) {
    return std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v);
}

double as_number(const Value& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    throw std::invalid_argument(std::string("expected a number, got ") + kind_name(v));
}

bool values_equal(const Value& a, const Value& b) {
    if (is_number(a) && is_number(b)) {
        if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b))
            return std::get<std::int64_t>(a) == std::get<std::int64_t>(b);
        return as_number(a) == as_number(b);
    }
    return a == b;
}

const char* kind_name(const Value& v) {
    return std::visit(overloaded{[](const Ref&) { return "individual"; },
                                 [](const std::string&) { return "string"; },
                                 [](std::int64_t) { return "int"; },
                                 [](double) { return "real"; },
                                 [](bool) { return "bool"; },
                                 [](const Vec2&) { return "point2"; },
                                 [](const BoundingBox&) { return "box"; }},
                      v);
}

std::string value_key(const Value& v) {
    return std::visit(
        overloaded{[](const Ref& r) { return "@" + r.name; },
                   [](const std::string& s) { return "s:" + s; },
                   [](std::int64_t i) { return "i:" + std::to_string(i); },
                   [](double d) { return "d:" + exact(d); },
                   [](bool b) { return std::string(b ? "b:1" : "b:0"); },
                   [](const Vec2& p) { return "p:" + exact(p.x()) + "," + exact(p.y()); },
                   [](const BoundingBox& b) {
                       std::string s = "x:";
                       for (const Vec3* vec : {&b.center, &b.u, &b.v, &b.w, &b.half})
                           for (int i = 0; i < 3; ++i) s += exact((*vec)(i)) + ",";
                       return s;
                   }},
        v);
}

std::string display(const Value& v) {
    return std::visit(overloaded{[](const Ref& r) { return r.name; },
                                 [](const std::string& s) { return s; },
                                 [](std::int64_t i) { return std::to_string(i); },
                                 [](double d) { return short_real(d); },
                                 [](bool b) { return std::string(b ? "true" : "false"); },
                                 [](const Vec2& p) { return "(" + short_real(p.x()) + ", " + short_real(p.y()) + ")"; },
                                 [](const BoundingBox& b) {
                                     return "box[c=(" + short_real(b.center.x()) + ", " + short_real(b.center.y()) +
                                            ", " + short_real(b.center.z()) + ") h=(" + short_real(b.half.x()) +
                                            ", " + short_real(b.half.y()) + ", " + short_real(b.half.z()) + ")]";
                                 }},
                      v);
}

}  // namespace kbd
