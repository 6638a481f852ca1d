#include <algorithm>
#include <array>
#include <cmath>

#include "kbd/geometry.hpp"

namespace kbd {

std::string to_string(Orientation o) {
    switch (o) {
        case Orientation::Vertical: return "Vertical";
        case Orientation::Horizontal: return "Horizontal";
        case Orientation::Oblique: return "Oblique";
    }
    return "Oblique";
}

std::string to_string(SizeClass s) { return s == SizeClass::Big ? "Big" : "Small"; }

Descriptors box_descriptors(const BoundingBox& box, const PlaneFit* source_fit, double big_size_min) {
    Descriptors d;
    const double hu = box.half.x(), hv = box.half.y(), hw = box.half.z();
    const double h_min = std::min(hu, hv);
    if (hw > h_min)
        d.orientation = Orientation::Vertical;
    else if (hw < h_min)
        d.orientation = Orientation::Horizontal;
    else
        d.orientation = Orientation::Oblique;
    d.height = 2.0 * hw;
    d.size = 2.0 * std::max(hu, hv) >= big_size_min ? SizeClass::Big : SizeClass::Small;
    d.planarity_rms = source_fit ? source_fit->rms_residual : 0.0;
    return d;
}

Vec3 dominant_normal(const BoundingBox& box) {
    int k = 0;
    for (int i = 1; i < 3; ++i)
        if (box.half(i) < box.half(k)) k = i;
    return box.axis(k);
}

double normal_angle_deg(const BoundingBox& a, const BoundingBox& b) {
    const Vec3 na = dominant_normal(a), nb = dominant_normal(b);
    // atan2 stays accurate near 0 where acos loses half the digits
    return rad_to_deg(std::atan2(na.cross(nb).norm(), std::abs(na.dot(nb))));
}

bool is_perpendicular(const BoundingBox& a, const BoundingBox& b, double angle_tol_deg) {
    return std::abs(normal_angle_deg(a, b) - 90.0) <= angle_tol_deg;
}

bool is_parallel(const BoundingBox& a, const BoundingBox& b, double angle_tol_deg) {
    // The fold into [0, 90] already maps angles near 180 onto angles near 0.
    return normal_angle_deg(a, b) <= angle_tol_deg;
}

namespace {

bool canonical_less(const BoundingBox& a, const BoundingBox& b) {
    auto key = [](const BoundingBox& x) {
        return std::array<double, 8>{x.center.x(), x.center.y(), x.center.z(), x.u.x(),
                                     x.u.y(),      x.half.x(),   x.half.y(),   x.half.z()};
    };
    return key(a) < key(b);
}

}  // namespace

bool boxes_intersect(const BoundingBox& a, const BoundingBox& b) {
    const Vec3 t = b.center - a.center;
    auto separated_on = [&](const Vec3& axis) {
        const double len = axis.norm();
        if (len < 1e-9) return false;
        const Vec3 l = axis / len;
        double ra = 0.0, rb = 0.0;
        for (int i = 0; i < 3; ++i) {
            ra += a.half(i) * std::abs(a.axis(i).dot(l));
            rb += b.half(i) * std::abs(b.axis(i).dot(l));
        }
        return std::abs(t.dot(l)) > ra + rb + 1e-12;
    };
    for (int i = 0; i < 3; ++i) {
        if (separated_on(a.axis(i)) || separated_on(b.axis(i))) return false;
    }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (separated_on(a.axis(i).cross(b.axis(j)))) return false;
    return true;
}

namespace {

double point_box_distance(const Vec3& p, const BoundingBox& box) {
    const Vec3 l = box.to_local(p);
    const Vec3 clamped = l.cwiseMax(-box.half).cwiseMin(box.half);
    return (l - clamped).norm();
}

double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
    const Vec3 d1 = q1 - p1;
    const Vec3 d2 = q2 - p2;
    const Vec3 r = p1 - p2;
    const double a = d1.squaredNorm();
    const double e = d2.squaredNorm();
    const double f = d2.dot(r);
    constexpr double eps = 1e-18;
    double s = 0.0, t = 0.0;
    if (a <= eps && e <= eps) return r.norm();
    if (a <= eps) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = d1.dot(r);
        if (e <= eps) {
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = d1.dot(d2);
            const double denom = a * e - b * b;
            s = denom > eps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    return ((p1 + s * d1) - (p2 + t * d2)).norm();
}

std::array<std::pair<int, int>, 12> box_edges() {
    std::array<std::pair<int, int>, 12> edges;
    int k = 0;
    for (int i = 0; i < 8; ++i)
        for (int bit : {1, 2, 4})
            if (!(i & bit)) edges[k++] = {i, i | bit};
    return edges;
}

using Polygon = std::vector<Vec2>;

Polygon footprint(const BoundingBox& box) {
    const Vec2 c = box.center.head<2>();
    const Vec2 u = box.u.head<2>() * box.half.x();
    const Vec2 v = box.v.head<2>() * box.half.y();
    return {c - u - v, c + u - v, c + u + v, c - u + v};  // counter-clockwise
}

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

Polygon clip(const Polygon& subject, const Polygon& clipper) {
    Polygon out = subject;
    for (std::size_t e = 0; e < clipper.size() && !out.empty(); ++e) {
        const Vec2 a = clipper[e];
        const Vec2 b = clipper[(e + 1) % clipper.size()];
        auto inside = [&](const Vec2& p) { return cross2(b - a, p - a) >= 0.0; };
        Polygon in = std::move(out);
        out.clear();
        for (std::size_t i = 0; i < in.size(); ++i) {
            const Vec2 cur = in[i];
            const Vec2 prev = in[(i + in.size() - 1) % in.size()];
            const bool cin = inside(cur), pin = inside(prev);
            if (cin != pin) {
                const Vec2 d = cur - prev;
                const double denom = cross2(b - a, d);
                if (denom != 0.0) out.push_back(prev + (cross2(a - prev, b - a) / -denom) * d);
            }
            if (cin) out.push_back(cur);
        }
    }
    return out;
}

double area(const Polygon& poly) {
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) s += cross2(poly[i], poly[(i + 1) % poly.size()]);
    return 0.5 * std::abs(s);
}

}  // namespace

double box_distance(const BoundingBox& a_in, const BoundingBox& b_in) {
    // fixed argument order makes the result exactly symmetric
    const bool swap = canonical_less(b_in, a_in);
    const BoundingBox& a = swap ? b_in : a_in;
    const BoundingBox& b = swap ? a_in : b_in;
    if (boxes_intersect(a, b)) return 0.0;
    const auto ca = a.corners();
    const auto cb = b.corners();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : ca) best = std::min(best, point_box_distance(p, b));
    for (const auto& p : cb) best = std::min(best, point_box_distance(p, a));
    static const auto edges = box_edges();
    for (const auto& [i0, i1] : edges)
        for (const auto& [j0, j1] : edges)
            best = std::min(best, segment_segment_distance(ca[i0], ca[i1], cb[j0], cb[j1]));
    return best;
}

bool is_connected(const BoundingBox& a, const BoundingBox& b, double gap_tol) { return box_distance(a, b) <= gap_tol; }

double box_iou(const BoundingBox& a_in, const BoundingBox& b_in, double min_half_extent) {
    BoundingBox a = a_in, b = b_in;
    a.half = a.half.cwiseMax(min_half_extent);
    b.half = b.half.cwiseMax(min_half_extent);
    const double z_overlap =
        std::max(0.0, std::min(a.top_elevation(), b.top_elevation()) - std::max(a.base_elevation(), b.base_elevation()));
    double inter = 0.0;
    if (z_overlap > 0.0) inter = area(clip(footprint(a), footprint(b))) * z_overlap;
    const double uni = a.volume() + b.volume() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace kbd
