#include "kbd/box.hpp"

#include <stdexcept>

namespace kbd {

BoundingBox BoundingBox::from_direction(const Vec3& center, const Vec2& direction, const Vec3& half) {
    const double n = direction.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("box direction must be a non-zero vector");
    const Vec2 d = direction / n;
    BoundingBox box;
    box.center = center;
    box.u = Vec3(d.x(), d.y(), 0.0);
    box.v = Vec3(-d.y(), d.x(), 0.0);
    box.w = Vec3::UnitZ();
    box.half = half.cwiseMax(kMinHalfExtent);
    return box;
}

BoundingBox BoundingBox::axis_aligned(const Vec3& min, const Vec3& max) {
    return from_direction(0.5 * (min + max), Vec2::UnitX(), 0.5 * (max - min));
}

std::array<Vec3, 8> BoundingBox::corners() const {
    std::array<Vec3, 8> out;
    int k = 0;
    for (double su : {-1.0, 1.0})
        for (double sv : {-1.0, 1.0})
            for (double sw : {-1.0, 1.0})
                out[k++] = center + su * half.x() * u + sv * half.y() * v + sw * half.z() * w;
    return out;
}

Vec3 BoundingBox::to_local(const Vec3& p) const {
    const Vec3 d = p - center;
    return {d.dot(u), d.dot(v), d.dot(w)};
}

Vec3 BoundingBox::to_world(const Vec3& local) const {
    return center + local.x() * u + local.y() * v + local.z() * w;
}

bool BoundingBox::contains(const Vec3& p, double margin) const {
    const Vec3 l = to_local(p);
    return std::abs(l.x()) <= half.x() + margin && std::abs(l.y()) <= half.y() + margin &&
           std::abs(l.z()) <= half.z() + margin;
}

bool BoundingBox::is_valid(double tol) const {
    if (!center.allFinite() || !half.allFinite()) return false;
    if ((half.array() <= 0.0).any()) return false;
    if (std::abs(u.norm() - 1.0) > tol || std::abs(v.norm() - 1.0) > tol || std::abs(w.norm() - 1.0) > tol)
        return false;
    if (std::abs(u.dot(v)) > tol || std::abs(u.dot(w)) > tol || std::abs(v.dot(w)) > tol) return false;
    if ((u.cross(v) - w).norm() > tol) return false;
    return (w - Vec3::UnitZ()).norm() <= tol;
}

}  // namespace kbd
