#pragma once

#include <array>
#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace kbd {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Smallest half-extent a box may have; keeps boxes of planar point sets
/// from collapsing to zero volume.
inline constexpr double kMinHalfExtent = 0.005;

inline double deg_to_rad(double deg) { return deg * M_PI / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / M_PI; }

/// Oriented box in the scene frame. The third axis is always global up, so a
/// box is fully described by its center, the horizontal direction of `u` and
/// the three half-extents (hu, hv, hw). Axes are right-handed: u x v = w.
struct BoundingBox {
    Vec3 center = Vec3::Zero();
    Vec3 u = Vec3::UnitX();
    Vec3 v = Vec3::UnitY();
    Vec3 w = Vec3::UnitZ();
    Vec3 half = Vec3::Constant(kMinHalfExtent);

    /// Builds a w-up box whose u axis follows `direction` (need not be unit).
    static BoundingBox from_direction(const Vec3& center, const Vec2& direction, const Vec3& half);
    static BoundingBox axis_aligned(const Vec3& min, const Vec3& max);

    const Vec3& axis(int i) const { return i == 0 ? u : (i == 1 ? v : w); }

    /// Corners c +/- hu*u +/- hv*v +/- hw*w, ordered with the u sign varying
    /// slowest and the w sign fastest.
    std::array<Vec3, 8> corners() const;

    double height() const { return 2.0 * half.z(); }
    double base_elevation() const { return center.z() - half.z(); }
    double top_elevation() const { return center.z() + half.z(); }
    double volume() const { return 8.0 * half.x() * half.y() * half.z(); }

    /// Coordinates of `p` in the box frame, relative to the center.
    Vec3 to_local(const Vec3& p) const;
    Vec3 to_world(const Vec3& local) const;

    bool contains(const Vec3& p, double margin = 0.0) const;

    /// Checks orthonormality, handedness, w = up and positive extents.
    bool is_valid(double tol = 1e-9) const;

    friend bool operator==(const BoundingBox& a, const BoundingBox& b) {
        return a.center == b.center && a.u == b.u && a.v == b.v && a.w == b.w && a.half == b.half;
    }
};

}  // namespace kbd
