#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "kbd/box.hpp"
#include "kbd/pointcloud.hpp"
#include "oracles/oracles.hpp"

namespace testsupport {

inline std::filesystem::path data_dir() { return KBD_DATA_DIR; }

/// Fresh per-process directory under the system temp area; ctest runs
/// test cases in parallel processes.
inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("kbd_test_" + std::to_string(::getpid()) + "_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// Uniform samples on a vertical rectangle standing on the segment a-b.
inline kbd::PointCloud wall(const kbd::Vec2& a, const kbd::Vec2& b, double base, double height, double density,
                            double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    const kbd::Vec2 d = b - a;
    const kbd::Vec2 n = kbd::Vec2(-d.y(), d.x()).normalized();
    const auto count = static_cast<std::size_t>(std::llround(d.norm() * height * density));
    kbd::PointCloud pc;
    for (std::size_t i = 0; i < count; ++i) {
        const kbd::Vec2 xy = a + u(rng) * d + (sigma > 0 ? sigma * g(rng) : 0.0) * n;
        pc.push_back({xy.x(), xy.y(), base + u(rng) * height});
    }
    return pc;
}

/// Uniform samples on the horizontal rectangle [x0,x1] x [y0,y1] at z.
inline kbd::PointCloud floor_rect(double x0, double y0, double x1, double y1, double z, double density,
                                  double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    const auto count = static_cast<std::size_t>(std::llround((x1 - x0) * (y1 - y0) * density));
    kbd::PointCloud pc;
    for (std::size_t i = 0; i < count; ++i)
        pc.push_back({x0 + u(rng) * (x1 - x0), y0 + u(rng) * (y1 - y0), z + (sigma > 0 ? sigma * g(rng) : 0.0)});
    return pc;
}

inline void append(kbd::PointCloud& dst, const kbd::PointCloud& src) {
    dst.points.insert(dst.points.end(), src.points.begin(), src.points.end());
}

inline oracle::V3 v3(const kbd::Vec3& v) { return {v.x(), v.y(), v.z()}; }

inline oracle::Box obox(const kbd::BoundingBox& b) { return {v3(b.center), {v3(b.u), v3(b.v), v3(b.w)}, v3(b.half)}; }

/// Rotation about z by `yaw` then translation by t.
inline kbd::BoundingBox transform(const kbd::BoundingBox& b, double yaw, const kbd::Vec3& t) {
    const Eigen::Matrix3d r = Eigen::AngleAxisd(yaw, kbd::Vec3::UnitZ()).toRotationMatrix();
    kbd::BoundingBox out = b;
    out.center = r * b.center + t;
    out.u = r * b.u;
    out.v = r * b.v;
    out.w = r * b.w;
    return out;
}

}  // namespace testsupport
