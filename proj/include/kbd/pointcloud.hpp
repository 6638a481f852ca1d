#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbd/box.hpp"

namespace kbd {

using Point3 = Vec3;

/// Points in meters, scene frame with +z up. Order is file order and is
/// never changed by the operations below.
struct PointCloud {
    std::vector<Point3> points;
    /// Either empty or one value in [0,1] per point.
    std::vector<double> intensities;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_intensity() const { return !intensities.empty(); }

    void push_back(const Point3& p) { points.push_back(p); }
    /// Copies the points at `indices` (and their intensities) in index order.
    PointCloud subset(const std::vector<std::size_t>& indices) const;
};

struct Aabb {
    Point3 min;
    Point3 max;

    bool contains(const Point3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    bool contains(const Aabb& other) const { return contains(other.min) && contains(other.max); }
};

enum class CloudFormat { XyzAscii, PlyAscii };

/// Raised on unreadable files and malformed content. `line()` is 1-based, 0
/// when the problem is not tied to a line.
class CloudError : public std::runtime_error {
public:
    CloudError(const std::string& what, std::size_t line = 0);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Picks the format from the extension: .ply is PLY, anything else xyz.
CloudFormat format_from_path(const std::filesystem::path& path);

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path& path);

PointCloud parse_xyz(const std::string& text);
PointCloud parse_ply(const std::string& text);

/// Fixed-point output with `precision` decimals; loading the result and
/// saving again reproduces the file byte for byte.
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format, int precision = 6);
std::string format_xyz(const PointCloud& cloud, int precision = 6);

Aabb cloud_bounds(const PointCloud& cloud);

/// Points inside `box` grown by `margin` along each of its own axes.
PointCloud crop_to_box(const PointCloud& cloud, const BoundingBox& box, double margin);

/// FNV-1a over the coordinate bytes; identifies a cloud for memoization.
std::uint64_t cloud_fingerprint(const PointCloud& cloud);

}  // namespace kbd
