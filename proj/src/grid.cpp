#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "kbd/geometry.hpp"

namespace kbd {

std::pair<int, int> OccupancyGrid2D::cell_of(const Vec2& xy) const {
    const double fx = std::floor((xy.x() - origin.x()) / cell_size);
    const double fy = std::floor((xy.y() - origin.y()) / cell_size);
    if (fx < 0 || fy < 0 || fx >= nx || fy >= ny) return {-1, -1};
    return {static_cast<int>(fx), static_cast<int>(fy)};
}

std::uint64_t OccupancyGrid2D::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::size_t OccupancyGrid2D::occupied() const {
    return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
}

OccupancyGrid2D project_to_ground(const PointCloud& cloud, double cell_size, std::optional<ZRange> z_range) {
    if (!(cell_size > 0.0)) throw GeometryError("project_to_ground: cell_size must be positive");
    if (cloud.empty()) throw GeometryError("project_to_ground: empty cloud");
    const Aabb bounds = cloud_bounds(cloud);

    OccupancyGrid2D grid;
    grid.origin = bounds.min.head<2>();
    grid.cell_size = cell_size;
    grid.nx = static_cast<int>(std::floor((bounds.max.x() - bounds.min.x()) / cell_size)) + 1;
    grid.ny = static_cast<int>(std::floor((bounds.max.y() - bounds.min.y()) / cell_size)) + 1;
    grid.counts.assign(static_cast<std::size_t>(grid.nx) * grid.ny, 0);

    for (const auto& p : cloud.points) {
        if (z_range && (p.z() < z_range->first || p.z() > z_range->second)) continue;
        // Clamp guards the max edge against rounding in the division.
        const int i = std::clamp(static_cast<int>(std::floor((p.x() - grid.origin.x()) / cell_size)), 0, grid.nx - 1);
        const int j = std::clamp(static_cast<int>(std::floor((p.y() - grid.origin.y()) / cell_size)), 0, grid.ny - 1);
        ++grid.at(i, j);
    }
    return grid;
}

OccupancyGrid2D threshold_grid(const OccupancyGrid2D& grid, std::uint32_t min_count) {
    OccupancyGrid2D out = grid;
    for (auto& c : out.counts)
        if (c < min_count) c = 0;
    return out;
}

void write_pgm(const OccupancyGrid2D& grid, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    const std::uint32_t peak = grid.counts.empty() ? 0 : *std::max_element(grid.counts.begin(), grid.counts.end());
    out << "P5\n" << grid.nx << ' ' << grid.ny << "\n255\n";
    // Image rows run top to bottom, so flip y.
    for (int j = grid.ny - 1; j >= 0; --j)
        for (int i = 0; i < grid.nx; ++i) {
            const double level = peak == 0 ? 0.0 : std::sqrt(static_cast<double>(grid.at(i, j)) / peak);
            out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * level))));
        }
}

double LineSegment2D::distance_to(const Vec2& q) const {
    const Vec2 d = p1 - p0;
    const double len2 = d.squaredNorm();
    if (len2 == 0.0) return (q - p0).norm();
    const double t = std::clamp((q - p0).dot(d) / len2, 0.0, 1.0);
    return (q - (p0 + t * d)).norm();
}

std::optional<Segment3D> back_z_projection(const PointCloud& cloud, const LineSegment2D& footprint, double thickness,
                                           std::size_t min_points) {
    if (!(thickness > 0.0)) throw GeometryError("back_z_projection: thickness must be positive");
    const double radius = 0.5 * thickness;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (footprint.distance_to(cloud.points[i].head<2>()) <= radius) keep.push_back(i);
    if (keep.empty() || keep.size() < min_points) return std::nullopt;

    Segment3D seg;
    seg.points = cloud.subset(keep);
    const Vec2 dir = footprint.length() > 0.0 ? footprint.direction()
                                              : Vec2(-std::sin(footprint.theta), std::cos(footprint.theta));
    seg.box = oriented_box_from_points(seg.points, dir);
    return seg;
}

std::optional<Slab> densest_slab(const PointCloud& cloud, double slab_thickness, double step) {
    if (!(slab_thickness > 0.0) || !(step > 0.0))
        throw GeometryError("sweep_horizontal_slab: thickness and step must be positive");
    if (cloud.empty()) return std::nullopt;

    std::vector<double> zs(cloud.size());
    std::transform(cloud.points.begin(), cloud.points.end(), zs.begin(), [](const Vec3& p) { return p.z(); });
    std::sort(zs.begin(), zs.end());
    const double zmin = zs.front();
    const double zmax = zs.back();
    const auto steps = static_cast<std::size_t>(std::floor((zmax - zmin) / step)) + 1;

    Slab best;
    bool have = false;
    for (std::size_t k = 0; k < steps; ++k) {
        const double lo = zmin + static_cast<double>(k) * step;
        const double hi = lo + slab_thickness;
        const auto first = std::lower_bound(zs.begin(), zs.end(), lo);
        const auto last = std::upper_bound(zs.begin(), zs.end(), hi);
        const auto count = static_cast<std::size_t>(last - first);
        if (!have || count > best.count) {
            best = {lo, hi, count};
            have = true;
        }
    }
    return best;
}

std::vector<std::size_t> points_in_slab(const PointCloud& cloud, const Slab& slab) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double z = cloud.points[i].z();
        if (z >= slab.z_low && z <= slab.z_high) idx.push_back(i);
    }
    return idx;
}

std::optional<BoundingBox> sweep_horizontal_slab(const PointCloud& cloud, double slab_thickness, double step) {
    const auto slab = densest_slab(cloud, slab_thickness, step);
    if (!slab || slab->count == 0) return std::nullopt;
    const PointCloud layer = cloud.subset(points_in_slab(cloud, *slab));
    const Aabb b = cloud_bounds(layer);
    return BoundingBox::axis_aligned(b.min, b.max);
}

BoundingBox oriented_box_from_points(const PointCloud& points, const Vec2& direction) {
    if (points.empty()) throw GeometryError("oriented_box_from_points: empty input");
    const double n = direction.norm();
    if (!(n > 0.0)) throw GeometryError("oriented_box_from_points: zero direction");
    const Vec2 d = direction / n;
    const Vec3 u(d.x(), d.y(), 0.0);
    const Vec3 v(-d.y(), d.x(), 0.0);

    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const auto& p : points.points) {
        const Vec3 l(p.dot(u), p.dot(v), p.z());
        lo = lo.cwiseMin(l);
        hi = hi.cwiseMax(l);
    }
    const Vec3 mid = 0.5 * (lo + hi);
    const Vec3 center = mid.x() * u + mid.y() * v + mid.z() * Vec3::UnitZ();
    return BoundingBox::from_direction(center, d, 0.5 * (hi - lo));
}

}  // namespace kbd
