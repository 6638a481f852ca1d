#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kbd/box.hpp"
#include "kbd/pointcloud.hpp"

namespace kbd {

class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Ground projection

/// Point counts on a regular xy grid. Cell (i, j) covers
/// [x0 + i*s, x0 + (i+1)*s) x [y0 + j*s, y0 + (j+1)*s).
struct OccupancyGrid2D {
    Vec2 origin = Vec2::Zero();
    double cell_size = 1.0;
    int nx = 0;
    int ny = 0;
    std::vector<std::uint32_t> counts;  // row-major in j

    std::uint32_t at(int i, int j) const { return counts[static_cast<std::size_t>(j) * nx + i]; }
    std::uint32_t& at(int i, int j) { return counts[static_cast<std::size_t>(j) * nx + i]; }
    Vec2 cell_center(int i, int j) const {
        return origin + cell_size * Vec2(i + 0.5, j + 0.5);
    }
    /// Cell containing xy, or {-1,-1} outside the grid.
    std::pair<int, int> cell_of(const Vec2& xy) const;
    std::uint64_t total() const;
    std::size_t occupied() const;
};

using ZRange = std::pair<double, double>;

/// Projects every point with z inside `z_range` (all points when absent).
/// The grid always spans the xy bounds of the whole cloud.
OccupancyGrid2D project_to_ground(const PointCloud& cloud, double cell_size,
                                  std::optional<ZRange> z_range = std::nullopt);

/// Zeroes cells holding fewer than `min_count` points.
OccupancyGrid2D threshold_grid(const OccupancyGrid2D& grid, std::uint32_t min_count);

/// Binary PGM, one pixel per cell, brighter = more points. Debug aid.
void write_pgm(const OccupancyGrid2D& grid, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Hough lines

/// A wall footprint candidate. (rho, theta) is the normal form
/// x cos(theta) + y sin(theta) = rho with theta in [0, pi).
struct LineSegment2D {
    Vec2 p0 = Vec2::Zero();
    Vec2 p1 = Vec2::Zero();
    double rho = 0.0;
    double theta = 0.0;
    int votes = 0;

    double length() const { return (p1 - p0).norm(); }
    Vec2 direction() const { return (p1 - p0).normalized(); }
    Vec2 midpoint() const { return 0.5 * (p0 + p1); }
    /// Euclidean distance from `q` to the closed segment.
    double distance_to(const Vec2& q) const;
};

/// Brings (rho, theta) into canonical form with theta in [0, pi).
std::pair<double, double> normalize_line(double rho, double theta);

/// Occupied cells (count capped at one vote each) vote over the (rho, theta)
/// lattice. Peaks are taken strongest first; each peak is traced along its
/// line into maximal runs, splitting where consecutive cells are more than
/// two cells apart. Runs of at least `min_length` become segments, their
/// cells stop voting, and the search continues until no bin reaches
/// `min_votes`. Output: votes descending, then (rho, theta).
std::vector<LineSegment2D> hough_lines(const OccupancyGrid2D& grid, double rho_res, double theta_res, int min_votes,
                                       double min_length);

/// Maximal runs of occupied cells within `band` of the given line, each
/// refined by a least-squares line through its cells. Runs shorter than
/// `min_length` are dropped. Used to grow a locally found line over a larger
/// grid.
std::vector<LineSegment2D> trace_line_runs(const OccupancyGrid2D& grid, double rho, double theta, double band,
                                           double min_length);

// ---------------------------------------------------------------------------
// Segmentation and plane fitting

struct Segment3D {
    PointCloud points;
    BoundingBox box;
};

/// Points whose xy lies within thickness/2 of the footprint (caps included),
/// boxed along the footprint direction. NotFound below `min_points`.
std::optional<Segment3D> back_z_projection(const PointCloud& cloud, const LineSegment2D& footprint, double thickness,
                                           std::size_t min_points = 100);

struct PlaneFit {
    Vec3 normal = Vec3::UnitZ();
    double offset = 0.0;  // n . p = offset on the plane
    std::vector<std::size_t> inliers;
    double rms_residual = 0.0;  // over inliers
    double threshold = 0.0;

    double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
    double inlier_fraction(std::size_t total) const {
        return total == 0 ? 0.0 : static_cast<double>(inliers.size()) / static_cast<double>(total);
    }
};

/// Total least squares through the centroid. Normal sign: n.z >= 0, and for
/// horizontal normals the first non-zero of (n.x, n.y) is positive.
/// NotFound when points are collinear or fewer than `min_inlier_fraction` lie
/// within `dist_threshold`. Throws GeometryError for fewer than 3 points.
std::optional<PlaneFit> fit_plane(const PointCloud& points, double dist_threshold, double min_inlier_fraction = 0.8);

// ---------------------------------------------------------------------------
// Horizontal slab sweep

struct Slab {
    double z_low = 0.0;
    double z_high = 0.0;
    std::size_t count = 0;
};

/// Evaluates [z, z + thickness] for z = zmin, zmin + step, ... <= zmax and
/// returns the slab with the most points, lowest z on ties.
std::optional<Slab> densest_slab(const PointCloud& cloud, double slab_thickness, double step);

/// Axis-aligned box around the points of the densest slab.
std::optional<BoundingBox> sweep_horizontal_slab(const PointCloud& cloud, double slab_thickness, double step);

/// Indices of the points with z in [slab.z_low, slab.z_high].
std::vector<std::size_t> points_in_slab(const PointCloud& cloud, const Slab& slab);

// ---------------------------------------------------------------------------
// Boxes and descriptors

/// Tight w-up box with u along `direction`; zero extents clamp to 5 mm.
BoundingBox oriented_box_from_points(const PointCloud& points, const Vec2& direction);

enum class Orientation { Vertical, Horizontal, Oblique };
enum class SizeClass { Big, Small };

std::string to_string(Orientation o);
std::string to_string(SizeClass s);

struct Descriptors {
    Orientation orientation = Orientation::Oblique;
    double height = 0.0;
    SizeClass size = SizeClass::Small;
    double planarity_rms = 0.0;

    bool operator==(const Descriptors&) const = default;
};

/// Geometry only reports numbers and coarse shape classes; thresholds on
/// height belong to the rules.
Descriptors box_descriptors(const BoundingBox& box, const PlaneFit* source_fit = nullptr,
                            double big_size_min = 3.0);

// ---------------------------------------------------------------------------
// Topology

/// Axis of the smallest half-extent (ties resolved u, v, w).
Vec3 dominant_normal(const BoundingBox& box);

/// Angle between dominant normals folded into [0, 90] degrees.
double normal_angle_deg(const BoundingBox& a, const BoundingBox& b);

bool is_perpendicular(const BoundingBox& a, const BoundingBox& b, double angle_tol_deg);
bool is_parallel(const BoundingBox& a, const BoundingBox& b, double angle_tol_deg);

/// Separating-axis test on the solid boxes; touching counts as intersecting.
bool boxes_intersect(const BoundingBox& a, const BoundingBox& b);

/// Minimum distance between the solid boxes, 0 when they intersect.
double box_distance(const BoundingBox& a, const BoundingBox& b);

bool is_connected(const BoundingBox& a, const BoundingBox& b, double gap_tol);

/// Volume IoU of two w-up boxes. Half-extents are first raised to at least
/// `min_half_extent`, which keeps thin planar boxes comparable.
double box_iou(const BoundingBox& a, const BoundingBox& b, double min_half_extent = 0.0);

}  // namespace kbd
