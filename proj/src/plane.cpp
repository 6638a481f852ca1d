#include <cmath>

#include <Eigen/Eigenvalues>

#include "kbd/geometry.hpp"

namespace kbd {

namespace {

Vec3 canonical_normal(Vec3 n) {
    constexpr double kHorizontal = 1e-6;
    constexpr double kZero = 1e-12;
    if (std::abs(n.z()) >= kHorizontal) {
        if (n.z() < 0.0) n = -n;
    } else {
        const double lead = std::abs(n.x()) > kZero ? n.x() : n.y();
        if (lead < 0.0) n = -n;
    }
    return n;
}

}  // namespace

std::optional<PlaneFit> fit_plane(const PointCloud& points, double dist_threshold, double min_inlier_fraction) {
    if (points.size() < 3) throw GeometryError("fit_plane: need at least 3 points");
    if (!(dist_threshold > 0.0)) throw GeometryError("fit_plane: dist_threshold must be positive");

    const double n = static_cast<double>(points.size());
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : points.points) centroid += p;
    centroid /= n;

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : points.points) {
        const Vec3 d = p - centroid;
        cov.noalias() += d * d.transpose();
    }
    cov /= n;

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    if (es.info() != Eigen::Success) return std::nullopt;
    const Vec3 evals = es.eigenvalues();  // ascending
    // Collinear (or coincident) points leave the plane undetermined.
    if (!(evals(2) > 0.0) || evals(1) <= 1e-12 * evals(2)) return std::nullopt;

    PlaneFit fit;
    fit.normal = canonical_normal(es.eigenvectors().col(0).normalized());
    fit.offset = fit.normal.dot(centroid);
    fit.threshold = dist_threshold;

    double sq = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double r = fit.signed_distance(points.points[i]);
        if (std::abs(r) <= dist_threshold) {
            fit.inliers.push_back(i);
            sq += r * r;
        }
    }
    if (fit.inlier_fraction(points.size()) < min_inlier_fraction) return std::nullopt;
    fit.rms_residual = fit.inliers.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(fit.inliers.size()));
    return fit;
}

}  // namespace kbd
