#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "kbd/geometry.hpp"

namespace kbd {

std::pair<double, double> normalize_line(double rho, double theta) {
    while (theta < 0.0) {
        theta += M_PI;
        rho = -rho;
    }
    while (theta >= M_PI) {
        theta -= M_PI;
        rho = -rho;
    }
    return {rho, theta};
}

namespace {

struct Line {
    double rho;
    double theta;
    Vec2 normal() const { return {std::cos(theta), std::sin(theta)}; }
    Vec2 direction() const { return {-std::sin(theta), std::cos(theta)}; }
    double offset(const Vec2& p) const { return p.dot(normal()) - rho; }
};

/// Least-squares line through `pts`; returns `fallback` when the points do
/// not define a direction.
Line fit_line(const std::vector<Vec2>& pts, const Line& fallback) {
    if (pts.size() < 2) return fallback;
    Vec2 mean = Vec2::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& p : pts) {
        const Vec2 d = p - mean;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    if (es.info() != Eigen::Success || es.eigenvalues()(1) <= 0.0) return fallback;
    const Vec2 n = es.eigenvectors().col(0);
    auto [rho, theta] = normalize_line(n.dot(mean), std::atan2(n.y(), n.x()));
    return {rho, theta};
}

struct Run {
    std::vector<std::size_t> cells;
    LineSegment2D segment;
};

/// Splits the cells near `line` into gap-separated runs and turns each run
/// into a refined segment.
std::vector<Run> runs_along(const std::vector<Vec2>& centers, const std::vector<std::size_t>& candidates,
                            const Line& line, double gap, double cell_size) {
    std::vector<Run> runs;
    if (candidates.empty()) return runs;
    const Vec2 dir = line.direction();
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(candidates.size());
    for (std::size_t c : candidates) order.emplace_back(centers[c].dot(dir), c);
    std::sort(order.begin(), order.end());

    auto close_run = [&](std::size_t begin, std::size_t end) {
        Run run;
        std::vector<Vec2> pts;
        for (std::size_t k = begin; k < end; ++k) {
            run.cells.push_back(order[k].second);
            pts.push_back(centers[order[k].second]);
        }
        const Line refined = fit_line(pts, line);
        const Vec2 n = refined.normal();
        Vec2 d = refined.direction();
        // Keep the traversal direction of the parent line.
        if (d.dot(dir) < 0.0) d = -d;
        double tmin = std::numeric_limits<double>::infinity();
        double tmax = -tmin;
        for (const auto& p : pts) {
            const double t = p.dot(d);
            tmin = std::min(tmin, t);
            tmax = std::max(tmax, t);
        }
        // Cell centers sit half a cell inside the occupied extent.
        tmin -= 0.5 * cell_size;
        tmax += 0.5 * cell_size;
        const Vec2 foot = refined.rho * n;
        run.segment.p0 = foot + tmin * d;
        run.segment.p1 = foot + tmax * d;
        run.segment.rho = refined.rho;
        run.segment.theta = refined.theta;
        run.segment.votes = static_cast<int>(run.cells.size());
        runs.push_back(std::move(run));
    };

    std::size_t begin = 0;
    for (std::size_t k = 1; k <= order.size(); ++k) {
        if (k == order.size() || order[k].first - order[k - 1].first > gap) {
            close_run(begin, k);
            begin = k;
        }
    }
    return runs;
}

std::vector<Vec2> occupied_centers(const OccupancyGrid2D& grid) {
    std::vector<Vec2> centers;
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i)
            if (grid.at(i, j) > 0) centers.push_back(grid.cell_center(i, j));
    return centers;
}

bool segment_order(const LineSegment2D& a, const LineSegment2D& b) {
    if (a.votes != b.votes) return a.votes > b.votes;
    if (a.rho != b.rho) return a.rho < b.rho;
    return a.theta < b.theta;
}

}  // namespace

std::vector<LineSegment2D> trace_line_runs(const OccupancyGrid2D& grid, double rho, double theta, double band,
                                           double min_length) {
    const auto centers = occupied_centers(grid);
    const auto [r, t] = normalize_line(rho, theta);
    const Line line{r, t};
    std::vector<std::size_t> candidates;
    for (std::size_t c = 0; c < centers.size(); ++c)
        if (std::abs(line.offset(centers[c])) <= band) candidates.push_back(c);
    std::vector<LineSegment2D> out;
    for (auto& run : runs_along(centers, candidates, line, 2.0 * grid.cell_size, grid.cell_size))
        if (run.segment.length() >= min_length) out.push_back(run.segment);
    std::sort(out.begin(), out.end(), segment_order);
    return out;
}

std::vector<LineSegment2D> hough_lines(const OccupancyGrid2D& grid, double rho_res, double theta_res, int min_votes,
                                       double min_length) {
    if (!(rho_res > 0.0) || !(theta_res > 0.0)) throw GeometryError("hough_lines: resolutions must be positive");
    if (min_votes < 1) throw GeometryError("hough_lines: min_votes must be >= 1");

    const auto centers = occupied_centers(grid);
    if (centers.empty()) return {};

    const int n_theta = std::max(1, static_cast<int>(std::lround(M_PI / theta_res)));
    const double dtheta = M_PI / n_theta;
    double radius = 0.0;
    for (double cx : {grid.origin.x(), grid.origin.x() + grid.nx * grid.cell_size})
        for (double cy : {grid.origin.y(), grid.origin.y() + grid.ny * grid.cell_size})
            radius = std::max(radius, std::hypot(cx, cy));
    const double rho_min = -radius;
    const int n_rho = static_cast<int>(std::ceil(2.0 * radius / rho_res)) + 1;

    std::vector<double> cos_t(n_theta), sin_t(n_theta);
    for (int k = 0; k < n_theta; ++k) {
        cos_t[k] = std::cos(k * dtheta);
        sin_t[k] = std::sin(k * dtheta);
    }
    auto bin_of = [&](const Vec2& c, int k) {
        const double rho = c.x() * cos_t[k] + c.y() * sin_t[k];
        return std::clamp(static_cast<int>(std::lround((rho - rho_min) / rho_res)), 0, n_rho - 1);
    };

    // Layout: [rho bin][theta bin], so a linear scan visits (rho, theta) in
    // lexicographic order and the first maximum wins ties.
    std::vector<int> acc(static_cast<std::size_t>(n_theta) * n_rho, 0);
    auto slot = [&](int j, int k) { return static_cast<std::size_t>(j) * n_theta + k; };
    for (const auto& c : centers)
        for (int k = 0; k < n_theta; ++k) ++acc[slot(bin_of(c, k), k)];

    std::vector<char> active(centers.size(), 1);
    std::vector<char> exhausted(acc.size(), 0);
    const double band = std::max(rho_res, grid.cell_size);
    const double gap = 2.0 * grid.cell_size;

    std::vector<LineSegment2D> out;
    while (true) {
        std::size_t best = acc.size();
        int best_votes = -1;
        for (std::size_t s = 0; s < acc.size(); ++s)
            if (!exhausted[s] && acc[s] > best_votes) {
                best_votes = acc[s];
                best = s;
            }
        if (best == acc.size() || best_votes < min_votes) break;

        const int j = static_cast<int>(best / n_theta);
        const int k = static_cast<int>(best % n_theta);
        const Line peak{rho_min + j * rho_res, k * dtheta};

        auto near = [&](const Line& line) {
            std::vector<std::size_t> idx;
            for (std::size_t c = 0; c < centers.size(); ++c)
                if (active[c] && std::abs(line.offset(centers[c])) <= band) idx.push_back(c);
            return idx;
        };
        auto first = near(peak);
        std::vector<Vec2> pts;
        pts.reserve(first.size());
        for (std::size_t c : first) pts.push_back(centers[c]);
        const Line refined = fit_line(pts, peak);

        bool emitted = false;
        for (auto& run : runs_along(centers, near(refined), refined, gap, grid.cell_size)) {
            if (run.segment.length() < min_length) continue;
            emitted = true;
            for (std::size_t c : run.cells) {
                active[c] = 0;
                for (int kk = 0; kk < n_theta; ++kk) --acc[slot(bin_of(centers[c], kk), kk)];
            }
            out.push_back(run.segment);
        }
        if (!emitted) exhausted[best] = 1;
    }
    std::sort(out.begin(), out.end(), segment_order);
    return out;
}

}  // namespace kbd
