#include <gtest/gtest.h>

#include <random>
#include <set>

#include "kbd/builtins.hpp"
#include "kbd/geometry.hpp"
#include "support.hpp"

using namespace kbd;

namespace {

/// Random w-up box: thin panels, slabs and blocks in a 6 m cube.
BoundingBox random_box(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(-3, 3), yaw(0, 2 * M_PI), ext(0.005, 2.0), pick(0, 1);
    Vec3 half(ext(rng), ext(rng), ext(rng));
    const double kind = pick(rng);
    if (kind < 0.35) half.y() = 0.01;
    else if (kind < 0.6) half.z() = 0.01;
    const double a = yaw(rng);
    // a quarter of the draws snap to axis directions so perpendicular and
    // parallel cases actually occur
    const double snapped = pick(rng) < 0.25 ? std::round(a / (M_PI / 2)) * (M_PI / 2) : a;
    return BoundingBox::from_direction(Vec3(pos(rng), pos(rng), pos(rng)), Vec2(std::cos(snapped), std::sin(snapped)),
                                       half);
}

struct Truth {
    bool perp, par, conn;
};

Truth predicates(const BoundingBox& a, const BoundingBox& b, const DetectionConfig& c) {
    return {perpendicular_test(a, b, c), parallel_test(a, b, c), connection_test(a, b, c)};
}

}  // namespace

TEST(TopologyProperties, SymmetricOverRandomPairs) {
    std::mt19937_64 rng(101);
    DetectionConfig cfg;
    int perp = 0, par = 0, conn = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto a = random_box(rng), b = random_box(rng);
        const auto ab = predicates(a, b, cfg), ba = predicates(b, a, cfg);
        ASSERT_EQ(ab.perp, ba.perp) << i;
        ASSERT_EQ(ab.par, ba.par) << i;
        ASSERT_EQ(ab.conn, ba.conn) << i;
        EXPECT_DOUBLE_EQ(box_distance(a, b), box_distance(b, a));
        perp += ab.perp;
        par += ab.par;
        conn += ab.conn;
    }
    // the generator must exercise both outcomes
    EXPECT_GT(perp, 0);
    EXPECT_GT(par, 0);
    EXPECT_GT(conn, 0);
    EXPECT_LT(conn, 1000);
}

TEST(TopologyProperties, InvariantUnderRigidMotion) {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> yaw(0, 2 * M_PI), t(-50, 50);
    DetectionConfig cfg;
    for (int i = 0; i < 1000; ++i) {
        const auto a = random_box(rng), b = random_box(rng);
        const double y = yaw(rng);
        const Vec3 shift(t(rng), t(rng), t(rng));
        const auto ta = testsupport::transform(a, y, shift), tb = testsupport::transform(b, y, shift);
        const auto before = predicates(a, b, cfg), after = predicates(ta, tb, cfg);
        const double d0 = box_distance(a, b), d1 = box_distance(ta, tb);
        ASSERT_NEAR(d0, d1, 1e-9) << i;
        // only a pair within rounding of a threshold may flip
        if (std::abs(d0 - cfg.connection_gap_tol) > 1e-9) ASSERT_EQ(before.conn, after.conn) << i;
        const double ang = normal_angle_deg(a, b);
        ASSERT_NEAR(ang, normal_angle_deg(ta, tb), 1e-6) << i;
        if (std::abs(ang - (90 - cfg.perpendicular_tol_deg)) > 1e-6) ASSERT_EQ(before.perp, after.perp) << i;
        if (std::abs(ang - cfg.parallel_tol_deg) > 1e-6) ASSERT_EQ(before.par, after.par) << i;
    }
}

TEST(TopologyProperties, DistanceMatchesOracle) {
    std::mt19937_64 rng(303);
    for (int i = 0; i < 200; ++i) {
        const auto a = random_box(rng), b = random_box(rng);
        const double lib = box_distance(a, b);
        const double ref = oracle::box_distance(testsupport::obox(a), testsupport::obox(b));
        ASSERT_NEAR(lib, ref, 1e-6) << i;
        ASSERT_EQ(lib == 0.0, boxes_intersect(a, b)) << i;
    }
}

TEST(PlaneProperties, FitInvariantUnderRotation) {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> u(-1, 1), ang(-M_PI, M_PI);
    std::normal_distribution<double> g(0, 0.003);
    for (int trial = 0; trial < 50; ++trial) {
        PointCloud pc;
        for (int i = 0; i < 500; ++i) pc.push_back({u(rng), u(rng), 0.3 * u(rng) + g(rng) + 1.0});
        // tilt the slab of points into a plane, then move it rigidly
        const Eigen::Matrix3d tilt = Eigen::AngleAxisd(0.4, Vec3::UnitX()).toRotationMatrix();
        for (auto& p : pc.points) p = tilt * Vec3(p.x(), p.y(), 0.02 * (p.z() - 1.0) / 0.3 + g(rng));
        const Eigen::Matrix3d r = (Eigen::AngleAxisd(ang(rng), Vec3::UnitZ()) *
                                   Eigen::AngleAxisd(ang(rng), Vec3::UnitY()) *
                                   Eigen::AngleAxisd(ang(rng), Vec3::UnitX()))
                                      .toRotationMatrix();
        const Vec3 t(u(rng) * 10, u(rng) * 10, u(rng) * 10);
        PointCloud moved = pc;
        for (auto& p : moved.points) p = r * p + t;
        auto f0 = fit_plane(pc, 0.05), f1 = fit_plane(moved, 0.05);
        ASSERT_TRUE(f0 && f1);
        EXPECT_NEAR(f0->rms_residual, f1->rms_residual, 1e-9);
        EXPECT_NEAR(std::abs((r * f0->normal).dot(f1->normal)), 1.0, 1e-9);
        EXPECT_EQ(f0->inliers, f1->inliers);
    }
}

TEST(CloudProperties, CropMonotoneInMargin) {
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> u(-5, 5);
    PointCloud pc;
    for (int i = 0; i < 2000; ++i) pc.push_back({u(rng), u(rng), u(rng)});
    auto key = [](const Vec3& p) { return std::array<double, 3>{p.x(), p.y(), p.z()}; };
    for (int trial = 0; trial < 100; ++trial) {
        const auto box = random_box(rng);
        std::size_t prev = 0;
        std::set<std::array<double, 3>> inner;
        for (double m : {0.0, 0.1, 0.5, 1.0, 2.0}) {
            const auto c = crop_to_box(pc, box, m);
            ASSERT_GE(c.size(), prev);
            std::set<std::array<double, 3>> now;
            for (const auto& p : c.points) now.insert(key(p));
            for (const auto& k : inner) ASSERT_TRUE(now.count(k));
            inner = std::move(now);
            prev = c.size();
        }
    }
}

TEST(SlabProperties, EquivariantUnderVerticalShift) {
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<int> zi(0, 320), xy(-100, 100);
    for (int trial = 0; trial < 50; ++trial) {
        PointCloud pc;
        // dyadic coordinates keep the shifted comparison exact
        for (int i = 0; i < 400; ++i) pc.push_back({xy(rng) / 16.0, xy(rng) / 16.0, zi(rng) / 64.0});
        for (int i = 0; i < 100; ++i) pc.push_back({xy(rng) / 16.0, xy(rng) / 16.0, 2.0 + (i % 4) / 64.0});
        const double shift = static_cast<double>(xy(rng));
        PointCloud up = pc;
        for (auto& p : up.points) p.z() += shift;
        auto a = densest_slab(pc, 0.125, 0.0625), b = densest_slab(up, 0.125, 0.0625);
        ASSERT_TRUE(a && b);
        EXPECT_EQ(a->count, b->count);
        EXPECT_DOUBLE_EQ(a->z_low + shift, b->z_low);
        std::vector<double> z;
        for (const auto& p : pc.points) z.push_back(p.z());
        const auto ref = oracle::densest_slab(z, 0.125, 0.0625);
        EXPECT_EQ(a->count, ref.second);
        EXPECT_DOUBLE_EQ(a->z_low, ref.first);
    }
}

TEST(ArgsProperties, CanonicalSignatureSeparatesArguments) {
    std::mt19937_64 rng(707);
    std::uniform_int_distribution<int> pick(0, 2);
    std::uniform_real_distribution<double> u(0, 8);
    std::set<std::string> seen;
    std::size_t distinct = 0;
    std::set<std::tuple<int, int, int, int, double, double>> drawn;
    for (int i = 0; i < 500; ++i) {
        PlaneDetectionArgs a;
        const int o = pick(rng), tx = pick(rng) % 2, th = pick(rng), h = pick(rng);
        a.orientation = static_cast<OrientationArg>(o);
        a.texture = static_cast<TextureArg>(tx);
        a.thickness = static_cast<ThicknessArg>(th);
        a.height = HeightConstraint::parse(h == 0 ? "Any" : h == 1 ? ">4" : "<4");
        const double x = std::round(u(rng)), y = std::round(u(rng));
        if (o != 1) a.position = Vec2(x, y);
        const auto key = std::make_tuple(o, tx, th, h, o != 1 ? x : -1.0, o != 1 ? y : -1.0);
        distinct += drawn.insert(key).second;
        seen.insert(a.canonical());
    }
    EXPECT_EQ(seen.size(), distinct);
}
