#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "kbd/pipeline.hpp"
#include "kbd/scenegen.hpp"
#include "support.hpp"

using namespace kbd;

namespace {

double surface_area(const SceneObject& o) {
    if (o.shape == SceneObject::Shape::Vertical) return (o.b - o.a).norm() * o.height;
    return std::abs(o.b.x() - o.a.x()) * std::abs(o.b.y() - o.a.y());
}

/// Distance of p to the closed rectangle of an object, computed from the
/// object parameters directly.
double distance_to_object(const SceneObject& o, const Vec3& p) {
    if (o.shape == SceneObject::Shape::Horizontal) {
        const double dx = std::max({std::min(o.a.x(), o.b.x()) - p.x(), 0.0, p.x() - std::max(o.a.x(), o.b.x())});
        const double dy = std::max({std::min(o.a.y(), o.b.y()) - p.y(), 0.0, p.y() - std::max(o.a.y(), o.b.y())});
        return std::sqrt(dx * dx + dy * dy + (p.z() - o.base) * (p.z() - o.base));
    }
    const Vec2 d = o.b - o.a;
    const double s = std::clamp((p.head<2>() - o.a).dot(d) / d.squaredNorm(), 0.0, 1.0);
    const Vec2 q = o.a + s * d;
    const double dz = std::max({o.base - p.z(), 0.0, p.z() - o.base - o.height});
    return std::sqrt((p.head<2>() - q).squaredNorm() + dz * dz);
}

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(DefaultScene, CountMatchesClosedForm) {
    const auto spec = default_scene();
    ASSERT_EQ(spec.objects.size(), 8u);
    double area = 0;
    for (const auto& o : spec.objects) area += surface_area(o);
    EXPECT_DOUBLE_EQ(area, 4 * 8 * 5 + 64 + 2 * 2.5 * 2.5 + 2.5);
    const double expected = area * spec.density * (1.0 - spec.occlusion);
    const auto scene = generate_scene(spec);
    EXPECT_NEAR(static_cast<double>(scene.cloud.size()), expected, 0.01 * expected);
}

TEST(DefaultScene, TruthKb) {
    const auto scene = generate_scene(default_scene());
    const auto ts = truth_boxes(scene.truth);
    ASSERT_EQ(ts.size(), 8u);
    std::map<std::string, int> per;
    for (const auto& t : ts) ++per[t.label];
    EXPECT_EQ(per["Wall"], 4);
    EXPECT_EQ(per["Ground"], 1);
    EXPECT_EQ(per["Panel"], 2);
    EXPECT_EQ(per["Gate_Counter"], 1);
    for (const auto& t : ts) {
        EXPECT_TRUE(t.box.is_valid(1e-9));
        const double h = t.label == "Wall" ? 5.0 : t.label == "Panel" ? 2.5 : t.label == "Gate_Counter" ? 1.0 : -1;
        if (h > 0) EXPECT_NEAR(t.box.height(), h, 1e-12) << t.name;
    }
    EXPECT_TRUE(check_consistency(scene.truth).empty());
}

TEST(DefaultScene, ShippedFileMatchesBuiltIn) {
    const auto spec = load_scene(testsupport::data_dir() / "scenes" / "default.scene");
    EXPECT_EQ(scene_to_json(spec), scene_to_json(default_scene()));
}

TEST(GenerateScene, NoiseFreePointsLieOnSurfaces) {
    auto spec = default_scene();
    spec.sigma = 0;
    const auto scene = generate_scene(spec);
    for (const auto& p : scene.cloud.points) {
        double best = 1e9;
        for (const auto& o : spec.objects) best = std::min(best, distance_to_object(o, p));
        ASSERT_LT(best, 1e-9);
    }
}

TEST(GenerateScene, OcclusionRemovesOnePatchPerObject) {
    auto spec = default_scene();
    spec.objects.resize(1);
    spec.sigma = 0;
    spec.occlusion = 0.25;
    const auto scene = generate_scene(spec);
    const double n = surface_area(spec.objects[0]) * spec.density;
    EXPECT_NEAR(static_cast<double>(scene.cloud.size()), 0.75 * n, 0.02 * n);
    // the hole is one axis-aligned square in (s, t): find it with a coarse grid
    const auto& o = spec.objects[0];
    const int cells = 20;
    std::vector<int> counts(cells * cells, 0);
    for (const auto& p : scene.cloud.points) {
        const double s = (p.x() - o.a.x()) / (o.b.x() - o.a.x());
        const double t = (p.z() - o.base) / o.height;
        ++counts[std::min(cells - 1, int(s * cells)) * cells + std::min(cells - 1, int(t * cells))];
    }
    int empty = 0;
    for (int c : counts) empty += c == 0;
    // a 0.5 x 0.5 hole fully covers at least 9 x 9 cells of width 0.05
    EXPECT_GE(empty, 81);
    EXPECT_LE(empty, 100);
}

TEST(GenerateScene, DeterministicFiles) {
    const auto dir = testsupport::scratch("scene_det");
    for (const char* name : {"a.xyz", "b.xyz"}) save_cloud(generate_scene(default_scene()).cloud, dir / name, CloudFormat::XyzAscii);
    EXPECT_EQ(file_bytes(dir / "a.xyz"), file_bytes(dir / "b.xyz"));
    auto other = default_scene();
    other.seed = 43;
    save_cloud(generate_scene(other).cloud, dir / "c.xyz", CloudFormat::XyzAscii);
    EXPECT_NE(file_bytes(dir / "a.xyz"), file_bytes(dir / "c.xyz"));
}

TEST(GenerateScene, ObjectsSampleIndependently) {
    auto spec = default_scene();
    spec.occlusion = 0.1;
    const auto full = generate_scene(spec);
    auto reduced = spec;
    std::erase_if(reduced.objects, [](const SceneObject& o) { return o.name == "panel_1"; });
    const auto less = generate_scene(reduced);

    auto key = [](const Vec3& p) { return std::array<double, 3>{p.x(), p.y(), p.z()}; };
    std::set<std::array<double, 3>> all;
    for (const auto& p : full.cloud.points) all.insert(key(p));
    for (const auto& p : less.cloud.points) ASSERT_TRUE(all.count(key(p)));
    // what is missing is exactly panel_1's samples
    PointCloud panel;
    for (const auto& o : spec.objects)
        if (o.name == "panel_1") {
            auto one = spec;
            one.objects = {o};
            panel = generate_scene(one).cloud;
        }
    EXPECT_EQ(less.cloud.size() + panel.size(), full.cloud.size());
}

TEST(SampleSurface, CountAndContainment) {
    std::mt19937_64 rng(1);
    Rectangle3D r;
    r.origin = Vec3(1, 1, 0);
    r.e1 = Vec3(2, 0, 0);
    r.e2 = Vec3(0, 3, 0);
    const auto pc = sample_surface(r, 100, rng);
    ASSERT_EQ(pc.size(), 600u);
    for (const auto& p : pc.points) {
        EXPECT_GE(p.x(), 1);
        EXPECT_LE(p.x(), 3);
        EXPECT_GE(p.y(), 1);
        EXPECT_LE(p.y(), 4);
        EXPECT_EQ(p.z(), 0);
    }
}

TEST(SampleSurface, UnitSquareMean) {
    std::mt19937_64 rng(2);
    Rectangle3D r;
    const auto pc = sample_surface(r, 10000, rng);
    ASSERT_EQ(pc.size(), 10000u);
    double mx = 0, my = 0;
    for (const auto& p : pc.points) {
        mx += p.x();
        my += p.y();
    }
    // std error of the mean of U(0,1) at n = 1e4 is 0.0029
    EXPECT_NEAR(mx / 1e4, 0.5, 0.02);
    EXPECT_NEAR(my / 1e4, 0.5, 0.02);
}

TEST(SampleSurface, Degenerate) {
    std::mt19937_64 rng(3);
    Rectangle3D r;
    r.e2 = Vec3(2, 0, 0);
    EXPECT_THROW(sample_surface(r, 10, rng), SceneError);
    EXPECT_THROW(sample_surface(Rectangle3D{}, 0, rng), SceneError);
}

TEST(SceneSpec, Validation) {
    auto bad = [](auto mutate) {
        auto s = default_scene();
        mutate(s);
        return s;
    };
    EXPECT_THROW(bad([](SceneSpec& s) { s.density = 0; }).validate(), SceneError);
    EXPECT_THROW(bad([](SceneSpec& s) { s.occlusion = 1; }).validate(), SceneError);
    EXPECT_THROW(bad([](SceneSpec& s) { s.sigma = -1; }).validate(), SceneError);
    EXPECT_THROW(bad([](SceneSpec& s) { s.objects[0].height = 0; }).validate(), SceneError);
    EXPECT_THROW(bad([](SceneSpec& s) { s.objects[0].label = "Chair"; }).validate(), SceneError);
    EXPECT_THROW(bad([](SceneSpec& s) { s.objects[1].name = s.objects[0].name; }).validate(), SceneError);
    EXPECT_THROW(generate_scene(bad([](SceneSpec& s) { s.objects[4].b = s.objects[4].a; })), SceneError);
}

TEST(SceneSpec, JsonRoundTripAndErrors) {
    const auto s = default_scene();
    EXPECT_EQ(scene_to_json(scene_from_json(scene_to_json(s))), scene_to_json(s));
    EXPECT_THROW(scene_from_json("{"), SceneError);
    EXPECT_THROW(scene_from_json(R"({"objects": 1})"), SceneError);
    EXPECT_THROW(
        scene_from_json(R"({"objects": [{"name": "w", "label": "Wall", "line": [[0,0],[1,0]], "rect": [[0,0],[1,1]], "height": 1}]})"),
        SceneError);
    EXPECT_THROW(load_scene("/nonexistent/x.scene"), SceneError);
}

TEST(ObjectSeed, DependsOnNameAndSeed) {
    EXPECT_EQ(object_seed(42, "wall"), object_seed(42, "wall"));
    EXPECT_NE(object_seed(42, "wall"), object_seed(42, "wall2"));
    EXPECT_NE(object_seed(42, "wall"), object_seed(43, "wall"));
}
