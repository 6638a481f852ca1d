#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "kbd/builtins.hpp"
#include "kbd/pipeline.hpp"
#include "kbd/scenegen.hpp"
#include "support.hpp"

using namespace kbd;

namespace {

const GeneratedScene& room() {
    static const GeneratedScene s = generate_scene(default_scene());
    return s;
}

std::vector<TruthBox> truths(const std::string& label) {
    std::vector<TruthBox> out;
    for (auto& t : truth_boxes(room().truth))
        if (t.label == label) out.push_back(t);
    return out;
}

/// Index of the truth box best overlapping `b`, with its IoU.
std::pair<int, double> best_truth(const BoundingBox& b, const std::vector<TruthBox>& ts) {
    std::pair<int, double> best{-1, 0.0};
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double iou = box_iou(b, ts[i].box, kEvalMinHalfExtent);
        if (iou > best.second) best = {static_cast<int>(i), iou};
    }
    return best;
}

PlaneDetectionArgs vertical(const std::string& height, std::variant<std::monostate, Vec2, BoundingBox> pos = {}) {
    PlaneDetectionArgs a;
    a.orientation = OrientationArg::Vertical;
    a.texture = TextureArg::Flat;
    a.height = HeightConstraint::parse(height);
    a.position = pos;
    return a;
}

}  // namespace

TEST(Args, HeightConstraint) {
    EXPECT_EQ(HeightConstraint::parse(">4").kind, HeightConstraint::Kind::GreaterThan);
    EXPECT_DOUBLE_EQ(HeightConstraint::parse("<2.5m").meters, 2.5);
    EXPECT_EQ(HeightConstraint::parse("Any").kind, HeightConstraint::Kind::Any);
    EXPECT_FALSE(HeightConstraint::parse(">4").accepts(4.0));
    EXPECT_TRUE(HeightConstraint::parse(">4").accepts(4.01));
    EXPECT_FALSE(HeightConstraint::parse("<4").accepts(4.0));
    EXPECT_THROW(HeightConstraint::parse(">0"), ArgumentError);
    EXPECT_THROW(HeightConstraint::parse("tall"), ArgumentError);
}

TEST(Args, HorizontalPointPriorRejected) {
    PlaneDetectionArgs a;
    a.orientation = OrientationArg::Horizontal;
    a.position = Vec2(1, 1);
    EXPECT_THROW(a.validate(), ArgumentError);
    EXPECT_THROW(plane_detection(room().cloud, a, DetectionConfig{}), ArgumentError);
}

TEST(Args, EnumParsing) {
    EXPECT_EQ(parse_orientation_arg("Vertical"), OrientationArg::Vertical);
    EXPECT_THROW(parse_orientation_arg("vertical"), ArgumentError);
    EXPECT_EQ(parse_texture_arg("Any"), TextureArg::Any);
    EXPECT_EQ(parse_thickness_arg("Thin"), ThicknessArg::Thin);
}

TEST(Config, DefaultsValidateAndOverride) {
    DetectionConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_DOUBLE_EQ(c.cell_size, 0.05);
    EXPECT_EQ(c.min_votes, 40);
    EXPECT_EQ(c.max_enlargements, 3);
    auto o = DetectionConfig::from_json(R"({"min_votes": 60, "search_margin": 0.25})");
    EXPECT_EQ(o.min_votes, 60);
    EXPECT_DOUBLE_EQ(o.search_margin, 0.25);
    EXPECT_DOUBLE_EQ(o.cell_size, 0.05);
    EXPECT_THROW(DetectionConfig::from_json(R"({"nope": 1})"), ArgumentError);
    EXPECT_THROW(DetectionConfig::from_json(R"({"cell_size": -1})"), ArgumentError);
    EXPECT_THROW(DetectionConfig::from_json(R"({"enlargement_factor": 1.0})"), ArgumentError);
    auto round = DetectionConfig::from_json(o.to_json());
    EXPECT_EQ(round.canonical(), o.canonical());
}

TEST(PlaneDetection, EmptyCloud) {
    EXPECT_THROW(plane_detection(PointCloud{}, vertical("Any"), DetectionConfig{}), ArgumentError);
}

TEST(PlaneDetection, TallVerticalFindsExactlyTheWalls) {
    auto dets = plane_detection(room().cloud, vertical(">4"), DetectionConfig{});
    const auto walls = truths("Wall");
    ASSERT_EQ(dets.size(), 4u);
    std::set<int> hit;
    for (const auto& d : dets) {
        auto [i, iou] = best_truth(d.box, walls);
        EXPECT_GE(iou, 0.5);
        hit.insert(i);
        EXPECT_EQ(d.branch, "global");
    }
    EXPECT_EQ(hit.size(), 4u);
}

TEST(PlaneDetection, HorizontalFindsFloor) {
    PlaneDetectionArgs a;
    a.orientation = OrientationArg::Horizontal;
    a.texture = TextureArg::Flat;
    auto dets = plane_detection(room().cloud, a, DetectionConfig{});
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_NEAR(dets[0].box.center.z(), 0.0, 0.05);
    EXPECT_EQ(dets[0].descriptors.orientation, Orientation::Horizontal);
    EXPECT_EQ(dets[0].branch, "slab");
}

TEST(PlaneDetection, PointPriorNearWall) {
    const auto walls = truths("Wall");
    const Vec2 c = walls[0].box.center.head<2>();
    auto dets = plane_detection(room().cloud, vertical("Any", Vec2(c + Vec2(0.2, 0.2))), DetectionConfig{});
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_EQ(best_truth(dets[0].box, walls).first, 0);
    EXPECT_EQ(dets[0].branch, "prior");
}

TEST(PlaneDetection, PointPriorInEmptySpace) {
    auto dets = plane_detection(room().cloud, vertical("Any", Vec2(1.2, 4.0)), DetectionConfig{});
    EXPECT_TRUE(dets.empty());
}

TEST(PlaneDetection, GlobalResultsDedupedAndConsistent) {
    DetectionConfig cfg;
    auto dets = plane_detection(room().cloud, vertical("Any"), cfg);
    EXPECT_GE(dets.size(), 7u);
    for (std::size_t i = 0; i < dets.size(); ++i) {
        EXPECT_EQ(dets[i].descriptors, box_descriptors(dets[i].box, &dets[i].fit, cfg.big_size_min));
        EXPECT_EQ(dets[i].descriptors.orientation, Orientation::Vertical);
        for (std::size_t j = i + 1; j < dets.size(); ++j) {
            const double dc = (dets[i].box.center - dets[j].box.center).norm();
            const double ang = std::acos(std::min(1.0, std::abs(dets[i].box.u.dot(dets[j].box.u))));
            EXPECT_FALSE(dc < cfg.rho_res && ang < deg_to_rad(cfg.theta_res_deg));
        }
    }
}

TEST(PlaneDetection, HeightFilterIsApplied) {
    for (const char* h : {">4", "<4", "<2"}) {
        const auto hc = HeightConstraint::parse(h);
        for (const auto& d : plane_detection(room().cloud, vertical(h), DetectionConfig{}))
            EXPECT_TRUE(hc.accepts(d.descriptors.height)) << h;
    }
}

TEST(PlaneDetection, DensityScaleSanity) {
    auto spec = default_scene();
    spec.density *= 2;
    const auto dense = generate_scene(spec);
    auto a = plane_detection(room().cloud, vertical(">4"), DetectionConfig{});
    auto b = plane_detection(dense.cloud, vertical(">4"), DetectionConfig{});
    ASSERT_EQ(a.size(), b.size());
    for (const auto& da : a) {
        double best = 1e9;
        const Detection* match = nullptr;
        for (const auto& db : b) {
            const double d = (da.box.center - db.box.center).norm();
            if (d < best) {
                best = d;
                match = &db;
            }
        }
        ASSERT_NE(match, nullptr);
        EXPECT_LT(best, 0.05);
        EXPECT_LT((da.box.half - match->box.half).cwiseAbs().maxCoeff() * 2, 0.1);
    }
}

TEST(ProcessingContext, MemoizesOnSignature) {
    ProcessingContext ctx(room().cloud, DetectionConfig{});
    const auto& first = ctx.detect(vertical(">4"));
    const auto n = first.size();
    EXPECT_EQ(ctx.geometry_runs(), 1u);
    const auto& second = ctx.detect(vertical(">4"));
    EXPECT_EQ(ctx.geometry_runs(), 1u);
    EXPECT_EQ(ctx.memo_hits(), 1u);
    EXPECT_EQ(second.size(), n);
    ctx.detect(vertical("<4"));
    EXPECT_EQ(ctx.geometry_runs(), 2u);
}

// ---------------------------------------------------------------------------
// topology built-ins through the registry

namespace {

struct BoxKb {
    KnowledgeBase kb = builtin_vocabulary();
    void add(const std::string& n, const BoundingBox& b) {
        kb.assert_class(n, "BoundingBox");
        kb.assert_fact({n, "hasBoxGeometry", b});
    }
};

bool call(const BuiltinRegistry& reg, const char* name, const KnowledgeBase& kb, const char* a, const char* b) {
    const auto* def = reg.find("proc", name);
    EXPECT_NE(def, nullptr);
    return !def->fn({Value{Ref{a}}, Value{Ref{b}}}, kb).empty();
}

}  // namespace

TEST(TopologyBuiltins, Perpendicular) {
    ProcessingContext ctx(PointCloud{}, DetectionConfig{});
    auto reg = make_registry(ctx);
    BoxKb k;
    k.add("floor", BoundingBox::axis_aligned({0, 0, -0.05}, {8, 8, 0.0}));
    k.add("wall", BoundingBox::axis_aligned({0, 0, 0}, {8, 0.1, 5}));
    k.add("wall2", BoundingBox::axis_aligned({0, 4, 0}, {8, 4.1, 5}));
    k.add("far_wall", BoundingBox::axis_aligned({20, 0, 0}, {20.1, 8, 5}));
    EXPECT_TRUE(call(reg, "Perpendicular", k.kb, "wall", "floor"));
    // orthogonal but 10+ m away: distance and angle computed directly
    const auto& w = *box_of(k.kb, "wall");
    const auto& f = *box_of(k.kb, "far_wall");
    EXPECT_GT(oracle::box_distance(testsupport::obox(w), testsupport::obox(f)), 0.3);
    EXPECT_NEAR(oracle::angle_deg(testsupport::v3(dominant_normal(w)), testsupport::v3(dominant_normal(f))), 90, 1e-9);
    EXPECT_FALSE(call(reg, "Perpendicular", k.kb, "wall", "far_wall"));
    EXPECT_FALSE(call(reg, "Perpendicular", k.kb, "wall", "wall2"));
    EXPECT_FALSE(call(reg, "Perpendicular", k.kb, "wall", "wall"));
    EXPECT_TRUE(call(reg, "Parallel", k.kb, "wall", "wall2"));
}

TEST(TopologyBuiltins, Connection) {
    ProcessingContext ctx(PointCloud{}, DetectionConfig{});
    auto reg = make_registry(ctx);
    BoxKb k;
    k.add("floor", BoundingBox::axis_aligned({0, 0, -0.05}, {8, 8, 0.0}));
    k.add("wall", BoundingBox::axis_aligned({0, 0, 0}, {8, 0.1, 5}));
    k.add("a", BoundingBox::axis_aligned({10, 0, 0}, {11, 1, 1}));
    k.add("b", BoundingBox::axis_aligned({11.5, 0, 0}, {12, 1, 1}));
    k.add("c", BoundingBox::axis_aligned({10.5, 0.5, 0.5}, {11.2, 2, 2}));
    EXPECT_TRUE(call(reg, "Connection", k.kb, "wall", "floor"));
    EXPECT_FALSE(call(reg, "Connection", k.kb, "a", "b"));
    EXPECT_EQ(oracle::box_distance(testsupport::obox(*box_of(k.kb, "a")), testsupport::obox(*box_of(k.kb, "c"))), 0.0);
    EXPECT_TRUE(call(reg, "Connection", k.kb, "a", "c"));
    k.kb.assert_class("nobox", "BoundingBox");
    EXPECT_THROW(call(reg, "Connection", k.kb, "a", "nobox"), BuiltinError);
}

TEST(KbGlue, DescribeBoxReusesIdenticalGeometry) {
    auto kb = builtin_vocabulary();
    Detection d;
    d.box = BoundingBox::from_direction({1, 1, 2.5}, {1, 0}, {3, 0.05, 2.5});
    d.descriptors = box_descriptors(d.box);
    std::set<std::string> reserved;
    auto f1 = describe_box(kb, d, DetectionConfig{}, reserved);
    EXPECT_EQ(f1.name, "box_1");
    for (const auto& [i, c] : f1.classes) kb.assert_class(i, c);
    for (const auto& a : f1.facts) kb.assert_fact(a);
    std::set<std::string> r2;
    auto f2 = describe_box(kb, d, DetectionConfig{}, r2);
    EXPECT_EQ(f2.name, "box_1");
    d.box.center.x() += 1;
    auto f3 = describe_box(kb, d, DetectionConfig{}, r2);
    EXPECT_EQ(f3.name, "box_2");
    EXPECT_TRUE(kb.holds("box_1", "hasOrientation", std::string("Vertical")));
    EXPECT_TRUE(kb.holds("box_1", "hasSize", std::string("Big")));
}

TEST(KbGlue, PlaneDetectionBuiltinAssertsBoxes) {
    ProcessingContext ctx(room().cloud, DetectionConfig{});
    auto reg = make_registry(ctx);
    auto kb = builtin_vocabulary();
    auto log = evaluate_fixpoint(
        kb,
        parse_rules("rule g: proc:Plane_Detection(Any, Vertical, Flat, Thick, \">4\", Any, ?box) -> "
                    "hasQualification(?box, Geometric)"),
        reg);
    std::size_t boxes = 0;
    for (const auto& i : kb.individuals()) boxes += kb.is_instance(i.name, "BoundingBox");
    EXPECT_EQ(boxes, 4u);
    EXPECT_EQ(ctx.geometry_runs(), 1u);
    EXPECT_TRUE(log.failures.empty());
}
