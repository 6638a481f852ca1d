#include "kbd/builtins.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

namespace kbd {

using nlohmann::ordered_json;

namespace {

std::string exact(double d) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

// ---------------------------------------------------------------------------
// Arguments

bool HeightConstraint::accepts(double h) const {
    switch (kind) {
        case Kind::Any: return true;
        case Kind::GreaterThan: return h > meters;
        case Kind::LessThan: return h < meters;
    }
    return true;
}

HeightConstraint HeightConstraint::parse(const std::string& text) {
    std::string s = trim(text);
    if (s == "Any" || s == "any") return {};
    if (s.size() < 2 || (s[0] != '>' && s[0] != '<'))
        throw ArgumentError("height constraint '" + text + "': expected Any, >N or <N");
    HeightConstraint hc;
    hc.kind = s[0] == '>' ? Kind::GreaterThan : Kind::LessThan;
    std::string num = trim(s.substr(1));
    if (!num.empty() && num.back() == 'm') num.pop_back();
    std::size_t used = 0;
    try {
        hc.meters = std::stod(num, &used);
    } catch (const std::exception&) {
        throw ArgumentError("height constraint '" + text + "': bad number");
    }
    if (used != num.size()) throw ArgumentError("height constraint '" + text + "': bad number");
    if (!(hc.meters > 0.0)) throw ArgumentError("height constraint '" + text + "': bound must be positive");
    return hc;
}

std::string HeightConstraint::str() const {
    char buf[40];
    switch (kind) {
        case Kind::Any: return "Any";
        case Kind::GreaterThan: std::snprintf(buf, sizeof buf, ">%gm", meters); return buf;
        case Kind::LessThan: std::snprintf(buf, sizeof buf, "<%gm", meters); return buf;
    }
    return "Any";
}

std::string to_string(OrientationArg o) {
    switch (o) {
        case OrientationArg::Vertical: return "Vertical";
        case OrientationArg::Horizontal: return "Horizontal";
        case OrientationArg::Any: return "Any";
    }
    return "Any";
}

std::string to_string(TextureArg t) { return t == TextureArg::Flat ? "Flat" : "Any"; }

std::string to_string(ThicknessArg t) {
    switch (t) {
        case ThicknessArg::Thick: return "Thick";
        case ThicknessArg::Thin: return "Thin";
        case ThicknessArg::Any: return "Any";
    }
    return "Any";
}

OrientationArg parse_orientation_arg(const std::string& s) {
    for (auto o : {OrientationArg::Vertical, OrientationArg::Horizontal, OrientationArg::Any})
        if (to_string(o) == s) return o;
    throw ArgumentError("orientation '" + s + "': expected Vertical, Horizontal or Any");
}

TextureArg parse_texture_arg(const std::string& s) {
    if (s == "Flat") return TextureArg::Flat;
    if (s == "Any") return TextureArg::Any;
    throw ArgumentError("texture '" + s + "': expected Flat or Any");
}

ThicknessArg parse_thickness_arg(const std::string& s) {
    for (auto t : {ThicknessArg::Thick, ThicknessArg::Thin, ThicknessArg::Any})
        if (to_string(t) == s) return t;
    throw ArgumentError("thickness '" + s + "': expected Thick, Thin or Any");
}

void PlaneDetectionArgs::validate() const {
    if (height.kind != HeightConstraint::Kind::Any && !(height.meters > 0.0))
        throw ArgumentError("height constraint bound must be positive");
    if (!(search_scale > 0.0)) throw ArgumentError("search_scale must be positive");
    if (orientation == OrientationArg::Horizontal && std::holds_alternative<Vec2>(position))
        throw ArgumentError("a horizontal search cannot use a point prior; give a prior box or Any");
}

std::string PlaneDetectionArgs::canonical() const {
    std::string s = "el=" + element.value_or("Any") + ";or=" + to_string(orientation) + ";tx=" + to_string(texture) +
                    ";th=" + to_string(thickness) + ";h=" + height.str() + ";pos=";
    if (const auto* p = std::get_if<Vec2>(&position))
        s += value_key(*p);
    else if (const auto* b = std::get_if<BoundingBox>(&position))
        s += value_key(*b);
    else
        s += "Any";
    return s + ";scale=" + exact(search_scale);
}

// ---------------------------------------------------------------------------
// Config

namespace {

template <class F>
void for_each_field(DetectionConfig& c, F&& f) {
    f("cell_size", c.cell_size);
    f("rho_res", c.rho_res);
    f("theta_res_deg", c.theta_res_deg);
    f("min_votes", c.min_votes);
    f("min_line_length", c.min_line_length);
    f("slab_thickness", c.slab_thickness);
    f("slab_step", c.slab_step);
    f("wall_thickness_slab", c.wall_thickness_slab);
    f("plane_dist_threshold", c.plane_dist_threshold);
    f("min_points", c.min_points);
    f("planarity_rms_max_for_flat", c.planarity_rms_max_for_flat);
    f("perpendicular_tol_deg", c.perpendicular_tol_deg);
    f("parallel_tol_deg", c.parallel_tol_deg);
    f("connection_gap_tol", c.connection_gap_tol);
    f("big_size_min", c.big_size_min);
    f("search_margin", c.search_margin);
    f("enlargement_factor", c.enlargement_factor);
    f("max_enlargements", c.max_enlargements);
    f("min_cell_count", c.min_cell_count);
    f("ground_normal_tol_deg", c.ground_normal_tol_deg);
    f("max_refinement_iterations", c.max_refinement_iterations);
    f("max_rule_passes", c.max_rule_passes);
    f("max_builtin_calls", c.max_builtin_calls);
}

}  // namespace

void DetectionConfig::validate() const {
    DetectionConfig copy = *this;
    for_each_field(copy, [](const char* name, auto& v) {
        if (!(v > 0)) throw ArgumentError(std::string("config field '") + name + "' must be positive");
    });
    if (!(enlargement_factor > 1.0)) throw ArgumentError("config field 'enlargement_factor' must exceed 1");
}

std::string DetectionConfig::to_json() const {
    ordered_json j = ordered_json::object();
    DetectionConfig copy = *this;
    for_each_field(copy, [&](const char* name, auto& v) { j[name] = v; });
    return j.dump(2) + "\n";
}

std::string DetectionConfig::canonical() const {
    std::string s;
    DetectionConfig copy = *this;
    for_each_field(copy, [&](const char* name, auto& v) {
        s += name;
        s += '=';
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, double>)
            s += exact(v);
        else
            s += std::to_string(v);
        s += ';';
    });
    return s;
}

DetectionConfig DetectionConfig::from_json(const std::string& text, const DetectionConfig& base) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ArgumentError(std::string("malformed config document: ") + e.what());
    }
    if (!j.is_object()) throw ArgumentError("config document must be an object");
    DetectionConfig c = base;
    std::set<std::string> known;
    for_each_field(c, [&](const char* name, auto& v) {
        known.insert(name);
        auto it = j.find(name);
        if (it == j.end()) return;
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, int>) {
            if (!it->is_number_integer()) throw ArgumentError(std::string("config field '") + name + "' must be an integer");
            v = it->template get<int>();
        } else {
            if (!it->is_number()) throw ArgumentError(std::string("config field '") + name + "' must be a number");
            v = it->template get<double>();
        }
    });
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ArgumentError("unknown config field '" + key + "'");
    c.validate();
    return c;
}

DetectionConfig DetectionConfig::from_json(const std::string& text) { return from_json(text, DetectionConfig{}); }

// ---------------------------------------------------------------------------
// Detection

namespace {

bool accepts(const Detection& d, const PlaneDetectionArgs& args, const DetectionConfig& cfg) {
    if (args.orientation == OrientationArg::Vertical && d.descriptors.orientation != Orientation::Vertical)
        return false;
    if (args.orientation == OrientationArg::Horizontal && d.descriptors.orientation != Orientation::Horizontal)
        return false;
    if (args.texture == TextureArg::Flat && d.descriptors.planarity_rms > cfg.planarity_rms_max_for_flat) return false;
    return args.height.accepts(d.descriptors.height);
}

/// Fit, refit on the inliers and keep the refit's inliers.
std::optional<std::pair<PlaneFit, PointCloud>> refined_plane(const PointCloud& pts, const DetectionConfig& cfg) {
    if (pts.size() < 3 || pts.size() < static_cast<std::size_t>(cfg.min_points)) return std::nullopt;
    auto first = fit_plane(pts, cfg.plane_dist_threshold);
    if (!first) return std::nullopt;
    PointCloud in = pts.subset(first->inliers);
    if (in.size() < static_cast<std::size_t>(cfg.min_points)) return std::nullopt;
    auto second = fit_plane(in, cfg.plane_dist_threshold);
    if (!second) return std::nullopt;
    PointCloud kept = in.subset(second->inliers);
    second->inliers.clear();
    second->inliers.shrink_to_fit();
    return std::make_pair(std::move(*second), std::move(kept));
}

std::optional<Detection> vertical_from_footprint(const PointCloud& source, const LineSegment2D& footprint,
                                                 const DetectionConfig& cfg, const char* branch) {
    auto seg = back_z_projection(source, footprint, cfg.wall_thickness_slab, static_cast<std::size_t>(cfg.min_points));
    if (!seg) return std::nullopt;
    auto plane = refined_plane(seg->points, cfg);
    if (!plane) return std::nullopt;
    const Vec3& n = plane->first.normal;
    if (std::abs(n.z()) > std::sin(deg_to_rad(cfg.ground_normal_tol_deg))) return std::nullopt;
    Detection d;
    d.box = oriented_box_from_points(plane->second, Vec2(-n.y(), n.x()));
    d.fit = plane->first;
    d.descriptors = box_descriptors(d.box, &d.fit, cfg.big_size_min);
    d.branch = branch;
    d.footprint = footprint;
    return d;
}

std::optional<Detection> horizontal_from_cloud(const PointCloud& source, const DetectionConfig& cfg) {
    auto slab = densest_slab(source, cfg.slab_thickness, cfg.slab_step);
    if (!slab) return std::nullopt;
    auto plane = refined_plane(source.subset(points_in_slab(source, *slab)), cfg);
    if (!plane) return std::nullopt;
    if (plane->first.normal.z() < std::cos(deg_to_rad(cfg.ground_normal_tol_deg))) return std::nullopt;
    Detection d;
    d.box = oriented_box_from_points(plane->second, Vec2::UnitX());
    d.fit = plane->first;
    d.descriptors = box_descriptors(d.box, &d.fit, cfg.big_size_min);
    d.branch = "slab";
    return d;
}

/// Search window around a prior, vertical extent unbounded.
BoundingBox prior_window(const PlaneDetectionArgs& args, const DetectionConfig& cfg) {
    constexpr double kPointHalf = 0.5;
    constexpr double kTall = 1e9;
    if (const auto* b = std::get_if<BoundingBox>(&args.position)) {
        const Vec3 half((b->half.x() + cfg.search_margin) * args.search_scale,
                        (b->half.y() + cfg.search_margin) * args.search_scale, kTall);
        return BoundingBox::from_direction(Vec3(b->center.x(), b->center.y(), 0.0), b->u.head<2>(), half);
    }
    const Vec2 p = std::get<Vec2>(args.position);
    const double h = (kPointHalf + cfg.search_margin) * args.search_scale;
    return BoundingBox::from_direction(Vec3(p.x(), p.y(), 0.0), Vec2::UnitX(), Vec3(h, h, kTall));
}

std::vector<Detection> detect_prior_vertical(const PreparedCloud& pc, const PlaneDetectionArgs& args,
                                             const DetectionConfig& cfg) {
    const PointCloud local = crop_to_box(pc.above_ground, prior_window(args, cfg), 0.0);
    if (local.size() < static_cast<std::size_t>(cfg.min_points)) return {};
    const auto grid =
        threshold_grid(project_to_ground(local, cfg.cell_size), static_cast<std::uint32_t>(cfg.min_cell_count));
    // The window may clip a long wall, so the local vote floor follows the
    // minimum line length rather than the global min_votes.
    const int local_votes =
        std::min(cfg.min_votes, std::max(2, static_cast<int>(std::ceil(cfg.min_line_length / cfg.cell_size))));
    const auto segs = hough_lines(grid, cfg.rho_res, deg_to_rad(cfg.theta_res_deg), local_votes, cfg.min_line_length);
    const double band = std::max(cfg.rho_res, cfg.cell_size);
    const auto* prior_box = std::get_if<BoundingBox>(&args.position);
    for (const auto& seg : segs) {
        // A prior box also fixes the direction of the element.
        if (prior_box && std::abs(seg.direction().dot(prior_box->u.head<2>())) <
                             std::cos(deg_to_rad(cfg.parallel_tol_deg)))
            continue;
        LineSegment2D footprint = seg;
        double best = 2.0 * cfg.cell_size;
        for (const auto& run : trace_line_runs(pc.grid, seg.rho, seg.theta, band, cfg.min_line_length)) {
            const double d = run.distance_to(seg.midpoint());
            if (d <= best) {
                best = d;
                footprint = run;
            }
        }
        auto det = vertical_from_footprint(pc.above_ground, footprint, cfg, "prior");
        if (det && accepts(*det, args, cfg)) return {*det};
    }
    return {};
}

std::vector<Detection> detect_global_vertical(const PreparedCloud& pc, const PlaneDetectionArgs& args,
                                              const DetectionConfig& cfg) {
    const double theta_res = deg_to_rad(cfg.theta_res_deg);
    std::vector<Detection> out;
    for (const auto& seg : hough_lines(pc.grid, cfg.rho_res, theta_res, cfg.min_votes, cfg.min_line_length)) {
        auto det = vertical_from_footprint(pc.above_ground, seg, cfg, "global");
        if (!det || !accepts(*det, args, cfg)) continue;
        const bool duplicate = std::any_of(out.begin(), out.end(), [&](const Detection& o) {
            const double angle = std::acos(std::clamp(std::abs(o.box.u.dot(det->box.u)), 0.0, 1.0));
            return (o.box.center - det->box.center).norm() < cfg.rho_res && angle < theta_res;
        });
        if (!duplicate) out.push_back(std::move(*det));
    }
    return out;
}

std::vector<Detection> detect_horizontal(const PreparedCloud& pc, const PlaneDetectionArgs& args,
                                         const DetectionConfig& cfg) {
    std::optional<Detection> det;
    if (std::holds_alternative<BoundingBox>(args.position))
        det = horizontal_from_cloud(crop_to_box(*pc.cloud, prior_window(args, cfg), 0.0), cfg);
    else
        det = horizontal_from_cloud(*pc.cloud, cfg);
    if (det && accepts(*det, args, cfg)) return {*det};
    return {};
}

}  // namespace

PreparedCloud prepare_cloud(const PointCloud& cloud, const DetectionConfig& cfg) {
    cfg.validate();
    PreparedCloud pc;
    pc.cloud = &cloud;
    if (auto floor = horizontal_from_cloud(cloud, cfg); floor && floor->descriptors.size == SizeClass::Big) {
        pc.ground = GroundModel{*floor, floor->box.center.z()};
        const double cut = 2.0 * cfg.plane_dist_threshold;
        std::vector<std::size_t> keep;
        keep.reserve(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i)
            if (std::abs(floor->fit.signed_distance(cloud.points[i])) > cut) keep.push_back(i);
        pc.above_ground = cloud.subset(keep);
    } else {
        pc.above_ground = cloud;
    }
    if (!pc.above_ground.empty())
        pc.grid = threshold_grid(project_to_ground(pc.above_ground, cfg.cell_size),
                                 static_cast<std::uint32_t>(cfg.min_cell_count));
    return pc;
}

std::vector<Detection> plane_detection(const PreparedCloud& pc, const PlaneDetectionArgs& args,
                                       const DetectionConfig& cfg) {
    if (!pc.cloud || pc.cloud->empty()) throw ArgumentError("plane_detection: empty cloud");
    args.validate();
    cfg.validate();
    if (args.orientation == OrientationArg::Horizontal) return detect_horizontal(pc, args, cfg);
    if (pc.above_ground.empty()) return {};
    if (std::holds_alternative<std::monostate>(args.position)) {
        if (args.orientation == OrientationArg::Vertical) return detect_global_vertical(pc, args, cfg);
        // Any orientation: vertical candidates first, then the slab.
        auto out = detect_global_vertical(pc, args, cfg);
        for (auto& d : detect_horizontal(pc, args, cfg)) out.push_back(std::move(d));
        return out;
    }
    return detect_prior_vertical(pc, args, cfg);
}

std::vector<Detection> plane_detection(const PointCloud& cloud, const PlaneDetectionArgs& args,
                                       const DetectionConfig& cfg) {
    if (cloud.empty()) throw ArgumentError("plane_detection: empty cloud");
    args.validate();
    return plane_detection(prepare_cloud(cloud, cfg), args, cfg);
}

bool perpendicular_test(const BoundingBox& a, const BoundingBox& b, const DetectionConfig& cfg) {
    return is_perpendicular(a, b, cfg.perpendicular_tol_deg) && is_connected(a, b, 3.0 * cfg.connection_gap_tol);
}

bool connection_test(const BoundingBox& a, const BoundingBox& b, const DetectionConfig& cfg) {
    return is_connected(a, b, cfg.connection_gap_tol);
}

bool parallel_test(const BoundingBox& a, const BoundingBox& b, const DetectionConfig& cfg) {
    return is_parallel(a, b, cfg.parallel_tol_deg);
}

// ---------------------------------------------------------------------------
// Context

ProcessingContext::ProcessingContext(PointCloud cloud, DetectionConfig config)
    : cloud_(std::move(cloud)), config_(config) {
    config_.validate();
    fingerprint_ = cloud_fingerprint(cloud_);
}

const PreparedCloud& ProcessingContext::prepared() {
    if (!prepared_) prepared_ = prepare_cloud(cloud_, config_);
    return *prepared_;
}

const std::vector<Detection>& ProcessingContext::detect(const PlaneDetectionArgs& args) {
    const std::string key = std::to_string(fingerprint_) + "|" + args.canonical() + "|" + config_.canonical();
    if (auto it = memo_.find(key); it != memo_.end()) {
        ++memo_hits_;
        return it->second;
    }
    if (cloud_.empty()) throw ArgumentError("plane_detection: empty cloud");
    args.validate();
    ++geometry_runs_;
    auto result = plane_detection(prepared(), args, config_);
    return memo_.emplace(key, std::move(result)).first->second;
}

// ---------------------------------------------------------------------------
// KB glue

std::optional<BoundingBox> box_of(const KnowledgeBase& kb, const std::string& individual) {
    if (auto v = kb.first_value(individual, "hasBoxGeometry"))
        if (const auto* b = std::get_if<BoundingBox>(&*v)) return *b;
    for (const auto& v : kb.values(individual, "has_Bounding_Box"))
        if (const auto* r = std::get_if<Ref>(&v))
            if (auto g = kb.first_value(r->name, "hasBoxGeometry"))
                if (const auto* b = std::get_if<BoundingBox>(&*g)) return *b;
    return std::nullopt;
}

BoxFacts describe_box(const KnowledgeBase& kb, const Detection& d, const DetectionConfig& cfg,
                      std::set<std::string>& reserved) {
    BoxFacts out;
    for (std::size_t i : kb.assertions_of("hasBoxGeometry")) {
        const Assertion& a = kb.assertions()[i];
        if (values_equal(a.object, Value{d.box}) && kb.is_instance(a.subject, "BoundingBox")) {
            out.name = a.subject;
            break;
        }
    }
    if (out.name.empty()) {
        for (int k = 1;; ++k) {
            std::string name = "box_" + std::to_string(k);
            if (!kb.has_individual(name) && !reserved.count(name)) {
                out.name = std::move(name);
                break;
            }
        }
    }
    reserved.insert(out.name);
    const std::string& n = out.name;
    const bool flat = d.descriptors.planarity_rms <= cfg.planarity_rms_max_for_flat;
    out.classes.push_back({n, "BoundingBox"});
    out.facts = {
        {n, "hasBoxGeometry", d.box},
        {n, "hasOrientation", to_string(d.descriptors.orientation)},
        {n, "hasHeight", d.descriptors.height},
        {n, "hasSize", to_string(d.descriptors.size)},
        {n, "hasTexture", std::string(flat ? "Flat" : "Rough")},
        {n, "hasPlanarity", d.descriptors.planarity_rms},
        {n, "hasPosition", Vec2(d.box.center.head<2>())},
        {n, "hasDetectionRes", true},
    };
    return out;
}

namespace {

std::string tag_arg(const std::optional<Value>& v, const char* what) {
    if (const auto* s = std::get_if<std::string>(&*v)) return *s;
    throw BuiltinError(std::string("Plane_Detection: ") + what + " must be a tag, got " + kind_name(*v));
}

PlaneDetectionArgs args_from_values(const std::vector<std::optional<Value>>& a, const KnowledgeBase& kb) {
    PlaneDetectionArgs args;
    if (const auto* r = std::get_if<Ref>(&*a[0])) {
        args.element = r->name;
    } else {
        const std::string el = tag_arg(a[0], "element");
        if (el != "Any") args.element = el;
    }
    try {
        args.orientation = parse_orientation_arg(tag_arg(a[1], "orientation"));
        args.texture = parse_texture_arg(tag_arg(a[2], "texture"));
        args.thickness = parse_thickness_arg(tag_arg(a[3], "thickness"));
        args.height = HeightConstraint::parse(tag_arg(a[4], "height"));
    } catch (const ArgumentError& e) {
        throw BuiltinError(std::string("Plane_Detection: ") + e.what());
    }
    const Value& pos = *a[5];
    if (const auto* p = std::get_if<Vec2>(&pos)) {
        args.position = *p;
    } else if (const auto* b = std::get_if<BoundingBox>(&pos)) {
        args.position = *b;
    } else if (const auto* r = std::get_if<Ref>(&pos)) {
        if (auto box = box_of(kb, r->name))
            args.position = *box;
        else if (auto p = kb.first_value(r->name, "hasPosition"); p && std::holds_alternative<Vec2>(*p))
            args.position = std::get<Vec2>(*p);
        else
            throw BuiltinError("Plane_Detection: individual " + r->name + " has no position or box");
    } else if (tag_arg(a[5], "position") != "Any") {
        throw BuiltinError("Plane_Detection: position must be Any, a point, a box or an individual");
    }
    return args;
}

std::pair<BoundingBox, BoundingBox> two_boxes(const std::vector<std::optional<Value>>& a, const KnowledgeBase& kb,
                                              const char* who, bool& same) {
    std::optional<BoundingBox> out[2];
    std::string names[2];
    for (int i = 0; i < 2; ++i) {
        if (const auto* b = std::get_if<BoundingBox>(&*a[i])) {
            out[i] = *b;
            continue;
        }
        const auto* r = std::get_if<Ref>(&*a[i]);
        if (!r) throw BuiltinError(std::string(who) + ": argument " + std::to_string(i + 1) + " is not a box");
        names[i] = r->name;
        out[i] = box_of(kb, r->name);
        if (!out[i]) throw BuiltinError(std::string(who) + ": " + r->name + " has no stored box");
    }
    same = !names[0].empty() && names[0] == names[1];
    return {*out[0], *out[1]};
}

}  // namespace

void register_processing_builtins(BuiltinRegistry& reg, ProcessingContext& ctx) {
    using A = ArgMode;
    reg.add({"proc", "Plane_Detection",
             {A::Input, A::Input, A::Input, A::Input, A::Input, A::Input, A::Output},
             [&ctx](const std::vector<std::optional<Value>>& a, const KnowledgeBase& kb) {
                 const PlaneDetectionArgs args = args_from_values(a, kb);
                 std::vector<BuiltinRow> rows;
                 std::set<std::string> reserved;
                 for (const auto& det : ctx.detect(args)) {
                     BoxFacts f = describe_box(kb, det, ctx.config(), reserved);
                     ctx.box_branches()[f.name] = det.branch;
                     BuiltinRow row;
                     row.outputs.push_back(Ref{f.name});
                     row.classes = std::move(f.classes);
                     row.facts = std::move(f.facts);
                     if (args.element && kb.has_individual(*args.element))
                         row.facts.push_back({*args.element, "has_Bounding_Box", Ref{f.name}});
                     rows.push_back(std::move(row));
                 }
                 return rows;
             },
             true, true});

    auto predicate = [&ctx](const char* name, bool (*test)(const BoundingBox&, const BoundingBox&,
                                                           const DetectionConfig&)) {
        return BuiltinDef{"proc", name, {A::Input, A::Input},
                          [&ctx, name, test](const std::vector<std::optional<Value>>& a, const KnowledgeBase& kb) {
                              bool same = false;
                              const auto [x, y] = two_boxes(a, kb, name, same);
                              if (same) return std::vector<BuiltinRow>{};
                              return test(x, y, ctx.config()) ? std::vector<BuiltinRow>{BuiltinRow{}}
                                                              : std::vector<BuiltinRow>{};
                          },
                          false, false};
    };
    reg.add(predicate("Perpendicular", &perpendicular_test));
    reg.add(predicate("Connection", &connection_test));
    reg.add(predicate("Parallel", &parallel_test));
}

BuiltinRegistry make_registry(ProcessingContext& ctx) {
    BuiltinRegistry reg;
    register_comparison_builtins(reg);
    register_processing_builtins(reg, ctx);
    return reg;
}

}  // namespace kbd
