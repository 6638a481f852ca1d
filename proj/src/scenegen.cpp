#include "kbd/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "kbd/serialize.hpp"

namespace kbd {

using nlohmann::ordered_json;

BoundingBox SceneObject::truth_box() const {
    if (shape == Shape::Horizontal)
        return BoundingBox::axis_aligned(Vec3(std::min(a.x(), b.x()), std::min(a.y(), b.y()), base),
                                         Vec3(std::max(a.x(), b.x()), std::max(a.y(), b.y()), base));
    const Vec2 mid = 0.5 * (a + b);
    return BoundingBox::from_direction(Vec3(mid.x(), mid.y(), base + 0.5 * height), b - a,
                                       Vec3(0.5 * (b - a).norm(), 0.0, 0.5 * height));
}

void SceneSpec::validate() const {
    if (!(density > 0.0) || !std::isfinite(density)) throw SceneError("density must be positive");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw SceneError("sigma must be non-negative");
    if (!(occlusion >= 0.0 && occlusion < 1.0)) throw SceneError("occlusion must be in [0, 1)");
    const KnowledgeBase vocab = builtin_vocabulary();
    std::set<std::string> names;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const auto& o = objects[i];
        const std::string where = "objects[" + std::to_string(i) + "]";
        if (o.name.empty()) throw SceneError(where + ": name must not be empty");
        if (!names.insert(o.name).second) throw SceneError(where + ": duplicate name '" + o.name + "'");
        if (!vocab.has_class(o.label) || o.label == "Semantic_Object" ||
            !vocab.is_subclass_of(o.label, "Semantic_Object"))
            throw SceneError(where + ": label '" + o.label + "' is not a semantic class");
        if (o.shape == SceneObject::Shape::Vertical) {
            if (!(o.height > 0.0)) throw SceneError(where + ": height must be positive");
            if (!((o.b - o.a).norm() > 0.0)) throw SceneError(where + ": footprint has zero length");
        } else {
            if (!(std::abs(o.b.x() - o.a.x()) > 0.0 && std::abs(o.b.y() - o.a.y()) > 0.0))
                throw SceneError(where + ": rectangle has zero area");
        }
    }
}

SceneSpec default_scene() {
    using S = SceneObject::Shape;
    SceneSpec s;
    s.objects = {
        {"wall_south", "Wall", S::Vertical, {0, 0}, {8, 0}, 5.0, 0.0},
        {"wall_east", "Wall", S::Vertical, {8, 0}, {8, 8}, 5.0, 0.0},
        {"wall_north", "Wall", S::Vertical, {8, 8}, {0, 8}, 5.0, 0.0},
        {"wall_west", "Wall", S::Vertical, {0, 8}, {0, 0}, 5.0, 0.0},
        {"floor", "Ground", S::Horizontal, {0, 0}, {8, 8}, 0.0, 0.0},
        {"panel_1", "Panel", S::Vertical, {2, 2}, {4.5, 2}, 2.5, 0.0},
        {"panel_2", "Panel", S::Vertical, {6, 3}, {6, 5.5}, 2.5, 0.0},
        {"counter", "Gate_Counter", S::Vertical, {3, 5.5}, {5.5, 5.5}, 1.0, 0.0},
    };
    return s;
}

// ---------------------------------------------------------------------------

namespace {

ordered_json point_json(const Vec2& p) { return ordered_json::array({p.x(), p.y()}); }

Vec2 point_from_json(const ordered_json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw SceneError(where + ": expected [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

double number_field(const ordered_json& j, const char* key, const std::string& where, std::optional<double> dflt) {
    auto it = j.find(key);
    if (it == j.end()) {
        if (dflt) return *dflt;
        throw SceneError(where + ": missing field '" + key + "'");
    }
    if (!it->is_number()) throw SceneError(where + "." + key + ": expected a number");
    return it->get<double>();
}

}  // namespace

std::string scene_to_json(const SceneSpec& spec) {
    ordered_json j;
    j["density"] = spec.density;
    j["sigma"] = spec.sigma;
    j["occlusion"] = spec.occlusion;
    j["seed"] = spec.seed;
    ordered_json objs = ordered_json::array();
    for (const auto& o : spec.objects) {
        ordered_json e;
        e["name"] = o.name;
        e["label"] = o.label;
        if (o.shape == SceneObject::Shape::Vertical) {
            e["line"] = ordered_json::array({point_json(o.a), point_json(o.b)});
            e["height"] = o.height;
        } else {
            e["rect"] = ordered_json::array({point_json(o.a), point_json(o.b)});
        }
        e["base"] = o.base;
        objs.push_back(std::move(e));
    }
    j["objects"] = std::move(objs);
    return j.dump(2) + "\n";
}

SceneSpec scene_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SceneError(std::string("malformed scene document: ") + e.what());
    }
    if (!j.is_object()) throw SceneError("scene document must be an object");
    SceneSpec s;
    s.objects.clear();
    s.density = number_field(j, "density", "scene", s.density);
    s.sigma = number_field(j, "sigma", "scene", s.sigma);
    s.occlusion = number_field(j, "occlusion", "scene", s.occlusion);
    if (auto it = j.find("seed"); it != j.end()) {
        if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0))
            throw SceneError("scene.seed: expected a non-negative integer");
        s.seed = it->get<std::uint64_t>();
    }
    auto objs = j.find("objects");
    if (objs == j.end() || !objs->is_array()) throw SceneError("scene: 'objects' must be an array");
    for (std::size_t i = 0; i < objs->size(); ++i) {
        const auto& e = (*objs)[i];
        const std::string where = "objects[" + std::to_string(i) + "]";
        if (!e.is_object()) throw SceneError(where + ": expected an object");
        SceneObject o;
        if (!e.contains("name") || !e["name"].is_string()) throw SceneError(where + ".name: expected a string");
        if (!e.contains("label") || !e["label"].is_string()) throw SceneError(where + ".label: expected a string");
        o.name = e["name"].get<std::string>();
        o.label = e["label"].get<std::string>();
        const bool line = e.contains("line"), rect = e.contains("rect");
        if (line == rect) throw SceneError(where + ": give exactly one of 'line' or 'rect'");
        const auto& pts = line ? e["line"] : e["rect"];
        if (!pts.is_array() || pts.size() != 2) throw SceneError(where + ": expected two corner points");
        o.shape = line ? SceneObject::Shape::Vertical : SceneObject::Shape::Horizontal;
        o.a = point_from_json(pts[0], where);
        o.b = point_from_json(pts[1], where);
        o.height = line ? number_field(e, "height", where, std::nullopt) : 0.0;
        o.base = number_field(e, "base", where, 0.0);
        s.objects.push_back(std::move(o));
    }
    s.validate();
    return s;
}

SceneSpec load_scene(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SceneError("cannot open scene file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return scene_from_json(ss.str());
}

void save_scene(const SceneSpec& spec, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SceneError("cannot write scene file " + path.string());
    out << scene_to_json(spec);
}

// ---------------------------------------------------------------------------

Rectangle3D surface_of(const SceneObject& o) {
    Rectangle3D r;
    if (o.shape == SceneObject::Shape::Vertical) {
        r.origin = Vec3(o.a.x(), o.a.y(), o.base);
        r.e1 = Vec3(o.b.x() - o.a.x(), o.b.y() - o.a.y(), 0.0);
        r.e2 = Vec3(0.0, 0.0, o.height);
    } else {
        const Vec2 lo = o.a.cwiseMin(o.b), hi = o.a.cwiseMax(o.b);
        r.origin = Vec3(lo.x(), lo.y(), o.base);
        r.e1 = Vec3(hi.x() - lo.x(), 0.0, 0.0);
        r.e2 = Vec3(0.0, hi.y() - lo.y(), 0.0);
    }
    return r;
}

PointCloud sample_surface(const Rectangle3D& rect, double density, std::mt19937_64& rng) {
    const double area = rect.area();
    if (!(area > 0.0) || !std::isfinite(area)) throw SceneError("sample_surface: degenerate rectangle");
    if (!(density > 0.0)) throw SceneError("sample_surface: density must be positive");
    const auto count = static_cast<std::size_t>(std::llround(area * density));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PointCloud out;
    out.points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double s = unit(rng);
        const double t = unit(rng);
        out.points.push_back(rect.origin + s * rect.e1 + t * rect.e2);
    }
    return out;
}

std::uint64_t object_seed(std::uint64_t scene_seed, const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    // splitmix64 finalizer
    std::uint64_t z = scene_seed + 0x9E3779B97F4A7C15ULL * (h | 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

GeneratedScene generate_scene(const SceneSpec& spec) {
    spec.validate();
    GeneratedScene out;
    out.truth = builtin_vocabulary();
    const double side = std::sqrt(spec.occlusion);
    for (const auto& obj : spec.objects) {
        std::mt19937_64 rng(object_seed(spec.seed, obj.name));
        const Rectangle3D rect = surface_of(obj);
        PointCloud pts = sample_surface(rect, spec.density, rng);

        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double s0 = unit(rng) * (1.0 - side);
        const double t0 = unit(rng) * (1.0 - side);
        const Vec3 n = rect.normal();
        std::normal_distribution<double> noise(0.0, 1.0);
        const double e1sq = rect.e1.squaredNorm(), e2sq = rect.e2.squaredNorm();
        for (const auto& p : pts.points) {
            const Vec3 d = p - rect.origin;
            const double s = d.dot(rect.e1) / e1sq;
            const double t = d.dot(rect.e2) / e2sq;
            if (side > 0.0 && s >= s0 && s < s0 + side && t >= t0 && t < t0 + side) continue;
            const double offset = spec.sigma > 0.0 ? spec.sigma * noise(rng) : 0.0;
            out.cloud.points.push_back(p + offset * n);
        }

        const BoundingBox box = obj.truth_box();
        out.truth.assert_class(obj.name, obj.label);
        out.truth.assert_fact({obj.name, "hasBoxGeometry", box});
        out.truth.assert_fact({obj.name, "hasPosition", Vec2(box.center.head<2>())});
        out.truth.assert_fact({obj.name, "hasHeight", obj.shape == SceneObject::Shape::Vertical ? obj.height : 0.0});
    }
    std::mt19937_64 shuffle_rng(spec.seed);
    std::shuffle(out.cloud.points.begin(), out.cloud.points.end(), shuffle_rng);
    return out;
}

}  // namespace kbd
