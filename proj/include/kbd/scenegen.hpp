#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbd/knowledge.hpp"
#include "kbd/pointcloud.hpp"

namespace kbd {

class SceneError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// One planar object. Vertical objects stand on the footprint line a-b and
/// rise `height` from `base`; horizontal ones cover the axis-aligned
/// rectangle with corners a and b at elevation `base`.
struct SceneObject {
    enum class Shape { Vertical, Horizontal };
    std::string name;
    std::string label;
    Shape shape = Shape::Vertical;
    Vec2 a = Vec2::Zero();
    Vec2 b = Vec2::Zero();
    double height = 0.0;
    double base = 0.0;

    BoundingBox truth_box() const;
};

struct SceneSpec {
    std::vector<SceneObject> objects;
    double density = 500.0;  // points per square meter
    double sigma = 0.01;
    double occlusion = 0.1;  // fraction of each surface removed
    std::uint64_t seed = 42;

    /// Throws SceneError describing the first problem.
    void validate() const;
};

/// 8 x 8 m room: four 5 m walls, the floor, two 2.5 m panels and a 1 m
/// counter.
SceneSpec default_scene();

std::string scene_to_json(const SceneSpec& spec);
SceneSpec scene_from_json(const std::string& text);
SceneSpec load_scene(const std::filesystem::path& path);
void save_scene(const SceneSpec& spec, const std::filesystem::path& path);

/// origin + s*e1 + t*e2 for s, t in [0, 1].
struct Rectangle3D {
    Vec3 origin = Vec3::Zero();
    Vec3 e1 = Vec3::UnitX();
    Vec3 e2 = Vec3::UnitY();

    double area() const { return e1.cross(e2).norm(); }
    Vec3 normal() const { return e1.cross(e2).normalized(); }
};

Rectangle3D surface_of(const SceneObject& obj);

/// round(area * density) points uniform on the rectangle.
PointCloud sample_surface(const Rectangle3D& rect, double density, std::mt19937_64& rng);

/// Seed for one object, derived from the scene seed and the object name so
/// objects sample independently of each other.
std::uint64_t object_seed(std::uint64_t scene_seed, const std::string& name);

struct GeneratedScene {
    PointCloud cloud;
    KnowledgeBase truth;
};

/// Samples every object, applies normal noise and one rectangular occlusion
/// patch per object, then shuffles. The truth KB holds one individual per
/// object with its label, exact box, position and height.
GeneratedScene generate_scene(const SceneSpec& spec);

}  // namespace kbd
