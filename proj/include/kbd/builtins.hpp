#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "kbd/geometry.hpp"
#include "kbd/knowledge.hpp"
#include "kbd/rules.hpp"

namespace kbd {

class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class OrientationArg { Vertical, Horizontal, Any };
enum class TextureArg { Flat, Any };
enum class ThicknessArg { Thick, Thin, Any };

struct HeightConstraint {
    enum class Kind { Any, GreaterThan, LessThan };
    Kind kind = Kind::Any;
    double meters = 0.0;

    bool accepts(double h) const;
    /// "Any", ">4", "<4", ">4m", "<2.5m".
    static HeightConstraint parse(const std::string& text);
    std::string str() const;
};

struct PlaneDetectionArgs {
    std::optional<std::string> element;
    OrientationArg orientation = OrientationArg::Any;
    TextureArg texture = TextureArg::Any;
    ThicknessArg thickness = ThicknessArg::Any;
    HeightConstraint height;
    /// Unknown, a ground-plane point, or a prior box.
    std::variant<std::monostate, Vec2, BoundingBox> position;
    /// Multiplier on the prior search window (1.5^k after k enlargements).
    double search_scale = 1.0;

    void validate() const;
    std::string canonical() const;
};

std::string to_string(OrientationArg o);
std::string to_string(TextureArg t);
std::string to_string(ThicknessArg t);
OrientationArg parse_orientation_arg(const std::string& s);
TextureArg parse_texture_arg(const std::string& s);
ThicknessArg parse_thickness_arg(const std::string& s);

struct DetectionConfig {
    double cell_size = 0.05;
    double rho_res = 0.05;
    double theta_res_deg = 1.0;
    int min_votes = 40;
    double min_line_length = 1.0;
    double slab_thickness = 0.10;
    double slab_step = 0.05;
    double wall_thickness_slab = 0.20;
    double plane_dist_threshold = 0.02;
    int min_points = 100;
    double planarity_rms_max_for_flat = 0.02;
    double perpendicular_tol_deg = 5.0;
    double parallel_tol_deg = 5.0;
    double connection_gap_tol = 0.10;
    double big_size_min = 3.0;
    double search_margin = 0.5;
    double enlargement_factor = 1.5;
    int max_enlargements = 3;
    /// Grid cells with fewer points do not vote; keeps sparse clutter out of
    /// the accumulator.
    int min_cell_count = 5;
    /// Largest tilt from vertical for a floor normal.
    double ground_normal_tol_deg = 10.0;
    int max_refinement_iterations = 5;
    int max_rule_passes = 50;
    int max_builtin_calls = 100000;

    /// Throws ArgumentError naming the first non-positive field.
    void validate() const;
    std::string canonical() const;
    /// JSON object; unknown keys are an error.
    std::string to_json() const;
    /// Overrides only the keys present in `text`.
    static DetectionConfig from_json(const std::string& text, const DetectionConfig& base);
    static DetectionConfig from_json(const std::string& text);
};

struct Detection {
    BoundingBox box;
    Descriptors descriptors;
    PlaneFit fit;
    std::string branch;  // "prior", "global" or "slab"
    std::optional<LineSegment2D> footprint;
};

/// Floor layer found by the slab sweep and removed before vertical search.
struct GroundModel {
    Detection detection;
    double z = 0.0;
};

/// Per-cloud work shared by every detection call.
struct PreparedCloud {
    const PointCloud* cloud = nullptr;
    std::optional<GroundModel> ground;
    PointCloud above_ground;
    OccupancyGrid2D grid;  // thresholded projection of above_ground
};

PreparedCloud prepare_cloud(const PointCloud& cloud, const DetectionConfig& config);

/// Dispatch on the arguments: prior window search for a vertical element
/// with a known position, a global Hough search for vertical elements
/// otherwise, and the slab sweep for horizontal ones. Results satisfy the
/// height constraint and their descriptors match the requested orientation.
std::vector<Detection> plane_detection(const PointCloud& cloud, const PlaneDetectionArgs& args,
                                       const DetectionConfig& config);
std::vector<Detection> plane_detection(const PreparedCloud& prepared, const PlaneDetectionArgs& args,
                                       const DetectionConfig& config);

bool perpendicular_test(const BoundingBox& a, const BoundingBox& b, const DetectionConfig& config);
bool connection_test(const BoundingBox& a, const BoundingBox& b, const DetectionConfig& config);
bool parallel_test(const BoundingBox& a, const BoundingBox& b, const DetectionConfig& config);

/// Owns the cloud and config for a run and memoizes plane_detection on
/// (cloud fingerprint, args, config). geometry_runs() counts cache misses.
class ProcessingContext {
public:
    ProcessingContext(PointCloud cloud, DetectionConfig config);

    const PointCloud& cloud() const { return cloud_; }
    const DetectionConfig& config() const { return config_; }
    std::uint64_t fingerprint() const { return fingerprint_; }

    const std::vector<Detection>& detect(const PlaneDetectionArgs& args);
    const PreparedCloud& prepared();

    std::size_t geometry_runs() const { return geometry_runs_; }
    std::size_t memo_hits() const { return memo_hits_; }
    /// Branch name of the detection that produced a box, keyed by box name.
    std::map<std::string, std::string>& box_branches() { return box_branches_; }

private:
    PointCloud cloud_;
    DetectionConfig config_;
    std::uint64_t fingerprint_ = 0;
    std::optional<PreparedCloud> prepared_;
    std::map<std::string, std::vector<Detection>> memo_;
    std::size_t geometry_runs_ = 0;
    std::size_t memo_hits_ = 0;
    std::map<std::string, std::string> box_branches_;
};

/// Facts that describe a detected box in the KB.
struct BoxFacts {
    std::string name;
    std::vector<std::pair<std::string, std::string>> classes;
    std::vector<Assertion> facts;
};

/// Names the box (reusing an individual with the identical geometry, else
/// the first free box_<k> not in `reserved`) and lists its class and
/// descriptor facts.
BoxFacts describe_box(const KnowledgeBase& kb, const Detection& d, const DetectionConfig& config,
                      std::set<std::string>& reserved);

/// Geometry stored for an individual: its own hasBoxGeometry, else that of
/// the first has_Bounding_Box target that has one.
std::optional<BoundingBox> box_of(const KnowledgeBase& kb, const std::string& individual);

/// proc:Plane_Detection(element, orientation, texture, thickness, height,
/// position, OUTPUT box), proc:Perpendicular, proc:Connection and
/// proc:Parallel. The context must outlive the registry.
void register_processing_builtins(BuiltinRegistry& reg, ProcessingContext& ctx);

/// Comparison plus processing built-ins.
BuiltinRegistry make_registry(ProcessingContext& ctx);

}  // namespace kbd
