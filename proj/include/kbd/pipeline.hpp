#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbd/builtins.hpp"
#include "kbd/knowledge.hpp"
#include "kbd/rules.hpp"

namespace kbd {

class PipelineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rule validation failed before the run started.
class ValidationError : public PipelineError {
public:
    explicit ValidationError(std::vector<SafetyViolation> v);
    const std::vector<SafetyViolation>& violations() const { return violations_; }

private:
    std::vector<SafetyViolation> violations_;
};

struct Provenance {
    std::string branch;               // prior, global, slab
    std::vector<std::string> rules;   // rules whose firings touched the box
    int enlargements = 0;
};

struct DetectedElement {
    std::string id;
    BoundingBox box;
    std::string qualification;  // Geometric or Semantic
    std::optional<std::string> class_label;
    std::optional<std::string> owner;  // prior individual, specific mode
    Provenance provenance;
};

struct NotFound {
    std::string individual;
    int enlargements = 0;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct RunReport {
    std::string mode;
    std::vector<DetectedElement> elements;
    DerivationLog log;
    std::vector<StageTiming> timings;
    std::vector<NotFound> not_found;
    int iterations = 0;
    std::size_t geometry_runs = 0;
    std::size_t geometry_memo_hits = 0;
    std::vector<Violation> violations;

    /// Stable key order. Timings are left out unless asked for, so two runs
    /// of the same inputs serialize identically.
    std::string to_json(bool include_timings = false) const;
    std::string log_json() const;
};

/// Reads back the elements of a serialized report (enough for evaluation).
RunReport report_from_json(const std::string& text);
RunReport load_report(const std::filesystem::path& path);

/// ASCII PLY with 8 vertices and 12 triangles per element.
void write_boxes_ply(const std::vector<DetectedElement>& elements, const std::filesystem::path& path);

/// Prior-guided detection: one windowed search per prior individual,
/// enlarging the window up to max_enlargements times, then the rules.
RunReport run_specific(ProcessingContext& ctx, KnowledgeBase& kb, const RuleSet& rules);
RunReport run_specific(const PointCloud& cloud, KnowledgeBase& kb, const RuleSet& rules,
                       const DetectionConfig& config);

/// Rule-driven detection in iterations of geometry, topology, semantic and
/// refinement stages until nothing new is asserted.
RunReport run_generic(ProcessingContext& ctx, KnowledgeBase& kb, const RuleSet& rules);
RunReport run_generic(const PointCloud& cloud, KnowledgeBase& kb, const RuleSet& rules,
                      const DetectionConfig& config);

/// Detected boxes in the KB as report elements, KB order.
std::vector<DetectedElement> collect_elements(const KnowledgeBase& kb, const DerivationLog& log,
                                              const std::map<std::string, std::string>& branches,
                                              const std::map<std::string, int>& enlargements);

// ---------------------------------------------------------------------------
// Evaluation

struct TruthBox {
    std::string name;
    std::string label;
    BoundingBox box;
};

/// Individuals carrying a semantic class and a box. Throws PipelineError for
/// a label outside the vocabulary.
std::vector<TruthBox> truth_boxes(const KnowledgeBase& truth);

struct ClassScore {
    std::string label;
    int truths = 0;
    int detections = 0;
    int matched = 0;
    std::optional<double> precision;  // n/a without detections
    std::optional<double> recall;     // n/a without truths
    std::optional<double> mean_iou;
};

struct Match {
    std::string detection;
    std::string truth;
    std::string label;
    double iou = 0.0;
};

struct EvalResult {
    std::vector<ClassScore> classes;
    std::vector<Match> matches;
    int unlabeled = 0;
    double mean_iou = 0.0;  // over all matches

    const ClassScore* find(const std::string& label) const;
    std::string table() const;
};

/// Thin planar boxes are padded to `min_half_extent` before IoU.
inline constexpr double kEvalMinHalfExtent = 0.1;

/// Greedy one-to-one matching per label by descending IoU, IoU >= min_iou.
EvalResult evaluate_against_truth(const std::vector<DetectedElement>& detections, const std::vector<TruthBox>& truth,
                                  double min_iou = 0.5, double min_half_extent = kEvalMinHalfExtent);

}  // namespace kbd
