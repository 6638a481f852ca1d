#include "kbd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>

namespace kbd {

ValidationError::ValidationError(std::vector<SafetyViolation> v)
    : PipelineError([&] {
          std::string msg = "rule validation failed:";
          for (const auto& x : v) msg += "\n  " + x.rule + ": " + x.message;
          return msg;
      }()),
      violations_(std::move(v)) {}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

EvalLimits limits_of(const DetectionConfig& cfg) {
    EvalLimits l;
    l.max_iterations = cfg.max_rule_passes;
    l.max_builtin_calls = static_cast<std::size_t>(cfg.max_builtin_calls);
    return l;
}

void require_valid(const RuleSet& rules, const KnowledgeBase& kb, const BuiltinRegistry& reg) {
    auto v = validate_safety(rules, kb, reg);
    if (!v.empty()) throw ValidationError(std::move(v));
}

/// First class of `ind` strictly below Semantic_Object, if any.
std::optional<std::string> semantic_label(const KnowledgeBase& kb, const std::string& ind) {
    const Individual* i = kb.find_individual(ind);
    if (!i) return std::nullopt;
    for (const auto& c : i->classes)
        if (c != "Semantic_Object" && kb.is_subclass_of(c, "Semantic_Object")) return c;
    return std::nullopt;
}

struct Prior {
    std::string name;
    std::string label;
    std::optional<BoundingBox> box;
    std::optional<Vec2> point;
};

std::vector<Prior> collect_priors(const KnowledgeBase& kb) {
    std::vector<Prior> out;
    for (const auto& ind : kb.individuals()) {
        if (kb.is_instance(ind.name, "BoundingBox")) continue;
        Prior p;
        p.name = ind.name;
        p.label = semantic_label(kb, ind.name).value_or("");
        p.box = box_of(kb, ind.name);
        if (!p.box)
            if (auto v = kb.first_value(ind.name, "hasPosition"); v && std::holds_alternative<Vec2>(*v))
                p.point = std::get<Vec2>(*v);
        if (p.box || p.point) out.push_back(std::move(p));
    }
    return out;
}

PlaneDetectionArgs prior_args(const Prior& p) {
    PlaneDetectionArgs a;
    a.element = p.name;
    a.texture = TextureArg::Flat;
    if (p.label == "Ground") {
        a.orientation = OrientationArg::Horizontal;
        if (p.box) a.position = *p.box;
        return a;
    }
    a.orientation = OrientationArg::Vertical;
    if (p.label == "Wall") {
        a.thickness = ThicknessArg::Thick;
        a.height = HeightConstraint::parse(">4");
    }
    if (p.box)
        a.position = *p.box;
    else
        a.position = *p.point;
    return a;
}

/// Ground with only a point prior: the global slab result counts when its
/// footprint, grown like a search window, covers the point.
bool covers(const BoundingBox& box, const Vec2& p, double grow) {
    const Vec3 l = box.to_local(Vec3(p.x(), p.y(), box.center.z()));
    return std::abs(l.x()) <= box.half.x() + grow && std::abs(l.y()) <= box.half.y() + grow;
}

bool mentions(const std::string& fact, const std::string& name) {
    return fact.find("(" + name + ")") != std::string::npos || fact.find("(" + name + ",") != std::string::npos ||
           fact.find(", " + name + ")") != std::string::npos;
}

void apply(KnowledgeBase& kb, const BoxFacts& f, std::vector<std::string>& added) {
    for (const auto& [ind, cls] : f.classes)
        if (kb.assert_class(ind, cls)) added.push_back(cls + "(" + ind + ")");
    for (const auto& a : f.facts)
        if (kb.assert_fact(a)) added.push_back(format_assertion(a));
}

void assert_logged(KnowledgeBase& kb, const Assertion& a, std::vector<std::string>& added) {
    if (kb.assert_fact(a)) added.push_back(format_assertion(a));
}

}  // namespace

std::vector<DetectedElement> collect_elements(const KnowledgeBase& kb, const DerivationLog& log,
                                              const std::map<std::string, std::string>& branches,
                                              const std::map<std::string, int>& enlargements) {
    std::vector<DetectedElement> out;
    for (const auto& ind : kb.individuals()) {
        if (!kb.is_instance(ind.name, "BoundingBox")) continue;
        if (!kb.holds(ind.name, "hasDetectionRes", Value{true})) continue;
        auto geom = kb.first_value(ind.name, "hasBoxGeometry");
        if (!geom || !std::holds_alternative<BoundingBox>(*geom)) continue;
        DetectedElement e;
        e.id = ind.name;
        e.box = std::get<BoundingBox>(*geom);
        for (std::size_t i : kb.assertions_of("has_Bounding_Box")) {
            const Assertion& a = kb.assertions()[i];
            if (values_equal(a.object, Value{Ref{ind.name}})) {
                e.owner = a.subject;
                break;
            }
        }
        e.class_label = semantic_label(kb, ind.name);
        if (!e.class_label && e.owner) e.class_label = semantic_label(kb, *e.owner);
        e.qualification = e.class_label ? "Semantic" : "Geometric";
        if (auto it = branches.find(ind.name); it != branches.end()) e.provenance.branch = it->second;
        if (auto it = enlargements.find(ind.name); it != enlargements.end()) e.provenance.enlargements = it->second;
        for (const auto& f : log.firings) {
            bool touches = false;
            for (const auto& fact : f.new_facts) touches = touches || mentions(fact, ind.name);
            if (touches && std::find(e.provenance.rules.begin(), e.provenance.rules.end(), f.rule) ==
                               e.provenance.rules.end())
                e.provenance.rules.push_back(f.rule);
        }
        out.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------

RunReport run_specific(ProcessingContext& ctx, KnowledgeBase& kb, const RuleSet& rules) {
    const DetectionConfig& cfg = ctx.config();
    const auto priors = collect_priors(kb);
    if (priors.empty()) throw PipelineError("no priors: the KB has no individual with hasPosition or a box");
    BuiltinRegistry reg = make_registry(ctx);
    require_valid(rules, kb, reg);

    RunReport report;
    report.mode = "specific";
    std::map<std::string, int> enlargements;
    DerivationLog detect_log;

    auto t0 = Clock::now();
    for (const auto& prior : priors) {
        PlaneDetectionArgs args = prior_args(prior);
        std::optional<Detection> found;
        int k = 0;
        for (; k <= cfg.max_enlargements; ++k) {
            args.search_scale = std::pow(cfg.enlargement_factor, k);
            const auto& dets = ctx.detect(args);
            if (!dets.empty()) {
                if (args.orientation == OrientationArg::Horizontal && prior.point &&
                    !covers(dets.front().box, *prior.point, cfg.search_margin * args.search_scale))
                    continue;
                found = dets.front();
                break;
            }
        }

        Firing f;
        f.pass = 0;
        f.rule = "pipeline:specific";
        f.binding["x"] = Ref{prior.name};
        f.builtin_calls.push_back("proc:Plane_Detection(" + args.canonical() + ")");
        if (found) {
            std::set<std::string> reserved;
            BoxFacts facts = describe_box(kb, *found, cfg, reserved);
            ctx.box_branches()[facts.name] = found->branch;
            enlargements[facts.name] = k;
            apply(kb, facts, f.new_facts);
            assert_logged(kb, {prior.name, "has_Bounding_Box", Ref{facts.name}}, f.new_facts);
            assert_logged(kb, {facts.name, "hasQualification", std::string("Semantic")}, f.new_facts);
            assert_logged(kb, {prior.name, "hasDetectionRes", true}, f.new_facts);
            // monotonic KB: the detected xy is added next to the prior one
            assert_logged(kb, {prior.name, "hasPosition", Vec2(found->box.center.head<2>())}, f.new_facts);
            f.binding["box"] = Ref{facts.name};
        } else {
            assert_logged(kb, {prior.name, "hasDetectionRes", false}, f.new_facts);
            report.not_found.push_back({prior.name, cfg.max_enlargements});
        }
        detect_log.facts_added += f.new_facts.size();
        detect_log.firings.push_back(std::move(f));
    }
    report.timings.push_back({"detection", seconds_since(t0)});

    t0 = Clock::now();
    report.log = std::move(detect_log);
    report.log.append(evaluate_fixpoint(kb, rules, reg, limits_of(cfg)));
    report.timings.push_back({"rules", seconds_since(t0)});

    report.iterations = 1;
    report.geometry_runs = ctx.geometry_runs();
    report.geometry_memo_hits = ctx.memo_hits();
    report.elements = collect_elements(kb, report.log, ctx.box_branches(), enlargements);
    report.violations = check_consistency(kb);
    return report;
}

RunReport run_specific(const PointCloud& cloud, KnowledgeBase& kb, const RuleSet& rules,
                       const DetectionConfig& config) {
    ProcessingContext ctx(cloud, config);
    return run_specific(ctx, kb, rules);
}

namespace {

/// Pairwise topology over detected boxes. Pairs already tested in this run
/// are skipped.
Firing topology_step(KnowledgeBase& kb, const DetectionConfig& cfg, std::set<std::pair<std::string, std::string>>& tested) {
    Firing f;
    f.rule = "pipeline:topology";
    std::vector<std::pair<std::string, BoundingBox>> boxes;
    for (const auto& ind : kb.individuals()) {
        if (!kb.is_instance(ind.name, "BoundingBox") || !kb.holds(ind.name, "hasDetectionRes", Value{true})) continue;
        if (auto b = box_of(kb, ind.name)) boxes.emplace_back(ind.name, *b);
    }
    for (std::size_t i = 0; i < boxes.size(); ++i)
        for (std::size_t j = i + 1; j < boxes.size(); ++j) {
            const auto& [na, a] = boxes[i];
            const auto& [nb, b] = boxes[j];
            if (!tested.insert({na, nb}).second) continue;
            auto both = [&](const char* prop) {
                assert_logged(kb, {na, prop, Ref{nb}}, f.new_facts);
                assert_logged(kb, {nb, prop, Ref{na}}, f.new_facts);
            };
            if (perpendicular_test(a, b, cfg)) both("isPerpendicularTo");
            if (connection_test(a, b, cfg)) both("isConnectedTo");
            if (parallel_test(a, b, cfg)) both("isParallelTo");
        }
    return f;
}

}  // namespace

RunReport run_generic(ProcessingContext& ctx, KnowledgeBase& kb, const RuleSet& rules) {
    const DetectionConfig& cfg = ctx.config();
    std::vector<std::string> missing;
    for (Stage s : {Stage::Geometry, Stage::Topology, Stage::Semantic})
        if (!rules.has_stage(s)) missing.push_back(to_string(s));
    if (!missing.empty()) {
        std::string msg = "rule set lacks stage(s):";
        for (const auto& m : missing) msg += " " + m;
        throw PipelineError(msg);
    }
    BuiltinRegistry reg = make_registry(ctx);
    require_valid(rules, kb, reg);

    RunReport report;
    report.mode = "generic";
    const EvalLimits limits = limits_of(cfg);
    const RuleSet geometry = rules.stage(Stage::Geometry);
    const RuleSet topology = rules.stage(Stage::Topology);
    const RuleSet semantic = rules.stage(Stage::Semantic);
    const RuleSet refinement = rules.stage(Stage::Refinement);
    std::set<std::pair<std::string, std::string>> tested;
    std::map<std::string, double> time_of;

    for (int it = 1; it <= cfg.max_refinement_iterations; ++it) {
        report.iterations = it;
        const std::size_t before = kb.fact_count();

        auto t0 = Clock::now();
        report.log.append(evaluate_fixpoint(kb, geometry, reg, limits));
        time_of["geometry"] += seconds_since(t0);

        t0 = Clock::now();
        Firing topo = topology_step(kb, cfg, tested);
        if (!topo.new_facts.empty()) {
            topo.pass = report.log.passes;
            report.log.facts_added += topo.new_facts.size();
            report.log.firings.push_back(std::move(topo));
        }
        report.log.append(evaluate_fixpoint(kb, topology, reg, limits));
        time_of["topology"] += seconds_since(t0);

        t0 = Clock::now();
        report.log.append(evaluate_fixpoint(kb, semantic, reg, limits));
        time_of["semantic"] += seconds_since(t0);

        t0 = Clock::now();
        report.log.append(evaluate_fixpoint(kb, refinement, reg, limits));
        time_of["refinement"] += seconds_since(t0);

        if (kb.fact_count() == before) break;
    }
    for (const char* s : {"geometry", "topology", "semantic", "refinement"}) report.timings.push_back({s, time_of[s]});

    report.geometry_runs = ctx.geometry_runs();
    report.geometry_memo_hits = ctx.memo_hits();
    report.elements = collect_elements(kb, report.log, ctx.box_branches(), {});
    report.violations = check_consistency(kb);
    return report;
}

RunReport run_generic(const PointCloud& cloud, KnowledgeBase& kb, const RuleSet& rules,
                      const DetectionConfig& config) {
    ProcessingContext ctx(cloud, config);
    return run_generic(ctx, kb, rules);
}

// ---------------------------------------------------------------------------

std::vector<TruthBox> truth_boxes(const KnowledgeBase& truth) {
    const KnowledgeBase vocab = builtin_vocabulary();
    std::vector<TruthBox> out;
    for (const auto& ind : truth.individuals()) {
        if (truth.is_instance(ind.name, "BoundingBox")) continue;
        auto geom = truth.first_value(ind.name, "hasBoxGeometry");
        if (!geom || !std::holds_alternative<BoundingBox>(*geom)) continue;
        std::optional<std::string> label;
        for (const auto& c : ind.classes) {
            if (c == "Semantic_Object") continue;
            if (!vocab.has_class(c)) throw PipelineError("truth individual " + ind.name + ": unknown label '" + c + "'");
            if (vocab.is_subclass_of(c, "Semantic_Object") && !label) label = c;
        }
        if (!label) throw PipelineError("truth individual " + ind.name + " has a box but no semantic label");
        out.push_back({ind.name, *label, std::get<BoundingBox>(*geom)});
    }
    return out;
}

const ClassScore* EvalResult::find(const std::string& label) const {
    for (const auto& c : classes)
        if (c.label == label) return &c;
    return nullptr;
}

EvalResult evaluate_against_truth(const std::vector<DetectedElement>& detections, const std::vector<TruthBox>& truth,
                                  double min_iou, double min_half_extent) {
    const KnowledgeBase vocab = builtin_vocabulary();
    for (const auto& t : truth)
        if (!vocab.has_class(t.label) || !vocab.is_subclass_of(t.label, "Semantic_Object") ||
            t.label == "Semantic_Object")
            throw PipelineError("truth box " + t.name + ": unknown label '" + t.label + "'");

    std::vector<std::string> labels;
    auto note = [&](const std::string& l) {
        if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
    };
    for (const auto& l : annotated_classes()) note(l);
    for (const auto& t : truth) note(t.label);
    for (const auto& d : detections)
        if (d.class_label) note(*d.class_label);

    EvalResult res;
    double iou_sum = 0.0;
    for (const auto& d : detections)
        if (!d.class_label) ++res.unlabeled;
    for (const auto& label : labels) {
        ClassScore cs;
        cs.label = label;
        std::vector<std::size_t> dets, truths;
        for (std::size_t i = 0; i < detections.size(); ++i)
            if (detections[i].class_label == label) dets.push_back(i);
        for (std::size_t j = 0; j < truth.size(); ++j)
            if (truth[j].label == label) truths.push_back(j);
        cs.detections = static_cast<int>(dets.size());
        cs.truths = static_cast<int>(truths.size());

        struct Pair {
            double iou;
            std::size_t d, t;
        };
        std::vector<Pair> pairs;
        for (std::size_t d : dets)
            for (std::size_t t : truths) {
                const double iou = box_iou(detections[d].box, truth[t].box, min_half_extent);
                if (iou >= min_iou) pairs.push_back({iou, d, t});
            }
        std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.iou > b.iou; });
        std::set<std::size_t> used_d, used_t;
        double class_sum = 0.0;
        for (const auto& p : pairs) {
            if (used_d.count(p.d) || used_t.count(p.t)) continue;
            used_d.insert(p.d);
            used_t.insert(p.t);
            res.matches.push_back({detections[p.d].id, truth[p.t].name, label, p.iou});
            class_sum += p.iou;
        }
        cs.matched = static_cast<int>(used_d.size());
        if (cs.detections > 0) cs.precision = static_cast<double>(cs.matched) / cs.detections;
        if (cs.truths > 0) cs.recall = static_cast<double>(cs.matched) / cs.truths;
        if (cs.matched > 0) cs.mean_iou = class_sum / cs.matched;
        iou_sum += class_sum;
        if (cs.truths > 0 || cs.detections > 0) res.classes.push_back(cs);
    }
    res.mean_iou = res.matches.empty() ? 0.0 : iou_sum / static_cast<double>(res.matches.size());
    return res;
}

std::string EvalResult::table() const {
    auto fmt = [](const std::optional<double>& v) {
        if (!v) return std::string("n/a");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", *v);
        return std::string(buf);
    };
    std::string out = "class          truth  det  match  precision  recall  mean_iou\n";
    for (const auto& c : classes) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-14s %5d %4d %6d  %9s  %6s  %8s\n", c.label.c_str(), c.truths, c.detections,
                      c.matched, fmt(c.precision).c_str(), fmt(c.recall).c_str(), fmt(c.mean_iou).c_str());
        out += buf;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "unlabeled detections: %d\nmean IoU over matches: %.3f\n", unlabeled, mean_iou);
    return out + buf;
}

}  // namespace kbd
