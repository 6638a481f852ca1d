#include "kbd/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "kbd/pipeline.hpp"
#include "kbd/scenegen.hpp"

namespace kbd {

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

struct GenOpts {
    std::string spec, out, truth;
    std::optional<std::uint64_t> seed;
};

struct DetectOpts {
    std::string mode, cloud, kb, rules, out, boxes, config, log;
    std::optional<std::uint64_t> seed;
};

struct EvalOpts {
    std::string report, truth;
    double min_iou = 0.5;
};

int cmd_gen(const GenOpts& o, std::ostream& out) {
    SceneSpec spec = load_scene(o.spec);
    if (o.seed) spec.seed = *o.seed;
    GeneratedScene scene = generate_scene(spec);
    save_cloud(scene.cloud, o.out, format_from_path(o.out));
    if (!o.truth.empty()) save_kb(scene.truth, o.truth);
    out << "wrote " << scene.cloud.size() << " points to " << o.out << "\n";
    return 0;
}

void print_violations(const std::vector<SafetyViolation>& v, std::ostream& err) {
    for (const auto& x : v) err << "  " << x.rule << ": " << x.message << "\n";
}

int cmd_detect(const DetectOpts& o, std::ostream& out, std::ostream& err) {
    if (o.mode == "specific" && o.kb.empty()) {
        err << "error: --mode specific needs --kb with priors\n";
        return 2;
    }
    DetectionConfig config;
    if (!o.config.empty()) config = DetectionConfig::from_json(read_text(o.config), config);
    PointCloud cloud = load_cloud(o.cloud);
    KnowledgeBase kb = o.kb.empty() ? builtin_vocabulary() : load_kb(o.kb);
    RuleSet rules = load_rules(o.rules);

    ProcessingContext ctx(std::move(cloud), config);
    RunReport report;
    try {
        report = o.mode == "specific" ? run_specific(ctx, kb, rules) : run_generic(ctx, kb, rules);
    } catch (const ValidationError& e) {
        err << "error: rule validation failed\n";
        print_violations(e.violations(), err);
        return 1;
    }
    write_text(o.out, report.to_json());
    if (!o.boxes.empty()) write_boxes_ply(report.elements, o.boxes);
    if (!o.log.empty()) write_text(o.log, report.log_json());

    std::size_t semantic = 0;
    for (const auto& e : report.elements) semantic += e.class_label ? 1 : 0;
    out << report.elements.size() << " boxes (" << semantic << " annotated), " << report.not_found.size()
        << " not found, " << report.geometry_runs << " geometry runs\n";
    for (const auto& n : report.not_found)
        out << "not found: " << n.individual << " after " << n.enlargements << " enlargements\n";
    return 0;
}

int cmd_eval(const EvalOpts& o, std::ostream& out) {
    RunReport report = load_report(o.report);
    KnowledgeBase truth = load_kb(o.truth);
    EvalResult res = evaluate_against_truth(report.elements, truth_boxes(truth), o.min_iou);
    out << res.table();
    return 0;
}

int cmd_rules_check(const std::string& path, const std::string& kb_path, std::ostream& out, std::ostream& err) {
    RuleSet rules = load_rules(path);
    KnowledgeBase kb = kb_path.empty() ? builtin_vocabulary() : load_kb(kb_path);
    // Detection is never run here; the context only supplies builtin signatures.
    ProcessingContext ctx(PointCloud{}, DetectionConfig{});
    auto v = validate_safety(rules, kb, make_registry(ctx));
    if (!v.empty()) {
        err << "rule validation failed:\n";
        print_violations(v, err);
        return 1;
    }
    out << rules.rules.size() << " rules OK\n";
    return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Knowledge-guided detection of building elements in point clouds"};
    app.name("kbdetect");
    app.require_subcommand(1);

    GenOpts gen;
    auto* g = app.add_subcommand("gen", "Generate a synthetic scene cloud and its truth KB");
    g->add_option("--spec", gen.spec, "Scene spec document")->required()->check(CLI::ExistingFile);
    g->add_option("--out", gen.out, "Output cloud (.xyz or .ply)")->required();
    g->add_option("--truth", gen.truth, "Output truth KB");
    g->add_option("--seed", gen.seed, "Overrides the scene seed");

    DetectOpts det;
    auto* d = app.add_subcommand("detect", "Run the detection pipeline");
    d->add_option("--mode", det.mode, "specific or generic")
        ->required()
        ->check(CLI::IsMember({"specific", "generic"}));
    d->add_option("--cloud", det.cloud, "Input cloud (.xyz or .ply)")->required()->check(CLI::ExistingFile);
    d->add_option("--kb", det.kb, "Input KB (priors for specific mode)")->check(CLI::ExistingFile);
    d->add_option("--rules", det.rules, "Rule file")->required()->check(CLI::ExistingFile);
    d->add_option("--out", det.out, "Report output")->required();
    d->add_option("--boxes", det.boxes, "Box mesh output (PLY)");
    d->add_option("--config", det.config, "DetectionConfig override document")->check(CLI::ExistingFile);
    d->add_option("--log", det.log, "Derivation log output");
    d->add_option("--seed", det.seed, "Run seed; detection itself draws no random numbers");

    EvalOpts ev;
    auto* e = app.add_subcommand("eval", "Score a report against a truth KB");
    e->add_option("--report", ev.report, "Report from detect")->required()->check(CLI::ExistingFile);
    e->add_option("--truth", ev.truth, "Truth KB from gen")->required()->check(CLI::ExistingFile);
    e->add_option("--min-iou", ev.min_iou, "IoU needed for a match")->check(CLI::Range(0.0, 1.0));

    std::string rules_file, rules_kb;
    auto* r = app.add_subcommand("rules-check", "Parse and validate a rule file");
    r->add_option("file", rules_file, "Rule file")->required()->check(CLI::ExistingFile);
    r->add_option("--kb", rules_kb, "Vocabulary KB (default: built-in)")->check(CLI::ExistingFile);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (g->parsed()) return cmd_gen(gen, out);
        if (d->parsed()) return cmd_detect(det, out, err);
        if (e->parsed()) return cmd_eval(ev, out);
        return cmd_rules_check(rules_file, rules_kb, out, err);
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
    }
    return 1;
}

}  // namespace kbd
