#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "kbd/cli.hpp"
#include "kbd/pipeline.hpp"
#include "kbd/scenegen.hpp"
#include "support.hpp"

using namespace kbd;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli_main(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string rules(const char* name) { return (testsupport::data_dir() / "rules" / name).string(); }

/// Generates the default scene once into a shared directory.
const fs::path& scene_dir() {
    static const fs::path dir = [] {
        auto d = testsupport::scratch("cli_scene");
        const auto r = run({"gen", "--spec", (testsupport::data_dir() / "scenes" / "default.scene").string(), "--out",
                            (d / "cloud.xyz").string(), "--truth", (d / "truth.kb").string(), "--seed", "42"});
        EXPECT_EQ(r.code, 0) << r.err;
        return d;
    }();
    return dir;
}

std::string cloud() { return (scene_dir() / "cloud.xyz").string(); }
std::string truth() { return (scene_dir() / "truth.kb").string(); }

}  // namespace

TEST(CliGen, WritesCloudAndTruth) {
    EXPECT_TRUE(fs::exists(cloud()));
    EXPECT_EQ(truth_boxes(load_kb(truth())).size(), 8u);
    EXPECT_NEAR(static_cast<double>(load_cloud(cloud()).size()), 239 * 500 * 0.9, 0.01 * 239 * 500 * 0.9);
}

TEST(CliGen, MissingSpecIsUsageError) {
    auto r = run({"gen", "--out", "x.xyz"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--spec"), std::string::npos);
}

TEST(CliGen, UnwritableOutput) {
    auto r = run({"gen", "--spec", (testsupport::data_dir() / "scenes" / "default.scene").string(), "--out",
                  "/nonexistent_dir/cloud.xyz"});
    EXPECT_EQ(r.code, 1);
    EXPECT_FALSE(r.err.empty());
}

TEST(CliGen, BadSpecDocument) {
    const auto d = testsupport::scratch("cli_badspec");
    spit(d / "bad.scene", R"({"density": -1, "objects": []})");
    auto r = run({"gen", "--spec", (d / "bad.scene").string(), "--out", (d / "c.xyz").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("density"), std::string::npos);
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"detect", "--mode", "sideways", "--cloud", cloud(), "--rules", rules("generic.wrl"), "--out", "x"}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(CliDetect, GenericHappyPathAndEval) {
    const auto d = testsupport::scratch("cli_generic");
    auto r = run({"detect", "--mode", "generic", "--cloud", cloud(), "--rules", rules("generic.wrl"), "--out",
                  (d / "report.json").string(), "--boxes", (d / "boxes.ply").string(), "--log",
                  (d / "log.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("8 boxes (8 annotated)"), std::string::npos) << r.out;
    EXPECT_TRUE(fs::exists(d / "boxes.ply"));
    EXPECT_TRUE(fs::exists(d / "log.json"));

    auto e = run({"eval", "--report", (d / "report.json").string(), "--truth", truth()});
    ASSERT_EQ(e.code, 0) << e.err;
    const auto res = evaluate_against_truth(load_report(d / "report.json").elements, truth_boxes(load_kb(truth())));
    EXPECT_EQ(e.out, res.table());
    for (const auto& c : res.classes) {
        EXPECT_EQ(c.precision, 1.0) << c.label;
        EXPECT_EQ(c.recall, 1.0) << c.label;
    }
}

TEST(CliDetect, ByteIdenticalReports) {
    const auto d = testsupport::scratch("cli_det");
    for (const char* name : {"a.json", "b.json"}) {
        auto r = run({"detect", "--mode", "generic", "--cloud", cloud(), "--rules", rules("generic.wrl"), "--out",
                      (d / name).string(), "--seed", "7"});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    EXPECT_EQ(slurp(d / "a.json"), slurp(d / "b.json"));
}

TEST(CliDetect, SpecificWithTruthPriors) {
    const auto d = testsupport::scratch("cli_specific");
    auto r = run({"detect", "--mode", "specific", "--cloud", cloud(), "--kb", truth(), "--rules",
                  rules("specific.wrl"), "--out", (d / "report.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("0 not found"), std::string::npos) << r.out;
}

TEST(CliDetect, SpecificWithoutPriors) {
    const auto d = testsupport::scratch("cli_nopriors");
    save_kb(builtin_vocabulary(), d / "empty.kb");
    auto r = run({"detect", "--mode", "specific", "--cloud", cloud(), "--kb", (d / "empty.kb").string(), "--rules",
                  rules("specific.wrl"), "--out", (d / "report.json").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("no priors"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(d / "report.json"));
}

TEST(CliDetect, SpecificNeedsKb) {
    auto r = run({"detect", "--mode", "specific", "--cloud", cloud(), "--rules", rules("specific.wrl"), "--out", "x"});
    EXPECT_EQ(r.code, 2);
}

TEST(CliDetect, SafetyViolationListed) {
    const auto d = testsupport::scratch("cli_unsafe");
    spit(d / "bad.wrl",
         "@stage geometry\nrule g: proc:Plane_Detection(Any, Vertical, Flat, Any, Any, Any, ?b) -> "
         "hasQualification(?b, Geometric)\n@stage topology\nrule t: BoundingBox(?a) -> isConnectedTo(?a, ?z)\n"
         "@stage semantic\nrule s: BoundingBox(?a) -> Wall(?a)\n");
    auto r = run({"detect", "--mode", "generic", "--cloud", cloud(), "--rules", (d / "bad.wrl").string(), "--out",
                  (d / "report.json").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("t:"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("?z"), std::string::npos) << r.err;
}

TEST(CliDetect, ConfigOverride) {
    const auto d = testsupport::scratch("cli_config");
    spit(d / "bad.json", R"({"min_votes": 0})");
    auto r = run({"detect", "--mode", "generic", "--cloud", cloud(), "--rules", rules("generic.wrl"), "--config",
                  (d / "bad.json").string(), "--out", (d / "r.json").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("min_votes"), std::string::npos) << r.err;
}

TEST(CliEval, EmptyReportAndUnknownLabel) {
    const auto d = testsupport::scratch("cli_eval");
    spit(d / "empty.json", R"({"elements": []})");
    auto r = run({"eval", "--report", (d / "empty.json").string(), "--truth", truth()});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("n/a"), std::string::npos);

    std::string kb = slurp(truth());
    kb.replace(kb.find("\"name\": \"Panel\""), 15, "\"name\": \"Kiosk\"");
    std::size_t pos;
    while ((pos = kb.find("\"Panel\"")) != std::string::npos) kb.replace(pos, 7, "\"Kiosk\"");
    spit(d / "odd.kb", kb);
    auto u = run({"eval", "--report", (d / "empty.json").string(), "--truth", (d / "odd.kb").string()});
    EXPECT_EQ(u.code, 1);
    EXPECT_NE(u.err.find("Kiosk"), std::string::npos) << u.err;
}

TEST(CliRulesCheck, ShippedAndBroken) {
    auto ok = run({"rules-check", rules("generic.wrl")});
    EXPECT_EQ(ok.code, 0) << ok.err;
    EXPECT_NE(ok.out.find("rules OK"), std::string::npos);
    const auto d = testsupport::scratch("cli_rules");
    spit(d / "syntax.wrl", "rule r: Wall(?x ->\n");
    auto bad = run({"rules-check", (d / "syntax.wrl").string()});
    EXPECT_EQ(bad.code, 1);
    EXPECT_FALSE(bad.err.empty());
}
