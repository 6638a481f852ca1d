#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kbd/pipeline.hpp"
#include "kbd/serialize.hpp"

namespace kbd {

using nlohmann::ordered_json;

namespace {

ordered_json element_json(const DetectedElement& e) {
    ordered_json j;
    j["id"] = e.id;
    j["qualification"] = e.qualification;
    j["class"] = e.class_label ? ordered_json(*e.class_label) : ordered_json(nullptr);
    j["owner"] = e.owner ? ordered_json(*e.owner) : ordered_json(nullptr);
    j["box"] = box_json(e.box);
    ordered_json p;
    p["branch"] = e.provenance.branch;
    p["rules"] = e.provenance.rules;
    p["enlargements"] = e.provenance.enlargements;
    j["provenance"] = std::move(p);
    return j;
}

ordered_json derivation_json(const DerivationLog& log) {
    ordered_json j;
    j["status"] = to_string(log.status);
    j["passes"] = log.passes;
    j["builtin_calls"] = log.builtin_calls;
    j["memo_hits"] = log.memo_hits;
    j["facts_added"] = log.facts_added;
    ordered_json firings = ordered_json::array();
    for (const auto& f : log.firings) {
        ordered_json e;
        e["pass"] = f.pass;
        e["rule"] = f.rule;
        ordered_json b = ordered_json::object();
        for (const auto& [k, v] : f.binding) b["?" + k] = display(v);
        e["binding"] = std::move(b);
        e["builtins"] = f.builtin_calls;
        e["new_facts"] = f.new_facts;
        if (f.effect_only) e["effect_only"] = true;
        firings.push_back(std::move(e));
    }
    j["firings"] = std::move(firings);
    ordered_json failures = ordered_json::array();
    for (const auto& f : log.failures)
        failures.push_back({{"pass", f.pass}, {"rule", f.rule}, {"atom", f.atom}, {"message", f.message}});
    j["failures"] = std::move(failures);
    return j;
}

}  // namespace

std::string RunReport::to_json(bool include_timings) const {
    ordered_json j;
    j["mode"] = mode;
    ordered_json els = ordered_json::array();
    for (const auto& e : elements) els.push_back(element_json(e));
    j["elements"] = std::move(els);
    ordered_json nf = ordered_json::array();
    for (const auto& n : not_found) nf.push_back({{"individual", n.individual}, {"enlargements", n.enlargements}});
    j["not_found"] = std::move(nf);

    ordered_json s;
    s["elements"] = elements.size();
    std::size_t semantic = 0;
    for (const auto& e : elements) semantic += e.class_label ? 1 : 0;
    s["semantic"] = semantic;
    s["iterations"] = iterations;
    s["geometry_runs"] = geometry_runs;
    s["geometry_memo_hits"] = geometry_memo_hits;
    s["firings"] = log.firings.size();
    s["failures"] = log.failures.size();
    s["status"] = to_string(log.status);
    j["summary"] = std::move(s);

    if (include_timings) {
        ordered_json t = ordered_json::object();
        for (const auto& st : timings) t[st.stage] = st.seconds;
        j["timings"] = std::move(t);
    }
    j["derivation"] = derivation_json(log);
    ordered_json v = ordered_json::array();
    for (const auto& x : violations) v.push_back({{"kind", to_string(x.kind)}, {"message", x.message}});
    j["violations"] = std::move(v);
    return j.dump(2) + "\n";
}

std::string RunReport::log_json() const { return derivation_json(log).dump(2) + "\n"; }

RunReport report_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw PipelineError(std::string("malformed report: ") + e.what());
    }
    if (!j.is_object() || !j.contains("elements") || !j["elements"].is_array())
        throw PipelineError("report: 'elements' must be an array");
    RunReport r;
    if (j.contains("mode") && j["mode"].is_string()) r.mode = j["mode"].get<std::string>();
    try {
        for (std::size_t i = 0; i < j["elements"].size(); ++i) {
            const auto& e = j["elements"][i];
            const std::string where = "elements[" + std::to_string(i) + "]";
            if (!e.is_object() || !e.contains("id") || !e["id"].is_string() || !e.contains("box"))
                throw PipelineError(where + ": expected an object with id and box");
            DetectedElement d;
            d.id = e["id"].get<std::string>();
            d.box = box_from_json(e["box"], where + ".box");
            if (e.contains("class") && e["class"].is_string()) d.class_label = e["class"].get<std::string>();
            if (e.contains("owner") && e["owner"].is_string()) d.owner = e["owner"].get<std::string>();
            d.qualification = e.value("qualification", d.class_label ? "Semantic" : "Geometric");
            r.elements.push_back(std::move(d));
        }
    } catch (const KnowledgeError& e) {
        throw PipelineError(std::string("report: ") + e.what());
    }
    return r;
}

RunReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PipelineError("cannot open report " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return report_from_json(ss.str());
}

void write_boxes_ply(const std::vector<DetectedElement>& elements, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PipelineError("cannot write " + path.string());
    // corner index = 4*(u sign) + 2*(v sign) + (w sign)
    static const int faces[12][3] = {{0, 1, 3}, {0, 3, 2}, {4, 6, 7}, {4, 7, 5}, {0, 4, 5}, {0, 5, 1},
                                     {2, 3, 7}, {2, 7, 6}, {0, 2, 6}, {0, 6, 4}, {1, 5, 7}, {1, 7, 3}};
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << 8 * elements.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    out << "element face " << 12 * elements.size() << "\n";
    out << "property list uchar int vertex_indices\nend_header\n";
    out.precision(9);
    for (const auto& e : elements)
        for (const auto& c : e.box.corners()) out << c.x() << ' ' << c.y() << ' ' << c.z() << '\n';
    for (std::size_t k = 0; k < elements.size(); ++k)
        for (const auto& f : faces)
            out << "3 " << 8 * k + f[0] << ' ' << 8 * k + f[1] << ' ' << 8 * k + f[2] << '\n';
}

}  // namespace kbd
