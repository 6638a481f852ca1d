#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kbd/knowledge.hpp"
#include "kbd/serialize.hpp"

namespace kbd {

using nlohmann::ordered_json;

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

ordered_json box_json(const BoundingBox& b) {
    ordered_json j;
    j["center"] = vec_json(b.center);
    j["axes"] = ordered_json::array({vec_json(b.u), vec_json(b.v), vec_json(b.w)});
    j["half_extents"] = vec_json(b.half);
    ordered_json corners = ordered_json::array();
    for (const auto& c : b.corners()) corners.push_back(vec_json(c));
    j["corners"] = std::move(corners);
    return j;
}

namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
    throw KnowledgeError(where + ": " + what);
}

const ordered_json& field(const ordered_json& obj, const char* key, const std::string& where) {
    if (!obj.is_object()) schema_error(where, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) schema_error(where, std::string("missing field '") + key + "'");
    return *it;
}

std::string string_field(const ordered_json& obj, const char* key, const std::string& where) {
    const auto& f = field(obj, key, where);
    if (!f.is_string()) schema_error(where + "." + key, "expected a string");
    return f.get<std::string>();
}

double number(const ordered_json& j, const std::string& where) {
    if (!j.is_number()) schema_error(where, "expected a number");
    return j.get<double>();
}

}  // namespace

Vec3 vec_from_json(const ordered_json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) schema_error(where, "expected an array of 3 numbers");
    return {number(j[0], where + "[0]"), number(j[1], where + "[1]"), number(j[2], where + "[2]")};
}

BoundingBox box_from_json(const ordered_json& j, const std::string& where) {
    BoundingBox b;
    b.center = vec_from_json(field(j, "center", where), where + ".center");
    const auto& axes = field(j, "axes", where);
    if (!axes.is_array() || axes.size() != 3) schema_error(where + ".axes", "expected 3 axes");
    b.u = vec_from_json(axes[0], where + ".axes[0]");
    b.v = vec_from_json(axes[1], where + ".axes[1]");
    b.w = vec_from_json(axes[2], where + ".axes[2]");
    b.half = vec_from_json(field(j, "half_extents", where), where + ".half_extents");
    if (!b.is_valid(1e-6)) schema_error(where, "axes must be orthonormal with w up and extents positive");
    return b;
}

ordered_json value_json(const Value& v) {
    ordered_json j;
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Ref>) j["ref"] = x.name;
            else if constexpr (std::is_same_v<T, std::string>) j["string"] = x;
            else if constexpr (std::is_same_v<T, std::int64_t>) j["int"] = x;
            else if constexpr (std::is_same_v<T, double>) j["real"] = x;
            else if constexpr (std::is_same_v<T, bool>) j["bool"] = x;
            else if constexpr (std::is_same_v<T, Vec2>) j["point2"] = ordered_json::array({x.x(), x.y()});
            else j["box"] = box_json(x);
        },
        v);
    return j;
}

Value value_from_json(const ordered_json& j, const std::string& where) {
    if (!j.is_object() || j.size() != 1) schema_error(where, "expected an object with exactly one value tag");
    const auto it = j.begin();
    const std::string tag = it.key();
    const ordered_json& x = it.value();
    const std::string at = where + "." + tag;
    if (tag == "ref") {
        if (!x.is_string()) schema_error(at, "expected a string");
        return Ref{x.get<std::string>()};
    }
    if (tag == "string") {
        if (!x.is_string()) schema_error(at, "expected a string");
        return x.get<std::string>();
    }
    if (tag == "int") {
        if (!x.is_number_integer()) schema_error(at, "expected an integer");
        return x.get<std::int64_t>();
    }
    if (tag == "real") return number(x, at);
    if (tag == "bool") {
        if (!x.is_boolean()) schema_error(at, "expected a boolean");
        return x.get<bool>();
    }
    if (tag == "point2") {
        if (!x.is_array() || x.size() != 2) schema_error(at, "expected an array of 2 numbers");
        return Vec2(number(x[0], at + "[0]"), number(x[1], at + "[1]"));
    }
    if (tag == "box") return box_from_json(x, at);
    schema_error(where, "unknown value tag '" + tag + "'");
}

std::string kb_to_json(const KnowledgeBase& kb) {
    ordered_json doc;
    ordered_json classes = ordered_json::array();
    for (const auto& c : kb.classes()) {
        ordered_json j;
        j["name"] = c.name;
        if (c.superclass) j["superclass"] = *c.superclass;
        if (!c.disjoint_with.empty()) j["disjointWith"] = c.disjoint_with;
        classes.push_back(std::move(j));
    }
    ordered_json props = ordered_json::array();
    for (const auto& p : kb.properties())
        props.push_back({{"name", p.name}, {"kind", p.kind == PropertyKind::Object ? "object" : "data"}});
    ordered_json inds = ordered_json::array();
    for (const auto& i : kb.individuals()) inds.push_back({{"name", i.name}, {"classes", i.classes}});
    ordered_json asserts = ordered_json::array();
    for (const auto& a : kb.assertions())
        asserts.push_back({{"subject", a.subject}, {"property", a.property}, {"object", value_json(a.object)}});
    doc["classes"] = std::move(classes);
    doc["properties"] = std::move(props);
    doc["individuals"] = std::move(inds);
    doc["assertions"] = std::move(asserts);
    return doc.dump(2) + "\n";
}

KnowledgeBase kb_from_json(const std::string& text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw KnowledgeError(std::string("malformed KB document: ") + e.what());
    }
    if (!doc.is_object()) schema_error("document", "expected an object");
    for (const auto& [key, _] : doc.items())
        if (key != "classes" && key != "properties" && key != "individuals" && key != "assertions")
            schema_error("document", "unknown section '" + key + "'");

    auto section = [&](const char* name) -> ordered_json {
        auto it = doc.find(name);
        if (it == doc.end()) return ordered_json::array();
        if (!it->is_array()) schema_error(name, "expected an array");
        return *it;
    };

    KnowledgeBase kb;
    const auto classes = section("classes");
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const std::string where = "classes[" + std::to_string(i) + "]";
        ClassDef def;
        def.name = string_field(classes[i], "name", where);
        if (classes[i].contains("superclass")) def.superclass = string_field(classes[i], "superclass", where);
        if (classes[i].contains("disjointWith")) {
            const auto& d = classes[i]["disjointWith"];
            if (!d.is_array()) schema_error(where + ".disjointWith", "expected an array");
            for (std::size_t k = 0; k < d.size(); ++k) {
                if (!d[k].is_string()) schema_error(where + ".disjointWith[" + std::to_string(k) + "]", "expected a string");
                def.disjoint_with.push_back(d[k].get<std::string>());
            }
        }
        try {
            kb.insert_class_raw(std::move(def));
        } catch (const KnowledgeError& e) {
            schema_error(where, e.what());
        }
    }
    for (std::size_t i = 0; i < kb.classes().size(); ++i) {
        const auto& c = kb.classes()[i];
        const std::string where = "classes[" + std::to_string(i) + "]";
        if (c.superclass && !kb.has_class(*c.superclass))
            schema_error(where + ".superclass", "unknown class '" + *c.superclass + "'");
        const ClassDef* top = kb.find_class(kb.ancestry(c.name).back());
        if (top->superclass && kb.has_class(*top->superclass))
            schema_error(where, "taxonomy cycle through '" + c.name + "'");
        for (const auto& d : c.disjoint_with)
            if (!kb.has_class(d)) schema_error(where + ".disjointWith", "unknown class '" + d + "'");
    }

    const auto props = section("properties");
    for (std::size_t i = 0; i < props.size(); ++i) {
        const std::string where = "properties[" + std::to_string(i) + "]";
        const std::string name = string_field(props[i], "name", where);
        const std::string kind = string_field(props[i], "kind", where);
        if (kind != "object" && kind != "data")
            schema_error(where + ".kind", "unknown property kind '" + kind + "' (expected object or data)");
        try {
            kb.declare_property(name, kind == "object" ? PropertyKind::Object : PropertyKind::Data);
        } catch (const KnowledgeError& e) {
            schema_error(where, e.what());
        }
    }

    const auto inds = section("individuals");
    for (std::size_t i = 0; i < inds.size(); ++i) {
        const std::string where = "individuals[" + std::to_string(i) + "]";
        Individual ind;
        ind.name = string_field(inds[i], "name", where);
        if (ind.name.empty()) schema_error(where + ".name", "must not be empty");
        if (inds[i].contains("classes")) {
            const auto& cs = inds[i]["classes"];
            if (!cs.is_array()) schema_error(where + ".classes", "expected an array");
            for (std::size_t k = 0; k < cs.size(); ++k) {
                if (!cs[k].is_string()) schema_error(where + ".classes[" + std::to_string(k) + "]", "expected a string");
                const std::string c = cs[k].get<std::string>();
                if (!kb.has_class(c)) schema_error(where + ".classes[" + std::to_string(k) + "]", "unknown class '" + c + "'");
                ind.classes.push_back(c);
            }
        }
        try {
            kb.insert_individual_raw(ind);
        } catch (const KnowledgeError& e) {
            schema_error(where, e.what());
        }
        // Documents may list only the leaf class; close upward.
        for (const auto& c : ind.classes) kb.assert_class(ind.name, c);
    }

    const auto asserts = section("assertions");
    for (std::size_t i = 0; i < asserts.size(); ++i) {
        const std::string where = "assertions[" + std::to_string(i) + "]";
        Assertion a;
        a.subject = string_field(asserts[i], "subject", where);
        a.property = string_field(asserts[i], "property", where);
        if (!kb.has_property(a.property)) schema_error(where + ".property", "undeclared property '" + a.property + "'");
        a.object = value_from_json(field(asserts[i], "object", where), where + ".object");
        kb.insert_assertion_raw(std::move(a));
    }
    return kb;
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw KnowledgeError("cannot open KB file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return kb_from_json(ss.str());
    } catch (const KnowledgeError& e) {
        throw KnowledgeError(path.string() + ": " + e.what());
    }
}

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw KnowledgeError("cannot write KB file " + path.string());
    out << kb_to_json(kb);
    if (!out) throw KnowledgeError("write failed for " + path.string());
}

}  // namespace kbd
