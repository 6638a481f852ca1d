#include "kbd/knowledge.hpp"

#include <algorithm>

namespace kbd {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string assertion_key(const std::string& s, const std::string& p, const Value& o) {
    return s + '\x1f' + p + '\x1f' + value_key(o);
}

}  // namespace

std::string format_assertion(const Assertion& a) {
    return a.property + "(" + a.subject + ", " + display(a.object) + ")";
}

void KnowledgeBase::define_class(const std::string& name, std::optional<std::string> superclass) {
    if (name.empty()) throw KnowledgeError("class name must not be empty");
    if (has_class(name)) throw KnowledgeError("class '" + name + "' already defined");
    if (superclass && !has_class(*superclass))
        throw KnowledgeError("class '" + name + "': unknown superclass '" + *superclass + "'");
    class_index_[name] = classes_.size();
    classes_.push_back({name, std::move(superclass), {}});
}

void KnowledgeBase::insert_class_raw(ClassDef def) {
    if (has_class(def.name)) throw KnowledgeError("class '" + def.name + "' already defined");
    class_index_[def.name] = classes_.size();
    classes_.push_back(std::move(def));
}

void KnowledgeBase::declare_disjoint(const std::string& a, const std::string& b) {
    if (!has_class(a)) throw KnowledgeError("unknown class '" + a + "'");
    if (!has_class(b)) throw KnowledgeError("unknown class '" + b + "'");
    if (a == b) throw KnowledgeError("class '" + a + "' cannot be disjoint with itself");
    auto add = [](std::vector<std::string>& list, const std::string& c) {
        if (std::find(list.begin(), list.end(), c) == list.end()) list.push_back(c);
    };
    add(classes_[class_index_[a]].disjoint_with, b);
    add(classes_[class_index_[b]].disjoint_with, a);
}

void KnowledgeBase::declare_property(const std::string& name, PropertyKind kind) {
    if (name.empty()) throw KnowledgeError("property name must not be empty");
    if (auto it = property_index_.find(name); it != property_index_.end()) {
        if (properties_[it->second].kind != kind)
            throw KnowledgeError("property '" + name + "' redeclared with a different kind");
        return;
    }
    property_index_[name] = properties_.size();
    properties_.push_back({name, kind});
}

std::optional<PropertyKind> KnowledgeBase::property_kind(const std::string& name) const {
    auto it = property_index_.find(name);
    if (it == property_index_.end()) return std::nullopt;
    return properties_[it->second].kind;
}

const ClassDef* KnowledgeBase::find_class(const std::string& name) const {
    auto it = class_index_.find(name);
    return it == class_index_.end() ? nullptr : &classes_[it->second];
}

std::vector<std::string> KnowledgeBase::ancestry(const std::string& cls) const {
    std::vector<std::string> out;
    const ClassDef* c = find_class(cls);
    // Raw-loaded documents could in principle carry a cycle; stop on revisit.
    while (c && std::find(out.begin(), out.end(), c->name) == out.end()) {
        out.push_back(c->name);
        c = c->superclass ? find_class(*c->superclass) : nullptr;
    }
    return out;
}

bool KnowledgeBase::is_subclass_of(const std::string& sub, const std::string& super) const {
    const auto chain = ancestry(sub);
    return std::find(chain.begin(), chain.end(), super) != chain.end();
}

bool KnowledgeBase::are_disjoint(const std::string& a, const std::string& b) const {
    const auto chain_a = ancestry(a);
    const auto chain_b = ancestry(b);
    for (const auto& x : chain_a) {
        const ClassDef* cx = find_class(x);
        for (const auto& y : chain_b) {
            const ClassDef* cy = find_class(y);
            auto lists = [](const ClassDef* c, const std::string& other) {
                return std::find(c->disjoint_with.begin(), c->disjoint_with.end(), other) != c->disjoint_with.end();
            };
            if (lists(cx, y) || lists(cy, x)) return true;
        }
    }
    return false;
}

bool KnowledgeBase::add_individual(const std::string& name) {
    if (name.empty()) throw KnowledgeError("individual name must not be empty");
    if (has_individual(name)) return false;
    individual_index_[name] = individuals_.size();
    individuals_.push_back({name, {}});
    return true;
}

bool KnowledgeBase::assert_class(const std::string& individual, const std::string& cls) {
    if (!has_class(cls)) throw KnowledgeError("unknown class '" + cls + "'");
    bool changed = add_individual(individual);
    auto& classes = individuals_[individual_index_[individual]].classes;
    for (const auto& c : ancestry(cls)) {
        if (std::find(classes.begin(), classes.end(), c) == classes.end()) {
            classes.push_back(c);
            ++membership_count_;
            changed = true;
        }
    }
    return changed;
}

bool KnowledgeBase::assert_fact(const Assertion& a) {
    const auto kind = property_kind(a.property);
    if (!kind) throw KnowledgeError("undeclared property '" + a.property + "'");
    if (!has_individual(a.subject))
        throw KnowledgeError(a.property + ": unknown subject '" + a.subject + "'");
    const Ref* ref = std::get_if<Ref>(&a.object);
    if (*kind == PropertyKind::Object) {
        if (!ref)
            throw KnowledgeError(a.property + " is an object property but got a " + kind_name(a.object) + " value");
        if (!has_individual(ref->name))
            throw KnowledgeError(a.property + ": unknown object '" + ref->name + "'");
    } else if (ref) {
        throw KnowledgeError(a.property + " is a data property but got individual '" + ref->name + "'");
    }
    return insert_assertion_raw(a);
}

bool KnowledgeBase::insert_assertion_raw(Assertion a) {
    if (!assertion_keys_.insert(assertion_key(a.subject, a.property, a.object)).second) return false;
    by_property_[a.property].push_back(assertions_.size());
    assertions_.push_back(std::move(a));
    return true;
}

void KnowledgeBase::insert_individual_raw(Individual ind) {
    if (has_individual(ind.name)) throw KnowledgeError("individual '" + ind.name + "' already defined");
    individual_index_[ind.name] = individuals_.size();
    membership_count_ += ind.classes.size();
    individuals_.push_back(std::move(ind));
}

void KnowledgeBase::remove_individual(const std::string& name) {
    auto it = individual_index_.find(name);
    if (it == individual_index_.end()) return;
    membership_count_ -= individuals_[it->second].classes.size();
    individuals_.erase(individuals_.begin() + static_cast<std::ptrdiff_t>(it->second));
    individual_index_.clear();
    for (std::size_t i = 0; i < individuals_.size(); ++i) individual_index_[individuals_[i].name] = i;
}

bool KnowledgeBase::is_instance(const std::string& individual, const std::string& cls) const {
    const Individual* ind = find_individual(individual);
    return ind && std::find(ind->classes.begin(), ind->classes.end(), cls) != ind->classes.end();
}

const Individual* KnowledgeBase::find_individual(const std::string& name) const {
    auto it = individual_index_.find(name);
    return it == individual_index_.end() ? nullptr : &individuals_[it->second];
}

const std::vector<std::size_t>& KnowledgeBase::assertions_of(const std::string& property) const {
    static const std::vector<std::size_t> none;
    auto it = by_property_.find(property);
    return it == by_property_.end() ? none : it->second;
}

std::vector<Value> KnowledgeBase::values(const std::string& subject, const std::string& property) const {
    std::vector<Value> out;
    for (std::size_t i : assertions_of(property))
        if (assertions_[i].subject == subject) out.push_back(assertions_[i].object);
    return out;
}

std::optional<Value> KnowledgeBase::first_value(const std::string& subject, const std::string& property) const {
    for (std::size_t i : assertions_of(property))
        if (assertions_[i].subject == subject) return assertions_[i].object;
    return std::nullopt;
}

bool KnowledgeBase::holds(const std::string& subject, const std::string& property, const Value& object) const {
    return assertion_keys_.count(assertion_key(subject, property, object)) > 0;
}

// ---------------------------------------------------------------------------

KnowledgeBase builtin_vocabulary() {
    KnowledgeBase kb;
    kb.define_class("Semantic_Object");
    for (const char* c : {"Building", "Wall", "Door", "Window", "Ground", "Panel", "Gate_Counter"})
        kb.define_class(c, "Semantic_Object");
    for (const char* c : {"Geometric_Component", "BoundingBox", "Color", "Size", "Orientation", "Visibility", "Texture"})
        kb.define_class(c);
    const auto& leaves = annotated_classes();
    for (std::size_t i = 0; i < leaves.size(); ++i)
        for (std::size_t j = i + 1; j < leaves.size(); ++j) kb.declare_disjoint(leaves[i], leaves[j]);

    for (const char* p : {"has_Geometric_Component", "has_Bounding_Box", "has_Color", "has_Size", "has_Orientation",
                          "has_Visibility", "has_Texture", "isPerpendicularTo", "isConnectedTo", "isParallelTo"})
        kb.declare_property(p, PropertyKind::Object);
    for (const char* p : {"hasPosition", "hasHeight", "hasQualification", "hasDetectionRes", "hasOrientation",
                          "hasSize", "hasTexture", "hasPlanarity", "hasBoxGeometry"})
        kb.declare_property(p, PropertyKind::Data);
    return kb;
}

const std::vector<std::string>& annotated_classes() {
    static const std::vector<std::string> names{"Wall", "Ground", "Panel", "Gate_Counter"};
    return names;
}

// ---------------------------------------------------------------------------

std::string format_term(const Term& t) {
    return std::visit(overloaded{[](const Variable& v) { return "?" + v.name; },
                                 [](const Symbol& s) { return s.name; },
                                 [](const Value& v) {
                                     if (const auto* s = std::get_if<std::string>(&v)) return "\"" + *s + "\"";
                                     return display(v);
                                 }},
                      t);
}

std::string format_atom(const Atom& a) {
    return std::visit(overloaded{[](const ClassAtom& c) { return c.cls + "(" + format_term(c.arg) + ")"; },
                                 [](const PropertyAtom& p) {
                                     return p.property + "(" + format_term(p.subject) + ", " + format_term(p.object) +
                                            ")";
                                 },
                                 [](const BuiltinAtom& b) {
                                     std::string s = b.ns + ":" + b.name + "(";
                                     for (std::size_t i = 0; i < b.args.size(); ++i)
                                         s += (i ? ", " : "") + format_term(b.args[i]);
                                     return s + ")";
                                 }},
                      a);
}

std::string format_binding(const Binding& b) {
    std::string s = "{";
    bool first = true;
    for (const auto& [k, v] : b) {
        s += (first ? "" : ", ") + k + ": " + display(v);
        first = false;
    }
    return s + "}";
}

Value resolve_term(const KnowledgeBase& kb, const Term& t, bool individual_position) {
    (void)kb;
    if (const auto* s = std::get_if<Symbol>(&t)) {
        if (individual_position) return Ref{s->name};
        return s->name;
    }
    if (const auto* v = std::get_if<Value>(&t)) return *v;
    throw QueryError("unbound variable ?" + std::get<Variable>(t).name);
}

namespace {

/// Value of `t` under `b`, or nullopt for an unbound variable.
std::optional<Value> bound_value(const KnowledgeBase& kb, const Term& t, const Binding& b, bool individual_position) {
    if (const auto* v = std::get_if<Variable>(&t)) {
        auto it = b.find(v->name);
        if (it == b.end()) return std::nullopt;
        return it->second;
    }
    return resolve_term(kb, t, individual_position);
}

bool same_individual(const Value& v, const std::string& name) {
    const Ref* r = std::get_if<Ref>(&v);
    return r && r->name == name;
}

}  // namespace

void match_atom(const KnowledgeBase& kb, const Atom& atom, const Binding& binding,
                const std::function<void(const Binding&)>& emit) {
    if (const auto* ca = std::get_if<ClassAtom>(&atom)) {
        if (!kb.has_class(ca->cls)) throw QueryError("unknown class '" + ca->cls + "'");
        if (auto v = bound_value(kb, ca->arg, binding, true)) {
            const Ref* r = std::get_if<Ref>(&*v);
            if (r && kb.is_instance(r->name, ca->cls)) emit(binding);
            return;
        }
        const std::string var = std::get<Variable>(ca->arg).name;
        const std::size_t n = kb.individuals().size();
        for (std::size_t i = 0; i < n; ++i) {
            const Individual& ind = kb.individuals()[i];
            if (std::find(ind.classes.begin(), ind.classes.end(), ca->cls) == ind.classes.end()) continue;
            Binding next = binding;
            next[var] = Ref{ind.name};
            emit(next);
        }
        return;
    }
    if (const auto* pa = std::get_if<PropertyAtom>(&atom)) {
        const auto kind = kb.property_kind(pa->property);
        if (!kind) throw QueryError("undeclared property '" + pa->property + "'");
        const auto subj = bound_value(kb, pa->subject, binding, true);
        const auto obj = bound_value(kb, pa->object, binding, *kind == PropertyKind::Object);
        if (subj && !std::holds_alternative<Ref>(*subj)) return;
        const auto& index = kb.assertions_of(pa->property);
        const std::size_t n = index.size();
        for (std::size_t k = 0; k < n; ++k) {
            // Copy before emit: emit may grow the assertion vector.
            const Assertion a = kb.assertions()[index[k]];
            if (subj && !same_individual(*subj, a.subject)) continue;
            if (obj && !values_equal(*obj, a.object)) continue;
            Binding next = binding;
            if (!subj) next[std::get<Variable>(pa->subject).name] = Ref{a.subject};
            if (!obj) {
                const std::string& ov = std::get<Variable>(pa->object).name;
                // ?x used as both subject and object must agree.
                if (auto it = next.find(ov); it != next.end()) {
                    if (!values_equal(it->second, a.object)) continue;
                } else {
                    next[ov] = a.object;
                }
            }
            emit(next);
        }
        return;
    }
    throw QueryError("built-in atom " + format_atom(atom) + " cannot be matched against the KB");
}

std::vector<Binding> query_pattern(const KnowledgeBase& kb, const std::vector<Atom>& pattern) {
    if (pattern.empty()) throw QueryError("empty pattern");
    std::vector<Binding> current{Binding{}};
    for (const auto& atom : pattern) {
        std::vector<Binding> next;
        for (const auto& b : current) match_atom(kb, atom, b, [&](const Binding& nb) { next.push_back(nb); });
        current = std::move(next);
        if (current.empty()) break;
    }
    return current;
}

// ---------------------------------------------------------------------------

std::string to_string(Violation::Kind k) {
    switch (k) {
        case Violation::Kind::DanglingReference: return "dangling-reference";
        case Violation::Kind::TypeMismatch: return "type-mismatch";
        case Violation::Kind::UndeclaredProperty: return "undeclared-property";
        case Violation::Kind::Disjointness: return "disjointness";
        case Violation::Kind::UnknownClass: return "unknown-class";
    }
    return "unknown";
}

std::vector<Violation> check_consistency(const KnowledgeBase& kb) {
    using K = Violation::Kind;
    std::vector<Violation> out;
    for (const auto& c : kb.classes()) {
        if (c.superclass && !kb.has_class(*c.superclass))
            out.push_back({K::UnknownClass, "class " + c.name + ": unknown superclass " + *c.superclass});
        for (const auto& d : c.disjoint_with)
            if (!kb.has_class(d)) out.push_back({K::UnknownClass, "class " + c.name + ": disjoint with unknown " + d});
    }
    for (const auto& ind : kb.individuals()) {
        for (const auto& c : ind.classes)
            if (!kb.has_class(c)) out.push_back({K::UnknownClass, ind.name + ": unknown class " + c});
        for (std::size_t i = 0; i < ind.classes.size(); ++i)
            for (std::size_t j = i + 1; j < ind.classes.size(); ++j) {
                const auto& a = ind.classes[i];
                const auto& b = ind.classes[j];
                if (!kb.has_class(a) || !kb.has_class(b)) continue;
                const ClassDef* ca = kb.find_class(a);
                const ClassDef* cb = kb.find_class(b);
                // Only report the directly declared pair; inherited
                // disjointness would repeat the same conflict per ancestor.
                const bool direct =
                    std::find(ca->disjoint_with.begin(), ca->disjoint_with.end(), b) != ca->disjoint_with.end() ||
                    std::find(cb->disjoint_with.begin(), cb->disjoint_with.end(), a) != cb->disjoint_with.end();
                if (direct) out.push_back({K::Disjointness, ind.name + " is both " + a + " and " + b});
            }
    }
    for (const auto& a : kb.assertions()) {
        const auto kind = kb.property_kind(a.property);
        if (!kind) {
            out.push_back({K::UndeclaredProperty, format_assertion(a) + ": undeclared property"});
            continue;
        }
        if (!kb.has_individual(a.subject))
            out.push_back({K::DanglingReference, format_assertion(a) + ": unknown subject " + a.subject});
        const Ref* ref = std::get_if<Ref>(&a.object);
        if (*kind == PropertyKind::Object && !ref)
            out.push_back({K::TypeMismatch, format_assertion(a) + ": object property with a data value"});
        if (*kind == PropertyKind::Data && ref)
            out.push_back({K::TypeMismatch, format_assertion(a) + ": data property with an individual"});
        if (ref && !kb.has_individual(ref->name))
            out.push_back({K::DanglingReference, format_assertion(a) + ": unknown object " + ref->name});
    }
    return out;
}

}  // namespace kbd
