#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "kbd/value.hpp"

namespace kbd {

class KnowledgeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PropertyKind { Object, Data };

struct ClassDef {
    std::string name;
    std::optional<std::string> superclass;
    /// Classes no individual may share with this one.
    std::vector<std::string> disjoint_with;
};

struct PropertyDecl {
    std::string name;
    PropertyKind kind = PropertyKind::Data;
};

struct Individual {
    std::string name;
    /// Upward closed under the taxonomy, in assertion order.
    std::vector<std::string> classes;
};

struct Assertion {
    std::string subject;
    std::string property;
    Value object;
};

std::string format_assertion(const Assertion& a);

/// Classes, property declarations, individuals and property assertions.
/// Everything iterates in insertion order and duplicate facts collapse.
/// Nothing is ever retracted through assert_* calls.
class KnowledgeBase {
public:
    void define_class(const std::string& name, std::optional<std::string> superclass = std::nullopt);
    /// Declares `a` and `b` disjoint (symmetric).
    void declare_disjoint(const std::string& a, const std::string& b);
    void declare_property(const std::string& name, PropertyKind kind);

    bool has_class(const std::string& name) const { return class_index_.count(name) > 0; }
    bool has_property(const std::string& name) const { return property_index_.count(name) > 0; }
    bool has_individual(const std::string& name) const { return individual_index_.count(name) > 0; }
    std::optional<PropertyKind> property_kind(const std::string& name) const;
    const ClassDef* find_class(const std::string& name) const;

    /// `cls` followed by its ancestors up to the root.
    std::vector<std::string> ancestry(const std::string& cls) const;
    bool is_subclass_of(const std::string& sub, const std::string& super) const;
    bool are_disjoint(const std::string& a, const std::string& b) const;

    /// Adds an individual with no classes; false if it already existed.
    bool add_individual(const std::string& name);
    /// Class assertion; introduces the individual when needed and adds every
    /// superclass. Returns whether anything was new.
    bool assert_class(const std::string& individual, const std::string& cls);
    /// Property assertion with referential and kind checks. Returns whether
    /// the fact was new.
    bool assert_fact(const Assertion& a);

    /// Drops an individual but keeps assertions that mention it; they show up
    /// as dangling references in check_consistency.
    void remove_individual(const std::string& name);

    bool is_instance(const std::string& individual, const std::string& cls) const;
    const Individual* find_individual(const std::string& name) const;

    const std::vector<ClassDef>& classes() const { return classes_; }
    const std::vector<PropertyDecl>& properties() const { return properties_; }
    const std::vector<Individual>& individuals() const { return individuals_; }
    const std::vector<Assertion>& assertions() const { return assertions_; }
    /// Indices into assertions() for one property, in insertion order.
    const std::vector<std::size_t>& assertions_of(const std::string& property) const;

    std::vector<Value> values(const std::string& subject, const std::string& property) const;
    std::optional<Value> first_value(const std::string& subject, const std::string& property) const;
    bool holds(const std::string& subject, const std::string& property, const Value& object) const;

    /// Class memberships plus property assertions.
    std::size_t fact_count() const { return membership_count_ + assertions_.size(); }

    /// Bulk loading without referential checks (documents may be dangling).
    void insert_class_raw(ClassDef def);
    void insert_individual_raw(Individual ind);
    bool insert_assertion_raw(Assertion a);

private:
    std::vector<ClassDef> classes_;
    std::unordered_map<std::string, std::size_t> class_index_;
    std::vector<PropertyDecl> properties_;
    std::unordered_map<std::string, std::size_t> property_index_;
    std::vector<Individual> individuals_;
    std::unordered_map<std::string, std::size_t> individual_index_;
    std::vector<Assertion> assertions_;
    std::unordered_set<std::string> assertion_keys_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_property_;
    std::size_t membership_count_ = 0;
};

/// The seeded scene vocabulary: semantic classes under Semantic_Object
/// (Wall, Ground, Panel and Gate_Counter pairwise disjoint), geometry and
/// descriptor classes, and the object/data properties used by the rules.
KnowledgeBase builtin_vocabulary();

/// The four semantic leaf classes the detectors annotate.
const std::vector<std::string>& annotated_classes();

// ---------------------------------------------------------------------------
// Pattern queries

struct Variable {
    std::string name;
    bool operator==(const Variable&) const = default;
};
/// Bare identifier in a pattern: an individual where an individual is
/// expected, otherwise a string tag.
struct Symbol {
    std::string name;
    bool operator==(const Symbol&) const = default;
};
using Term = std::variant<Variable, Symbol, Value>;

struct ClassAtom {
    std::string cls;
    Term arg;
};
struct PropertyAtom {
    std::string property;
    Term subject;
    Term object;
};
struct BuiltinAtom {
    std::string ns;
    std::string name;
    std::vector<Term> args;
};
using Atom = std::variant<ClassAtom, PropertyAtom, BuiltinAtom>;

using Binding = std::map<std::string, Value>;

std::string format_term(const Term& t);
std::string format_atom(const Atom& a);
std::string format_binding(const Binding& b);

class QueryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Calls `emit` for every extension of `binding` that satisfies the class or
/// property atom. Iterates by index over a size snapshot, so `emit` may add
/// facts to `kb` without invalidating the scan.
void match_atom(const KnowledgeBase& kb, const Atom& atom, const Binding& binding,
                const std::function<void(const Binding&)>& emit);

/// All bindings satisfying the conjunction, atoms joined left to right.
std::vector<Binding> query_pattern(const KnowledgeBase& kb, const std::vector<Atom>& pattern);

/// Resolves a ground term of a class/property atom position to a value.
Value resolve_term(const KnowledgeBase& kb, const Term& t, bool individual_position);

// ---------------------------------------------------------------------------
// Consistency

struct Violation {
    enum class Kind { DanglingReference, TypeMismatch, UndeclaredProperty, Disjointness, UnknownClass };
    Kind kind;
    std::string message;
};

std::string to_string(Violation::Kind k);

std::vector<Violation> check_consistency(const KnowledgeBase& kb);

// ---------------------------------------------------------------------------
// Persistence

/// JSON document with sections classes, properties, individuals and
/// assertions. Box literals carry their 8 corners for inspection.
std::string kb_to_json(const KnowledgeBase& kb);
KnowledgeBase kb_from_json(const std::string& text);
KnowledgeBase load_kb(const std::filesystem::path& path);
void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path);

}  // namespace kbd
