#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kbd/knowledge.hpp"

namespace kbd {

enum class Stage { Geometry, Topology, Semantic, Refinement };

std::string to_string(Stage s);
std::optional<Stage> parse_stage(const std::string& s);

struct Rule {
    std::string name;
    std::vector<Atom> antecedent;
    std::vector<Atom> consequent;
    std::optional<Stage> stage;
    int line = 0;
};

struct RuleSet {
    std::vector<Rule> rules;
    std::vector<std::string> namespaces;

    const Rule* find(const std::string& name) const;
    bool has_stage(Stage s) const;
    /// Rules of one stage, file order kept.
    RuleSet stage(Stage s) const;
};

class RuleSyntaxError : public std::runtime_error {
public:
    RuleSyntaxError(const std::string& msg, int line, int column);
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// Grammar, one rule per statement:
///   rule <name> : <atom> ( ^ <atom> )* -> <atom> ( ^ <atom> )*
/// plus the directives `@stage <name>` and `@namespace <name>`. Atoms are
/// Class(t), prop(t, t) or ns:builtin(t, ...). Terms are ?vars, numbers,
/// "strings", true/false, or bare identifiers. `//` starts a comment.
RuleSet parse_rules(const std::string& text);
RuleSet load_rules(const std::filesystem::path& path);
std::string format_rule(const Rule& r);

// ---------------------------------------------------------------------------
// Built-ins

class BuiltinError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ArgMode { Input, Output };

/// One way a built-in atom can hold. `outputs` fills the OUTPUT arguments in
/// order; `classes` and `facts` are asserted before matching continues.
struct BuiltinRow {
    std::vector<Value> outputs;
    std::vector<std::pair<std::string, std::string>> classes;  // (individual, class)
    std::vector<Assertion> facts;
};

/// Argument vector has one entry per declared argument; OUTPUT slots are
/// empty. A filter built-in returns one empty row for true, none for false.
using BuiltinFn = std::function<std::vector<BuiltinRow>(const std::vector<std::optional<Value>>& args,
                                                        const KnowledgeBase& kb)>;

struct BuiltinDef {
    std::string ns;
    std::string name;
    std::vector<ArgMode> args;
    BuiltinFn fn;
    bool generative = false;
    bool memoizable = false;
};

class BuiltinRegistry {
public:
    /// Throws BuiltinError on duplicates or OUTPUT args on a non-generative
    /// built-in.
    void add(BuiltinDef def);
    const BuiltinDef* find(const std::string& ns, const std::string& name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, BuiltinDef> defs_;
};

/// lessThan / greaterThan strict; equal exact for two ints, 1e-9 otherwise.
bool eval_comparison_builtin(const std::string& name, const std::vector<std::optional<Value>>& args);

/// swrlb:lessThan, swrlb:greaterThan, swrlb:equal.
void register_comparison_builtins(BuiltinRegistry& reg);

// ---------------------------------------------------------------------------
// Validation

struct SafetyViolation {
    std::string rule;
    std::string message;
};

std::vector<SafetyViolation> validate_safety(const RuleSet& rules, const KnowledgeBase& vocabulary,
                                             const BuiltinRegistry& registry);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalLimits {
    int max_iterations = 50;
    std::size_t max_builtin_calls = 100000;
};

enum class EvalStatus { Fixpoint, IterationLimit, BuiltinCallLimit };
std::string to_string(EvalStatus s);

struct Firing {
    int pass = 0;
    std::string rule;
    Binding binding;
    std::vector<std::string> new_facts;
    /// Ground built-in atoms evaluated on the way to this binding.
    std::vector<std::string> builtin_calls;
    /// Facts a generative built-in added for a binding that later failed.
    bool effect_only = false;
};

struct FailureRecord {
    int pass = 0;
    std::string rule;
    std::string atom;
    std::string message;
};

struct DerivationLog {
    std::vector<Firing> firings;
    std::vector<FailureRecord> failures;
    int passes = 0;
    EvalStatus status = EvalStatus::Fixpoint;
    std::size_t builtin_calls = 0;  // actual invocations
    std::size_t memo_hits = 0;
    std::size_t facts_added = 0;

    /// Appends another log, renumbering passes to follow this one.
    void append(const DerivationLog& other);
};

/// Naive forward chaining: passes over the rules in file order until a pass
/// adds nothing or a limit is hit. Memoizable built-ins are evaluated once
/// per distinct ground argument list within the call.
DerivationLog evaluate_fixpoint(KnowledgeBase& kb, const RuleSet& rules, const BuiltinRegistry& registry,
                                const EvalLimits& limits = {});

}  // namespace kbd
