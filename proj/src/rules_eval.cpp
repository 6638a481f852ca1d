#include <cmath>
#include <set>

#include "kbd/rules.hpp"

namespace kbd {

void BuiltinRegistry::add(BuiltinDef def) {
    const std::string key = def.ns + ":" + def.name;
    if (!def.generative)
        for (ArgMode m : def.args)
            if (m == ArgMode::Output) throw BuiltinError(key + ": OUTPUT arguments require a generative built-in");
    if (!def.fn) throw BuiltinError(key + ": missing evaluation function");
    if (!defs_.emplace(key, std::move(def)).second) throw BuiltinError("built-in " + key + " registered twice");
}

const BuiltinDef* BuiltinRegistry::find(const std::string& ns, const std::string& name) const {
    auto it = defs_.find(ns + ":" + name);
    return it == defs_.end() ? nullptr : &it->second;
}

std::vector<std::string> BuiltinRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : defs_) out.push_back(k);
    return out;
}

bool eval_comparison_builtin(const std::string& name, const std::vector<std::optional<Value>>& args) {
    if (args.size() != 2) throw BuiltinError(name + " takes 2 arguments, got " + std::to_string(args.size()));
    for (std::size_t i = 0; i < 2; ++i) {
        if (!args[i]) throw BuiltinError(name + ": argument " + std::to_string(i + 1) + " is unbound");
        if (!is_number(*args[i]))
            throw BuiltinError(name + ": argument " + std::to_string(i + 1) + " is a " + kind_name(*args[i]) +
                               ", expected a number");
    }
    const Value& a = *args[0];
    const Value& b = *args[1];
    if (name == "equal") {
        if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b))
            return std::get<std::int64_t>(a) == std::get<std::int64_t>(b);
        return std::abs(as_number(a) - as_number(b)) <= 1e-9;
    }
    const bool both_int = std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b);
    if (name == "lessThan")
        return both_int ? std::get<std::int64_t>(a) < std::get<std::int64_t>(b) : as_number(a) < as_number(b);
    if (name == "greaterThan")
        return both_int ? std::get<std::int64_t>(a) > std::get<std::int64_t>(b) : as_number(a) > as_number(b);
    throw BuiltinError("unknown comparison '" + name + "'");
}

void register_comparison_builtins(BuiltinRegistry& reg) {
    for (const char* name : {"lessThan", "greaterThan", "equal"}) {
        const std::string n = name;
        reg.add({"swrlb", n, {ArgMode::Input, ArgMode::Input},
                 [n](const std::vector<std::optional<Value>>& args, const KnowledgeBase&) {
                     return eval_comparison_builtin(n, args) ? std::vector<BuiltinRow>{BuiltinRow{}}
                                                             : std::vector<BuiltinRow>{};
                 },
                 false, false});
    }
}

// ---------------------------------------------------------------------------

namespace {

void collect_vars(const Term& t, std::set<std::string>& out) {
    if (const auto* v = std::get_if<Variable>(&t)) out.insert(v->name);
}

}  // namespace

std::vector<SafetyViolation> validate_safety(const RuleSet& rules, const KnowledgeBase& vocabulary,
                                             const BuiltinRegistry& registry) {
    std::vector<SafetyViolation> out;
    for (const auto& rule : rules.rules) {
        auto flag = [&](const std::string& msg) { out.push_back({rule.name, msg}); };
        auto check_vocab = [&](const Atom& atom) {
            if (const auto* c = std::get_if<ClassAtom>(&atom)) {
                if (!vocabulary.has_class(c->cls)) flag("unknown class '" + c->cls + "'");
                if (const auto* v = std::get_if<Value>(&c->arg); v && !std::holds_alternative<Ref>(*v))
                    flag(format_atom(atom) + ": class argument must be an individual");
            } else if (const auto* p = std::get_if<PropertyAtom>(&atom)) {
                if (!vocabulary.has_property(p->property)) flag("unknown property '" + p->property + "'");
                if (const auto* v = std::get_if<Value>(&p->subject); v && !std::holds_alternative<Ref>(*v))
                    flag(format_atom(atom) + ": subject must be an individual");
            }
        };

        std::set<std::string> bound;
        for (const auto& atom : rule.antecedent) {
            check_vocab(atom);
            if (const auto* c = std::get_if<ClassAtom>(&atom)) {
                collect_vars(c->arg, bound);
            } else if (const auto* p = std::get_if<PropertyAtom>(&atom)) {
                collect_vars(p->subject, bound);
                collect_vars(p->object, bound);
            } else {
                const auto& b = std::get<BuiltinAtom>(atom);
                const std::string label = b.ns + ":" + b.name;
                const BuiltinDef* def = registry.find(b.ns, b.name);
                if (!def) {
                    flag("unknown built-in '" + label + "'");
                    for (const auto& a : b.args) collect_vars(a, bound);
                    continue;
                }
                if (def->args.size() != b.args.size()) {
                    flag(label + " takes " + std::to_string(def->args.size()) + " arguments, got " +
                         std::to_string(b.args.size()));
                    for (const auto& a : b.args) collect_vars(a, bound);
                    continue;
                }
                for (std::size_t i = 0; i < b.args.size(); ++i) {
                    const auto* v = std::get_if<Variable>(&b.args[i]);
                    if (def->args[i] == ArgMode::Input) {
                        if (v && !bound.count(v->name))
                            flag(label + ": input ?" + v->name + " is not bound by any earlier atom");
                    } else if (!v) {
                        flag(label + ": argument " + std::to_string(i + 1) + " is an OUTPUT and must be a variable");
                    }
                }
                for (const auto& a : b.args) collect_vars(a, bound);
            }
        }
        for (const auto& atom : rule.consequent) {
            if (std::holds_alternative<BuiltinAtom>(atom)) {
                flag("built-in " + format_atom(atom) + " is not allowed in a consequent");
                continue;
            }
            check_vocab(atom);
            std::set<std::string> used;
            if (const auto* c = std::get_if<ClassAtom>(&atom)) collect_vars(c->arg, used);
            if (const auto* p = std::get_if<PropertyAtom>(&atom)) {
                collect_vars(p->subject, used);
                collect_vars(p->object, used);
            }
            for (const auto& v : used)
                if (!bound.count(v)) flag("consequent variable ?" + v + " is never bound in the antecedent");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string to_string(EvalStatus s) {
    switch (s) {
        case EvalStatus::Fixpoint: return "fixpoint";
        case EvalStatus::IterationLimit: return "iteration-limit";
        case EvalStatus::BuiltinCallLimit: return "builtin-call-limit";
    }
    return "fixpoint";
}

void DerivationLog::append(const DerivationLog& other) {
    const int offset = passes;
    for (Firing f : other.firings) {
        f.pass += offset;
        firings.push_back(std::move(f));
    }
    for (FailureRecord f : other.failures) {
        f.pass += offset;
        failures.push_back(std::move(f));
    }
    passes += other.passes;
    if (other.status != EvalStatus::Fixpoint) status = other.status;
    builtin_calls += other.builtin_calls;
    memo_hits += other.memo_hits;
    facts_added += other.facts_added;
}

namespace {

struct CallLimitReached {};

class Evaluator {
public:
    Evaluator(KnowledgeBase& kb, const BuiltinRegistry& reg, const EvalLimits& limits, DerivationLog& log)
        : kb_(kb), reg_(reg), limits_(limits), log_(log) {}

    void run_rule(const Rule& rule, int pass) {
        rule_ = &rule;
        pass_ = pass;
        match(0, Binding{}, {});
    }

private:
    void fail(const std::string& atom, const std::string& msg) {
        log_.failures.push_back({pass_, rule_->name, atom, msg});
    }

    std::optional<Value> lookup(const Term& t, const Binding& b, bool individual_position) const {
        if (const auto* v = std::get_if<Variable>(&t)) {
            auto it = b.find(v->name);
            if (it == b.end()) return std::nullopt;
            return it->second;
        }
        return resolve_term(kb_, t, individual_position);
    }

    void match(std::size_t i, const Binding& b, const std::vector<std::string>& calls) {
        if (i == rule_->antecedent.size()) {
            fire(b, calls);
            return;
        }
        const Atom& atom = rule_->antecedent[i];
        if (const auto* ba = std::get_if<BuiltinAtom>(&atom)) {
            call_builtin(i, *ba, b, calls);
            return;
        }
        try {
            match_atom(kb_, atom, b, [&](const Binding& nb) { match(i + 1, nb, calls); });
        } catch (const QueryError& e) {
            fail(format_atom(atom), e.what());
        }
    }

    void call_builtin(std::size_t i, const BuiltinAtom& ba, const Binding& b, std::vector<std::string> calls) {
        const std::string label = ba.ns + ":" + ba.name;
        const BuiltinDef* def = reg_.find(ba.ns, ba.name);
        if (!def) {
            fail(format_atom(ba), "unknown built-in " + label);
            return;
        }
        if (def->args.size() != ba.args.size()) {
            fail(format_atom(ba), "arity mismatch");
            return;
        }
        std::vector<std::optional<Value>> args(ba.args.size());
        std::string ground = label + "(";
        for (std::size_t k = 0; k < ba.args.size(); ++k) {
            if (k) ground += ", ";
            if (def->args[k] == ArgMode::Output) {
                ground += format_term(ba.args[k]);
                continue;
            }
            args[k] = lookup(ba.args[k], b, false);
            if (!args[k]) {
                fail(format_atom(ba), "input " + format_term(ba.args[k]) + " is unbound");
                return;
            }
            ground += display(*args[k]);
        }
        ground += ")";
        calls.push_back(ground);

        std::string key;
        if (def->memoizable) {
            key = label;
            for (const auto& a : args) key += '\x1f' + (a ? value_key(*a) : std::string("_"));
        }
        std::vector<BuiltinRow> rows;
        if (auto it = memo_.find(key); def->memoizable && it != memo_.end()) {
            rows = it->second;
            ++log_.memo_hits;
        } else {
            if (log_.builtin_calls >= limits_.max_builtin_calls) throw CallLimitReached{};
            ++log_.builtin_calls;
            try {
                rows = def->fn(args, kb_);
            } catch (const std::exception& e) {
                fail(ground, e.what());
                return;
            }
            if (def->memoizable) memo_[key] = rows;
        }

        for (const auto& row : rows) {
            Binding nb = b;
            bool ok = true;
            std::size_t out_i = 0;
            for (std::size_t k = 0; k < ba.args.size() && ok; ++k) {
                if (def->args[k] != ArgMode::Output) continue;
                if (out_i >= row.outputs.size()) {
                    fail(ground, "built-in returned too few outputs");
                    ok = false;
                    break;
                }
                const Value& v = row.outputs[out_i++];
                const std::string& name = std::get<Variable>(ba.args[k]).name;
                if (auto it = nb.find(name); it != nb.end()) {
                    ok = values_equal(it->second, v);
                } else {
                    nb[name] = v;
                }
            }
            if (!ok) continue;

            std::vector<std::string> added;
            for (const auto& [ind, cls] : row.classes) {
                try {
                    if (kb_.assert_class(ind, cls)) added.push_back(cls + "(" + ind + ")");
                } catch (const KnowledgeError& e) {
                    fail(ground, e.what());
                }
            }
            for (const auto& f : row.facts) {
                try {
                    if (kb_.assert_fact(f)) added.push_back(format_assertion(f));
                } catch (const KnowledgeError& e) {
                    fail(ground, e.what());
                }
            }
            if (!added.empty()) {
                log_.facts_added += added.size();
                log_.firings.push_back({pass_, rule_->name, nb, std::move(added), calls, true});
            }
            match(i + 1, nb, calls);
        }
    }

    void fire(const Binding& b, const std::vector<std::string>& calls) {
        std::vector<std::string> added;
        for (const auto& atom : rule_->consequent) {
            try {
                if (const auto* c = std::get_if<ClassAtom>(&atom)) {
                    const auto v = lookup(c->arg, b, true);
                    const Ref* r = v ? std::get_if<Ref>(&*v) : nullptr;
                    if (!r) throw KnowledgeError("class atom argument is not an individual");
                    if (kb_.assert_class(r->name, c->cls)) added.push_back(c->cls + "(" + r->name + ")");
                } else if (const auto* p = std::get_if<PropertyAtom>(&atom)) {
                    const auto kind = kb_.property_kind(p->property);
                    if (!kind) throw KnowledgeError("undeclared property '" + p->property + "'");
                    const auto s = lookup(p->subject, b, true);
                    const auto o = lookup(p->object, b, *kind == PropertyKind::Object);
                    const Ref* sr = s ? std::get_if<Ref>(&*s) : nullptr;
                    if (!sr || !o) throw KnowledgeError("unbound or non-individual subject");
                    Assertion a{sr->name, p->property, *o};
                    if (kb_.assert_fact(a)) added.push_back(format_assertion(a));
                }
            } catch (const std::exception& e) {
                fail(format_atom(atom), e.what());
            }
        }
        log_.facts_added += added.size();
        log_.firings.push_back({pass_, rule_->name, b, std::move(added), calls, false});
    }

    KnowledgeBase& kb_;
    const BuiltinRegistry& reg_;
    const EvalLimits& limits_;
    DerivationLog& log_;
    std::map<std::string, std::vector<BuiltinRow>> memo_;
    const Rule* rule_ = nullptr;
    int pass_ = 0;
};

}  // namespace

DerivationLog evaluate_fixpoint(KnowledgeBase& kb, const RuleSet& rules, const BuiltinRegistry& registry,
                                const EvalLimits& limits) {
    DerivationLog log;
    Evaluator ev(kb, registry, limits, log);
    for (int pass = 1; pass <= limits.max_iterations; ++pass) {
        const std::size_t before = kb.fact_count();
        log.passes = pass;
        try {
            for (const auto& rule : rules.rules) ev.run_rule(rule, pass);
        } catch (const CallLimitReached&) {
            log.status = EvalStatus::BuiltinCallLimit;
            return log;
        }
        if (kb.fact_count() == before) {
            log.status = EvalStatus::Fixpoint;
            return log;
        }
    }
    log.status = EvalStatus::IterationLimit;
    return log;
}

}  // namespace kbd
