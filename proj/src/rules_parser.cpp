#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "kbd/rules.hpp"

namespace kbd {

std::string to_string(Stage s) {
    switch (s) {
        case Stage::Geometry: return "geometry";
        case Stage::Topology: return "topology";
        case Stage::Semantic: return "semantic";
        case Stage::Refinement: return "refinement";
    }
    return "geometry";
}

std::optional<Stage> parse_stage(const std::string& s) {
    for (Stage st : {Stage::Geometry, Stage::Topology, Stage::Semantic, Stage::Refinement})
        if (to_string(st) == s) return st;
    return std::nullopt;
}

const Rule* RuleSet::find(const std::string& name) const {
    for (const auto& r : rules)
        if (r.name == name) return &r;
    return nullptr;
}

bool RuleSet::has_stage(Stage s) const {
    for (const auto& r : rules)
        if (r.stage == s) return true;
    return false;
}

RuleSet RuleSet::stage(Stage s) const {
    RuleSet out;
    out.namespaces = namespaces;
    for (const auto& r : rules)
        if (r.stage == s) out.rules.push_back(r);
    return out;
}

RuleSyntaxError::RuleSyntaxError(const std::string& msg, int line, int column)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg),
      line_(line),
      column_(column) {}

namespace {

enum class Tok { Ident, Var, Int, Real, String, LParen, RParen, Comma, Caret, Colon, Arrow, Semi, At, End };

struct Token {
    Tok kind;
    std::string text;
    int line;
    int col;
};

std::string describe(const Token& t) {
    switch (t.kind) {
        case Tok::End: return "end of input";
        case Tok::String: return "string \"" + t.text + "\"";
        case Tok::Var: return "?" + t.text;
        default: return "'" + t.text + "'";
    }
}

class Lexer {
public:
    explicit Lexer(const std::string& src) : s_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_space();
            const int l = line_, c = col_;
            if (i_ >= s_.size()) {
                out.push_back({Tok::End, "", l, c});
                return out;
            }
            const char ch = s_[i_];
            if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
                out.push_back({Tok::Ident, ident(), l, c});
            } else if (ch == '?') {
                advance();
                if (i_ >= s_.size() || !(std::isalpha(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_'))
                    throw RuleSyntaxError("expected a variable name after '?'", line_, col_);
                out.push_back({Tok::Var, ident(), l, c});
            } else if (std::isdigit(static_cast<unsigned char>(ch)) ||
                       ((ch == '-' || ch == '+') && i_ + 1 < s_.size() &&
                        (std::isdigit(static_cast<unsigned char>(s_[i_ + 1])) || s_[i_ + 1] == '.'))) {
                out.push_back(number(l, c));
            } else if (ch == '"') {
                out.push_back({Tok::String, string_lit(), l, c});
            } else if (ch == '-' && i_ + 1 < s_.size() && s_[i_ + 1] == '>') {
                advance();
                advance();
                out.push_back({Tok::Arrow, "->", l, c});
            } else {
                Tok k;
                switch (ch) {
                    case '(': k = Tok::LParen; break;
                    case ')': k = Tok::RParen; break;
                    case ',': k = Tok::Comma; break;
                    case '^': k = Tok::Caret; break;
                    case ':': k = Tok::Colon; break;
                    case ';': k = Tok::Semi; break;
                    case '@': k = Tok::At; break;
                    default: throw RuleSyntaxError(std::string("unexpected character '") + ch + "'", l, c);
                }
                advance();
                out.push_back({k, std::string(1, ch), l, c});
            }
        }
    }

private:
    void advance() {
        if (s_[i_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++i_;
    }

    void skip_space() {
        while (i_ < s_.size()) {
            if (std::isspace(static_cast<unsigned char>(s_[i_]))) {
                advance();
            } else if (s_.compare(i_, 2, "//") == 0) {
                while (i_ < s_.size() && s_[i_] != '\n') advance();
            } else {
                break;
            }
        }
    }

    std::string ident() {
        const std::size_t start = i_;
        while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) advance();
        return s_.substr(start, i_ - start);
    }

    Token number(int l, int c) {
        const std::size_t start = i_;
        bool real = false;
        if (s_[i_] == '-' || s_[i_] == '+') advance();
        while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) advance();
        if (i_ < s_.size() && s_[i_] == '.') {
            real = true;
            advance();
            while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) advance();
        }
        if (i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E')) {
            real = true;
            advance();
            if (i_ < s_.size() && (s_[i_] == '-' || s_[i_] == '+')) advance();
            if (i_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[i_])))
                throw RuleSyntaxError("malformed exponent", line_, col_);
            while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) advance();
        }
        std::string text = s_.substr(start, i_ - start);
        if (text.front() == '+') text.erase(0, 1);
        return {real ? Tok::Real : Tok::Int, text, l, c};
    }

    std::string string_lit() {
        const int l = line_, c = col_;
        advance();
        std::string out;
        while (true) {
            if (i_ >= s_.size() || s_[i_] == '\n') throw RuleSyntaxError("unterminated string", l, c);
            const char ch = s_[i_];
            advance();
            if (ch == '"') return out;
            if (ch == '\\' && i_ < s_.size()) {
                out += s_[i_];
                advance();
            } else {
                out += ch;
            }
        }
    }

    const std::string& s_;
    std::size_t i_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

    RuleSet run() {
        RuleSet rs;
        std::set<std::string> names;
        std::optional<Stage> stage;
        while (peek().kind != Tok::End) {
            if (peek().kind == Tok::At) {
                next();
                const Token d = expect(Tok::Ident, "directive name");
                const Token arg = expect(Tok::Ident, "directive argument");
                if (d.text == "stage") {
                    stage = parse_stage(arg.text);
                    if (!stage)
                        fail(arg, "unknown stage '" + arg.text + "' (expected geometry, topology, semantic or refinement)");
                } else if (d.text == "namespace") {
                    rs.namespaces.push_back(arg.text);
                } else {
                    fail(d, "unknown directive '@" + d.text + "'");
                }
                continue;
            }
            const Token kw = expect(Tok::Ident, "'rule'");
            if (kw.text != "rule") fail(kw, "expected 'rule', got " + describe(kw));
            Rule r;
            const Token name = expect(Tok::Ident, "rule name");
            r.name = name.text;
            r.line = kw.line;
            r.stage = stage;
            if (!names.insert(r.name).second) fail(name, "duplicate rule name '" + r.name + "'");
            expect(Tok::Colon, "':'");
            if (peek().kind == Tok::Arrow) fail(peek(), "empty antecedent");
            r.antecedent = atoms();
            expect(Tok::Arrow, "'->'");
            if (peek().kind != Tok::Ident) fail(peek(), "empty consequent");
            r.consequent = atoms();
            if (peek().kind == Tok::Semi) next();
            rs.rules.push_back(std::move(r));
        }
        return rs;
    }

private:
    const Token& peek() const { return t_[pos_]; }
    Token next() { return t_[pos_++]; }

    [[noreturn]] static void fail(const Token& at, const std::string& msg) {
        throw RuleSyntaxError(msg, at.line, at.col);
    }

    Token expect(Tok k, const std::string& what) {
        if (peek().kind != k) fail(peek(), "expected " + what + ", got " + describe(peek()));
        return next();
    }

    std::vector<Atom> atoms() {
        std::vector<Atom> out{atom()};
        while (peek().kind == Tok::Caret) {
            next();
            out.push_back(atom());
        }
        return out;
    }

    Atom atom() {
        const Token head = expect(Tok::Ident, "atom");
        std::string ns, name = head.text;
        if (peek().kind == Tok::Colon) {
            next();
            ns = head.text;
            name = expect(Tok::Ident, "built-in name after '" + ns + ":'").text;
        }
        expect(Tok::LParen, "'('");
        std::vector<Term> args;
        if (peek().kind != Tok::RParen) {
            args.push_back(term());
            while (peek().kind == Tok::Comma) {
                next();
                args.push_back(term());
            }
        }
        expect(Tok::RParen, "')'");
        if (!ns.empty()) return BuiltinAtom{ns, name, std::move(args)};
        if (args.size() == 1) return ClassAtom{name, std::move(args[0])};
        if (args.size() == 2) return PropertyAtom{name, std::move(args[0]), std::move(args[1])};
        fail(head, "atom '" + name + "' takes 1 (class) or 2 (property) arguments, got " + std::to_string(args.size()));
    }

    Term term() {
        const Token t = next();
        switch (t.kind) {
            case Tok::Var: return Variable{t.text};
            case Tok::String: return Value{t.text};
            case Tok::Int: {
                std::int64_t v = 0;
                const auto r = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
                if (r.ec != std::errc()) fail(t, "integer out of range");
                return Value{v};
            }
            case Tok::Real: return Value{std::stod(t.text)};
            case Tok::Ident:
                if (t.text == "true" || t.text == "True") return Value{true};
                if (t.text == "false" || t.text == "False") return Value{false};
                return Symbol{t.text};
            default: fail(t, "expected a term, got " + describe(t));
        }
    }

    std::vector<Token> t_;
    std::size_t pos_ = 0;
};

}  // namespace

RuleSet parse_rules(const std::string& text) { return Parser(Lexer(text).run()).run(); }

RuleSet load_rules(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open rules file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_rules(ss.str());
}

std::string format_rule(const Rule& r) {
    auto join = [](const std::vector<Atom>& atoms) {
        std::string s;
        for (std::size_t i = 0; i < atoms.size(); ++i) s += (i ? " ^ " : "") + format_atom(atoms[i]);
        return s;
    };
    return "rule " + r.name + ": " + join(r.antecedent) + " -> " + join(r.consequent);
}

}  // namespace kbd
