#include "advm/expr.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace advm {

std::string_view to_string(CompareOp op) {
    switch (op) {
    case CompareOp::Eq: return "=";
    case CompareOp::Ne: return "<>";
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
    }
    return "?";
}

std::string_view to_string(EvalError::Kind kind) {
    switch (kind) {
    case EvalError::Kind::GuardOnControlToken: return "GuardOnControlToken";
    case EvalError::Kind::FieldMissing: return "FieldMissing";
    case EvalError::Kind::TypeMismatch: return "TypeMismatch";
    case EvalError::Kind::UnqualifiedField: return "UnqualifiedField";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// construction

Expr Expr::constant(bool v) {
    Expr e;
    e.kind = Kind::Const;
    e.bool_value = v;
    return e;
}

Expr Expr::otherwise() {
    Expr e;
    e.kind = Kind::Otherwise;
    return e;
}

Expr Expr::lit(Value v) {
    Expr e;
    e.kind = Kind::Literal;
    e.literal = std::move(v);
    return e;
}

Expr Expr::field(std::string var, std::string name) {
    Expr e;
    e.kind = Kind::Field;
    e.var = std::move(var);
    e.name = std::move(name);
    return e;
}

Expr Expr::bare_word(std::string word) {
    Expr e;
    e.kind = Kind::BareWord;
    e.name = std::move(word);
    return e;
}

Expr Expr::queue_var(std::string queue, int route) {
    Expr e;
    e.kind = Kind::QueueVar;
    e.var = std::move(queue);
    e.route = route;
    return e;
}

Expr Expr::compare(CompareOp op, Expr lhs, Expr rhs) {
    Expr e;
    e.kind = Kind::Compare;
    e.op = op;
    e.children.push_back(std::move(lhs));
    e.children.push_back(std::move(rhs));
    return e;
}

Expr Expr::all_of(std::vector<Expr> terms) {
    std::erase_if(terms, [](const Expr& t) { return t.is_true(); });
    if (terms.empty()) return constant(true);
    if (terms.size() == 1) return std::move(terms.front());
    Expr e;
    e.kind = Kind::And;
    e.children = std::move(terms);
    return e;
}

Expr Expr::any_of(std::vector<Expr> terms) {
    if (terms.empty()) return constant(false);
    if (terms.size() == 1) return std::move(terms.front());
    Expr e;
    e.kind = Kind::Or;
    e.children = std::move(terms);
    return e;
}

Expr Expr::negate(Expr inner) {
    Expr e;
    e.kind = Kind::Not;
    e.children.push_back(std::move(inner));
    return e;
}

bool Expr::is_constant() const {
    switch (kind) {
    case Kind::Field:
    case Kind::BareWord:
    case Kind::QueueVar: return false;
    default: break;
    }
    return std::all_of(children.begin(), children.end(), [](const Expr& c) { return c.is_constant(); });
}

bool Expr::contains_otherwise() const {
    if (kind == Kind::Otherwise) return true;
    return std::any_of(children.begin(), children.end(), [](const Expr& c) { return c.contains_otherwise(); });
}

bool Expr::same_shape(const Expr& o) const {
    if (kind != o.kind || children.size() != o.children.size()) return false;
    switch (kind) {
    case Kind::Const:
        if (bool_value != o.bool_value) return false;
        break;
    case Kind::Literal:
        if (!(literal == o.literal)) return false;
        break;
    case Kind::Field:
        if (var != o.var || name != o.name) return false;
        break;
    case Kind::BareWord:
        if (name != o.name) return false;
        break;
    case Kind::QueueVar:
        if (var != o.var) return false;
        break;
    case Kind::Compare:
        if (op != o.op) return false;
        break;
    default: break;
    }
    for (std::size_t i = 0; i < children.size(); ++i)
        if (!children[i].same_shape(o.children[i])) return false;
    return true;
}

// ---------------------------------------------------------------------------
// rendering

namespace {

int level(const Expr& e) {
    switch (e.kind) {
    case Expr::Kind::Or: return 1;
    case Expr::Kind::And: return 2;
    case Expr::Kind::Compare: return 3;
    case Expr::Kind::Not: return 4;
    default: return 5;
    }
}

void render_infix(const Expr& e, int min_level, std::string& out) {
    bool parens = level(e) < min_level;
    if (parens) out += '(';
    switch (e.kind) {
    case Expr::Kind::Const: out += e.bool_value ? "true" : "false"; break;
    case Expr::Kind::Otherwise: out += "otherwise"; break;
    case Expr::Kind::Literal: out += e.literal.to_literal(); break;
    case Expr::Kind::Field:
        if (!e.var.empty()) out += e.var + ".";
        out += e.name;
        break;
    case Expr::Kind::BareWord: out += e.name; break;
    case Expr::Kind::QueueVar: out += e.var; break;
    case Expr::Kind::Compare:
        render_infix(e.children[0], 4, out);
        out += ' ';
        out += to_string(e.op);
        out += ' ';
        render_infix(e.children[1], 4, out);
        break;
    case Expr::Kind::And:
    case Expr::Kind::Or: {
        const char* sep = e.kind == Expr::Kind::And ? " AND " : " OR ";
        for (std::size_t i = 0; i < e.children.size(); ++i) {
            if (i > 0) out += sep;
            render_infix(e.children[i], level(e) + 1, out);
        }
        break;
    }
    case Expr::Kind::Not:
        out += "NOT ";
        render_infix(e.children[0], 5, out);
        break;
    }
    if (parens) out += ')';
}

void render_prefix(const Expr& e, std::string& out) {
    switch (e.kind) {
    case Expr::Kind::And:
    case Expr::Kind::Or:
        out += e.kind == Expr::Kind::And ? "AND(" : "OR(";
        for (std::size_t i = 0; i < e.children.size(); ++i) {
            if (i > 0) out += ", ";
            render_prefix(e.children[i], out);
        }
        out += ')';
        return;
    case Expr::Kind::Not:
        out += "NOT(";
        render_prefix(e.children[0], out);
        out += ')';
        return;
    case Expr::Kind::QueueVar: out += e.var; return;
    case Expr::Kind::Const: out += e.bool_value ? "true" : "false"; return;
    default: break;
    }
    out += '"';
    for (char c : e.to_string()) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
}

}  // namespace

std::string Expr::to_string() const {
    std::string out;
    render_infix(*this, 0, out);
    return out;
}

std::string Expr::to_prefix() const {
    std::string out;
    render_prefix(*this, out);
    return out;
}

// ---------------------------------------------------------------------------
// parsing

namespace {

struct Lexeme {
    enum class Type { Ident, Number, String, Op, LParen, RParen, Comma, End };
    Type type = Type::End;
    std::string text;
    std::size_t pos = 0;
};

std::vector<Lexeme> lex(std::string_view s) {
    std::vector<Lexeme> out;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        Lexeme t;
        t.pos = i;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            // dotted identifier paths: a.b.c
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' ||
                                    (s[j] == '.' && j + 1 < s.size() &&
                                     (std::isalpha(static_cast<unsigned char>(s[j + 1])) || s[j + 1] == '_'))))
                ++j;
            t.type = Lexeme::Type::Ident;
            t.text = std::string(s.substr(i, j - i));
            i = j;
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '-' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            std::size_t j = i + 1;
            while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
            t.type = Lexeme::Type::Number;
            t.text = std::string(s.substr(i, j - i));
            i = j;
        } else if (c == '"' || c == '\'') {
            std::size_t j = i + 1;
            std::string text;
            while (j < s.size() && s[j] != c) {
                if (s[j] == '\\' && j + 1 < s.size()) ++j;
                text += s[j++];
            }
            if (j >= s.size()) throw ExprParseError("unterminated string literal", i);
            t.type = Lexeme::Type::String;
            t.text = std::move(text);
            i = j + 1;
        } else if (c == '(') {
            t.type = Lexeme::Type::LParen;
            ++i;
        } else if (c == ')') {
            t.type = Lexeme::Type::RParen;
            ++i;
        } else if (c == ',') {
            t.type = Lexeme::Type::Comma;
            ++i;
        } else if (c == '=' || c == '<' || c == '>' || c == '!') {
            std::size_t j = i + 1;
            if (j < s.size() && (s[j] == '=' || (c == '<' && s[j] == '>'))) ++j;
            t.type = Lexeme::Type::Op;
            t.text = std::string(s.substr(i, j - i));
            if (t.text == "!") throw ExprParseError("unexpected '!'", i);
            i = j;
        } else {
            throw ExprParseError(std::string("unexpected character '") + c + "'", i);
        }
        out.push_back(std::move(t));
    }
    Lexeme end;
    end.pos = s.size();
    out.push_back(end);
    return out;
}

bool keyword(const Lexeme& t, std::string_view upper) {
    if (t.type != Lexeme::Type::Ident || t.text.size() != upper.size()) return false;
    for (std::size_t i = 0; i < upper.size(); ++i)
        if (std::toupper(static_cast<unsigned char>(t.text[i])) != upper[i]) return false;
    return true;
}

class Parser {
public:
    Parser(std::string_view text, std::size_t base) : toks_(lex(text)), base_(base) {}

    Expr parse_all() {
        Expr e = parse_or();
        if (cur().type != Lexeme::Type::End) fail("unexpected '" + describe(cur()) + "'");
        return e;
    }

private:
    // An identifier path read in operand position; resolved once we know
    // whether it is a comparison operand or a standalone atom.
    struct Operand {
        Expr expr;
        bool is_path = false;
        std::string path{};
    };

    const Lexeme& cur() const { return toks_[pos_]; }
    const Lexeme& next() const { return toks_[std::min(pos_ + 1, toks_.size() - 1)]; }

    [[noreturn]] void fail(const std::string& msg) const { throw ExprParseError(msg, base_ + cur().pos); }

    static std::string describe(const Lexeme& t) {
        switch (t.type) {
        case Lexeme::Type::End: return "end of input";
        case Lexeme::Type::LParen: return "(";
        case Lexeme::Type::RParen: return ")";
        case Lexeme::Type::Comma: return ",";
        case Lexeme::Type::String: return "\"" + t.text + "\"";
        default: return t.text;
        }
    }

    Expr parse_or() {
        std::vector<Expr> terms;
        terms.push_back(parse_and());
        while (keyword(cur(), "OR")) {
            ++pos_;
            terms.push_back(parse_and());
        }
        if (terms.size() == 1) return std::move(terms.front());
        Expr e;
        e.kind = Expr::Kind::Or;
        e.children = std::move(terms);
        return e;
    }

    Expr parse_and() {
        std::vector<Expr> terms;
        terms.push_back(parse_compare());
        while (keyword(cur(), "AND")) {
            ++pos_;
            terms.push_back(parse_compare());
        }
        if (terms.size() == 1) return std::move(terms.front());
        Expr e;
        e.kind = Expr::Kind::And;
        e.children = std::move(terms);
        return e;
    }

    Expr parse_compare() {
        Operand lhs = parse_unary();
        if (cur().type != Lexeme::Type::Op) return as_atom(std::move(lhs));
        CompareOp op = to_op(cur());
        ++pos_;
        Operand rhs = parse_unary();
        return Expr::compare(op, as_lhs(std::move(lhs)), as_rhs(std::move(rhs)));
    }

    CompareOp to_op(const Lexeme& t) const {
        if (t.text == "=" || t.text == "==") return CompareOp::Eq;
        if (t.text == "<>" || t.text == "!=") return CompareOp::Ne;
        if (t.text == "<") return CompareOp::Lt;
        if (t.text == "<=") return CompareOp::Le;
        if (t.text == ">") return CompareOp::Gt;
        if (t.text == ">=") return CompareOp::Ge;
        fail("unknown operator '" + t.text + "'");
    }

    static Expr split_field(const std::string& path) {
        auto dot = path.rfind('.');
        if (dot == std::string::npos) return Expr::field("", path);
        return Expr::field(path.substr(0, dot), path.substr(dot + 1));
    }

    static Expr as_atom(Operand o) {
        if (o.is_path) return Expr::queue_var(o.path);
        return std::move(o.expr);
    }
    static Expr as_lhs(Operand o) {
        if (o.is_path) return split_field(o.path);
        return std::move(o.expr);
    }
    static Expr as_rhs(Operand o) {
        if (o.is_path) {
            if (o.path.find('.') == std::string::npos) return Expr::bare_word(o.path);
            return split_field(o.path);
        }
        return std::move(o.expr);
    }

    Operand parse_unary() {
        if (keyword(cur(), "NOT") && next().type != Lexeme::Type::LParen) {
            ++pos_;
            Operand inner = parse_unary();
            return Operand{Expr::negate(as_atom(std::move(inner)))};
        }
        return parse_primary();
    }

    Operand parse_primary() {
        const Lexeme& t = cur();
        switch (t.type) {
        case Lexeme::Type::LParen: {
            ++pos_;
            Expr e = parse_or();
            if (cur().type != Lexeme::Type::RParen) fail("expected ')'");
            ++pos_;
            return Operand{std::move(e)};
        }
        case Lexeme::Type::Number: {
            ++pos_;
            try {
                return Operand{Expr::lit(parse_scalar_literal(t.text))};
            } catch (const std::exception& ex) {
                throw ExprParseError(ex.what(), base_ + t.pos);
            }
        }
        case Lexeme::Type::String: ++pos_; return Operand{Expr::lit(Value(t.text))};
        case Lexeme::Type::Ident: {
            if ((keyword(t, "AND") || keyword(t, "OR") || keyword(t, "NOT")) &&
                next().type == Lexeme::Type::LParen)
                return Operand{parse_prefix_call()};
            if (keyword(t, "AND") || keyword(t, "OR")) fail("unexpected '" + t.text + "'");
            ++pos_;
            if (t.text == "true") return Operand{Expr::constant(true)};
            if (t.text == "false") return Operand{Expr::constant(false)};
            if (t.text == "otherwise") return Operand{Expr::otherwise()};
            return Operand{Expr{}, true, t.text};
        }
        default: fail("unexpected '" + describe(t) + "'");
        }
    }

    Expr parse_prefix_call() {
        std::string head = cur().text;
        for (auto& c : head) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        pos_ += 2;  // keyword and '('
        std::vector<Expr> args;
        while (true) {
            const Lexeme& t = cur();
            if (t.type == Lexeme::Type::String &&
                (next().type == Lexeme::Type::Comma || next().type == Lexeme::Type::RParen)) {
                // quoted data predicate inside prefix form
                Parser inner(t.text, base_ + t.pos + 1);
                args.push_back(inner.parse_all());
                ++pos_;
            } else {
                args.push_back(parse_or());
            }
            if (cur().type == Lexeme::Type::Comma) {
                ++pos_;
                continue;
            }
            if (cur().type != Lexeme::Type::RParen) fail("expected ',' or ')'");
            ++pos_;
            break;
        }
        if (head == "NOT") {
            if (args.size() != 1) fail("NOT takes exactly one argument");
            return Expr::negate(std::move(args.front()));
        }
        if (args.size() == 1) return std::move(args.front());
        Expr e;
        e.kind = head == "AND" ? Expr::Kind::And : Expr::Kind::Or;
        e.children = std::move(args);
        return e;
    }

    std::vector<Lexeme> toks_;
    std::size_t pos_ = 0;
    std::size_t base_ = 0;
};

}  // namespace

Expr parse_expr(std::string_view text) {
    Parser p(text, 0);
    return p.parse_all();
}

// ---------------------------------------------------------------------------
// evaluation

namespace {

struct EvalContext {
    const Datum* current = nullptr;          // guard mode
    const TokenBinding* binding = nullptr;   // join mode
    const RouteFilter* filter = nullptr;
};

bool compare_values(CompareOp op, const Value& a, const Value& b) {
    std::strong_ordering ord = std::strong_ordering::equal;
    if (a.is_numeric() && b.is_numeric()) {
        ord = a.as_decimal() <=> b.as_decimal();
    } else if (a.kind() == Value::Kind::String && b.kind() == Value::Kind::String) {
        ord = std::get<std::string>(a.data) <=> std::get<std::string>(b.data);
    } else if (a.kind() == Value::Kind::Bool && b.kind() == Value::Kind::Bool) {
        if (op != CompareOp::Eq && op != CompareOp::Ne)
            throw EvalError(EvalError::Kind::TypeMismatch, "ordering comparison between booleans");
        bool eq = std::get<bool>(a.data) == std::get<bool>(b.data);
        return op == CompareOp::Eq ? eq : !eq;
    } else {
        throw EvalError(EvalError::Kind::TypeMismatch,
                        "cannot compare " + a.to_literal() + " with " + b.to_literal());
    }
    switch (op) {
    case CompareOp::Eq: return ord == 0;
    case CompareOp::Ne: return ord != 0;
    case CompareOp::Lt: return ord < 0;
    case CompareOp::Le: return ord <= 0;
    case CompareOp::Gt: return ord > 0;
    case CompareOp::Ge: return ord >= 0;
    }
    return false;
}

const Value& lookup(const Datum& token, const std::string& field, const std::string& owner) {
    if (token.is_control())
        throw EvalError(EvalError::Kind::GuardOnControlToken, "field '" + field + "' read from a control token");
    auto it = token.fields.find(field);
    if (it == token.fields.end())
        throw EvalError(EvalError::Kind::FieldMissing,
                        "field '" + field + "' missing from " + (owner.empty() ? "token" : owner) + " " +
                            token.render());
    return it->second;
}

bool eval_bool(const Expr& e, const EvalContext& ctx);

// nullopt: operand names an unbound queue variable (join mode only)
std::optional<Value> eval_operand(const Expr& e, const EvalContext& ctx) {
    switch (e.kind) {
    case Expr::Kind::Literal: return e.literal;
    case Expr::Kind::Field:
        if (ctx.current) {
            if (!e.var.empty())
                throw EvalError(EvalError::Kind::FieldMissing,
                                "qualified access '" + e.var + "." + e.name + "' in a single-token guard");
            return lookup(*ctx.current, e.name, "");
        } else {
            if (e.var.empty())
                throw EvalError(EvalError::Kind::UnqualifiedField,
                                "unqualified field '" + e.name + "' in a join criterion");
            auto it = ctx.binding->find(e.var);
            if (it == ctx.binding->end()) return std::nullopt;
            return lookup(it->second, e.name, e.var);
        }
    case Expr::Kind::BareWord:
        if (ctx.current && !ctx.current->is_control()) {
            auto it = ctx.current->fields.find(e.name);
            if (it != ctx.current->fields.end()) return it->second;
        }
        return Value(e.name);
    default: return Value(eval_bool(e, ctx));
    }
}

bool eval_bool(const Expr& e, const EvalContext& ctx) {
    switch (e.kind) {
    case Expr::Kind::Const: return e.bool_value;
    case Expr::Kind::Otherwise: throw std::logic_error("`otherwise` must be expanded before evaluation");
    case Expr::Kind::QueueVar:
        if (ctx.current) {
            // a bare name used as a condition in a guard reads a boolean field
            const Value& v = lookup(*ctx.current, e.var, "");
            if (v.kind() != Value::Kind::Bool)
                throw EvalError(EvalError::Kind::TypeMismatch, "field '" + e.var + "' is not boolean");
            return std::get<bool>(v.data);
        } else {
            if (!ctx.binding->contains(e.var)) return false;
            return !ctx.filter || !*ctx.filter || (*ctx.filter)(e.var, e.route);
        }
    case Expr::Kind::Compare: {
        auto a = eval_operand(e.children[0], ctx);
        auto b = eval_operand(e.children[1], ctx);
        if (!a || !b) return false;
        return compare_values(e.op, *a, *b);
    }
    case Expr::Kind::And:
        for (const auto& c : e.children)
            if (!eval_bool(c, ctx)) return false;
        return true;
    case Expr::Kind::Or:
        for (const auto& c : e.children)
            if (eval_bool(c, ctx)) return true;
        return false;
    case Expr::Kind::Not: return !eval_bool(e.children[0], ctx);
    case Expr::Kind::Literal: {
        if (e.literal.kind() == Value::Kind::Bool) return std::get<bool>(e.literal.data);
        throw EvalError(EvalError::Kind::TypeMismatch, "literal " + e.literal.to_literal() + " used as a condition");
    }
    case Expr::Kind::Field:
    case Expr::Kind::BareWord: {
        auto v = eval_operand(e, ctx);
        if (!v) return false;
        if (v->kind() != Value::Kind::Bool)
            throw EvalError(EvalError::Kind::TypeMismatch, e.to_string() + " is not boolean");
        return std::get<bool>(v->data);
    }
    }
    return false;
}

}  // namespace

bool eval_guard(const Expr& expr, const Datum& token) {
    if (token.is_control() && !expr.is_constant())
        throw EvalError(EvalError::Kind::GuardOnControlToken,
                        "guard `" + expr.to_string() + "` evaluated against a control token");
    EvalContext ctx;
    ctx.current = &token;
    return eval_bool(expr, ctx);
}

bool eval_join_criteria(const Expr& expr, const TokenBinding& binding, const RouteFilter& filter) {
    EvalContext ctx;
    ctx.binding = &binding;
    ctx.filter = &filter;
    return eval_bool(expr, ctx);
}

// ---------------------------------------------------------------------------
// normal forms and queries

namespace {

Expr nnf(const Expr& e, bool negated) {
    switch (e.kind) {
    case Expr::Kind::Not: return nnf(e.children[0], !negated);
    case Expr::Kind::And:
    case Expr::Kind::Or: {
        std::vector<Expr> terms;
        for (const auto& c : e.children) terms.push_back(nnf(c, negated));
        bool conj = (e.kind == Expr::Kind::And) != negated;
        Expr out;
        out.kind = conj ? Expr::Kind::And : Expr::Kind::Or;
        out.children = std::move(terms);
        return out;
    }
    case Expr::Kind::Const: return Expr::constant(e.bool_value != negated);
    default: return negated ? Expr::negate(e) : e;
    }
}

// each inner vector is one conjunction of literals
std::vector<std::vector<Expr>> dnf_terms(const Expr& e) {
    if (e.kind == Expr::Kind::Or) {
        std::vector<std::vector<Expr>> out;
        for (const auto& c : e.children) {
            auto sub = dnf_terms(c);
            out.insert(out.end(), sub.begin(), sub.end());
        }
        return out;
    }
    if (e.kind == Expr::Kind::And) {
        std::vector<std::vector<Expr>> acc{{}};
        for (const auto& c : e.children) {
            auto sub = dnf_terms(c);
            std::vector<std::vector<Expr>> next;
            for (const auto& left : acc)
                for (const auto& right : sub) {
                    auto merged = left;
                    merged.insert(merged.end(), right.begin(), right.end());
                    next.push_back(std::move(merged));
                }
            acc = std::move(next);
        }
        return acc;
    }
    return {{e}};
}

void collect_vars(const Expr& e, std::set<std::string>& out, std::set<std::string>& bare) {
    if (e.kind == Expr::Kind::QueueVar) out.insert(e.var);
    if (e.kind == Expr::Kind::Field) {
        if (e.var.empty())
            bare.insert(e.name);
        else
            out.insert(e.var);
    }
    for (const auto& c : e.children) collect_vars(c, out, bare);
}

}  // namespace

Expr to_dnf(const Expr& expr) {
    std::vector<Expr> disjuncts;
    for (auto& term : dnf_terms(nnf(expr, false))) {
        if (term.size() == 1) {
            disjuncts.push_back(std::move(term.front()));
        } else {
            Expr conj;
            conj.kind = Expr::Kind::And;
            conj.children = std::move(term);
            disjuncts.push_back(std::move(conj));
        }
    }
    if (disjuncts.size() == 1) return std::move(disjuncts.front());
    Expr out;
    out.kind = Expr::Kind::Or;
    out.children = std::move(disjuncts);
    return out;
}

std::vector<std::string> referenced_vars(const Expr& expr) {
    std::set<std::string> vars, bare;
    collect_vars(expr, vars, bare);
    return {vars.begin(), vars.end()};
}

std::vector<std::string> referenced_bare_fields(const Expr& expr) {
    std::set<std::string> vars, bare;
    collect_vars(expr, vars, bare);
    return {bare.begin(), bare.end()};
}

}  // namespace advm
