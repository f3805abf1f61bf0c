#pragma once

#include "advm/value.hpp"

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace advm {

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

std::string_view to_string(CompareOp op);

/// Guard / join-specification / join-criteria expression tree.
///
/// A value type: children are held by value, so copies are deep and
/// expressions can be freely spliced into pass rules and criteria.
struct Expr {
    enum class Kind {
        Const,      ///< true / false
        Otherwise,  ///< decision fallback guard; expanded before path construction
        Literal,    ///< scalar literal
        Field,      ///< `var.field` or bare `field` of the current token
        BareWord,   ///< unquoted identifier right of a comparison
        QueueVar,   ///< presence of a token from an output queue
        Compare,
        And,
        Or,
        Not,
    };

    Kind kind = Kind::Const;
    bool bool_value = true;
    Value literal;
    std::string var;    ///< Field: qualifier (may be empty); QueueVar: queue name
    std::string name;   ///< Field: field name; BareWord: the word
    CompareOp op = CompareOp::Eq;
    int route = -1;     ///< QueueVar: compiled path this leaf stands for, -1 if none
    std::vector<Expr> children;

    static Expr constant(bool v);
    static Expr otherwise();
    static Expr lit(Value v);
    static Expr field(std::string var, std::string name);
    static Expr bare_word(std::string word);
    static Expr queue_var(std::string queue, int route = -1);
    static Expr compare(CompareOp op, Expr lhs, Expr rhs);
    static Expr all_of(std::vector<Expr> terms);
    static Expr any_of(std::vector<Expr> terms);
    static Expr negate(Expr e);

    bool is_true() const { return kind == Kind::Const && bool_value; }
    bool is_constant() const;
    bool contains_otherwise() const;

    /// Structural equality; the `route` annotation is ignored.
    bool same_shape(const Expr& other) const;

    /// Infix rendering with minimal parentheses, e.g. `order = approved AND sum > 100`.
    std::string to_string() const;

    /// Prefix rendering used for join criteria, e.g.
    /// `OR(AND("p1.att2 = p2.att2", p1, p2), AND(p2, p3))`.
    std::string to_prefix() const;
};

class ExprParseError : public std::runtime_error {
public:
    ExprParseError(std::string message, std::size_t position)
        : std::runtime_error(std::move(message)), position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

/// Parses infix guards (`order=approved AND sum>100`) and the prefix form
/// emitted by `Expr::to_prefix` (quoted arguments are parsed recursively).
/// Precedence: NOT > comparison > AND > OR.
Expr parse_expr(std::string_view text);

class EvalError : public std::runtime_error {
public:
    enum class Kind { GuardOnControlToken, FieldMissing, TypeMismatch, UnqualifiedField };

    EvalError(Kind kind, std::string message) : std::runtime_error(std::move(message)), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

std::string_view to_string(EvalError::Kind kind);

/// Evaluates an edge guard or pass rule against the current token.
/// `otherwise` is rejected here: callers expand it first.
bool eval_guard(const Expr& expr, const Datum& token);

/// Queue variable -> candidate token. Absent keys mean "no token drawn".
using TokenBinding = std::map<std::string, Datum, std::less<>>;

/// Optional refinement for annotated leaves: returns whether the token bound
/// to `queue` is admissible on compiled path `route`.
using RouteFilter = std::function<bool(std::string_view queue, int route)>;

/// Evaluates a join criterion: queue variables test presence in the
/// binding, data predicates compare bound tokens' fields. A comparison that
/// mentions an unbound variable is false.
bool eval_join_criteria(const Expr& expr, const TokenBinding& binding, const RouteFilter& filter = {});

/// Disjunctive normal form (NOT pushed to atoms). Used as an optional
/// join-criteria optimization.
Expr to_dnf(const Expr& expr);

/// Queue variables referenced anywhere in the expression (presence atoms and
/// qualified field accesses), sorted and unique.
std::vector<std::string> referenced_vars(const Expr& expr);

/// Bare (unqualified) field names referenced by the expression.
std::vector<std::string> referenced_bare_fields(const Expr& expr);

}  // namespace advm
