#include "advm/validate.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

namespace advm {

std::string Diagnostic::to_string() const {
    std::string out = code;
    if (!elements.empty()) {
        out += " [";
        for (std::size_t i = 0; i < elements.size(); ++i) {
            if (i > 0) out += ", ";
            out += elements[i];
        }
        out += "]";
    }
    return out + ": " + message;
}

bool ValidationReport::has_error(std::string_view code) const {
    return std::any_of(errors.begin(), errors.end(), [&](const Diagnostic& d) { return d.code == code; });
}

bool ValidationReport::has_warning(std::string_view code) const {
    return std::any_of(warnings.begin(), warnings.end(), [&](const Diagnostic& d) { return d.code == code; });
}

// ---------------------------------------------------------------------------
// static exclusivity

namespace {

struct Bound {
    Decimal value;
    bool inclusive = true;
};

struct FieldConstraint {
    std::optional<Bound> lo, hi;
    std::optional<std::string> equals;  // rendered literal of a non-numeric equality
    std::set<std::string> excluded;
};

using Constraints = std::map<std::string, FieldConstraint>;

std::optional<Value> literal_of(const Expr& e) {
    if (e.kind == Expr::Kind::Literal) return e.literal;
    if (e.kind == Expr::Kind::BareWord) return Value(e.name);
    return std::nullopt;
}

CompareOp mirror(CompareOp op) {
    switch (op) {
    case CompareOp::Lt: return CompareOp::Gt;
    case CompareOp::Le: return CompareOp::Ge;
    case CompareOp::Gt: return CompareOp::Lt;
    case CompareOp::Ge: return CompareOp::Le;
    default: return op;
    }
}

void tighten_lo(FieldConstraint& c, Bound b) {
    if (!c.lo || b.value > c.lo->value || (b.value == c.lo->value && !b.inclusive)) c.lo = b;
}

void tighten_hi(FieldConstraint& c, Bound b) {
    if (!c.hi || b.value < c.hi->value || (b.value == c.hi->value && !b.inclusive)) c.hi = b;
}

// Atoms we cannot interpret are dropped, which only widens the set of
// tokens the guard admits, so disjointness proofs stay sound.
void extract(const Expr& e, Constraints& out) {
    if (e.kind == Expr::Kind::And) {
        for (const auto& c : e.children) extract(c, out);
        return;
    }
    if (e.kind != Expr::Kind::Compare) return;
    const Expr* field = &e.children[0];
    const Expr* other = &e.children[1];
    CompareOp op = e.op;
    if (field->kind != Expr::Kind::Field) {
        std::swap(field, other);
        op = mirror(op);
    }
    if (field->kind != Expr::Kind::Field || !field->var.empty()) return;
    auto lit = literal_of(*other);
    if (!lit) return;
    FieldConstraint& c = out[field->name];
    if (lit->is_numeric()) {
        Decimal v = lit->as_decimal();
        switch (op) {
        case CompareOp::Eq:
            tighten_lo(c, {v, true});
            tighten_hi(c, {v, true});
            break;
        case CompareOp::Lt: tighten_hi(c, {v, false}); break;
        case CompareOp::Le: tighten_hi(c, {v, true}); break;
        case CompareOp::Gt: tighten_lo(c, {v, false}); break;
        case CompareOp::Ge: tighten_lo(c, {v, true}); break;
        case CompareOp::Ne: break;
        }
        return;
    }
    if (op == CompareOp::Eq) {
        if (c.equals && *c.equals != lit->to_literal()) c.excluded.insert(*c.equals);  // contradictory; keep first
        if (!c.equals) c.equals = lit->to_literal();
    } else if (op == CompareOp::Ne) {
        c.excluded.insert(lit->to_literal());
    }
}

bool intervals_disjoint(const FieldConstraint& a, const FieldConstraint& b) {
    std::optional<Bound> lo = a.lo, hi = a.hi;
    if (b.lo && (!lo || b.lo->value > lo->value || (b.lo->value == lo->value && !b.lo->inclusive))) lo = b.lo;
    if (b.hi && (!hi || b.hi->value < hi->value || (b.hi->value == hi->value && !b.hi->inclusive))) hi = b.hi;
    if (!lo || !hi) return false;
    if (lo->value > hi->value) return true;
    return lo->value == hi->value && !(lo->inclusive && hi->inclusive);
}

bool constraints_disjoint(const FieldConstraint& a, const FieldConstraint& b) {
    if (intervals_disjoint(a, b)) return true;
    if (a.equals && b.equals && *a.equals != *b.equals) return true;
    if (a.equals && b.excluded.contains(*a.equals)) return true;
    if (b.equals && a.excluded.contains(*b.equals)) return true;
    return false;
}

}  // namespace

bool provably_exclusive(const Expr& a, const Expr& b) {
    if (a.kind == Expr::Kind::Otherwise || b.kind == Expr::Kind::Otherwise) return true;
    if (a.kind == Expr::Kind::Const && !a.bool_value) return true;
    if (b.kind == Expr::Kind::Const && !b.bool_value) return true;
    Constraints ca, cb;
    extract(a, ca);
    extract(b, cb);
    for (const auto& [field, c] : ca) {
        auto it = cb.find(field);
        if (it != cb.end() && constraints_disjoint(c, it->second)) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// structural checks

namespace {

class Validator {
public:
    Validator(const ActivityModel& m, const ModelSet& registry) : m_(m), registry_(registry) {}

    ValidationReport run() {
        check_cycles();
        check_fork_join_mix();
        check_pins();
        check_pin_cardinality();
        check_decisions();
        check_behaviors();
        check_control_arity();
        check_expressions();
        return std::move(report_);
    }

private:
    void error(std::string code, std::vector<std::string> elems, std::string msg) {
        report_.errors.push_back({std::move(code), std::move(elems), std::move(msg)});
    }
    void warning(std::string code, std::vector<std::string> elems, std::string msg) {
        report_.warnings.push_back({std::move(code), std::move(elems), std::move(msg)});
    }

    bool is_control(std::size_t n) const { return is_control_node(m_.nodes[n].kind); }
    const std::string& name(std::size_t n) const { return m_.nodes[n].name; }

    // E1: cycles in the subgraph of control nodes (Tarjan SCC).
    void check_cycles() {
        const std::size_t n = m_.nodes.size();
        std::vector<int> index(n, -1), low(n, 0);
        std::vector<bool> on_stack(n, false);
        std::vector<std::size_t> stack;
        int counter = 0;
        std::function<void(std::size_t)> strong = [&](std::size_t v) {
            index[v] = low[v] = counter++;
            stack.push_back(v);
            on_stack[v] = true;
            for (std::size_t e : m_.outgoing(v)) {
                std::size_t w = m_.edges[e].target;
                if (!is_control(w)) continue;
                if (index[w] < 0) {
                    strong(w);
                    low[v] = std::min(low[v], low[w]);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
            }
            if (low[v] != index[v]) return;
            std::vector<std::size_t> comp;
            std::size_t w;
            do {
                w = stack.back();
                stack.pop_back();
                on_stack[w] = false;
                comp.push_back(w);
            } while (w != v);
            bool self_loop = false;
            for (std::size_t e : m_.outgoing(v)) self_loop |= m_.edges[e].target == v;
            if (comp.size() > 1 || self_loop) {
                std::sort(comp.begin(), comp.end());
                std::vector<std::string> names;
                for (auto c : comp) names.push_back(name(c));
                error("E1", names, "control nodes form a cycle without any action on it");
            }
        };
        for (std::size_t v = 0; v < n; ++v)
            if (is_control(v) && index[v] < 0) strong(v);
    }

    // E2: a fork and a join reachable from one another through control nodes
    // only, on a route that starts and ends at stable-node pins.
    void check_fork_join_mix() {
        const std::size_t n = m_.nodes.size();
        std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
        for (std::size_t s = 0; s < n; ++s) {
            if (!is_control(s)) continue;
            std::vector<std::size_t> work{s};
            reach[s][s] = true;
            while (!work.empty()) {
                std::size_t v = work.back();
                work.pop_back();
                for (std::size_t e : m_.outgoing(v)) {
                    std::size_t w = m_.edges[e].target;
                    if (is_control(w) && !reach[s][w]) {
                        reach[s][w] = true;
                        work.push_back(w);
                    }
                }
            }
        }
        auto fed_by_pin = [&](std::size_t c) {
            for (std::size_t s = 0; s < n; ++s) {
                if (!is_control(s) || !reach[s][c]) continue;
                for (std::size_t e : m_.incoming(s))
                    if (!is_control(m_.edges[e].source)) return true;
            }
            return false;
        };
        auto feeds_pin = [&](std::size_t c) {
            for (std::size_t t = 0; t < n; ++t) {
                if (!is_control(t) || !reach[c][t]) continue;
                for (std::size_t e : m_.outgoing(t))
                    if (!is_control(m_.edges[e].target)) return true;
            }
            return false;
        };
        std::set<std::pair<std::size_t, std::size_t>> reported;
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = 0; b < n; ++b) {
                if (a == b || !is_control(a) || !is_control(b) || !reach[a][b]) continue;
                auto ka = m_.nodes[a].kind, kb = m_.nodes[b].kind;
                bool mix = (ka == NodeKind::ForkNode && kb == NodeKind::JoinNode) ||
                           (ka == NodeKind::JoinNode && kb == NodeKind::ForkNode);
                if (!mix || !fed_by_pin(a) || !feeds_pin(b)) continue;
                if (reported.insert({std::min(a, b), std::max(a, b)}).second)
                    error("E2", {name(a), name(b)},
                          "a path between stable nodes passes both " + std::string(to_string(ka)) + " '" + name(a) +
                              "' and " + std::string(to_string(kb)) + " '" + name(b) + "'");
            }
        }
    }

    // E3: stable nodes are connected through pins; pins point the right way.
    void check_pins() {
        for (const auto& e : m_.edges) {
            for (std::size_t end : {e.source, e.target}) {
                auto k = m_.nodes[end].kind;
                if (is_stable_node(k))
                    error("E3", {name(end), e.name},
                          "edge " + e.name + " touches " + std::string(to_string(k)) + " '" + name(end) +
                              "' directly instead of through a pin");
            }
        }
        for (std::size_t i = 0; i < m_.nodes.size(); ++i) {
            const auto& n = m_.nodes[i];
            if (n.kind == NodeKind::CallBehaviorAction && m_.pins_of(i, NodeKind::InputPin).empty())
                error("E3", {n.name}, "action '" + n.name + "' has no input pin");
            if (!is_pin(n.kind)) continue;
            std::size_t owner = *m_.find_node(*n.owner);
            auto ok = m_.nodes[owner].kind;
            std::optional<NodeKind> required;
            if (ok == NodeKind::InitialNode) required = NodeKind::OutputPin;
            if (ok == NodeKind::ActivityFinalNode || ok == NodeKind::FlowFinalNode) required = NodeKind::InputPin;
            if (ok == NodeKind::ActivityParameterNode) {
                auto p = m_.parameter_of(owner);
                if (p)
                    required = m_.parameters[*p].direction == Direction::In ? NodeKind::OutputPin : NodeKind::InputPin;
            }
            if (is_control_node(ok)) {
                error("E3", {n.name}, "pin '" + n.name + "' is attached to a control node");
            } else if (required && *required != n.kind) {
                error("E3", {n.name},
                      "pin '" + n.name + "' of " + std::string(to_string(ok)) + " must be an " +
                          std::string(to_string(*required)));
            }
        }
        for (std::size_t p = 0; p < m_.parameters.size(); ++p)
            if (!m_.parameter_node(p))
                error("E3", {m_.parameters[p].name},
                      "parameter '" + m_.parameters[p].name + "' has no ActivityParameterNode");
    }

    // E4: one edge per pin.
    void check_pin_cardinality() {
        for (std::size_t i = 0; i < m_.nodes.size(); ++i) {
            const auto& n = m_.nodes[i];
            auto in = m_.incoming(i).size(), out = m_.outgoing(i).size();
            if (n.kind == NodeKind::OutputPin && out != 1)
                error("E4", {n.name}, "output pin '" + n.name + "' has " + std::to_string(out) + " outgoing edges");
            if (n.kind == NodeKind::InputPin && (in != 1 || out != 0))
                error("E4", {n.name},
                      "input pin '" + n.name + "' has " + std::to_string(in) + " incoming and " +
                          std::to_string(out) + " outgoing edges");
        }
    }

    // E5 and W1.
    void check_decisions() {
        for (std::size_t e = 0; e < m_.edges.size(); ++e) {
            const auto& edge = m_.edges[e];
            if (!edge.guard || !edge.guard->contains_otherwise()) continue;
            bool plain = edge.guard->kind == Expr::Kind::Otherwise;
            if (m_.nodes[edge.source].kind != NodeKind::DecisionNode || !plain)
                error("E5", {edge.name}, "`otherwise` must be the whole guard of a decision's outgoing edge");
        }
        for (std::size_t i = 0; i < m_.nodes.size(); ++i) {
            if (m_.nodes[i].kind != NodeKind::DecisionNode) continue;
            auto out = m_.outgoing(i);
            if (out.size() < 2)
                error("E5", {name(i)}, "decision '" + name(i) + "' needs at least two outgoing edges");
            int otherwise_count = 0;
            for (std::size_t e : out) {
                const auto& edge = m_.edges[e];
                if (!edge.guard)
                    error("E5", {name(i), edge.name}, "outgoing edge " + edge.name + " of decision '" + name(i) +
                                                          "' has no guard");
                else if (edge.guard->kind == Expr::Kind::Otherwise)
                    ++otherwise_count;
            }
            if (otherwise_count > 1)
                error("E5", {name(i)}, "decision '" + name(i) + "' has more than one `otherwise` edge");
            for (std::size_t a = 0; a < out.size(); ++a) {
                for (std::size_t b = a + 1; b < out.size(); ++b) {
                    const auto& ga = m_.edges[out[a]].guard;
                    const auto& gb = m_.edges[out[b]].guard;
                    if (!ga || !gb) continue;
                    if (!provably_exclusive(*ga, *gb))
                        warning("W1", {name(i), m_.edges[out[a]].name, m_.edges[out[b]].name},
                                "guards `" + ga->to_string() + "` and `" + gb->to_string() +
                                    "` are not provably mutually exclusive; enforced at run time");
                }
            }
        }
    }

    // E6
    void check_behaviors() {
        for (const auto& n : m_.nodes) {
            if (n.kind != NodeKind::CallBehaviorAction) continue;
            if (!n.behavior_ref || (!registry_.find_activity(*n.behavior_ref) && !registry_.find_behavior(*n.behavior_ref)))
                error("E6", {n.name},
                      "action '" + n.name + "' calls '" + n.behavior_ref.value_or("") +
                          "', which is neither an activity nor a declared behavior");
        }
    }

    // E7
    void check_control_arity() {
        for (std::size_t i = 0; i < m_.nodes.size(); ++i) {
            auto k = m_.nodes[i].kind;
            if (!is_control_node(k)) continue;
            auto in = m_.incoming(i).size(), out = m_.outgoing(i).size();
            std::string problem;
            if (in == 0) problem = "has no incoming edge";
            else if (out == 0) problem = "has no outgoing edge";
            else if (k == NodeKind::ForkNode && in != 1) problem = "must have exactly one incoming edge";
            else if (k == NodeKind::DecisionNode && in != 1) problem = "must have exactly one incoming edge";
            else if ((k == NodeKind::JoinNode || k == NodeKind::MergeNode) && out != 1)
                problem = "must have exactly one outgoing edge";
            if (!problem.empty())
                error("E7", {name(i)}, std::string(to_string(k)) + " '" + name(i) + "' " + problem);
        }
    }

    // output pins that reach `join` through control nodes only
    std::set<std::string> upstream_vars(std::size_t join) const {
        std::set<std::string> vars;
        std::set<std::size_t> seen;
        std::vector<std::size_t> work{join};
        while (!work.empty()) {
            std::size_t v = work.back();
            work.pop_back();
            if (!seen.insert(v).second) continue;
            for (std::size_t e : m_.incoming(v)) {
                std::size_t s = m_.edges[e].source;
                if (m_.nodes[s].kind == NodeKind::OutputPin)
                    vars.insert(m_.queue_var(s));
                else if (is_control(s))
                    work.push_back(s);
            }
        }
        return vars;
    }

    // E8
    void check_expressions() {
        for (const auto& edge : m_.edges) {
            if (!edge.guard) continue;
            for (const auto& v : referenced_vars(*edge.guard)) {
                // bare names are field atoms here
                if (v.find('.') == std::string::npos && !has_qualified_field(*edge.guard, v)) continue;
                error("E8", {edge.name},
                      "guard `" + edge.guard->to_string() + "` reads '" + v +
                          "', but guards may only use fields of the current token");
            }
        }
        for (std::size_t i = 0; i < m_.nodes.size(); ++i) {
            const auto& n = m_.nodes[i];
            if (n.kind != NodeKind::JoinNode || !n.join_spec) continue;
            if (n.join_spec->contains_otherwise())
                error("E8", {n.name}, "`otherwise` is not allowed in a join specification");
            for (const auto& f : referenced_bare_fields(*n.join_spec))
                error("E8", {n.name}, "join specification field '" + f + "' must be qualified with a queue name");
            auto up = upstream_vars(i);
            for (const auto& v : referenced_vars(*n.join_spec))
                if (!up.contains(v))
                    error("E8", {n.name},
                          "join specification of '" + n.name + "' references '" + v +
                              "', which is not an output queue upstream of the join");
        }
    }

    static bool has_qualified_field(const Expr& e, const std::string& var) {
        if (e.kind == Expr::Kind::Field && e.var == var) return true;
        return std::any_of(e.children.begin(), e.children.end(),
                           [&](const Expr& c) { return has_qualified_field(c, var); });
    }

    const ActivityModel& m_;
    const ModelSet& registry_;
    ValidationReport report_;
};

}  // namespace

ValidationReport validate(const ActivityModel& model, const ModelSet& registry) {
    return Validator(model, registry).run();
}

}  // namespace advm
