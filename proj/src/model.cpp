#include "advm/model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace advm {

std::string_view to_string(NodeKind kind) {
    switch (kind) {
    case NodeKind::InitialNode: return "InitialNode";
    case NodeKind::ActivityFinalNode: return "ActivityFinalNode";
    case NodeKind::FlowFinalNode: return "FlowFinalNode";
    case NodeKind::ForkNode: return "ForkNode";
    case NodeKind::JoinNode: return "JoinNode";
    case NodeKind::DecisionNode: return "DecisionNode";
    case NodeKind::MergeNode: return "MergeNode";
    case NodeKind::CallBehaviorAction: return "CallBehaviorAction";
    case NodeKind::ActivityParameterNode: return "ActivityParameterNode";
    case NodeKind::InputPin: return "InputPin";
    case NodeKind::OutputPin: return "OutputPin";
    }
    return "?";
}

bool is_control_node(NodeKind k) {
    return k == NodeKind::ForkNode || k == NodeKind::JoinNode || k == NodeKind::DecisionNode ||
           k == NodeKind::MergeNode;
}

bool is_stable_node(NodeKind k) {
    return k == NodeKind::CallBehaviorAction || k == NodeKind::InitialNode || k == NodeKind::ActivityFinalNode ||
           k == NodeKind::FlowFinalNode || k == NodeKind::ActivityParameterNode;
}

bool is_pin(NodeKind k) { return k == NodeKind::InputPin || k == NodeKind::OutputPin; }

std::string_view NodeDef::local_name() const {
    std::string_view n = name;
    if (owner && n.size() > owner->size() + 1) return n.substr(owner->size() + 1);
    return n;
}

// ---------------------------------------------------------------------------
// ActivityModel queries

bool ActivityModel::has_activity_final() const {
    return std::any_of(nodes.begin(), nodes.end(),
                       [](const NodeDef& n) { return n.kind == NodeKind::ActivityFinalNode; });
}

std::optional<std::size_t> ActivityModel::find_node(std::string_view node_name) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].name == node_name) return i;
    return std::nullopt;
}

void ActivityModel::rebuild_adjacency() {
    out_edges_.assign(nodes.size(), {});
    in_edges_.assign(nodes.size(), {});
    for (std::size_t e = 0; e < edges.size(); ++e) {
        out_edges_[edges[e].source].push_back(e);
        in_edges_[edges[e].target].push_back(e);
    }
}

std::vector<std::size_t> ActivityModel::outgoing(std::size_t node) const {
    if (out_edges_.size() == nodes.size()) return out_edges_[node];
    std::vector<std::size_t> out;
    for (std::size_t e = 0; e < edges.size(); ++e)
        if (edges[e].source == node) out.push_back(e);
    return out;
}

std::vector<std::size_t> ActivityModel::incoming(std::size_t node) const {
    if (in_edges_.size() == nodes.size()) return in_edges_[node];
    std::vector<std::size_t> out;
    for (std::size_t e = 0; e < edges.size(); ++e)
        if (edges[e].target == node) out.push_back(e);
    return out;
}

std::vector<std::size_t> ActivityModel::pins_of(std::size_t owner, NodeKind pin_kind) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].kind == pin_kind && nodes[i].owner && *nodes[i].owner == nodes[owner].name) out.push_back(i);
    return out;
}

std::optional<std::size_t> ActivityModel::parameter_of(std::size_t node) const {
    if (nodes[node].kind != NodeKind::ActivityParameterNode) return std::nullopt;
    for (std::size_t p = 0; p < parameters.size(); ++p)
        if (parameters[p].name == nodes[node].name) return p;
    return std::nullopt;
}

std::optional<std::size_t> ActivityModel::parameter_node(std::size_t parameter) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].kind == NodeKind::ActivityParameterNode && nodes[i].name == parameters[parameter].name) return i;
    return std::nullopt;
}

std::vector<std::size_t> ActivityModel::parameters_with(Direction d) const {
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < parameters.size(); ++p)
        if (parameters[p].direction == d) out.push_back(p);
    return out;
}

std::string ActivityModel::queue_var(std::size_t pin) const {
    std::string_view local = nodes[pin].local_name();
    int count = 0;
    for (const auto& n : nodes)
        if (is_pin(n.kind) && n.local_name() == local) ++count;
    return count == 1 ? std::string(local) : nodes[pin].name;
}

std::optional<std::size_t> ActivityModel::output_pin_for_var(std::string_view var) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].kind == NodeKind::OutputPin && queue_var(i) == var) return i;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// behaviors and model sets

BehaviorSpec BehaviorSpec::parse(std::string name, std::string_view text) {
    BehaviorSpec spec;
    spec.name = std::move(name);
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    text = trim(text);
    auto open = text.find('(');
    std::string_view head = trim(text.substr(0, open));
    std::string_view args;
    if (open != std::string_view::npos) {
        if (text.back() != ')') throw std::invalid_argument("behavior stub missing ')': " + std::string(text));
        args = trim(text.substr(open + 1, text.size() - open - 2));
    }
    auto split_pair = [&](std::string_view a) {
        auto comma = a.find(',');
        if (comma == std::string_view::npos)
            throw std::invalid_argument("expected two arguments in `" + std::string(text) + "`");
        return std::pair{trim(a.substr(0, comma)), trim(a.substr(comma + 1))};
    };
    if (head == "identity") {
        if (!args.empty()) throw std::invalid_argument("identity takes no arguments");
        spec.kind = Kind::Identity;
    } else if (head == "const") {
        spec.kind = Kind::Const;
        spec.record = parse_record_literal(args);
    } else if (head == "set") {
        spec.kind = Kind::Set;
        auto [f, v] = split_pair(args);
        spec.field = std::string(f);
        spec.value = parse_scalar_literal(v);
    } else if (head == "add") {
        spec.kind = Kind::Add;
        auto [f, v] = split_pair(args);
        spec.field = std::string(f);
        spec.value = parse_scalar_literal(v);
        if (!spec.value.is_numeric()) throw std::invalid_argument("add() needs a numeric operand");
    } else {
        throw std::invalid_argument("unknown behavior stub `" + std::string(head) + "`");
    }
    return spec;
}

std::string BehaviorSpec::to_string() const {
    switch (kind) {
    case Kind::Identity: return "identity";
    case Kind::Const: return "const(" + render_record(record) + ")";
    case Kind::Set: return "set(" + field + ", " + value.to_literal() + ")";
    case Kind::Add: return "add(" + field + ", " + value.to_literal() + ")";
    }
    return {};
}

const ActivityModel* ModelSet::find_activity(std::string_view name) const {
    for (const auto& a : activities)
        if (a.name == name) return &a;
    return nullptr;
}

const BehaviorSpec* ModelSet::find_behavior(std::string_view name) const {
    auto it = behaviors.find(name);
    return it == behaviors.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// diagram text parser

class ModelParser {
public:
    explicit ModelParser(std::string_view text) : text_(text) {}

    ModelSet parse() {
        ModelSet set;
        while (true) {
            skip_trivia();
            if (at_end()) break;
            int line = line_, col = col_;
            std::string kw = word();
            if (kw == "activity") {
                ActivityModel m = parse_activity_block();
                if (set.find_activity(m.name)) throw ParseError("duplicate activity '" + m.name + "'", line, col);
                set.activities.push_back(std::move(m));
            } else if (kw == "behavior") {
                std::string name = word();
                expect('=');
                auto [text, tl, tc] = raw_until_semicolon();
                try {
                    BehaviorSpec spec = BehaviorSpec::parse(name, text);
                    spec.line = line;
                    if (set.behaviors.contains(name))
                        throw ParseError("duplicate behavior '" + name + "'", line, col);
                    set.behaviors.emplace(name, std::move(spec));
                } catch (const std::invalid_argument& ex) {
                    throw ParseError(ex.what(), tl, tc);
                }
            } else {
                throw ParseError("expected 'activity' or 'behavior', found '" + kw + "'", line, col);
            }
        }
        return set;
    }

private:
    struct PendingEdge {
        std::string source, target;
        std::optional<Expr> guard;
        int line, col;
    };

    bool at_end() const { return pos_ >= text_.size(); }
    char peek_raw() const { return at_end() ? '\0' : text_[pos_]; }

    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_trivia() {
        while (!at_end()) {
            char c = text_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
                while (!at_end() && text_[pos_] != '\n') advance();
            } else {
                break;
            }
        }
    }

    char peek() {
        skip_trivia();
        return peek_raw();
    }

    [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, line_, col_); }

    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'" + found());
        advance();
    }

    bool accept(char c) {
        if (peek() != c) return false;
        advance();
        return true;
    }

    std::string found() {
        if (at_end()) return ", found end of input";
        return std::string(", found '") + peek_raw() + "'";
    }

    static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

    std::string word() {
        skip_trivia();
        if (at_end() || !(std::isalpha(static_cast<unsigned char>(peek_raw())) || peek_raw() == '_'))
            fail("expected identifier" + found());
        std::string out;
        while (!at_end() && ident_char(peek_raw())) {
            out += peek_raw();
            advance();
        }
        return out;
    }

    // identifier with optional `.segment` suffixes
    std::string qualified() {
        std::string out = word();
        while (peek_raw() == '.') {
            advance();
            out += '.';
            out += word();
        }
        return out;
    }

    // raw text up to the terminating ';' (quotes respected); consumes ';'
    std::tuple<std::string, int, int> raw_until_semicolon() {
        skip_trivia();
        int line = line_, col = col_;
        std::string out;
        char quote = 0;
        while (!at_end()) {
            char c = peek_raw();
            if (quote) {
                if (c == '\\') {
                    out += c;
                    advance();
                    if (at_end()) break;
                    out += peek_raw();
                    advance();
                    continue;
                }
                if (c == quote) quote = 0;
            } else if (c == '"' || c == '\'') {
                quote = c;
            } else if (c == ';') {
                advance();
                return {out, line, col};
            }
            out += c;
            advance();
        }
        fail("missing ';'");
    }

    Expr parse_guard_text(const std::string& text, int line, int col) {
        try {
            return parse_expr(text);
        } catch (const ExprParseError& ex) {
            throw ParseError(std::string("in expression: ") + ex.what(), line, col + static_cast<int>(ex.position()));
        }
    }

    ActivityModel parse_activity_block() {
        ActivityModel m;
        m.name = word();
        if (peek() != '(' && peek() != '{') {
            std::string mode = word();
            if (mode == "single")
                m.execution_mode = ExecutionMode::Single;
            else if (mode != "separate")
                fail("expected execution mode 'single' or 'separate', found '" + mode + "'");
        }
        if (accept('(')) {
            if (!accept(')')) {
                while (true) {
                    ParameterDef p;
                    std::string dir = word();
                    if (dir == "in")
                        p.direction = Direction::In;
                    else if (dir == "out")
                        p.direction = Direction::Out;
                    else
                        fail("parameter direction must be 'in' or 'out'");
                    p.name = word();
                    expect(':');
                    p.type = word();
                    for (const auto& q : m.parameters)
                        if (q.name == p.name) fail("duplicate parameter '" + p.name + "'");
                    m.parameters.push_back(std::move(p));
                    if (accept(',')) continue;
                    expect(')');
                    break;
                }
            }
        }
        expect('{');
        std::vector<PendingEdge> pending;
        while (!accept('}')) {
            if (at_end()) fail("unterminated activity '" + m.name + "'");
            int line = line_, col = col_;
            std::string kw = word();
            NodeDef n;
            n.line = line;
            if (kw == "edge") {
                PendingEdge e;
                e.line = line;
                e.col = col;
                e.source = qualified();
                skip_trivia();
                if (!(peek_raw() == '-' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '>')) fail("expected '->'");
                advance();
                advance();
                e.target = qualified();
                if (peek() != ';') {
                    std::string g = word();
                    if (g != "guard") fail("expected 'guard' or ';'");
                    auto [text, tl, tc] = raw_until_semicolon();
                    e.guard = parse_guard_text(text, tl, tc);
                } else {
                    advance();
                }
                pending.push_back(std::move(e));
                continue;
            }
            if (kw == "pin") {
                std::string full = qualified();
                auto dot = full.rfind('.');
                if (dot == std::string::npos) throw ParseError("pin name must be <owner>.<pin>", line, col);
                n.owner = full.substr(0, dot);
                n.name = full;
                n.kind = NodeKind::InputPin;  // direction settled from edges below
                if (accept(':')) n.pin_type = word();
                expect(';');
                auto owner = m.find_node(*n.owner);
                if (!owner) throw ParseError("pin owner '" + *n.owner + "' is not declared", line, col);
                if (is_pin(m.nodes[*owner].kind)) throw ParseError("pins cannot own pins", line, col);
            } else {
                n.name = word();
                if (kw == "initial") {
                    n.kind = NodeKind::InitialNode;
                } else if (kw == "finalActivity") {
                    n.kind = NodeKind::ActivityFinalNode;
                } else if (kw == "finalFlow") {
                    n.kind = NodeKind::FlowFinalNode;
                } else if (kw == "fork") {
                    n.kind = NodeKind::ForkNode;
                } else if (kw == "decision") {
                    n.kind = NodeKind::DecisionNode;
                } else if (kw == "merge") {
                    n.kind = NodeKind::MergeNode;
                } else if (kw == "join") {
                    n.kind = NodeKind::JoinNode;
                    if (peek() != ';') {
                        std::string w = word();
                        if (w != "when") fail("expected 'when' or ';'");
                        auto [text, tl, tc] = raw_until_semicolon();
                        n.join_spec = parse_guard_text(text, tl, tc);
                        m.nodes.push_back(std::move(n));
                        check_duplicate(m, line, col);
                        continue;
                    }
                } else if (kw == "action") {
                    n.kind = NodeKind::CallBehaviorAction;
                    if (word() != "calls") fail("expected 'calls'");
                    n.behavior_ref = word();
                    if (peek() != ';') {
                        if (word() != "async") fail("expected 'async' or ';'");
                        n.is_synchronous = false;
                    }
                } else if (kw == "param") {
                    n.kind = NodeKind::ActivityParameterNode;
                    std::optional<Direction> declared;
                    if (accept(':')) {
                        std::string dir = word();
                        if (dir == "in")
                            declared = Direction::In;
                        else if (dir == "out")
                            declared = Direction::Out;
                        else
                            fail("parameter node direction must be 'in' or 'out'");
                    }
                    auto it = std::find_if(m.parameters.begin(), m.parameters.end(),
                                           [&](const ParameterDef& p) { return p.name == n.name; });
                    if (it == m.parameters.end())
                        throw ParseError("parameter node '" + n.name + "' names no parameter of '" + m.name + "'",
                                         line, col);
                    if (declared && *declared != it->direction)
                        throw ParseError("parameter node '" + n.name + "' direction disagrees with the signature",
                                         line, col);
                    n.pin_type = it->type;
                } else {
                    throw ParseError("unknown statement '" + kw + "'", line, col);
                }
                expect(';');
            }
            m.nodes.push_back(std::move(n));
            check_duplicate(m, line, col);
        }
        for (auto& pe : pending) {
            auto s = m.find_node(pe.source);
            if (!s) throw ParseError("edge source '" + pe.source + "' is not declared", pe.line, pe.col);
            auto t = m.find_node(pe.target);
            if (!t) throw ParseError("edge target '" + pe.target + "' is not declared", pe.line, pe.col);
            EdgeDef e;
            e.name = "e" + std::to_string(m.edges.size() + 1);
            e.source = *s;
            e.target = *t;
            e.guard = std::move(pe.guard);
            e.line = pe.line;
            m.edges.push_back(std::move(e));
        }
        // A pin with outgoing and no incoming edges is an output pin; every
        // other pin stays an input pin and is checked by the validator.
        for (std::size_t i = 0; i < m.nodes.size(); ++i) {
            if (!is_pin(m.nodes[i].kind)) continue;
            bool has_out = false, has_in = false;
            for (const auto& e : m.edges) {
                has_out |= e.source == i;
                has_in |= e.target == i;
            }
            m.nodes[i].kind = has_out && !has_in ? NodeKind::OutputPin : NodeKind::InputPin;
        }
        m.rebuild_adjacency();
        return m;
    }

    static void check_duplicate(const ActivityModel& m, int line, int col) {
        const auto& last = m.nodes.back().name;
        for (std::size_t i = 0; i + 1 < m.nodes.size(); ++i)
            if (m.nodes[i].name == last) throw ParseError("duplicate node name '" + last + "'", line, col);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

ModelSet parse_activity(std::string_view source_text) {
    ModelParser p(source_text);
    return p.parse();
}

ModelSet parse_activity_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_activity(ss.str());
}

}  // namespace advm
