#include "advm/compiler.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace advm {

std::size_t ActivityRuntime::token_count() const {
    std::size_t n = 0;
    for (const auto& q : queues) n += q.tokens.size();
    return n;
}

namespace {

std::vector<int> parameter_queues(const ActivityRuntime& rt, Direction d) {
    std::vector<std::pair<std::size_t, int>> found;
    for (const auto& node : rt.nodes) {
        if (node.kind != NodeKind::ActivityParameterNode || !node.parameter) continue;
        if (rt.definition->parameters[*node.parameter].direction != d) continue;
        const auto& qs = d == Direction::In ? node.outputs : node.inputs;
        if (!qs.empty()) found.emplace_back(*node.parameter, qs.front());
    }
    std::sort(found.begin(), found.end());
    std::vector<int> out;
    for (auto& [p, q] : found) out.push_back(q);
    return out;
}

}  // namespace

std::vector<int> ActivityRuntime::output_parameter_queues() const { return parameter_queues(*this, Direction::Out); }
std::vector<int> ActivityRuntime::input_parameter_queues() const { return parameter_queues(*this, Direction::In); }

// ---------------------------------------------------------------------------
// paths

namespace {

/// Guard of one edge with `otherwise` replaced by the negated disjunction
/// of its siblings' guards.
Expr effective_guard(const ActivityModel& m, std::size_t edge) {
    const auto& e = m.edges[edge];
    if (!e.guard) return Expr::constant(true);
    if (e.guard->kind != Expr::Kind::Otherwise) return *e.guard;
    std::vector<Expr> others;
    for (std::size_t s : m.outgoing(e.source)) {
        if (s == edge || !m.edges[s].guard || m.edges[s].guard->kind == Expr::Kind::Otherwise) continue;
        others.push_back(*m.edges[s].guard);
    }
    if (others.empty()) return Expr::constant(true);
    return Expr::negate(Expr::any_of(std::move(others)));
}

struct PathBuilder {
    ActivityRuntime& rt;
    const ActivityModel& m;
    int start;
    std::vector<std::size_t> route;
    std::vector<Expr> guards;

    void walk(std::size_t edge, bool has_join) {
        route.push_back(edge);
        guards.push_back(effective_guard(m, edge));
        std::size_t target = m.edges[edge].target;
        const auto kind = m.nodes[target].kind;
        if (kind == NodeKind::InputPin) {
            Path p;
            p.id = static_cast<int>(rt.paths.size());
            p.start = start;
            p.end = rt.queue_of.at(target);
            p.pass_rule = Expr::all_of(guards);
            p.has_join = has_join;
            p.route = route;
            rt.paths.push_back(std::move(p));
        } else if (is_control_node(kind)) {
            bool join = has_join || kind == NodeKind::JoinNode;
            // depth cap
            if (route.size() <= m.edges.size())
                for (std::size_t next : m.outgoing(target)) walk(next, join);
        }
        route.pop_back();
        guards.pop_back();
    }
};

}  // namespace

void create_paths(ActivityRuntime& rt) {
    const ActivityModel& m = *rt.definition;
    rt.paths.clear();
    for (auto& q : rt.queues) q.paths.clear();
    for (const auto& q : rt.queues) {
        if (q.kind != QueueKind::Output) continue;
        PathBuilder b{rt, m, q.id, {}, {}};
        for (std::size_t e : m.outgoing(q.pin)) b.walk(e, false);
    }
    for (const auto& p : rt.paths) {
        rt.queue(p.start).paths.push_back(p.id);
        rt.queue(p.end).paths.push_back(p.id);
    }
    rt.decision_pairs.clear();
    for (const auto& q : rt.queues) {
        if (q.kind != QueueKind::Output) continue;
        auto& pairs = rt.decision_pairs[q.id];
        for (std::size_t i = 0; i < q.paths.size(); ++i) {
            for (std::size_t j = i + 1; j < q.paths.size(); ++j) {
                const auto& a = rt.paths[static_cast<std::size_t>(q.paths[i])].route;
                const auto& b = rt.paths[static_cast<std::size_t>(q.paths[j])].route;
                std::size_t k = 0;
                while (k < a.size() && k < b.size() && a[k] == b[k]) ++k;
                if (k == 0) continue;
                std::size_t at = m.edges[a[k - 1]].target;
                if (m.nodes[at].kind == NodeKind::DecisionNode) pairs.emplace_back(q.paths[i], q.paths[j]);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// join criteria

namespace {

struct CriteriaBuilder {
    const ActivityRuntime& rt;
    const ActivityModel& m;
    const PullEngine& engine;
    std::vector<std::size_t> suffix;  ///< edges from the current point down to the serviced pin, reversed

    bool on_pull_path() const {
        for (int pid : engine.paths) {
            const auto& r = rt.paths[static_cast<std::size_t>(pid)].route;
            if (r.size() < suffix.size()) continue;
            if (std::equal(suffix.begin(), suffix.end(), r.rbegin())) return true;
        }
        return false;
    }

    std::optional<Expr> build(std::size_t edge) {
        suffix.push_back(edge);
        std::optional<Expr> result;
        if (on_pull_path()) result = expand(m.edges[edge].source);
        suffix.pop_back();
        return result;
    }

    std::optional<Expr> expand(std::size_t node) {
        const auto& def = m.nodes[node];
        if (def.kind == NodeKind::OutputPin) {
            std::vector<std::size_t> route(suffix.rbegin(), suffix.rend());
            for (int pid : engine.paths)
                if (rt.paths[static_cast<std::size_t>(pid)].route == route)
                    return Expr::queue_var(rt.var_of_queue.at(rt.queue_of.at(node)), pid);
            return std::nullopt;
        }
        std::vector<Expr> terms;
        if (def.kind == NodeKind::JoinNode && def.join_spec) terms.push_back(*def.join_spec);
        for (std::size_t in : m.incoming(node))
            if (auto t = build(in)) terms.push_back(std::move(*t));
        if (def.kind == NodeKind::JoinNode) return Expr::all_of(std::move(terms));
        if (def.kind == NodeKind::MergeNode) return Expr::any_of(std::move(terms));
        if (terms.empty()) return std::nullopt;
        if (terms.size() == 1) return std::move(terms.front());
        return Expr::any_of(std::move(terms));
    }
};

void collect_leaves(const Expr& e, std::set<std::string>& out) {
    if (e.kind == Expr::Kind::QueueVar) out.insert(e.var);
    for (const auto& c : e.children) collect_leaves(c, out);
}

}  // namespace

void create_join_criteria(ActivityRuntime& rt, PullEngine& engine, const CompileOptions& options) {
    const ActivityModel& m = *rt.definition;
    CriteriaBuilder b{rt, m, engine, {}};
    std::size_t pin = rt.queue(engine.queue).pin;
    std::vector<Expr> terms;
    for (std::size_t in : m.incoming(pin))
        if (auto t = b.build(in)) terms.push_back(std::move(*t));
    engine.join_criteria = Expr::any_of(std::move(terms));
    if (options.dnf_join_criteria) engine.join_criteria = to_dnf(engine.join_criteria);
    std::set<std::string> vars;
    collect_leaves(engine.join_criteria, vars);
    engine.sources.assign(vars.begin(), vars.end());
}

void create_token_engines(ActivityRuntime& rt, const CompileOptions& options) {
    rt.push_engines.clear();
    rt.pull_engines.clear();
    for (auto& q : rt.queues) {
        q.engine.reset();
        if (q.kind == QueueKind::Output) {
            PushEngine e;
            for (int pid : q.paths)
                if (!rt.paths[static_cast<std::size_t>(pid)].has_join) e.paths.push_back(pid);
            if (e.paths.empty()) continue;
            e.id = static_cast<int>(rt.push_engines.size());
            e.queue = q.id;
            q.engine = e.id;
            rt.push_engines.push_back(std::move(e));
        } else {
            PullEngine e;
            for (int pid : q.paths)
                if (rt.paths[static_cast<std::size_t>(pid)].has_join) e.paths.push_back(pid);
            if (e.paths.empty()) continue;
            e.id = static_cast<int>(rt.pull_engines.size());
            e.queue = q.id;
            q.engine = e.id;
            rt.pull_engines.push_back(std::move(e));
        }
    }
    for (auto& e : rt.pull_engines) create_join_criteria(rt, e, options);
}

// ---------------------------------------------------------------------------
// activity construction

namespace {

void build(ActivityRuntime& rt, const ActivityModel& m, const CompileOptions& options) {
    rt.definition = &m;
    rt.is_final = m.has_activity_final();

    auto add_queue = [&](std::size_t pin, QueueKind kind, int owner, std::optional<std::string> fallback_type) {
        Queue q;
        q.id = static_cast<int>(rt.queues.size());
        q.kind = kind;
        q.owner = owner;
        q.pin = pin;
        q.name = m.nodes[pin].name;
        q.type = m.nodes[pin].pin_type ? m.nodes[pin].pin_type : fallback_type;
        rt.queue_of[pin] = q.id;
        rt.queues.push_back(std::move(q));
        return rt.queues.back().id;
    };

    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        const auto& def = m.nodes[i];
        if (is_control_node(def.kind)) {
            rt.intermediate_of[i] = static_cast<int>(rt.intermediates.size());
            rt.intermediates.push_back({i, def.kind, def.name});
            continue;
        }
        if (!is_stable_node(def.kind)) continue;
        StableNode node;
        node.def = i;
        node.kind = def.kind;
        node.name = def.name;
        int index = static_cast<int>(rt.nodes.size());
        std::optional<std::string> param_type;
        if (def.kind == NodeKind::ActivityParameterNode) {
            node.parameter = m.parameter_of(i);
            if (node.parameter) param_type = m.parameters[*node.parameter].type;
        }
        for (std::size_t pin : m.pins_of(i, NodeKind::InputPin))
            node.inputs.push_back(add_queue(pin, QueueKind::Input, index, param_type));
        for (std::size_t pin : m.pins_of(i, NodeKind::OutputPin))
            node.outputs.push_back(add_queue(pin, QueueKind::Output, index, param_type));
        rt.stable_of[i] = index;
        rt.nodes.push_back(std::move(node));
    }
    for (const auto& q : rt.queues) {
        if (q.kind != QueueKind::Output) continue;
        std::string var = m.queue_var(q.pin);
        rt.queue_by_var[var] = q.id;
        rt.var_of_queue[q.id] = var;
    }

    auto end_of = [&](std::size_t node) {
        RuntimeEdge::End end;
        if (auto it = rt.queue_of.find(node); it != rt.queue_of.end()) {
            end.is_queue = true;
            end.index = it->second;
        } else if (auto jt = rt.intermediate_of.find(node); jt != rt.intermediate_of.end()) {
            end.index = jt->second;
        } else {
            end.index = -1;
        }
        return end;
    };
    for (std::size_t e = 0; e < m.edges.size(); ++e)
        rt.edges.push_back({e, end_of(m.edges[e].source), end_of(m.edges[e].target)});

    create_paths(rt);
    create_token_engines(rt, options);
}

}  // namespace

ActivityRuntime& ActivityFactory::create_activity(const ActivityModel& definition) {
    if (definition.execution_mode == ExecutionMode::Single) {
        if (auto it = pool_.find(&definition); it != pool_.end()) return *it->second;
    }
    auto rt = std::make_unique<ActivityRuntime>();
    build(*rt, definition, options_);
    rt->instance = static_cast<int>(instances_.size());
    instances_.push_back(std::move(rt));
    ActivityRuntime& out = *instances_.back();
    if (definition.execution_mode == ExecutionMode::Single) pool_[&definition] = &out;
    return out;
}

std::unique_ptr<ActivityRuntime> compile(const ActivityModel& definition, const CompileOptions& options) {
    auto rt = std::make_unique<ActivityRuntime>();
    build(*rt, definition, options);
    return rt;
}

// ---------------------------------------------------------------------------
// dump

std::string dump_runtime(const ActivityRuntime& rt) {
    const ActivityModel& m = *rt.definition;
    std::ostringstream out;
    out << "activity " << m.name << " mode=" << (m.execution_mode == ExecutionMode::Single ? "single" : "separate")
        << " final=" << (rt.is_final ? "true" : "false") << "\n";
    out << "# nodes\n";
    for (const auto& n : rt.nodes) {
        out << to_string(n.kind) << " " << n.name;
        if (n.parameter) out << " parameter=" << m.parameters[*n.parameter].name;
        out << "\n";
    }
    for (const auto& n : rt.intermediates) out << to_string(n.kind) << " " << n.name << "\n";
    out << "# queues\n";
    for (const auto& q : rt.queues) {
        out << "q" << q.id << " " << (q.kind == QueueKind::Output ? "output" : "input") << " " << q.name << " "
            << q.type.value_or("null");
        if (q.engine) out << " " << (q.kind == QueueKind::Output ? "push" : "pull") << *q.engine;
        out << "\n";
    }
    out << "# paths\n";
    for (const auto& p : rt.paths)
        out << rt.queue(p.start).name << " -> " << rt.queue(p.end).name << " : " << p.pass_rule.to_string() << " : "
            << (p.has_join ? "pull" : "push") << "\n";
    out << "# routes\n";
    for (const auto& p : rt.paths) {
        out << "p" << p.id;
        for (std::size_t e : p.route) out << " " << m.edges[e].name;
        out << "\n";
    }
    out << "# engines\n";
    for (const auto& e : rt.push_engines) {
        out << "push" << e.id << " " << rt.queue(e.queue).name;
        for (int pid : e.paths) out << " p" << pid;
        out << "\n";
    }
    for (const auto& e : rt.pull_engines) {
        out << "pull" << e.id << " " << rt.queue(e.queue).name;
        for (int pid : e.paths) out << " p" << pid;
        out << " : " << e.join_criteria.to_prefix() << "\n";
    }
    return out.str();
}

}  // namespace advm
