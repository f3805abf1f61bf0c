#include "advm/vm.hpp"

#include <algorithm>
#include <set>

namespace advm {

using json = nlohmann::ordered_json;

std::string_view to_string(RuntimeError::Kind kind) {
    switch (kind) {
    case RuntimeError::Kind::AlreadyActive: return "AlreadyActive";
    case RuntimeError::Kind::NotActive: return "NotActive";
    case RuntimeError::Kind::ArityMismatch: return "ArityMismatch";
    case RuntimeError::Kind::TypeMismatch: return "TypeMismatch";
    case RuntimeError::Kind::ExclusivityViolated: return "ExclusivityViolated";
    case RuntimeError::Kind::GuardEvaluation: return "GuardEvaluation";
    case RuntimeError::Kind::BehaviorUnbound: return "BehaviorUnbound";
    case RuntimeError::Kind::BehaviorArityMismatch: return "BehaviorArityMismatch";
    case RuntimeError::Kind::BehaviorFailed: return "BehaviorFailed";
    case RuntimeError::Kind::RaceDetected: return "RaceDetected";
    case RuntimeError::Kind::SingleInstanceBusy: return "SingleInstanceBusy";
    case RuntimeError::Kind::StepLimit: return "StepLimit";
    }
    return "?";
}

namespace {

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

bool passes_any(const Token& t, const std::vector<int>& paths) {
    return std::any_of(t.passes.begin(), t.passes.end(), [&](int p) { return contains(paths, p); });
}

Datum typed_for(const Queue& q, Datum d) {
    if (q.type) d.type = q.type;
    return d;
}

json datum_json(const Datum& d) { return d.render(); }

}  // namespace

Machine::Machine(const ModelSet& models, BehaviorRegistry behaviors, MachineOptions options)
    : models_(models), behaviors_(std::move(behaviors)), options_(options), factory_(options.compile),
      rng_(options.seed) {}

// ---------------------------------------------------------------------------
// bookkeeping

ActivityRuntime& Machine::runtime(int instance) const {
    return *factory_.instances()[static_cast<std::size_t>(instance)];
}

Machine::Instance& Machine::instance_of(const ActivityRuntime& rt) { return instances_[rt.instance]; }

std::string Machine::label(const ActivityRuntime& rt) const {
    auto it = instances_.find(rt.instance);
    return it == instances_.end() ? rt.definition->name : it->second.label;
}

std::string Machine::queue_label(const ActivityRuntime& rt, int queue) const {
    return label(rt) + ":" + rt.queue(queue).name;
}

json Machine::token_json(const ActivityRuntime& rt, const Token& t) const {
    (void)rt;
    json j;
    j["token"] = t.id;
    j["birth"] = t.birth;
    j["value"] = datum_json(t.value);
    j["origins"] = t.origins;
    if (t.group) j["group"] = *t.group;
    return j;
}

std::map<std::string, std::vector<std::uint64_t>> Machine::queue_snapshot() const {
    std::map<std::string, std::vector<std::uint64_t>> out;
    for (const auto& rt : factory_.instances()) {
        if (!instances_.contains(rt->instance)) continue;
        for (const auto& q : rt->queues) {
            if (q.tokens.empty()) continue;
            auto& ids = out[queue_label(*rt, q.id)];
            for (const auto& t : q.tokens) ids.push_back(t.id);
        }
    }
    return out;
}

void Machine::step_done() {
    if (hook_) hook_(*this);
}

// ---------------------------------------------------------------------------
// lifecycle

ActivityRuntime& Machine::create(const ActivityModel& definition) {
    ActivityRuntime& rt = factory_.create_activity(definition);
    if (!instances_.contains(rt.instance)) instances_[rt.instance].label = definition.name;
    return rt;
}

void Machine::activate(ActivityRuntime& rt) {
    if (rt.is_active)
        throw RuntimeError(RuntimeError::Kind::AlreadyActive, "activity '" + label(rt) + "' is already active");
    rt.is_active = true;
    json p;
    p["instance"] = label(rt);
    p["activity"] = rt.definition->name;
    trace_.emit(EventKind::ActivityActivated, std::move(p));
}

const Token& Machine::produce(ActivityRuntime& rt, int queue, Datum value, std::optional<std::uint64_t> firing) {
    Queue& q = rt.queue(queue);
    Token t;
    t.id = ++next_token_;
    t.birth = ++next_birth_;
    t.value = std::move(value);
    t.origins = {t.birth};
    for (int pid : q.paths) {
        const Path& p = rt.paths[static_cast<std::size_t>(pid)];
        try {
            if (eval_guard(p.pass_rule, t.value)) t.passes.push_back(pid);
        } catch (const EvalError& ex) {
            throw RuntimeError(RuntimeError::Kind::GuardEvaluation,
                               "guard `" + p.pass_rule.to_string() + "` on token " + t.value.render() + " at " +
                                   queue_label(rt, queue) + ": " + ex.what());
        }
    }
    for (const auto& [a, b] : rt.decision_pairs[queue]) {
        if (contains(t.passes, a) && contains(t.passes, b))
            throw RuntimeError(RuntimeError::Kind::ExclusivityViolated,
                               "token " + t.value.render() + " at " + queue_label(rt, queue) +
                                   " satisfies two guards of one decision: `" +
                                   rt.paths[static_cast<std::size_t>(a)].pass_rule.to_string() + "` and `" +
                                   rt.paths[static_cast<std::size_t>(b)].pass_rule.to_string() + "`");
    }
    json p;
    p["instance"] = label(rt);
    p["queue"] = queue_label(rt, queue);
    p["token"] = t.id;
    p["birth"] = t.birth;
    p["value"] = datum_json(t.value);
    p["origins"] = t.origins;
    if (firing)
        p["firing"] = *firing;
    else
        p["source"] = rt.nodes[static_cast<std::size_t>(q.owner)].kind == NodeKind::InitialNode ? "initial" : "parameter";
    trace_.emit(EventKind::TokenCreated, std::move(p));
    q.tokens.push_back(std::move(t));
    return q.tokens.back();
}

void Machine::invoke(ActivityRuntime& rt, const std::vector<Datum>& args) {
    if (!rt.is_active) throw RuntimeError(RuntimeError::Kind::NotActive, "activity '" + label(rt) + "' is not active");
    const ActivityModel& m = *rt.definition;
    auto in_params = m.parameters_with(Direction::In);
    if (args.size() != in_params.size())
        throw RuntimeError(RuntimeError::Kind::ArityMismatch, "activity '" + m.name + "' takes " +
                                                                  std::to_string(in_params.size()) +
                                                                  " arguments, got " + std::to_string(args.size()));
    for (std::size_t i = 0; i < args.size(); ++i) {
        const auto& p = m.parameters[in_params[i]];
        if (args[i].type && *args[i].type != p.type)
            throw RuntimeError(RuntimeError::Kind::TypeMismatch, "argument " + std::to_string(i + 1) + " of '" +
                                                                     m.name + "' is " + *args[i].type +
                                                                     ", parameter '" + p.name + "' wants " + p.type);
    }
    Instance& inst = instance_of(rt);
    inst.invoked = true;
    json p;
    p["instance"] = inst.label;
    p["activity"] = m.name;
    json arr = json::array();
    for (const auto& a : args) arr.push_back(datum_json(a));
    p["args"] = std::move(arr);
    if (inst.invoked_by) p["invoked_by"] = *inst.invoked_by;
    trace_.emit(EventKind::ActivityInvoked, std::move(p));

    if (in_params.empty()) {
        for (const auto& node : rt.nodes)
            if (node.kind == NodeKind::InitialNode)
                for (int q : node.outputs) produce(rt, q, Datum{});
        return;
    }
    for (std::size_t i = 0; i < in_params.size(); ++i) {
        auto pn = m.parameter_node(in_params[i]);
        if (!pn) continue;
        const StableNode& node = rt.nodes[static_cast<std::size_t>(rt.stable_of.at(*pn))];
        if (node.outputs.empty()) continue;
        Datum d = args[i];
        d.type = m.parameters[in_params[i]].type;
        produce(rt, node.outputs.front(), std::move(d));
    }
}

std::vector<Datum> Machine::get_params(const ActivityRuntime& rt) const {
    std::vector<Datum> out;
    for (int q : rt.output_parameter_queues()) {
        const auto& tokens = rt.queue(q).tokens;
        if (!tokens.empty()) out.push_back(tokens.front().value);
    }
    return out;
}

void Machine::delete_token(ActivityRuntime& rt, int queue, std::size_t index, std::string_view reason) {
    auto& tokens = rt.queue(queue).tokens;
    json p;
    p["instance"] = label(rt);
    p["queue"] = queue_label(rt, queue);
    p["token"] = tokens[index].id;
    p["reason"] = reason;
    trace_.emit(EventKind::TokenDeleted, std::move(p));
    tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(index));
}

void Machine::deactivate(ActivityRuntime& rt, std::string_view reason) {
    rt.is_active = false;
    json p;
    p["instance"] = label(rt);
    p["reason"] = reason;
    trace_.emit(EventKind::ActivityCompleted, std::move(p));
}

void Machine::cascade_children(const ActivityRuntime& rt) {
    for (auto* list : {&awaiting_, &detached_}) {
        std::vector<int> children;
        for (const auto& f : *list)
            if (f.runtime == rt.instance && f.child) children.push_back(*f.child);
        std::erase_if(*list, [&](const Firing& f) { return f.runtime == rt.instance; });
        for (int c : children) terminate(runtime(c));
    }
    for (auto& f : pending_)
        if (f.runtime == rt.instance) f.post_termination = true;
}

void Machine::terminate(ActivityRuntime& rt) {
    bool has_children = std::any_of(awaiting_.begin(), awaiting_.end(), [&](const Firing& f) {
        return f.runtime == rt.instance;
    }) || std::any_of(detached_.begin(), detached_.end(), [&](const Firing& f) { return f.runtime == rt.instance; });
    if (!rt.is_active && rt.token_count() == 0 && !has_children) return;
    rt.is_active = false;
    for (auto& q : rt.queues)
        while (!q.tokens.empty()) delete_token(rt, q.id, 0, "terminate");
    cascade_children(rt);
    json p;
    p["instance"] = label(rt);
    trace_.emit(EventKind::ActivityTerminated, std::move(p));
}

// ---------------------------------------------------------------------------
// engines

std::optional<std::size_t> Machine::push_candidate(const ActivityRuntime& rt, int engine) const {
    const PushEngine& e = rt.push_engines[static_cast<std::size_t>(engine)];
    const auto& tokens = rt.queue(e.queue).tokens;
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (passes_any(tokens[i], e.paths)) return i;
    return std::nullopt;
}

bool Machine::push_engine_step(ActivityRuntime& rt, int engine) {
    if (!rt.is_active) return false;
    auto idx = push_candidate(rt, engine);
    if (!idx) return false;
    const PushEngine& e = rt.push_engines[static_cast<std::size_t>(engine)];
    auto& tokens = rt.queue(e.queue).tokens;
    Token source = tokens[*idx];
    tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(*idx));
    for (int pid : e.paths) {
        if (!contains(source.passes, pid)) continue;
        const Path& path = rt.paths[static_cast<std::size_t>(pid)];
        Token copy;
        copy.id = ++next_token_;
        copy.birth = source.birth;
        copy.value = source.value;
        copy.origins = source.origins;
        json p;
        p["instance"] = label(rt);
        p["token"] = copy.id;
        p["source_token"] = source.id;
        p["from"] = queue_label(rt, e.queue);
        p["to"] = queue_label(rt, path.end);
        p["birth"] = copy.birth;
        p["path"] = pid;
        p["round"] = round_;
        trace_.emit(EventKind::TokenMoved, std::move(p));
        rt.queue(path.end).tokens.push_back(std::move(copy));
    }
    return true;
}

std::optional<PullSelection> Machine::pull_candidate(const ActivityRuntime& rt, int engine) const {
    const PullEngine& e = rt.pull_engines[static_cast<std::size_t>(engine)];
    struct Source {
        std::string var;
        int queue;
        std::vector<const Token*> tokens;
    };
    std::vector<Source> sources;
    for (const auto& var : e.sources) {
        int q = rt.queue_by_var.at(var);
        Source s{var, q, {}};
        for (const auto& t : rt.queue(q).tokens)
            if (passes_any(t, e.paths)) s.tokens.push_back(&t);
        if (!s.tokens.empty()) sources.push_back(std::move(s));
    }
    if (sources.empty()) return std::nullopt;

    struct Entry {
        std::uint64_t birth;
        std::size_t source;
        const Token* token;
    };
    std::vector<Entry> all;
    for (std::size_t s = 0; s < sources.size(); ++s)
        for (const Token* t : sources[s].tokens) all.push_back({t->birth, s, t});
    std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.birth < b.birth; });

    std::size_t evaluations = 0;
    std::vector<const Token*> chosen(sources.size(), nullptr);
    auto satisfied = [&]() {
        TokenBinding binding;
        for (std::size_t s = 0; s < sources.size(); ++s)
            if (chosen[s]) binding.emplace(sources[s].var, chosen[s]->value);
        RouteFilter filter = [&](std::string_view var, int route) {
            for (std::size_t s = 0; s < sources.size(); ++s)
                if (sources[s].var == var) return chosen[s] && contains(chosen[s]->passes, route);
            return false;
        };
        if (++evaluations > 200000)
            throw RuntimeError(RuntimeError::Kind::StepLimit, "join selection search too large at " +
                                                                  queue_label(rt, e.queue));
        try {
            return eval_join_criteria(e.join_criteria, binding, filter);
        } catch (const EvalError& ex) {
            throw RuntimeError(RuntimeError::Kind::GuardEvaluation,
                               "join criteria at " + queue_label(rt, e.queue) + ": " + ex.what());
        }
    };

    for (const Entry& top : all) {
        std::optional<PullSelection> best;
        std::fill(chosen.begin(), chosen.end(), nullptr);
        chosen[top.source] = top.token;
        // other sources: absent or a strictly older token
        std::vector<std::vector<const Token*>> options(sources.size());
        for (std::size_t s = 0; s < sources.size(); ++s) {
            if (s == top.source) continue;
            options[s].push_back(nullptr);
            for (const Token* t : sources[s].tokens)
                if (t->birth < top.birth) options[s].push_back(t);
        }
        std::vector<std::size_t> pick(sources.size(), 0);
        while (true) {
            for (std::size_t s = 0; s < sources.size(); ++s)
                if (s != top.source) chosen[s] = options[s][pick[s]];
            if (satisfied()) {
                PullSelection sel;
                for (std::size_t s = 0; s < sources.size(); ++s) {
                    if (!chosen[s]) continue;
                    sel.tokens.emplace_back(sources[s].queue, chosen[s]->id);
                    sel.births.push_back(chosen[s]->birth);
                }
                std::sort(sel.births.begin(), sel.births.end());
                sel.max_birth = top.birth;
                if (!best || std::pair(sel.births.size(), sel.births) < std::pair(best->births.size(), best->births))
                    best = std::move(sel);
            }
            std::size_t s = 0;
            for (; s < sources.size(); ++s) {
                if (s == top.source) continue;
                if (++pick[s] < options[s].size()) break;
                pick[s] = 0;
            }
            if (s == sources.size()) break;
        }
        if (best) return best;
    }
    return std::nullopt;
}

bool Machine::pull_engine_step(ActivityRuntime& rt, int engine) {
    if (!rt.is_active) return false;
    auto sel = pull_candidate(rt, engine);
    if (!sel) return false;
    const PullEngine& e = rt.pull_engines[static_cast<std::size_t>(engine)];
    std::vector<std::pair<int, Token>> taken;
    for (const auto& [q, id] : sel->tokens) {
        auto& tokens = rt.queue(q).tokens;
        auto it = std::find_if(tokens.begin(), tokens.end(), [&](const Token& t) { return t.id == id; });
        taken.emplace_back(q, *it);
    }
    std::sort(taken.begin(), taken.end(),
              [](const auto& a, const auto& b) { return a.second.birth < b.second.birth; });
    bool all_control = std::all_of(taken.begin(), taken.end(), [](const auto& p) { return p.second.is_control(); });
    auto remove = [&](int q, std::uint64_t id, std::string_view reason) {
        auto& tokens = rt.queue(q).tokens;
        auto it = std::find_if(tokens.begin(), tokens.end(), [&](const Token& t) { return t.id == id; });
        delete_token(rt, q, static_cast<std::size_t>(it - tokens.begin()), reason);
    };

    if (all_control) {
        Token joined;
        joined.id = ++next_token_;
        joined.birth = sel->max_birth;
        for (const auto& [q, t] : taken) {
            joined.origins.insert(joined.origins.end(), t.origins.begin(), t.origins.end());
            remove(q, t.id, "joined");
        }
        std::sort(joined.origins.begin(), joined.origins.end());
        json p;
        p["instance"] = label(rt);
        p["queue"] = queue_label(rt, e.queue);
        p["token"] = joined.id;
        p["birth"] = joined.birth;
        p["value"] = datum_json(joined.value);
        p["origins"] = joined.origins;
        p["source"] = "join";
        p["round"] = round_;
        trace_.emit(EventKind::TokenCreated, std::move(p));
        rt.queue(e.queue).tokens.push_back(std::move(joined));
        return true;
    }

    std::uint64_t group = ++next_group_;
    json members = json::array();
    for (const auto& [q, t] : taken) {
        if (t.is_control()) {
            remove(q, t.id, "joined");
            continue;
        }
        auto& tokens = rt.queue(q).tokens;
        auto it = std::find_if(tokens.begin(), tokens.end(), [&](const Token& x) { return x.id == t.id; });
        tokens.erase(it);
        Token copy;
        copy.id = ++next_token_;
        copy.birth = t.birth;
        copy.value = t.value;
        copy.origins = t.origins;
        copy.group = group;
        json p;
        p["instance"] = label(rt);
        p["token"] = copy.id;
        p["source_token"] = t.id;
        p["from"] = queue_label(rt, q);
        p["to"] = queue_label(rt, e.queue);
        p["birth"] = copy.birth;
        p["group"] = group;
        p["round"] = round_;
        trace_.emit(EventKind::TokenMoved, std::move(p));
        members.push_back(copy.id);
        rt.queue(e.queue).tokens.push_back(std::move(copy));
    }
    json p;
    p["instance"] = label(rt);
    p["queue"] = queue_label(rt, e.queue);
    p["group"] = group;
    p["tokens"] = std::move(members);
    trace_.emit(EventKind::GroupFormed, std::move(p));
    return true;
}

// ---------------------------------------------------------------------------
// actions

bool Machine::busy(const ActivityRuntime& rt, int node) const {
    return std::any_of(awaiting_.begin(), awaiting_.end(),
                       [&](const Firing& f) { return f.runtime == rt.instance && f.node == node; });
}

bool Machine::action_enabled(const ActivityRuntime& rt, int node) const {
    const StableNode& n = rt.nodes[static_cast<std::size_t>(node)];
    if (!rt.is_active || n.kind != NodeKind::CallBehaviorAction || n.inputs.empty() || busy(rt, node)) return false;
    return std::all_of(n.inputs.begin(), n.inputs.end(), [&](int q) { return !rt.queue(q).tokens.empty(); });
}

void Machine::produce_outputs(ActivityRuntime& rt, int node, const std::vector<Datum>& values, std::uint64_t firing,
                              bool async) {
    const StableNode& n = rt.nodes[static_cast<std::size_t>(node)];
    json produced = json::array();
    for (std::size_t i = 0; i < n.outputs.size(); ++i) {
        int q = n.outputs[i];
        Datum d = async ? Datum{} : typed_for(rt.queue(q), values[i]);
        const Token& t = produce(rt, q, std::move(d), firing);
        json o;
        o["pin"] = rt.queue(q).name;
        o["token"] = t.id;
        o["value"] = datum_json(t.value);
        produced.push_back(std::move(o));
    }
    if (async) return;
    json p;
    p["instance"] = label(rt);
    p["action"] = n.name;
    p["firing"] = firing;
    p["produced"] = std::move(produced);
    trace_.emit(EventKind::ActionCompleted, std::move(p));
}

bool Machine::action_step(ActivityRuntime& rt, int node) {
    if (!action_enabled(rt, node)) return false;
    const StableNode& n = rt.nodes[static_cast<std::size_t>(node)];
    const NodeDef& def = rt.definition->nodes[n.def];
    std::uint64_t firing = ++next_firing_;

    json consumed = json::array();
    std::vector<Datum> inputs;
    for (int q : n.inputs) {
        auto& tokens = rt.queue(q).tokens;
        std::vector<Token> take;
        if (tokens.front().group) {
            std::uint64_t g = *tokens.front().group;
            for (auto it = tokens.begin(); it != tokens.end();) {
                if (it->group == g) {
                    take.push_back(*it);
                    it = tokens.erase(it);
                } else {
                    ++it;
                }
            }
        } else {
            take.push_back(tokens.front());
            tokens.pop_front();
        }
        for (const auto& t : take) {
            json c = token_json(rt, t);
            c["pin"] = rt.queue(q).name;
            consumed.push_back(std::move(c));
            if (!t.is_control()) inputs.push_back(t.value);
        }
    }
    json p;
    p["instance"] = label(rt);
    p["action"] = n.name;
    p["firing"] = firing;
    p["round"] = round_;
    p["consumed"] = std::move(consumed);
    trace_.emit(EventKind::ActionStarted, std::move(p));

    const std::string& ref = *def.behavior_ref;
    if (const ActivityModel* sub = models_.find_activity(ref)) {
        if (def.is_synchronous && sub->parameters_with(Direction::Out).size() != n.outputs.size())
            throw RuntimeError(RuntimeError::Kind::BehaviorArityMismatch,
                               "action '" + n.name + "' has " + std::to_string(n.outputs.size()) +
                                   " output pins but activity '" + ref + "' returns " +
                                   std::to_string(sub->parameters_with(Direction::Out).size()) + " values");
        ActivityRuntime& child = factory_.create_activity(*sub);
        if (child.is_active)
            throw RuntimeError(RuntimeError::Kind::SingleInstanceBusy,
                               "single-mode activity '" + ref + "' is still running");
        for (auto& q : child.queues) q.tokens.clear();
        Instance& parent = instance_of(rt);
        int k = ++parent.calls[node];
        Instance& ci = instances_[child.instance];
        ci.label = parent.label + "/" + n.name + "#" + std::to_string(k);
        ci.invoked_by = firing;
        ci.invoked = false;
        ci.calls.clear();
        json s;
        s["instance"] = label(rt);
        s["action"] = n.name;
        s["firing"] = firing;
        s["child"] = ci.label;
        s["activity"] = ref;
        s["async"] = !def.is_synchronous;
        trace_.emit(EventKind::SubActivityInvoked, std::move(s));
        activate(child);
        try {
            invoke(child, inputs);
        } catch (const RuntimeError& ex) {
            if (ex.kind() == RuntimeError::Kind::ArityMismatch || ex.kind() == RuntimeError::Kind::TypeMismatch)
                throw RuntimeError(RuntimeError::Kind::BehaviorArityMismatch,
                                   "action '" + n.name + "': " + std::string(ex.what()));
            throw;
        }
        Firing f{firing, rt.instance, node, child.instance, {}, false};
        if (def.is_synchronous) {
            awaiting_.push_back(std::move(f));
        } else {
            produce_outputs(rt, node, {}, firing, true);
            detached_.push_back(std::move(f));
        }
        return true;
    }

    const OpaqueBehaviorBinding* b = behaviors_.find(ref);
    if (!b) throw RuntimeError(RuntimeError::Kind::BehaviorUnbound, "action '" + n.name + "' calls unbound '" + ref + "'");
    if ((b->in_arity && *b->in_arity != inputs.size()) || (b->out_arity && *b->out_arity != n.outputs.size()))
        throw RuntimeError(RuntimeError::Kind::BehaviorArityMismatch,
                           "behavior '" + ref + "' does not fit the pins of action '" + n.name + "'");
    if (!def.is_synchronous) {
        produce_outputs(rt, node, {}, firing, true);
        pending_.push_back({firing, rt.instance, node, std::nullopt, std::move(inputs), false});
        return true;
    }
    std::vector<Datum> outputs;
    try {
        outputs = b->body(inputs, n.outputs.size());
    } catch (const BehaviorError& ex) {
        throw RuntimeError(RuntimeError::Kind::BehaviorFailed, "behavior '" + ref + "': " + ex.what());
    }
    if (outputs.size() != n.outputs.size())
        throw RuntimeError(RuntimeError::Kind::BehaviorArityMismatch,
                           "behavior '" + ref + "' returned " + std::to_string(outputs.size()) + " values for " +
                               std::to_string(n.outputs.size()) + " output pins");
    produce_outputs(rt, node, outputs, firing, false);
    return true;
}

void Machine::complete_async(std::size_t index) {
    Firing f = pending_[index];
    pending_.erase(pending_.begin() + static_cast<std::ptrdiff_t>(index));
    ActivityRuntime& rt = runtime(f.runtime);
    const StableNode& n = rt.nodes[static_cast<std::size_t>(f.node)];
    const OpaqueBehaviorBinding* b = behaviors_.find(*rt.definition->nodes[n.def].behavior_ref);
    try {
        (void)b->body(f.inputs, n.outputs.size());
    } catch (const BehaviorError& ex) {
        throw RuntimeError(RuntimeError::Kind::BehaviorFailed, std::string("asynchronous behavior: ") + ex.what());
    }
    json p;
    p["instance"] = label(rt);
    p["action"] = n.name;
    p["firing"] = f.id;
    p["produced"] = json::array();
    p["async"] = true;
    if (f.post_termination) p["post_termination"] = true;
    trace_.emit(EventKind::ActionCompleted, std::move(p));
}

// ---------------------------------------------------------------------------
// final nodes and activity completion

bool Machine::flow_final_step(ActivityRuntime& rt, int node) {
    const StableNode& n = rt.nodes[static_cast<std::size_t>(node)];
    if (!rt.is_active || n.kind != NodeKind::FlowFinalNode) return false;
    for (int q : n.inputs) {
        if (rt.queue(q).tokens.empty()) continue;
        delete_token(rt, q, 0, "flow final");
        return true;
    }
    return false;
}

bool Machine::activity_final_step(ActivityRuntime& rt, int node) {
    const StableNode& n = rt.nodes[static_cast<std::size_t>(node)];
    if (!rt.is_active || n.kind != NodeKind::ActivityFinalNode) return false;
    bool reached = std::any_of(n.inputs.begin(), n.inputs.end(), [&](int q) { return !rt.queue(q).tokens.empty(); });
    if (!reached) return false;
    auto keep = rt.output_parameter_queues();
    for (auto& q : rt.queues) {
        if (contains(keep, q.id)) continue;
        while (!q.tokens.empty()) delete_token(rt, q.id, 0, "activity final");
    }
    deactivate(rt, "final");
    cascade_children(rt);
    return true;
}

bool Machine::activity_process_step(ActivityRuntime& rt) {
    if (!rt.is_active || rt.is_final) return false;
    auto outs = rt.output_parameter_queues();
    if (outs.empty()) return false;
    for (int q : outs)
        if (rt.queue(q).tokens.empty()) return false;
    deactivate(rt, "parameters");
    return true;
}

bool Machine::drained_step(ActivityRuntime& rt) {
    if (!rt.is_active || !instance_of(rt).invoked) return false;
    if (!rt.definition->parameters_with(Direction::Out).empty() || rt.token_count() != 0) return false;
    auto mine = [&](const Firing& f) { return f.runtime == rt.instance; };
    if (std::any_of(awaiting_.begin(), awaiting_.end(), mine) || std::any_of(detached_.begin(), detached_.end(), mine) ||
        std::any_of(pending_.begin(), pending_.end(), mine))
        return false;
    deactivate(rt, "drained");
    return true;
}

bool Machine::complete_children() {
    for (std::size_t i = 0; i < awaiting_.size(); ++i) {
        ActivityRuntime& child = runtime(*awaiting_[i].child);
        if (child.is_active) continue;
        Firing f = awaiting_[i];
        awaiting_.erase(awaiting_.begin() + static_cast<std::ptrdiff_t>(i));
        ActivityRuntime& rt = runtime(f.runtime);
        const StableNode& n = rt.nodes[static_cast<std::size_t>(f.node)];
        auto outs = get_params(child);
        if (outs.size() != n.outputs.size())
            throw RuntimeError(RuntimeError::Kind::BehaviorArityMismatch,
                               "activity '" + label(child) + "' finished with " + std::to_string(outs.size()) +
                                   " of " + std::to_string(n.outputs.size()) + " output parameters filled");
        produce_outputs(rt, f.node, outs, f.id, false);
        return true;
    }
    for (std::size_t i = 0; i < detached_.size(); ++i) {
        ActivityRuntime& child = runtime(*detached_[i].child);
        if (child.is_active) continue;
        Firing f = detached_[i];
        detached_.erase(detached_.begin() + static_cast<std::ptrdiff_t>(i));
        ActivityRuntime& rt = runtime(f.runtime);
        json p;
        p["instance"] = label(rt);
        p["action"] = rt.nodes[static_cast<std::size_t>(f.node)].name;
        p["firing"] = f.id;
        p["produced"] = json::array();
        p["async"] = true;
        trace_.emit(EventKind::ActionCompleted, std::move(p));
        return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// scheduler

void Machine::check_races() {
    for (const auto& rtp : factory_.instances()) {
        const ActivityRuntime& rt = *rtp;
        if (!rt.is_active) continue;
        for (const auto& q : rt.queues) {
            if (q.kind != QueueKind::Output) continue;
            for (const auto& t : q.tokens) {
                ++race_checks_;
                std::set<std::pair<int, int>> engines;  // (0 push | 1 pull, id)
                for (int pid : t.passes) {
                    const Path& p = rt.paths[static_cast<std::size_t>(pid)];
                    if (p.has_join)
                        engines.emplace(1, *rt.queue(p.end).engine);
                    else
                        engines.emplace(0, *q.engine);
                }
                if (engines.size() > 1)
                    throw RuntimeError(RuntimeError::Kind::RaceDetected,
                                       "token " + std::to_string(t.id) + " at " + queue_label(rt, q.id) +
                                           " is a candidate of " + std::to_string(engines.size()) + " engines");
            }
        }
    }
}

bool Machine::internal_step() {
    struct Move {
        std::uint64_t birth;
        int kind;
        int runtime;
        int engine;
    };
    std::optional<Move> best;
    auto better = [](const Move& a, const Move& b) {
        return std::tie(a.birth, a.kind, a.runtime, a.engine) < std::tie(b.birth, b.kind, b.runtime, b.engine);
    };
    for (const auto& rtp : factory_.instances()) {
        const ActivityRuntime& rt = *rtp;
        if (!rt.is_active) continue;
        for (const auto& e : rt.push_engines) {
            if (auto i = push_candidate(rt, e.id)) {
                Move m{rt.queue(e.queue).tokens[*i].birth, 0, rt.instance, e.id};
                if (!best || better(m, *best)) best = m;
            }
        }
        for (const auto& e : rt.pull_engines) {
            if (auto s = pull_candidate(rt, e.id)) {
                Move m{s->max_birth, 1, rt.instance, e.id};
                if (!best || better(m, *best)) best = m;
            }
        }
    }
    if (best) {
        ActivityRuntime& rt = runtime(best->runtime);
        return best->kind == 0 ? push_engine_step(rt, best->engine) : pull_engine_step(rt, best->engine);
    }
    for (const auto& rtp : factory_.instances())
        for (std::size_t n = 0; n < rtp->nodes.size(); ++n)
            if (flow_final_step(*rtp, static_cast<int>(n))) return true;
    if (complete_children()) return true;
    for (const auto& rtp : factory_.instances())
        if (activity_process_step(*rtp) || drained_step(*rtp)) return true;
    for (const auto& rtp : factory_.instances())
        for (std::size_t n = 0; n < rtp->nodes.size(); ++n)
            if (activity_final_step(*rtp, static_cast<int>(n))) return true;
    return false;
}

std::vector<Machine::Candidate> Machine::external_candidates() const {
    std::vector<Candidate> out;
    for (const auto& rtp : factory_.instances())
        for (std::size_t n = 0; n < rtp->nodes.size(); ++n)
            if (action_enabled(*rtp, static_cast<int>(n)))
                out.push_back({Candidate::Kind::Action, rtp->instance, static_cast<int>(n), 0});
    for (std::size_t i = 0; i < pending_.size(); ++i) out.push_back({Candidate::Kind::AsyncCompletion, 0, 0, i});
    return out;
}

void Machine::finish(ActivityRuntime& root) {
    for (const auto& rtp : factory_.instances())
        if (rtp.get() != &root && rtp->is_active) terminate(*rtp);
    awaiting_.clear();
    detached_.clear();
    while (!pending_.empty()) {
        pending_.front().post_termination = true;
        complete_async(0);
    }
}

RunResult Machine::run_to_quiescence(ActivityRuntime& root) {
    RunResult result;
    try {
        std::size_t steps = 0;
        while (true) {
            if (++steps > options_.max_steps)
                throw RuntimeError(RuntimeError::Kind::StepLimit, "no quiescence within " +
                                                                      std::to_string(options_.max_steps) + " steps");
            if (options_.check_races) check_races();
            if (internal_step()) {
                step_done();
                continue;
            }
            if (!root.is_active) break;
            auto candidates = external_candidates();
            if (candidates.empty()) break;
            const Candidate& c = candidates[rng_.pick(candidates.size())];
            ++round_;
            if (c.kind == Candidate::Kind::Action)
                action_step(runtime(c.runtime), c.node);
            else
                complete_async(c.pending);
            step_done();
        }
        if (!root.is_active) {
            result.status = RunStatus::Completed;
            result.outputs = get_params(root);
            finish(root);
        } else {
            result.status = RunStatus::QuiescentStuck;
        }
    } catch (const RuntimeError& ex) {
        json p;
        p["error"] = to_string(ex.kind());
        p["message"] = ex.what();
        trace_.emit(EventKind::ExecutionError, std::move(p));
        result.status = RunStatus::Error;
        result.error = std::string(to_string(ex.kind())) + ": " + ex.what();
    }
    result.trace = trace_;
    return result;
}

RunResult Machine::run(std::string_view activity, const std::vector<Datum>& args) {
    const ActivityModel* def = models_.find_activity(activity);
    if (!def) throw std::invalid_argument("no activity named '" + std::string(activity) + "'");
    ActivityRuntime& root = create(*def);
    try {
        activate(root);
        invoke(root, args);
    } catch (const RuntimeError& ex) {
        RunResult r;
        json p;
        p["error"] = to_string(ex.kind());
        p["message"] = ex.what();
        trace_.emit(EventKind::ExecutionError, std::move(p));
        r.status = RunStatus::Error;
        r.error = std::string(to_string(ex.kind())) + ": " + ex.what();
        r.trace = trace_;
        return r;
    }
    return run_to_quiescence(root);
}

}  // namespace advm
