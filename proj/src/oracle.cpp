#include "advm/oracle.hpp"

#include "advm/vm.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <set>

namespace advm {

namespace {

using json = nlohmann::ordered_json;
using Edges = std::vector<std::size_t>;

struct OToken {
    std::uint64_t id = 0;
    std::uint64_t birth = 0;
    Datum value;
    std::vector<std::uint64_t> origins;
    std::set<Edges> passing;   ///< downstream routes whose guards admit the token
    std::set<Edges> consumed;  ///< fork-branch keys already taken
};

struct Item {
    std::size_t pin;
    std::size_t index;  ///< into the pin's token list
    Edges copy;
};
using Bundle = std::vector<Item>;

struct OInstance {
    const ActivityModel* def = nullptr;
    int order = 0;
    std::string label;
    bool active = false;
    bool invoked = false;
    std::optional<std::uint64_t> invoked_by;
    std::map<std::size_t, int> calls;
    std::map<std::size_t, std::vector<OToken>> outputs;  ///< output pin -> tokens
    std::map<std::size_t, std::vector<Datum>> held;      ///< output parameter pin -> values
};

struct OFiring {
    std::uint64_t id = 0;
    int instance = 0;
    std::size_t node = 0;
    std::optional<int> child;
    std::vector<Datum> inputs;
    bool post_termination = false;
};

class Oracle {
public:
    Oracle(const ModelSet& models, const BehaviorRegistry& behaviors, const OracleOptions& options)
        : models_(models), behaviors_(behaviors), options_(options), rng_(options.seed) {}

    RunResult run(std::string_view activity, const std::vector<Datum>& args) {
        RunResult result;
        const ActivityModel* def = models_.find_activity(activity);
        if (!def) throw std::invalid_argument("no activity named '" + std::string(activity) + "'");
        try {
            OInstance& root = create(*def, std::string(def->name));
            activate(root);
            invoke(root, args);
            std::size_t steps = 0;
            while (true) {
                if (++steps > options_.max_steps)
                    throw RuntimeError(RuntimeError::Kind::StepLimit, "oracle step limit");
                if (internal_step()) continue;
                if (!root.active) break;
                auto cands = candidates();
                if (cands.empty()) break;
                auto [inst, node, pending] = cands[rng_.pick(cands.size())];
                ++round_;
                if (inst >= 0)
                    fire(*instances_[static_cast<std::size_t>(inst)], node);
                else
                    complete_async(pending);
            }
            if (!root.active) {
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

private:
    // -- static structure ---------------------------------------------------

    Expr guard_of(const ActivityModel& m, std::size_t edge) const {
        const auto& e = m.edges[edge];
        if (!e.guard) return Expr::constant(true);
        if (e.guard->kind != Expr::Kind::Otherwise) return *e.guard;
        std::vector<Expr> siblings;
        for (std::size_t s : m.outgoing(e.source))
            if (s != edge && m.edges[s].guard && m.edges[s].guard->kind != Expr::Kind::Otherwise)
                siblings.push_back(*m.edges[s].guard);
        return siblings.empty() ? Expr::constant(true) : Expr::negate(Expr::any_of(std::move(siblings)));
    }

    void routes_from(const ActivityModel& m, std::size_t node, Edges& prefix, std::vector<Edges>& out) const {
        for (std::size_t e : m.outgoing(node)) {
            if (prefix.size() > m.edges.size()) return;
            prefix.push_back(e);
            std::size_t t = m.edges[e].target;
            if (m.nodes[t].kind == NodeKind::InputPin)
                out.push_back(prefix);
            else if (is_control_node(m.nodes[t].kind))
                routes_from(m, t, prefix, out);
            prefix.pop_back();
        }
    }

    Edges copy_key(const ActivityModel& m, const Edges& route) const {
        Edges key;
        for (std::size_t e : route)
            if (m.nodes[m.edges[e].source].kind == NodeKind::ForkNode) key.push_back(e);
        return key;
    }

    bool remaining(const OInstance& inst, const OToken& t) const {
        if (t.passing.empty()) return true;
        for (const auto& r : t.passing)
            if (!t.consumed.contains(copy_key(*inst.def, r))) return true;
        return false;
    }

    std::size_t remaining_count(const OInstance& inst) const {
        std::size_t n = 0;
        for (const auto& [pin, tokens] : inst.outputs)
            for (const auto& t : tokens) n += remaining(inst, t) ? 1 : 0;
        for (const auto& [pin, vals] : inst.held) n += vals.size();
        return n;
    }

    // -- lifecycle ------------------------------------------------------------

    OInstance& create(const ActivityModel& def, std::string label) {
        if (def.execution_mode == ExecutionMode::Single) {
            for (auto& i : instances_) {
                if (i->def != &def) continue;
                if (i->active)
                    throw RuntimeError(RuntimeError::Kind::SingleInstanceBusy,
                                       "single-mode activity '" + def.name + "' is still running");
                i->outputs.clear();
                i->held.clear();
                i->calls.clear();
                i->label = std::move(label);
                return *i;
            }
        }
        auto inst = std::make_unique<OInstance>();
        inst->def = &def;
        inst->order = static_cast<int>(instances_.size());
        inst->label = std::move(label);
        instances_.push_back(std::move(inst));
        return *instances_.back();
    }

    void activate(OInstance& inst) {
        inst.active = true;
        json p;
        p["instance"] = inst.label;
        p["activity"] = inst.def->name;
        trace_.emit(EventKind::ActivityActivated, std::move(p));
    }

    void produce(OInstance& inst, std::size_t pin, Datum value, std::optional<std::uint64_t> firing) {
        const ActivityModel& m = *inst.def;
        OToken t;
        t.id = ++next_token_;
        t.birth = ++next_birth_;
        t.value = std::move(value);
        t.origins = {t.birth};
        std::vector<Edges> routes;
        Edges prefix;
        routes_from(m, pin, prefix, routes);
        std::vector<Edges> admitted;
        for (const auto& r : routes) {
            bool ok = true;
            for (std::size_t e : r) {
                Expr g = guard_of(m, e);
                try {
                    ok = eval_guard(g, t.value);
                } catch (const EvalError& ex) {
                    throw RuntimeError(RuntimeError::Kind::GuardEvaluation,
                                       "guard `" + g.to_string() + "` on " + t.value.render() + ": " + ex.what());
                }
                if (!ok) break;
            }
            if (ok) admitted.push_back(r);
        }
        for (std::size_t i = 0; i < admitted.size(); ++i) {
            for (std::size_t j = i + 1; j < admitted.size(); ++j) {
                const auto& a = admitted[i];
                const auto& b = admitted[j];
                std::size_t k = 0;
                while (k < a.size() && k < b.size() && a[k] == b[k]) ++k;
                if (k > 0 && m.nodes[m.edges[a[k - 1]].target].kind == NodeKind::DecisionNode)
                    throw RuntimeError(RuntimeError::Kind::ExclusivityViolated,
                                       "token " + t.value.render() + " at " + inst.label + ":" + m.nodes[pin].name +
                                           " is admitted by two branches of decision '" +
                                           m.nodes[m.edges[a[k - 1]].target].name + "'");
            }
        }
        t.passing.insert(admitted.begin(), admitted.end());
        json p;
        p["instance"] = inst.label;
        p["queue"] = inst.label + ":" + m.nodes[pin].name;
        p["token"] = t.id;
        p["birth"] = t.birth;
        p["value"] = t.value.render();
        p["origins"] = t.origins;
        if (firing)
            p["firing"] = *firing;
        else
            p["source"] = m.nodes[*m.find_node(*m.nodes[pin].owner)].kind == NodeKind::InitialNode ? "initial"
                                                                                                  : "parameter";
        trace_.emit(EventKind::TokenCreated, std::move(p));
        inst.outputs[pin].push_back(std::move(t));
    }

    void invoke(OInstance& inst, const std::vector<Datum>& args) {
        const ActivityModel& m = *inst.def;
        auto ins = m.parameters_with(Direction::In);
        if (args.size() != ins.size())
            throw RuntimeError(RuntimeError::Kind::ArityMismatch, "activity '" + m.name + "' takes " +
                                                                      std::to_string(ins.size()) + " arguments");
        for (std::size_t i = 0; i < args.size(); ++i)
            if (args[i].type && *args[i].type != m.parameters[ins[i]].type)
                throw RuntimeError(RuntimeError::Kind::TypeMismatch, "argument type differs from parameter '" +
                                                                         m.parameters[ins[i]].name + "'");
        inst.invoked = true;
        json p;
        p["instance"] = inst.label;
        p["activity"] = m.name;
        json arr = json::array();
        for (const auto& a : args) arr.push_back(a.render());
        p["args"] = std::move(arr);
        if (inst.invoked_by) p["invoked_by"] = *inst.invoked_by;
        trace_.emit(EventKind::ActivityInvoked, std::move(p));
        if (ins.empty()) {
            for (std::size_t n = 0; n < m.nodes.size(); ++n)
                if (m.nodes[n].kind == NodeKind::InitialNode)
                    for (std::size_t pin : m.pins_of(n, NodeKind::OutputPin)) produce(inst, pin, Datum{}, {});
            return;
        }
        for (std::size_t i = 0; i < ins.size(); ++i) {
            auto node = m.parameter_node(ins[i]);
            if (!node) continue;
            auto pins = m.pins_of(*node, NodeKind::OutputPin);
            if (pins.empty()) continue;
            Datum d = args[i];
            d.type = m.parameters[ins[i]].type;
            produce(inst, pins.front(), std::move(d), {});
        }
    }

    std::vector<Datum> get_params(const OInstance& inst) const {
        const ActivityModel& m = *inst.def;
        std::vector<Datum> out;
        for (std::size_t p : m.parameters_with(Direction::Out)) {
            auto node = m.parameter_node(p);
            if (!node) continue;
            auto pins = m.pins_of(*node, NodeKind::InputPin);
            if (pins.empty()) continue;
            auto it = inst.held.find(pins.front());
            if (it != inst.held.end() && !it->second.empty()) out.push_back(it->second.front());
        }
        return out;
    }

    void drop_tokens(OInstance& inst, bool keep_held, std::string_view reason) {
        for (auto& [pin, tokens] : inst.outputs) {
            for (const auto& t : tokens) {
                if (!remaining(inst, t)) continue;
                json p;
                p["instance"] = inst.label;
                p["queue"] = inst.label + ":" + inst.def->nodes[pin].name;
                p["token"] = t.id;
                p["reason"] = reason;
                trace_.emit(EventKind::TokenDeleted, std::move(p));
            }
        }
        inst.outputs.clear();
        if (!keep_held) inst.held.clear();
    }

    void cascade(const OInstance& inst) {
        for (auto* list : {&awaiting_, &detached_}) {
            std::vector<int> children;
            for (const auto& f : *list)
                if (f.instance == inst.order && f.child) children.push_back(*f.child);
            std::erase_if(*list, [&](const OFiring& f) { return f.instance == inst.order; });
            for (int c : children) terminate(*instances_[static_cast<std::size_t>(c)]);
        }
        for (auto& f : pending_)
            if (f.instance == inst.order) f.post_termination = true;
    }

    void terminate(OInstance& inst) {
        auto mine = [&](const OFiring& f) { return f.instance == inst.order; };
        bool children = std::any_of(awaiting_.begin(), awaiting_.end(), mine) ||
                        std::any_of(detached_.begin(), detached_.end(), mine);
        if (!inst.active && remaining_count(inst) == 0 && !children) return;
        inst.active = false;
        drop_tokens(inst, false, "terminate");
        cascade(inst);
        json p;
        p["instance"] = inst.label;
        trace_.emit(EventKind::ActivityTerminated, std::move(p));
    }

    void deactivate(OInstance& inst, std::string_view reason) {
        inst.active = false;
        json p;
        p["instance"] = inst.label;
        p["reason"] = reason;
        trace_.emit(EventKind::ActivityCompleted, std::move(p));
    }

    void finish(OInstance& root) {
        for (auto& i : instances_)
            if (i.get() != &root && i->active) terminate(*i);
        awaiting_.clear();
        detached_.clear();
        while (!pending_.empty()) {
            pending_.front().post_termination = true;
            complete_async(0);
        }
    }

    // -- visibility -------------------------------------------------------------

    /// Offers reaching the consumer end of `rev.front()`'s chain through `edge`.
    std::vector<Bundle> offers_via(OInstance& inst, std::size_t edge, Edges& rev) {
        const ActivityModel& m = *inst.def;
        rev.push_back(edge);
        std::vector<Bundle> out;
        std::size_t src = m.edges[edge].source;
        const NodeDef& def = m.nodes[src];
        if (def.kind == NodeKind::OutputPin) {
            Edges route(rev.rbegin(), rev.rend());
            Edges key = copy_key(m, route);
            auto it = inst.outputs.find(src);
            if (it != inst.outputs.end()) {
                for (std::size_t i = 0; i < it->second.size(); ++i) {
                    const OToken& t = it->second[i];
                    if (t.passing.contains(route) && !t.consumed.contains(key)) out.push_back({Item{src, i, key}});
                }
            }
        } else if (def.kind == NodeKind::JoinNode) {
            std::vector<std::vector<Bundle>> branches;
            for (std::size_t in : m.incoming(src)) branches.push_back(offers_via(inst, in, rev));
            Bundle current;
            combine(inst, def, branches, 0, current, out);
        } else if (is_control_node(def.kind)) {
            for (std::size_t in : m.incoming(src)) {
                auto more = offers_via(inst, in, rev);
                out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
            }
        }
        rev.pop_back();
        return out;
    }

    void combine(OInstance& inst, const NodeDef& join, const std::vector<std::vector<Bundle>>& branches,
                 std::size_t at, Bundle& current, std::vector<Bundle>& out) {
        if (out.size() > 100000) throw RuntimeError(RuntimeError::Kind::StepLimit, "oracle join offers explode");
        if (at == branches.size()) {
            if (join.join_spec) {
                TokenBinding binding;
                for (const auto& item : current)
                    binding.emplace(inst.def->queue_var(item.pin), inst.outputs[item.pin][item.index].value);
                try {
                    if (!eval_join_criteria(*join.join_spec, binding)) return;
                } catch (const EvalError& ex) {
                    throw RuntimeError(RuntimeError::Kind::GuardEvaluation,
                                       "join specification of '" + join.name + "': " + ex.what());
                }
            }
            out.push_back(current);
            return;
        }
        for (const Bundle& b : branches[at]) {
            bool clash = false;
            for (const auto& x : b)
                for (const auto& y : current) clash |= x.pin == y.pin;
            if (clash) continue;
            std::size_t mark = current.size();
            current.insert(current.end(), b.begin(), b.end());
            combine(inst, join, branches, at + 1, current, out);
            current.resize(mark);
        }
    }

    std::vector<std::uint64_t> births(OInstance& inst, const Bundle& b) {
        std::vector<std::uint64_t> out;
        for (const auto& item : b) out.push_back(inst.outputs[item.pin][item.index].birth);
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Preferred offer at an input pin: oldest newest-member, then fewest
    /// tokens, then oldest members.
    std::optional<Bundle> best_offer(OInstance& inst, std::size_t pin) {
        Edges rev;
        std::vector<Bundle> all;
        for (std::size_t e : inst.def->incoming(pin)) {
            auto more = offers_via(inst, e, rev);
            all.insert(all.end(), more.begin(), more.end());
        }
        std::optional<Bundle> best;
        std::tuple<std::uint64_t, std::size_t, std::vector<std::uint64_t>> best_key;
        for (auto& b : all) {
            auto bs = births(inst, b);
            auto key = std::make_tuple(bs.back(), bs.size(), bs);
            if (!best || key < best_key) {
                best = b;
                best_key = std::move(key);
            }
        }
        return best;
    }

    struct Taken {
        std::vector<OToken> tokens;  ///< snapshot, birth order
    };

    Taken take(OInstance& inst, const Bundle& b) {
        Taken t;
        for (const auto& item : b) {
            OToken& tok = inst.outputs[item.pin][item.index];
            ++accepts_;
            if (!tok.consumed.insert(item.copy).second)
                throw RuntimeError(RuntimeError::Kind::RaceDetected,
                                   "token " + std::to_string(tok.id) + " accepted twice");
            t.tokens.push_back(tok);
        }
        std::sort(t.tokens.begin(), t.tokens.end(),
                  [](const OToken& a, const OToken& b) { return a.birth < b.birth; });
        return t;
    }

    /// Values an accepted bundle delivers: one null for all-control, else
    /// the data tokens.
    std::vector<std::pair<Datum, std::vector<std::uint64_t>>> delivered(const Taken& t) {
        std::vector<std::pair<Datum, std::vector<std::uint64_t>>> out;
        bool all_control = std::all_of(t.tokens.begin(), t.tokens.end(), [](const OToken& x) { return x.value.is_control(); });
        if (all_control) {
            std::vector<std::uint64_t> origins;
            for (const auto& x : t.tokens) origins.insert(origins.end(), x.origins.begin(), x.origins.end());
            std::sort(origins.begin(), origins.end());
            out.emplace_back(Datum{}, std::move(origins));
            return out;
        }
        for (const auto& x : t.tokens)
            if (!x.value.is_control()) out.emplace_back(x.value, x.origins);
        return out;
    }

    // -- reactions ---------------------------------------------------------------

    bool busy(const OInstance& inst, std::size_t node) const {
        return std::any_of(awaiting_.begin(), awaiting_.end(),
                           [&](const OFiring& f) { return f.instance == inst.order && f.node == node; });
    }

    bool enabled(OInstance& inst, std::size_t node) {
        const ActivityModel& m = *inst.def;
        if (!inst.active || m.nodes[node].kind != NodeKind::CallBehaviorAction || busy(inst, node)) return false;
        auto pins = m.pins_of(node, NodeKind::InputPin);
        if (pins.empty()) return false;
        for (std::size_t pin : pins)
            if (!best_offer(inst, pin)) return false;
        return true;
    }

    std::vector<std::tuple<int, std::size_t, std::size_t>> candidates() {
        std::vector<std::tuple<int, std::size_t, std::size_t>> out;
        for (auto& i : instances_)
            for (std::size_t n = 0; n < i->def->nodes.size(); ++n)
                if (enabled(*i, n)) out.emplace_back(i->order, n, 0);
        for (std::size_t k = 0; k < pending_.size(); ++k) out.emplace_back(-1, 0, k);
        return out;
    }

    void emit_outputs(OInstance& inst, std::size_t node, const std::vector<Datum>& values, std::uint64_t firing,
                      bool async) {
        const ActivityModel& m = *inst.def;
        auto pins = m.pins_of(node, NodeKind::OutputPin);
        json produced = json::array();
        for (std::size_t i = 0; i < pins.size(); ++i) {
            Datum d;
            if (!async) {
                d = values[i];
                if (m.nodes[pins[i]].pin_type) d.type = m.nodes[pins[i]].pin_type;
            }
            produce(inst, pins[i], d, firing);
            const OToken& t = inst.outputs[pins[i]].back();
            json o;
            o["pin"] = m.nodes[pins[i]].name;
            o["token"] = t.id;
            o["value"] = t.value.render();
            produced.push_back(std::move(o));
        }
        if (async) return;
        json p;
        p["instance"] = inst.label;
        p["action"] = m.nodes[node].name;
        p["firing"] = firing;
        p["produced"] = std::move(produced);
        trace_.emit(EventKind::ActionCompleted, std::move(p));
    }

    void fire(OInstance& inst, std::size_t node) {
        const ActivityModel& m = *inst.def;
        const NodeDef& def = m.nodes[node];
        std::uint64_t firing = ++next_firing_;
        auto pins = m.pins_of(node, NodeKind::InputPin);
        std::vector<Bundle> chosen;
        for (std::size_t pin : pins) chosen.push_back(*best_offer(inst, pin));
        json consumed = json::array();
        std::vector<Datum> inputs;
        for (std::size_t i = 0; i < pins.size(); ++i) {
            Taken t = take(inst, chosen[i]);
            for (auto& [value, origins] : delivered(t)) {
                json c;
                c["value"] = value.render();
                c["origins"] = origins;
                c["pin"] = m.nodes[pins[i]].name;
                consumed.push_back(std::move(c));
                if (!value.is_control()) inputs.push_back(value);
            }
        }
        json p;
        p["instance"] = inst.label;
        p["action"] = def.name;
        p["firing"] = firing;
        p["round"] = round_;
        p["consumed"] = std::move(consumed);
        trace_.emit(EventKind::ActionStarted, std::move(p));

        std::size_t n_out = m.pins_of(node, NodeKind::OutputPin).size();
        const std::string& ref = *def.behavior_ref;
        if (const ActivityModel* sub = models_.find_activity(ref)) {
            if (def.is_synchronous && sub->parameters_with(Direction::Out).size() != n_out)
                throw RuntimeError(RuntimeError::Kind::BehaviorArityMismatch,
                                   "action '" + def.name + "' output pins do not match activity '" + ref + "'");
            int k = ++inst.calls[node];
            std::string label = inst.label + "/" + def.name + "#" + std::to_string(k);
            int parent = inst.order;
            OInstance& child = create(*sub, label);
            child.invoked_by = firing;
            child.invoked = false;
            json s;
            s["instance"] = inst.label;
            s["action"] = def.name;
            s["firing"] = firing;
            s["child"] = label;
            s["activity"] = ref;
            s["async"] = !def.is_synchronous;
            trace_.emit(EventKind::SubActivityInvoked, std::move(s));
            activate(child);
            try {
                invoke(child, inputs);
            } catch (const RuntimeError& ex) {
                if (ex.kind() == RuntimeError::Kind::ArityMismatch || ex.kind() == RuntimeError::Kind::TypeMismatch)
                    throw RuntimeError(RuntimeError::Kind::BehaviorArityMismatch, ex.what());
                throw;
            }
            OFiring f{firing, parent, node, child.order, {}, false};
            OInstance& self = *instances_[static_cast<std::size_t>(parent)];
            if (def.is_synchronous) {
                awaiting_.push_back(std::move(f));
            } else {
                emit_outputs(self, node, {}, firing, true);
                detached_.push_back(std::move(f));
            }
            return;
        }
        const OpaqueBehaviorBinding* b = behaviors_.find(ref);
        if (!b) throw RuntimeError(RuntimeError::Kind::BehaviorUnbound, "unbound behavior '" + ref + "'");
        if ((b->in_arity && *b->in_arity != inputs.size()) || (b->out_arity && *b->out_arity != n_out))
            throw RuntimeError(RuntimeError::Kind::BehaviorArityMismatch, "behavior '" + ref + "' arity");
        if (!def.is_synchronous) {
            emit_outputs(inst, node, {}, firing, true);
            pending_.push_back({firing, inst.order, node, std::nullopt, std::move(inputs), false});
            return;
        }
        std::vector<Datum> outs;
        try {
            outs = b->body(inputs, n_out);
        } catch (const BehaviorError& ex) {
            throw RuntimeError(RuntimeError::Kind::BehaviorFailed, ex.what());
        }
        if (outs.size() != n_out) throw RuntimeError(RuntimeError::Kind::BehaviorArityMismatch, "behavior result");
        emit_outputs(inst, node, outs, firing, false);
    }

    void complete_async(std::size_t index) {
        OFiring f = pending_[index];
        pending_.erase(pending_.begin() + static_cast<std::ptrdiff_t>(index));
        OInstance& inst = *instances_[static_cast<std::size_t>(f.instance)];
        const NodeDef& def = inst.def->nodes[f.node];
        try {
            (void)behaviors_.find(*def.behavior_ref)->body(f.inputs, inst.def->pins_of(f.node, NodeKind::OutputPin).size());
        } catch (const BehaviorError& ex) {
            throw RuntimeError(RuntimeError::Kind::BehaviorFailed, ex.what());
        }
        json p;
        p["instance"] = inst.label;
        p["action"] = def.name;
        p["firing"] = f.id;
        p["produced"] = json::array();
        p["async"] = true;
        if (f.post_termination) p["post_termination"] = true;
        trace_.emit(EventKind::ActionCompleted, std::move(p));
    }

    bool out_parameter_intake() {
        for (auto& i : instances_) {
            if (!i->active) continue;
            const ActivityModel& m = *i->def;
            for (std::size_t n = 0; n < m.nodes.size(); ++n) {
                if (m.nodes[n].kind != NodeKind::ActivityParameterNode) continue;
                auto p = m.parameter_of(n);
                if (!p || m.parameters[*p].direction != Direction::Out) continue;
                for (std::size_t pin : m.pins_of(n, NodeKind::InputPin)) {
                    auto b = best_offer(*i, pin);
                    if (!b) continue;
                    for (auto& [value, origins] : delivered(take(*i, *b))) i->held[pin].push_back(value);
                    return true;
                }
            }
        }
        return false;
    }

    bool flow_finals() {
        for (auto& i : instances_) {
            if (!i->active) continue;
            const ActivityModel& m = *i->def;
            for (std::size_t n = 0; n < m.nodes.size(); ++n) {
                if (m.nodes[n].kind != NodeKind::FlowFinalNode) continue;
                for (std::size_t pin : m.pins_of(n, NodeKind::InputPin)) {
                    auto b = best_offer(*i, pin);
                    if (!b) continue;
                    Taken t = take(*i, *b);
                    for (const auto& tok : t.tokens) {
                        json p;
                        p["instance"] = i->label;
                        p["queue"] = i->label + ":" + m.nodes[pin].name;
                        p["token"] = tok.id;
                        p["reason"] = "flow final";
                        trace_.emit(EventKind::TokenDeleted, std::move(p));
                    }
                    return true;
                }
            }
        }
        return false;
    }

    bool child_completions() {
        for (std::size_t k = 0; k < awaiting_.size(); ++k) {
            OInstance& child = *instances_[static_cast<std::size_t>(*awaiting_[k].child)];
            if (child.active) continue;
            OFiring f = awaiting_[k];
            awaiting_.erase(awaiting_.begin() + static_cast<std::ptrdiff_t>(k));
            OInstance& inst = *instances_[static_cast<std::size_t>(f.instance)];
            auto outs = get_params(child);
            if (outs.size() != inst.def->pins_of(f.node, NodeKind::OutputPin).size())
                throw RuntimeError(RuntimeError::Kind::BehaviorArityMismatch,
                                   "activity '" + child.label + "' left output parameters empty");
            emit_outputs(inst, f.node, outs, f.id, false);
            return true;
        }
        for (std::size_t k = 0; k < detached_.size(); ++k) {
            OInstance& child = *instances_[static_cast<std::size_t>(*detached_[k].child)];
            if (child.active) continue;
            OFiring f = detached_[k];
            detached_.erase(detached_.begin() + static_cast<std::ptrdiff_t>(k));
            OInstance& inst = *instances_[static_cast<std::size_t>(f.instance)];
            json p;
            p["instance"] = inst.label;
            p["action"] = inst.def->nodes[f.node].name;
            p["firing"] = f.id;
            p["produced"] = json::array();
            p["async"] = true;
            trace_.emit(EventKind::ActionCompleted, std::move(p));
            return true;
        }
        return false;
    }

    bool completion(OInstance& inst) {
        if (!inst.active) return false;
        const ActivityModel& m = *inst.def;
        auto outs = m.parameters_with(Direction::Out);
        if (!m.has_activity_final() && !outs.empty()) {
            bool filled = true;
            for (std::size_t p : outs) {
                auto node = m.parameter_node(p);
                if (!node) continue;
                auto pins = m.pins_of(*node, NodeKind::InputPin);
                if (pins.empty()) continue;
                auto it = inst.held.find(pins.front());
                filled &= it != inst.held.end() && !it->second.empty();
            }
            if (filled) {
                deactivate(inst, "parameters");
                return true;
            }
        }
        if (!inst.invoked || !outs.empty() || remaining_count(inst) != 0) return false;
        auto mine = [&](const OFiring& f) { return f.instance == inst.order; };
        if (std::any_of(awaiting_.begin(), awaiting_.end(), mine) || std::any_of(detached_.begin(), detached_.end(), mine) ||
            std::any_of(pending_.begin(), pending_.end(), mine))
            return false;
        deactivate(inst, "drained");
        return true;
    }

    bool activity_finals() {
        for (auto& i : instances_) {
            if (!i->active) continue;
            const ActivityModel& m = *i->def;
            for (std::size_t n = 0; n < m.nodes.size(); ++n) {
                if (m.nodes[n].kind != NodeKind::ActivityFinalNode) continue;
                bool reached = false;
                for (std::size_t pin : m.pins_of(n, NodeKind::InputPin)) reached |= best_offer(*i, pin).has_value();
                if (!reached) continue;
                drop_tokens(*i, true, "activity final");
                deactivate(*i, "final");
                cascade(*i);
                return true;
            }
        }
        return false;
    }

    bool internal_step() {
        if (out_parameter_intake() || flow_finals() || child_completions()) return true;
        for (auto& i : instances_)
            if (completion(*i)) return true;
        return activity_finals();
    }

    const ModelSet& models_;
    const BehaviorRegistry& behaviors_;
    OracleOptions options_;
    ScheduleRng rng_;
    Trace trace_;
    std::vector<std::unique_ptr<OInstance>> instances_;
    std::vector<OFiring> awaiting_, detached_, pending_;
    std::uint64_t next_token_ = 0, next_birth_ = 0, next_firing_ = 0, round_ = 0, accepts_ = 0;
};

}  // namespace

RunResult oracle_run(const ModelSet& models, const BehaviorRegistry& behaviors, std::string_view activity,
                     const std::vector<Datum>& args, const OracleOptions& options) {
    Oracle o(models, behaviors, options);
    return o.run(activity, args);
}

}  // namespace advm
