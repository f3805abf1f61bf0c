#pragma once

#include "advm/behaviors.hpp"
#include "advm/compiler.hpp"
#include "advm/model.hpp"
#include "advm/trace.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace advm {

class RuntimeError : public std::runtime_error {
public:
    enum class Kind {
        AlreadyActive,
        NotActive,
        ArityMismatch,
        TypeMismatch,
        ExclusivityViolated,
        GuardEvaluation,
        BehaviorUnbound,
        BehaviorArityMismatch,
        BehaviorFailed,
        RaceDetected,
        SingleInstanceBusy,
        StepLimit,
    };

    RuntimeError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

std::string_view to_string(RuntimeError::Kind kind);

struct MachineOptions {
    std::uint64_t seed = 0;
    CompileOptions compile;
    /// Assert at every scheduler step that no token is a candidate of two engines.
    bool check_races = true;
    std::size_t max_steps = 200000;
};

/// One jointly pulled selection: (output queue, token id) pairs.
struct PullSelection {
    std::vector<std::pair<int, std::uint64_t>> tokens;
    std::uint64_t max_birth = 0;
    std::vector<std::uint64_t> births;  ///< ascending
};

/// The executing VM. Owns the factory, every runtime it creates (the root
/// and all sub-activity instances) and the trace.
class Machine {
public:
    using StepHook = std::function<void(const Machine&)>;

    Machine(const ModelSet& models, BehaviorRegistry behaviors, MachineOptions options = {});

    /// create + activate + invoke + run_to_quiescence.
    RunResult run(std::string_view activity, const std::vector<Datum>& args);

    // -- lifecycle ------------------------------------------------------
    ActivityRuntime& create(const ActivityModel& definition);
    void activate(ActivityRuntime& rt);
    void invoke(ActivityRuntime& rt, const std::vector<Datum>& args);
    std::vector<Datum> get_params(const ActivityRuntime& rt) const;
    void terminate(ActivityRuntime& rt);
    RunResult run_to_quiescence(ActivityRuntime& root);

    // -- reactions; each returns whether it fired --------------------------
    bool push_engine_step(ActivityRuntime& rt, int engine);
    bool pull_engine_step(ActivityRuntime& rt, int engine);
    bool action_step(ActivityRuntime& rt, int node);
    bool flow_final_step(ActivityRuntime& rt, int node);
    bool activity_final_step(ActivityRuntime& rt, int node);
    bool activity_process_step(ActivityRuntime& rt);

    /// Places a newly produced token in an output queue, as an action,
    /// initial node or parameter would.
    const Token& produce(ActivityRuntime& rt, int queue, Datum value, std::optional<std::uint64_t> firing = {});

    /// The selection the pull engine would take now, if any.
    std::optional<PullSelection> pull_candidate(const ActivityRuntime& rt, int engine) const;

    /// Called after every executed reaction.
    void set_step_hook(StepHook hook) { hook_ = std::move(hook); }

    const Trace& trace() const { return trace_; }
    const ActivityFactory& factory() const { return factory_; }
    std::string label(const ActivityRuntime& rt) const;
    std::uint64_t race_checks() const { return race_checks_; }

    /// `label:queue` -> token ids, every runtime; used by trace replay.
    std::map<std::string, std::vector<std::uint64_t>> queue_snapshot() const;

private:
    struct Instance {
        std::string label;
        std::optional<std::uint64_t> invoked_by;
        bool invoked = false;
        std::map<int, int> calls;  ///< action node -> sub-activity invocations so far
    };
    struct Firing {
        std::uint64_t id = 0;
        int runtime = 0;
        int node = 0;
        std::optional<int> child;
        std::vector<Datum> inputs;
        bool post_termination = false;
    };
    struct Candidate {
        enum class Kind { Action, AsyncCompletion } kind;
        int runtime;
        int node;
        std::size_t pending;
    };

    ActivityRuntime& runtime(int instance) const;
    Instance& instance_of(const ActivityRuntime& rt);
    std::string queue_label(const ActivityRuntime& rt, int queue) const;
    nlohmann::ordered_json token_json(const ActivityRuntime& rt, const Token& t) const;

    void delete_token(ActivityRuntime& rt, int queue, std::size_t index, std::string_view reason);
    void deactivate(ActivityRuntime& rt, std::string_view reason);
    void cascade_children(const ActivityRuntime& rt);
    bool drained_step(ActivityRuntime& rt);
    bool busy(const ActivityRuntime& rt, int node) const;
    bool action_enabled(const ActivityRuntime& rt, int node) const;
    void produce_outputs(ActivityRuntime& rt, int node, const std::vector<Datum>& values, std::uint64_t firing,
                         bool async);
    bool complete_children();
    bool internal_step();
    std::vector<Candidate> external_candidates() const;
    void complete_async(std::size_t pending);
    void check_races();
    void finish(ActivityRuntime& root);
    void step_done();
    std::optional<std::size_t> push_candidate(const ActivityRuntime& rt, int engine) const;

    const ModelSet& models_;
    BehaviorRegistry behaviors_;
    MachineOptions options_;
    ActivityFactory factory_;
    Trace trace_;
    ScheduleRng rng_;
    StepHook hook_;

    std::map<int, Instance> instances_;
    std::vector<Firing> awaiting_;  ///< synchronous sub-activity calls
    std::vector<Firing> detached_;  ///< asynchronous sub-activity calls
    std::vector<Firing> pending_;   ///< asynchronous opaque bodies not yet completed

    std::uint64_t next_token_ = 0;
    std::uint64_t next_birth_ = 0;
    std::uint64_t next_group_ = 0;
    std::uint64_t next_firing_ = 0;
    std::uint64_t round_ = 0;
    std::uint64_t race_checks_ = 0;
};

}  // namespace advm
