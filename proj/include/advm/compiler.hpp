#pragma once

#include "advm/expr.hpp"
#include "advm/model.hpp"
#include "advm/value.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace advm {

/// A token resting in a queue. `birth` is the production index of the
/// output-queue token it descends from; copies made by engines keep it.
struct Token {
    std::uint64_t id = 0;
    std::uint64_t birth = 0;
    Datum value;
    std::optional<std::uint64_t> group;
    /// Births of the produced tokens this one stands for (several after a
    /// control-join collapse).
    std::vector<std::uint64_t> origins;
    /// Output queues only: ids of the queue's paths whose passRule this
    /// token satisfies, evaluated once on arrival.
    std::vector<int> passes;

    bool is_control() const { return value.is_control(); }
};

enum class QueueKind { Input, Output };

struct Queue {
    int id = 0;
    QueueKind kind = QueueKind::Input;
    int owner = 0;        ///< StableNode index
    std::size_t pin = 0;  ///< definition pin
    std::string name;     ///< qualified pin name
    std::optional<std::string> type;
    std::deque<Token> tokens;
    std::optional<int> engine;  ///< push engine (output) or pull engine (input)
    std::vector<int> paths;     ///< outgoing (output) or incoming (input)
};

struct StableNode {
    std::size_t def = 0;
    NodeKind kind = NodeKind::CallBehaviorAction;
    std::string name;
    std::vector<int> inputs;   ///< queue ids, pin declaration order
    std::vector<int> outputs;  ///< queue ids, pin declaration order
    std::optional<std::size_t> parameter;
};

/// A control node kept only so runtime edges have somewhere to point.
struct IntermediateNode {
    std::size_t def = 0;
    NodeKind kind = NodeKind::MergeNode;
    std::string name;
};

/// Definition edge rewired onto runtime endpoints: a queue when the
/// definition end is a pin, an intermediate node otherwise.
struct RuntimeEdge {
    std::size_t def = 0;
    struct End {
        bool is_queue = false;
        int index = 0;
    };
    End source, target;
};

struct Path {
    int id = 0;
    int start = 0;  ///< output queue
    int end = 0;    ///< input queue
    Expr pass_rule = Expr::constant(true);
    bool has_join = false;
    std::vector<std::size_t> route;  ///< definition edges, start to end
};

struct PushEngine {
    int id = 0;
    int queue = 0;
    std::vector<int> paths;
};

struct PullEngine {
    int id = 0;
    int queue = 0;
    std::vector<int> paths;
    Expr join_criteria = Expr::constant(true);
    std::vector<std::string> sources;  ///< queue variables, sorted
};

class ActivityRuntime {
public:
    const ActivityModel* definition = nullptr;
    int instance = 0;
    bool is_active = false;
    bool is_final = false;  ///< the definition has an ActivityFinal node

    std::vector<StableNode> nodes;
    std::vector<IntermediateNode> intermediates;
    std::vector<Queue> queues;
    std::vector<RuntimeEdge> edges;
    std::vector<Path> paths;
    std::vector<PushEngine> push_engines;
    std::vector<PullEngine> pull_engines;

    /// Definition node -> stable node / intermediate / queue.
    std::map<std::size_t, int> stable_of;
    std::map<std::size_t, int> intermediate_of;
    std::map<std::size_t, int> queue_of;
    /// Output queue variable name -> queue id.
    std::map<std::string, int, std::less<>> queue_by_var;
    std::map<int, std::string> var_of_queue;

    /// For every output queue: pairs of its paths that first part ways at a
    /// DecisionNode, so a token may pass at most one of each pair.
    std::map<int, std::vector<std::pair<int, int>>> decision_pairs;

    const Queue& queue(int id) const { return queues[static_cast<std::size_t>(id)]; }
    Queue& queue(int id) { return queues[static_cast<std::size_t>(id)]; }

    std::size_t token_count() const;
    /// Output ActivityParameterNode queues, parameter order.
    std::vector<int> output_parameter_queues() const;
    /// Input ActivityParameterNode queues, parameter order.
    std::vector<int> input_parameter_queues() const;
};

struct CompileOptions {
    /// Store join criteria in disjunctive normal form.
    bool dnf_join_criteria = false;
};

/// Builds runtimes from definitions. Holds the instance pool used by
/// single-mode activities.
class ActivityFactory {
public:
    explicit ActivityFactory(CompileOptions options = {}) : options_(options) {}

    /// Returns a fresh runtime, or the pooled one for a single-mode
    /// definition that was compiled before. The runtime is not activated.
    ActivityRuntime& create_activity(const ActivityModel& definition);

    const std::vector<std::unique_ptr<ActivityRuntime>>& instances() const { return instances_; }

private:
    CompileOptions options_;
    std::vector<std::unique_ptr<ActivityRuntime>> instances_;
    std::map<const ActivityModel*, ActivityRuntime*> pool_;
};

/// Individual compilation passes, exposed for tests.
void create_paths(ActivityRuntime& runtime);
void create_token_engines(ActivityRuntime& runtime, const CompileOptions& options = {});
void create_join_criteria(ActivityRuntime& runtime, PullEngine& engine, const CompileOptions& options = {});

/// Compiles without pooling; the result is owned by the caller.
std::unique_ptr<ActivityRuntime> compile(const ActivityModel& definition, const CompileOptions& options = {});

/// Line-oriented listing of queues, paths, engines and join criteria.
std::string dump_runtime(const ActivityRuntime& runtime);

}  // namespace advm
