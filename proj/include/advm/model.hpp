#pragma once

#include "advm/expr.hpp"
#include "advm/value.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace advm {

enum class NodeKind {
    InitialNode,
    ActivityFinalNode,
    FlowFinalNode,
    ForkNode,
    JoinNode,
    DecisionNode,
    MergeNode,
    CallBehaviorAction,
    ActivityParameterNode,
    InputPin,
    OutputPin,
};

std::string_view to_string(NodeKind kind);

/// Fork, join, decision and merge: compiled away into paths.
bool is_control_node(NodeKind kind);
/// Action, initial, final or parameter node: owns pins, hosts tokens.
bool is_stable_node(NodeKind kind);
bool is_pin(NodeKind kind);

enum class Direction { In, Out };
enum class ExecutionMode { Separate, Single };

struct NodeDef {
    std::string name;  ///< pins use the qualified `owner.pin` form
    NodeKind kind = NodeKind::MergeNode;
    std::optional<Expr> join_spec;          ///< JoinNode only
    std::optional<std::string> behavior_ref;  ///< CallBehaviorAction only
    bool is_synchronous = true;               ///< CallBehaviorAction only
    std::optional<std::string> pin_type;      ///< pins; absent means untyped
    std::optional<std::string> owner;         ///< pins only
    int line = 0;

    /// Pin name without the owner prefix.
    std::string_view local_name() const;
};

struct EdgeDef {
    std::string name;
    std::size_t source = 0;
    std::size_t target = 0;
    std::optional<Expr> guard;
    int line = 0;
};

struct ParameterDef {
    std::string name;
    Direction direction = Direction::In;
    std::string type;
};

/// Static definition of one activity.
class ActivityModel {
public:
    std::string name;
    std::vector<NodeDef> nodes;
    std::vector<EdgeDef> edges;
    std::vector<ParameterDef> parameters;
    ExecutionMode execution_mode = ExecutionMode::Separate;

    bool has_activity_final() const;

    std::optional<std::size_t> find_node(std::string_view node_name) const;
    const NodeDef& node(std::size_t i) const { return nodes[i]; }

    std::vector<std::size_t> outgoing(std::size_t node) const;
    std::vector<std::size_t> incoming(std::size_t node) const;

    /// Pins owned by `owner`, in declaration order.
    std::vector<std::size_t> pins_of(std::size_t owner, NodeKind pin_kind) const;

    /// Index of the parameter an ActivityParameterNode stands for.
    std::optional<std::size_t> parameter_of(std::size_t node) const;
    std::optional<std::size_t> parameter_node(std::size_t parameter) const;

    std::vector<std::size_t> parameters_with(Direction d) const;

    /// Variable name an output queue carries in join criteria: the bare pin
    /// name when unique within the activity, otherwise `owner.pin`.
    std::string queue_var(std::size_t pin) const;

    /// Reverse of `queue_var` over output pins.
    std::optional<std::size_t> output_pin_for_var(std::string_view var) const;

private:
    friend class ModelParser;
    void rebuild_adjacency();
    std::vector<std::vector<std::size_t>> out_edges_;
    std::vector<std::vector<std::size_t>> in_edges_;
};

/// Built-in opaque behavior stubs a diagram may bind by name.
struct BehaviorSpec {
    enum class Kind { Identity, Const, Set, Add };
    std::string name;
    Kind kind = Kind::Identity;
    Record record;      ///< Const
    std::string field;  ///< Set / Add
    Value value;        ///< Set / Add
    int line = 0;

    /// `identity`, `const({...})`, `set(f, v)`, `add(f, n)`.
    static BehaviorSpec parse(std::string name, std::string_view text);
    std::string to_string() const;
};

/// All activities and behavior bindings of one diagram file.
struct ModelSet {
    std::vector<ActivityModel> activities;
    std::map<std::string, BehaviorSpec, std::less<>> behaviors;

    const ActivityModel* find_activity(std::string_view name) const;
    const BehaviorSpec* find_behavior(std::string_view name) const;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, int line, int column)
        : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line), column_(column) {}
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// Parses diagram text (one or more `activity` blocks and `behavior`
/// bindings). Throws ParseError.
ModelSet parse_activity(std::string_view source_text);

ModelSet parse_activity_file(const std::string& path);

}  // namespace advm
