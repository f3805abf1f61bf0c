#pragma once

#include "advm/behaviors.hpp"
#include "advm/model.hpp"
#include "advm/trace.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace advm {

struct OracleOptions {
    std::uint64_t seed = 0;
    std::size_t max_steps = 200000;
};

/// Reference interpreter: tokens stay at output pins and are only offered
/// downstream; visibility is recomputed from scratch after every change and
/// an action takes all its offers at once. Emits the VM's trace format
/// (without TokenMoved events for offers).
RunResult oracle_run(const ModelSet& models, const BehaviorRegistry& behaviors, std::string_view activity,
                     const std::vector<Datum>& args, const OracleOptions& options = {});

/// One action firing as seen by the equivalence check.
struct EssentialFiring {
    std::uint64_t seq = 0;  ///< ActionStarted event
    std::string instance;
    std::string action;
    std::vector<std::pair<std::string, std::vector<std::string>>> consumed;  ///< pin -> sorted values
    std::vector<std::pair<std::string, std::vector<std::string>>> produced;  ///< pin -> sorted values
    std::uint64_t hash = 0;  ///< covers the firing and, transitively, its causes

    std::string describe() const;
};

/// ActionStarted events with their consumed and produced value sets and
/// causal hashes.
std::vector<EssentialFiring> essential_trace(const Trace& trace);

struct TraceComparison {
    bool equivalent = true;
    struct Divergence {
        std::optional<std::uint64_t> seq_a;
        std::optional<std::uint64_t> seq_b;
        std::string explanation;
    };
    std::optional<Divergence> first_divergence;
};

/// Equal as causal partial orders: same multiset of firings, where each
/// firing is identified together with the firings that produced what it
/// consumed. Independent firings may be permuted; engine movements are ignored.
TraceComparison compare_essential_traces(const Trace& a, const Trace& b);

struct GeneratorOptions {
    /// Produce a fork followed by a join between two actions (rejected with E2).
    bool inject_fork_join = false;
};

/// Random diagram text within the validated subset. The entry activity is
/// named `Main` and takes no arguments; `Main` may call sub-activities
/// defined in the same text. `size_bound` caps the node count of `Main`
/// (pins excluded).
std::string random_valid_diagram(std::uint64_t seed, std::size_t size_bound, const GeneratorOptions& options = {});

}  // namespace advm
