#pragma once

#include "advm/value.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace advm {

enum class EventKind {
    ActivityActivated,
    ActivityInvoked,
    TokenCreated,
    TokenMoved,
    GroupFormed,
    ActionStarted,
    ActionCompleted,
    SubActivityInvoked,
    TokenDeleted,
    ActivityCompleted,
    ActivityTerminated,
    ExecutionError,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view name);

struct TraceEvent {
    std::uint64_t seq = 0;
    EventKind kind = EventKind::ExecutionError;
    nlohmann::ordered_json payload;
};

class Trace {
public:
    const TraceEvent& emit(EventKind kind, nlohmann::ordered_json payload);

    const std::vector<TraceEvent>& events() const { return events_; }
    std::size_t size() const { return events_.size(); }

    /// One `{"seq":..,"kind":..,"payload":{..}}` object per line.
    std::string to_jsonl() const;
    static Trace from_jsonl(std::string_view text);

private:
    std::vector<TraceEvent> events_;
};

/// Seeded choice among simultaneously enabled reactions. The VM and the
/// oracle draw from identical streams given the same seed.
class ScheduleRng {
public:
    explicit ScheduleRng(std::uint64_t seed) : gen_(seed) {}
    std::size_t pick(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

private:
    std::mt19937_64 gen_;
};

enum class RunStatus { Completed, QuiescentStuck, Error };

std::string_view to_string(RunStatus status);

struct RunResult {
    RunStatus status = RunStatus::Completed;
    Trace trace;
    std::vector<Datum> outputs;
    std::string error;  ///< set when status is Error

    /// 0 completed, 3 quiescent-stuck, 4 execution error.
    int exit_code() const;
};

}  // namespace advm
