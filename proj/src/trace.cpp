#include "advm/trace.hpp"

#include <sstream>
#include <stdexcept>

namespace advm {

namespace {

constexpr std::string_view kEventNames[] = {
    "ActivityActivated", "ActivityInvoked",   "TokenCreated",      "TokenMoved",
    "GroupFormed",       "ActionStarted",     "ActionCompleted",   "SubActivityInvoked",
    "TokenDeleted",      "ActivityCompleted", "ActivityTerminated", "ExecutionError",
};

}  // namespace

std::string_view to_string(EventKind kind) { return kEventNames[static_cast<std::size_t>(kind)]; }

std::optional<EventKind> event_kind_from_string(std::string_view name) {
    for (std::size_t i = 0; i < std::size(kEventNames); ++i)
        if (kEventNames[i] == name) return static_cast<EventKind>(i);
    return std::nullopt;
}

const TraceEvent& Trace::emit(EventKind kind, nlohmann::ordered_json payload) {
    events_.push_back({events_.size(), kind, std::move(payload)});
    return events_.back();
}

std::string Trace::to_jsonl() const {
    std::string out;
    for (const auto& e : events_) {
        nlohmann::ordered_json line;
        line["seq"] = e.seq;
        line["kind"] = to_string(e.kind);
        line["payload"] = e.payload;
        out += line.dump();
        out += '\n';
    }
    return out;
}

Trace Trace::from_jsonl(std::string_view text) {
    Trace t;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::ordered_json::parse(line);
        auto kind = event_kind_from_string(j.at("kind").get<std::string>());
        if (!kind) throw std::invalid_argument("unknown event kind " + j.at("kind").dump());
        TraceEvent e;
        e.seq = j.at("seq").get<std::uint64_t>();
        e.kind = *kind;
        e.payload = j.at("payload");
        t.events_.push_back(std::move(e));
    }
    return t;
}

std::string_view to_string(RunStatus status) {
    switch (status) {
    case RunStatus::Completed: return "completed";
    case RunStatus::QuiescentStuck: return "quiescent-stuck";
    case RunStatus::Error: return "error";
    }
    return "?";
}

int RunResult::exit_code() const {
    switch (status) {
    case RunStatus::Completed: return 0;
    case RunStatus::QuiescentStuck: return 3;
    case RunStatus::Error: return 4;
    }
    return 4;
}

}  // namespace advm
