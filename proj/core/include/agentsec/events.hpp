#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentsec/protocol.hpp"

namespace agentsec {

/// One event-log line. In scripted mode `ts` is a per-trial logical counter,
/// never wall clock, so logs replay byte-identically.
struct EventRecord {
    std::uint64_t ts = 0;
    std::string scenario_id;
    long trial_index = 0;
    std::string kind; // tool_call | tool_result | verdict | alert | log
    nlohmann::json payload;
};

inline nlohmann::json event_to_json(const EventRecord& e) {
    return nlohmann::json{{"ts", e.ts},
                          {"scenario", e.scenario_id},
                          {"trial", e.trial_index},
                          {"kind", e.kind},
                          {"payload", e.payload}};
}

/// Append-only, strictly ordered event collector for one trial.
class EventSink {
public:
    EventSink() = default;
    EventSink(std::string scenario_id, long trial_index)
        : scenario_id_(std::move(scenario_id)), trial_index_(trial_index) {}

    void emit(std::string kind, nlohmann::json payload) {
        events_.push_back(
            EventRecord{next_ts_++, scenario_id_, trial_index_, std::move(kind), std::move(payload)});
    }

    const std::vector<EventRecord>& events() const { return events_; }

private:
    std::string scenario_id_;
    long trial_index_ = 0;
    std::uint64_t next_ts_ = 0;
    std::vector<EventRecord> events_;
};

/// Mirrors tool calls and results of messages[first_new_message..] into the
/// sink. Sink may be null (events disabled).
inline void record_turn_events(EventSink* sink, const Transcript& transcript,
                               std::size_t first_new_message) {
    if (sink == nullptr) return;
    for (std::size_t i = first_new_message; i < transcript.messages.size(); ++i) {
        const auto& m = transcript.messages[i];
        for (const auto& call : m.tool_calls) {
            sink->emit("tool_call", nlohmann::json{{"call_id", call.call_id},
                                                   {"name", call.tool_name},
                                                   {"arguments", call.arguments}});
        }
        if (m.tool_result) {
            sink->emit("tool_result", nlohmann::json{{"call_id", m.tool_result->call_id},
                                                     {"payload", m.tool_result->payload}});
        }
    }
}

} // namespace agentsec
