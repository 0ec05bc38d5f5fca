#include "agentsec/protocol.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace agentsec {

std::string role_to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
        case Role::Tool: return "tool";
    }
    return "user";
}

Role role_from_string(const std::string& s) {
    if (s == "system") return Role::System;
    if (s == "user") return Role::User;
    if (s == "assistant") return Role::Assistant;
    if (s == "tool") return Role::Tool;
    fail("invalid_role", "unknown role '" + s + "'");
}

std::size_t Transcript::assistant_turns() const {
    return static_cast<std::size_t>(std::count_if(
        messages.begin(), messages.end(), [](const ChatMessage& m) { return m.role == Role::Assistant; }));
}

std::size_t Transcript::tool_call_count() const {
    std::size_t n = 0;
    for (const auto& m : messages) n += m.tool_calls.size();
    return n;
}

ChatMessage system_message(std::string content) {
    ChatMessage m;
    m.role = Role::System;
    m.content = std::move(content);
    return m;
}

ChatMessage user_message(std::string content) {
    ChatMessage m;
    m.role = Role::User;
    m.content = std::move(content);
    return m;
}

nlohmann::json message_to_json(const ChatMessage& message) {
    nlohmann::json j{{"role", role_to_string(message.role)}, {"content", message.content}};
    if (!message.tool_calls.empty()) {
        auto calls = nlohmann::json::array();
        for (const auto& call : message.tool_calls) {
            calls.push_back(nlohmann::json{
                {"call_id", call.call_id}, {"name", call.tool_name}, {"arguments", call.arguments}});
        }
        j["tool_calls"] = std::move(calls);
    }
    if (message.tool_result) {
        j["tool_result"] = nlohmann::json{{"call_id", message.tool_result->call_id},
                                          {"payload", message.tool_result->payload}};
    }
    return j;
}

ChatMessage message_from_json(const nlohmann::json& j) {
    ChatMessage m;
    m.role = role_from_string(j.at("role").get<std::string>());
    m.content = j.value("content", std::string{});
    if (j.contains("tool_calls")) {
        for (const auto& c : j.at("tool_calls")) {
            ToolCall call;
            call.call_id = c.value("call_id", std::string{});
            call.tool_name = c.at("name").get<std::string>();
            call.arguments = c.value("arguments", nlohmann::json::object());
            m.tool_calls.push_back(std::move(call));
        }
    }
    if (j.contains("tool_result")) {
        ToolResult r;
        r.call_id = j.at("tool_result").value("call_id", std::string{});
        r.payload = j.at("tool_result").value("payload", nlohmann::json::object());
        m.tool_result = std::move(r);
    }
    return m;
}

std::string transcript_to_jsonl(const Transcript& transcript) {
    std::string out;
    for (const auto& m : transcript.messages) {
        out += message_to_json(m).dump();
        out += '\n';
    }
    return out;
}

Transcript transcript_from_jsonl(const std::string& jsonl, std::uint64_t seed, std::string scenario_id) {
    Transcript t;
    t.seed = seed;
    t.scenario_id = std::move(scenario_id);
    std::istringstream stream(jsonl);
    std::string line;
    while (std::getline(stream, line)) {
        if (line.empty()) continue;
        t.messages.push_back(message_from_json(nlohmann::json::parse(line)));
    }
    return t;
}

void validate_transcript(const Transcript& transcript) {
    const auto& ms = transcript.messages;
    if (ms.empty() || ms.front().role != Role::System) {
        fail("invalid_transcript", "first message must have role system");
    }
    std::unordered_map<std::string, int> results_per_call;
    std::unordered_set<std::string> known_calls;

    for (std::size_t i = 0; i < ms.size(); ++i) {
        const auto& m = ms[i];
        if (!m.tool_calls.empty() && m.role != Role::Assistant) {
            fail("invalid_transcript", "tool_calls on non-assistant message");
        }
        if (m.tool_result && m.role != Role::Tool) {
            fail("invalid_transcript", "tool_result on non-tool message");
        }
        if (m.role == Role::Tool) {
            if (!m.tool_result) fail("invalid_transcript", "tool message without tool_result");
            // A tool message must follow the assistant message (or sibling tool
            // messages) that issued its call id.
            std::size_t k = i;
            while (k > 0 && ms[k - 1].role == Role::Tool) --k;
            if (k == 0 || ms[k - 1].role != Role::Assistant) {
                fail("invalid_transcript", "tool message not adjacent to an assistant message");
            }
            const auto& issuer = ms[k - 1];
            const bool matches = std::any_of(issuer.tool_calls.begin(), issuer.tool_calls.end(),
                                             [&](const ToolCall& c) { return c.call_id == m.tool_result->call_id; });
            if (!matches) {
                fail("invalid_transcript",
                     "tool result call_id '" + m.tool_result->call_id + "' not issued by preceding assistant");
            }
            results_per_call[m.tool_result->call_id] += 1;
        }
        for (const auto& call : m.tool_calls) {
            if (!known_calls.insert(call.call_id).second) {
                fail("invalid_transcript", "duplicate call_id '" + call.call_id + "'");
            }
        }
    }
    for (const auto& [call_id, count] : results_per_call) {
        if (count != 1) fail("invalid_transcript", "call '" + call_id + "' resolved " + std::to_string(count) + " times");
    }
    for (const auto& call_id : known_calls) {
        if (results_per_call.find(call_id) == results_per_call.end()) {
            fail("invalid_transcript", "call '" + call_id + "' has no tool result");
        }
    }
}

ToolResult parse_tool_result(const std::string& raw, std::string call_id) {
    nlohmann::json payload;
    try {
        payload = nlohmann::json::parse(raw); // strict: rejects trailing garbage
    } catch (const nlohmann::json::parse_error& e) {
        fail("parse_error", e.what());
    }
    if (!payload.is_object()) fail("schema_error", "tool result payload must be a JSON object");
    if (!payload.contains("status") || !payload.at("status").is_string()) {
        fail("schema_error", "tool result payload missing string 'status' field");
    }
    return ToolResult{std::move(call_id), std::move(payload)};
}

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

ScriptedPolicy ScriptedPolicy::from_turns(std::vector<ScriptedTurn> turns,
                                          std::optional<ScriptedTurn> fallback) {
    return ScriptedPolicy(
        [turns = std::move(turns), fallback = std::move(fallback)](
            std::size_t turn_index, const Transcript&, rng::Engine&) -> std::optional<ScriptedTurn> {
            if (turn_index < turns.size()) return turns[turn_index];
            return fallback;
        });
}

std::optional<ScriptedTurn> ScriptedPolicy::turn(std::size_t turn_index, const Transcript& transcript,
                                                 rng::Engine& engine) const {
    if (!generator_) return std::nullopt;
    return generator_(turn_index, transcript, engine);
}

ChatMessage scripted_backend_step(const ScriptedPolicy& script, const Transcript& transcript,
                                  std::uint64_t seed) {
    const std::size_t turn_index = transcript.assistant_turns();
    // Stream keyed by (seed, turn) so replays of the same turn see the same draws.
    auto engine = rng::make_engine(rng::mix(seed, turn_index));
    auto turn = script.turn(turn_index, transcript, engine);
    if (!turn) {
        fail("script_exhausted", "no scripted response for turn " + std::to_string(turn_index));
    }
    ChatMessage m;
    m.role = Role::Assistant;
    m.content = std::move(turn->content);
    m.tool_calls = std::move(turn->tool_calls);
    return m;
}

const ToolSchema* AgentSpec::find_tool(const std::string& tool_name) const {
    for (const auto& schema : toolset) {
        if (schema.name == tool_name) return &schema;
    }
    return nullptr;
}

namespace {

bool ascii_identifier(const std::string& s) {
    if (s.empty()) return false;
    for (unsigned char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '_' || c == '-';
        if (!ok) return false;
    }
    return true;
}

} // namespace

void validate_agent_spec(const AgentSpec& agent) {
    if (!agent.backend) {
        fail("invalid_agent_spec", "agent '" + agent.name + "' has no resolvable backend");
    }
    std::unordered_set<std::string> names;
    for (const auto& schema : agent.toolset) {
        if (!ascii_identifier(schema.name)) {
            fail("invalid_agent_spec", "tool name '" + schema.name + "' is not an identifier");
        }
        if (!names.insert(schema.name).second) {
            fail("invalid_agent_spec", "duplicate tool '" + schema.name + "' in toolset");
        }
        for (const auto& p : schema.parameters) {
            if (!ascii_identifier(p.name)) {
                fail("invalid_agent_spec",
                     "parameter '" + p.name + "' of tool '" + schema.name + "' is not an identifier");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Environment + turn loop
// ---------------------------------------------------------------------------

void Environment::bind(std::string tool_name, ToolExecutor executor) {
    executors_[std::move(tool_name)] = std::move(executor);
}

const ToolExecutor* Environment::find(const std::string& tool_name) const {
    auto it = executors_.find(tool_name);
    return it == executors_.end() ? nullptr : &it->second;
}

std::optional<std::string> check_arguments(const ToolSchema& schema, const nlohmann::json& arguments) {
    if (!arguments.is_object()) return "arguments must be a JSON object";
    for (const auto& p : schema.parameters) {
        const auto it = arguments.find(p.name);
        if (it == arguments.end()) {
            if (p.required) return "missing required parameter '" + p.name + "'";
            continue;
        }
        bool ok = true;
        switch (p.type) {
            case ParamType::String: ok = it->is_string(); break;
            case ParamType::Integer: ok = it->is_number_integer(); break;
            case ParamType::Number: ok = it->is_number(); break;
            case ParamType::Boolean: ok = it->is_boolean(); break;
        }
        if (!ok) return "parameter '" + p.name + "' has wrong type";
    }
    for (auto it = arguments.begin(); it != arguments.end(); ++it) {
        const bool known = std::any_of(schema.parameters.begin(), schema.parameters.end(),
                                       [&](const ParamSpec& p) { return p.name == it.key(); });
        if (!known) return "unknown parameter '" + it.key() + "'";
    }
    return std::nullopt;
}

namespace {

ChatMessage tool_message(ToolResult result) {
    ChatMessage m;
    m.role = Role::Tool;
    m.tool_result = std::move(result);
    return m;
}

nlohmann::json error_payload(const std::string& status, const std::string& detail) {
    return nlohmann::json{{"status", status}, {"detail", detail}};
}

} // namespace

Transcript run_conversation_turn(const AgentSpec& agent, Transcript transcript,
                                 const Environment& environment) {
    if (!agent.backend) fail("backend_failure", "agent '" + agent.name + "' has no backend");

    // A backend failure throws here, before the transcript is touched.
    ChatMessage assistant = agent.backend->step(agent, transcript, transcript.seed);
    assistant.role = Role::Assistant;

    std::size_t next_call = transcript.tool_call_count();
    for (auto& call : assistant.tool_calls) {
        if (call.call_id.empty()) call.call_id = "call_" + std::to_string(next_call);
        ++next_call;
    }

    transcript.messages.push_back(assistant);

    for (const auto& call : assistant.tool_calls) {
        ToolResult result;
        result.call_id = call.call_id;

        const ToolSchema* schema = agent.find_tool(call.tool_name);
        const ToolExecutor* executor = environment.find(call.tool_name);
        if (schema == nullptr || executor == nullptr) {
            result.payload = error_payload("error:unknown_tool", "tool '" + call.tool_name + "' not available");
        } else if (auto problem = check_arguments(*schema, call.arguments)) {
            result.payload = error_payload("error:bad_arguments", *problem);
        } else {
            try {
                result.payload = (*executor)(call.arguments);
            } catch (const Error& e) {
                result.payload = error_payload("error:" + e.code(), e.what());
            }
            if (!result.payload.is_object() || !result.payload.contains("status")) {
                result.payload = error_payload("error:bad_executor_result",
                                               "executor for '" + call.tool_name + "' returned no status");
            }
        }
        transcript.messages.push_back(tool_message(std::move(result)));
    }
    return transcript;
}

std::vector<nlohmann::json> collect_tool_results(const Transcript& transcript,
                                                 const std::string& tool_name) {
    // Map call ids to tool names from the assistant messages, then walk results.
    std::unordered_map<std::string, std::string> call_names;
    for (const auto& m : transcript.messages) {
        for (const auto& call : m.tool_calls) call_names[call.call_id] = call.tool_name;
    }
    std::vector<nlohmann::json> out;
    for (const auto& m : transcript.messages) {
        if (!m.tool_result) continue;
        auto it = call_names.find(m.tool_result->call_id);
        if (it != call_names.end() && it->second == tool_name) out.push_back(m.tool_result->payload);
    }
    return out;
}

namespace {

bool json_strings_contain(const nlohmann::json& j, const std::string& needle) {
    if (j.is_string()) return j.get_ref<const std::string&>().find(needle) != std::string::npos;
    if (j.is_object() || j.is_array()) {
        for (const auto& item : j) {
            if (json_strings_contain(item, needle)) return true;
        }
    }
    return false;
}

} // namespace

bool any_tool_result_indicates(const Transcript& transcript, const std::string& needle) {
    for (const auto& m : transcript.messages) {
        if (m.tool_result && json_strings_contain(m.tool_result->payload, needle)) return true;
    }
    return false;
}

namespace {

bool json_string_equals(const nlohmann::json& j, const std::string& value) {
    if (j.is_string()) return j.get_ref<const std::string&>() == value;
    if (j.is_object() || j.is_array()) {
        for (const auto& item : j) {
            if (json_string_equals(item, value)) return true;
        }
    }
    return false;
}

} // namespace

bool any_tool_result_field_equals(const Transcript& transcript, const std::string& value) {
    for (const auto& m : transcript.messages) {
        if (m.tool_result && json_string_equals(m.tool_result->payload, value)) return true;
    }
    return false;
}

} // namespace agentsec
