#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentsec/error.hpp"
#include "agentsec/rng.hpp"

namespace agentsec {

enum class Role { System, User, Assistant, Tool };

std::string role_to_string(Role role);
Role role_from_string(const std::string& s);

enum class ParamType { String, Integer, Number, Boolean };

struct ParamSpec {
    std::string name;
    ParamType type = ParamType::String;
    bool required = false;
};

/// Schema for one callable tool: name, description and typed parameters.
struct ToolSchema {
    std::string name;
    std::string description;
    std::vector<ParamSpec> parameters;
};

struct ToolCall {
    std::string call_id; // unique within a transcript; assigned by the runner if empty
    std::string tool_name;
    nlohmann::json arguments = nlohmann::json::object();
};

/// Result of one tool execution. `payload` is always a JSON object carrying
/// at least a string "status" field ("ok", "noop", "error:<code>", ...).
struct ToolResult {
    std::string call_id;
    nlohmann::json payload = nlohmann::json::object();

    std::string status() const { return payload.value("status", std::string{}); }
};

struct ChatMessage {
    Role role = Role::User;
    std::string content;
    std::vector<ToolCall> tool_calls;           // assistant role only
    std::optional<ToolResult> tool_result;      // tool role only
};

struct Transcript {
    std::vector<ChatMessage> messages;
    std::uint64_t seed = 0;
    std::string scenario_id;

    std::size_t assistant_turns() const;
    std::size_t tool_call_count() const;
};

ChatMessage system_message(std::string content);
ChatMessage user_message(std::string content);

nlohmann::json message_to_json(const ChatMessage& message);
ChatMessage message_from_json(const nlohmann::json& j);

/// JSON Lines serialization: one ChatMessage object per line, lexicographic
/// field order, UTF-8. Byte-stable for identical transcripts.
std::string transcript_to_jsonl(const Transcript& transcript);
Transcript transcript_from_jsonl(const std::string& jsonl, std::uint64_t seed = 0,
                                 std::string scenario_id = {});

/// Checks transcript well-formedness: system message first, tool messages
/// adjacent to their assistant message, every call resolved exactly once.
/// Throws Error("invalid_transcript") on violation.
void validate_transcript(const Transcript& transcript);

/// Strictly parses a raw tool-result payload: must be a lone JSON object with
/// a string "status" field. Errors: parse_error, schema_error.
ToolResult parse_tool_result(const std::string& raw, std::string call_id = {});

// ---------------------------------------------------------------------------
// Agent backends
// ---------------------------------------------------------------------------

/// One scripted assistant turn: text plus the tool calls to issue.
struct ScriptedTurn {
    std::string content;
    std::vector<ToolCall> tool_calls;
};

/// Deterministic stand-in for a model backend. The generator is a pure
/// function of (turn index, transcript, seeded engine); returning nullopt
/// means the script has no response for that turn.
class ScriptedPolicy {
public:
    using Generator =
        std::function<std::optional<ScriptedTurn>(std::size_t turn_index, const Transcript&, rng::Engine&)>;

    ScriptedPolicy() = default;
    explicit ScriptedPolicy(Generator generator) : generator_(std::move(generator)) {}

    /// Fixed per-turn responses with an optional fallback once exhausted.
    static ScriptedPolicy from_turns(std::vector<ScriptedTurn> turns,
                                     std::optional<ScriptedTurn> fallback = std::nullopt);

    std::optional<ScriptedTurn> turn(std::size_t turn_index, const Transcript& transcript,
                                     rng::Engine& engine) const;

private:
    Generator generator_;
};

/// Emits the scripted assistant message for the current turn. The turn index
/// is the number of assistant messages already in the transcript, so the step
/// is a pure function of (script, transcript length, seed).
/// Errors: script_exhausted.
ChatMessage scripted_backend_step(const ScriptedPolicy& script, const Transcript& transcript,
                                  std::uint64_t seed);

struct AgentSpec;

class Backend {
public:
    virtual ~Backend() = default;
    virtual ChatMessage step(const AgentSpec& agent, const Transcript& transcript, std::uint64_t seed) = 0;
};

class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(ScriptedPolicy policy) : policy_(std::move(policy)) {}
    ChatMessage step(const AgentSpec&, const Transcript& transcript, std::uint64_t seed) override {
        return scripted_backend_step(policy_, transcript, seed);
    }

private:
    ScriptedPolicy policy_;
};

struct AgentSpec {
    std::string name;
    std::string system_prompt;
    std::vector<ToolSchema> toolset;
    std::shared_ptr<Backend> backend;

    const ToolSchema* find_tool(const std::string& tool_name) const;
};

/// Scenario-start check: backend resolvable, tool names distinct, every tool
/// and parameter name a non-empty ASCII identifier, required params declared.
/// Throws Error("invalid_agent_spec").
void validate_agent_spec(const AgentSpec& agent);

// ---------------------------------------------------------------------------
// Tool execution environment
// ---------------------------------------------------------------------------

/// Executors return the result payload (an object with a "status" field).
/// Throwing Error("code", ...) surfaces as an error-status ToolResult; it
/// never aborts the turn.
using ToolExecutor = std::function<nlohmann::json(const nlohmann::json& arguments)>;

class Environment {
public:
    void bind(std::string tool_name, ToolExecutor executor);
    const ToolExecutor* find(const std::string& tool_name) const;
    bool has(const std::string& tool_name) const { return find(tool_name) != nullptr; }

private:
    std::map<std::string, ToolExecutor> executors_;
};

/// Validates `arguments` against `schema`: required params present, types
/// match, no unknown params. Returns an error description or nullopt.
std::optional<std::string> check_arguments(const ToolSchema& schema, const nlohmann::json& arguments);

/// Runs one conversation turn: asks the agent backend for an assistant
/// message, appends it, then executes each tool call in listed order and
/// appends its ToolResult as a tool message. Unknown tools and malformed
/// arguments become error-status results; a backend failure propagates and
/// leaves the caller's transcript untouched.
Transcript run_conversation_turn(const AgentSpec& agent, Transcript transcript,
                                 const Environment& environment);

/// All tool-result payloads recorded for calls to `tool_name`, in order.
std::vector<nlohmann::json> collect_tool_results(const Transcript& transcript,
                                                 const std::string& tool_name);

/// True if any tool-result payload in the transcript contains `needle` in one
/// of its string fields (the "any tool_response indicates ..." check).
bool any_tool_result_indicates(const Transcript& transcript, const std::string& needle);

/// Like any_tool_result_indicates but requires an exact string-field match;
/// needed where one indicator string is a substring of its negation.
bool any_tool_result_field_equals(const Transcript& transcript, const std::string& value);

} // namespace agentsec
