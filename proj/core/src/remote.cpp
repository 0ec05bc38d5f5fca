#include "agentsec/remote.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

namespace agentsec {

EndpointConfig endpoint_config_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("base_url")) {
        fail("config_invalid", "endpoint config needs 'base_url'");
    }
    EndpointConfig config;
    config.base_url = j.at("base_url").get<std::string>();
    config.path = j.value("path", config.path);
    config.model = j.value("model", std::string{});
    config.api_key_env = j.value("api_key_env", std::string{});
    config.timeout_ms = j.value("timeout_ms", config.timeout_ms);
    config.max_retries = j.value("max_retries", config.max_retries);
    config.retry_base_ms = j.value("retry_base_ms", config.retry_base_ms);
    config.dialect = j.value("dialect", config.dialect);
    if (config.dialect != "openai") {
        fail("config_invalid", "unsupported dialect '" + config.dialect + "'");
    }
    return config;
}

namespace {

std::string param_type_name(ParamType type) {
    switch (type) {
        case ParamType::String: return "string";
        case ParamType::Integer: return "integer";
        case ParamType::Number: return "number";
        case ParamType::Boolean: return "boolean";
    }
    return "string";
}

nlohmann::json tool_to_wire(const ToolSchema& schema) {
    nlohmann::json properties = nlohmann::json::object();
    auto required = nlohmann::json::array();
    for (const auto& p : schema.parameters) {
        properties[p.name] = nlohmann::json{{"type", param_type_name(p.type)}};
        if (p.required) required.push_back(p.name);
    }
    return nlohmann::json{
        {"type", "function"},
        {"function",
         nlohmann::json{{"name", schema.name},
                        {"description", schema.description},
                        {"parameters", nlohmann::json{{"type", "object"},
                                                      {"properties", std::move(properties)},
                                                      {"required", std::move(required)}}}}}};
}

nlohmann::json message_to_wire(const ChatMessage& message) {
    nlohmann::json m{{"role", role_to_string(message.role)}, {"content", message.content}};
    if (!message.tool_calls.empty()) {
        auto calls = nlohmann::json::array();
        for (const auto& call : message.tool_calls) {
            calls.push_back(nlohmann::json{
                {"id", call.call_id},
                {"type", "function"},
                {"function",
                 nlohmann::json{{"name", call.tool_name}, {"arguments", call.arguments.dump()}}}});
        }
        m["tool_calls"] = std::move(calls);
    }
    if (message.tool_result) {
        m["tool_call_id"] = message.tool_result->call_id;
        m["content"] = message.tool_result->payload.dump();
    }
    return m;
}

} // namespace

nlohmann::json build_chat_request(const EndpointConfig& config, const AgentSpec& agent,
                                  const Transcript& transcript) {
    auto messages = nlohmann::json::array();
    for (const auto& m : transcript.messages) messages.push_back(message_to_wire(m));
    nlohmann::json body{{"model", config.model}, {"messages", std::move(messages)}};
    if (!agent.toolset.empty()) {
        auto tools = nlohmann::json::array();
        for (const auto& schema : agent.toolset) tools.push_back(tool_to_wire(schema));
        body["tools"] = std::move(tools);
    }
    return body;
}

ChatMessage parse_chat_response(const nlohmann::json& body) {
    if (!body.is_object() || !body.contains("choices") || !body.at("choices").is_array() ||
        body.at("choices").empty()) {
        fail("malformed_response", "response has no choices");
    }
    const auto& choice = body.at("choices").front();
    if (!choice.contains("message")) fail("malformed_response", "choice has no message");
    const auto& wire = choice.at("message");

    ChatMessage message;
    message.role = Role::Assistant;
    if (wire.contains("content") && wire.at("content").is_string()) {
        message.content = wire.at("content").get<std::string>();
    }
    if (wire.contains("tool_calls")) {
        for (const auto& c : wire.at("tool_calls")) {
            ToolCall call;
            call.call_id = c.value("id", std::string{});
            if (!c.contains("function")) fail("malformed_response", "tool call without function");
            call.tool_name = c.at("function").value("name", std::string{});
            const std::string arguments = c.at("function").value("arguments", std::string{"{}"});
            try {
                call.arguments = nlohmann::json::parse(arguments);
            } catch (const nlohmann::json::parse_error&) {
                fail("malformed_response", "tool call arguments are not valid JSON");
            }
            message.tool_calls.push_back(std::move(call));
        }
    }
    return message;
}

ChatMessage remote_backend_step(const EndpointConfig& config, const AgentSpec& agent,
                                const Transcript& transcript) {
    httplib::Client client(config.base_url);
    client.set_connection_timeout(std::chrono::milliseconds(config.timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(config.timeout_ms));
    client.set_write_timeout(std::chrono::milliseconds(config.timeout_ms));

    httplib::Headers headers;
    if (!config.api_key_env.empty()) {
        if (const char* token = std::getenv(config.api_key_env.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
    }

    const std::string body = build_chat_request(config, agent, transcript).dump();

    int last_status = 0;
    bool timed_out = false;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        if (attempt > 0) {
            const auto delay = std::chrono::milliseconds(
                static_cast<long long>(config.retry_base_ms) * (1LL << (attempt - 1)));
            std::this_thread::sleep_for(delay);
        }
        auto result = client.Post(config.path, headers, body, "application/json");
        if (!result) {
            timed_out = result.error() == httplib::Error::ConnectionTimeout ||
                        result.error() == httplib::Error::Read || result.error() == httplib::Error::Write;
            last_status = 0;
            continue; // transport error: retry
        }
        last_status = result->status;
        if (result->status == 401 || result->status == 403) {
            fail("auth_failure", "endpoint rejected credentials (HTTP " +
                                     std::to_string(result->status) + ")");
        }
        if (result->status == 429 || result->status >= 500) {
            continue; // transient: retry with backoff
        }
        if (result->status != 200) {
            fail("backend_failure", "unexpected HTTP status " + std::to_string(result->status));
        }
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(result->body);
        } catch (const nlohmann::json::parse_error&) {
            fail("malformed_response", "response body is not valid JSON");
        }
        return parse_chat_response(parsed);
    }

    if (last_status == 429) fail("rate_limited", "still rate limited after retries");
    if (last_status >= 500) fail("backend_failure", "server errors persisted after retries");
    if (timed_out) fail("timeout", "request timed out after retries");
    fail("backend_failure", "could not reach endpoint " + config.base_url);
}

} // namespace agentsec
