#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "agentsec/protocol.hpp"

namespace agentsec {

/// Remote chat-completions endpoint. Auth is read at request time from the
/// environment variable named here; tokens never live in configs or logs.
struct EndpointConfig {
    std::string base_url;                      // e.g. "http://127.0.0.1:8089"
    std::string path = "/v1/chat/completions"; // dialect-specific resource
    std::string model;
    std::string api_key_env;                   // name of the env var holding the bearer token
    int timeout_ms = 30000;
    int max_retries = 3;
    int retry_base_ms = 250;                   // backoff: base * 2^attempt
    std::string dialect = "openai";            // one adapter per vendor dialect
};

EndpointConfig endpoint_config_from_json(const nlohmann::json& j);

/// Builds the wire request body: messages array, tools array.
nlohmann::json build_chat_request(const EndpointConfig& config, const AgentSpec& agent,
                                  const Transcript& transcript);

/// Maps a chat-completions response body onto an assistant ChatMessage.
/// Errors: malformed_response.
ChatMessage parse_chat_response(const nlohmann::json& body);

/// One remote step: POSTs the transcript + toolset, retrying idempotently on
/// transient failures (connect errors, timeouts, 429, 5xx) with exponential
/// backoff. Errors: timeout, auth_failure, rate_limited, backend_failure,
/// malformed_response.
ChatMessage remote_backend_step(const EndpointConfig& config, const AgentSpec& agent,
                                const Transcript& transcript);

class RemoteBackend : public Backend {
public:
    explicit RemoteBackend(EndpointConfig config) : config_(std::move(config)) {}

    ChatMessage step(const AgentSpec& agent, const Transcript& transcript, std::uint64_t) override {
        return remote_backend_step(config_, agent, transcript);
    }

    const EndpointConfig& config() const { return config_; }

private:
    EndpointConfig config_;
};

} // namespace agentsec
