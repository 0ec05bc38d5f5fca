#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include <agentsec/remote.hpp>

using namespace agentsec;

namespace {

// In-process chat-completions stub. Each test configures a handler, starts
// the server on an ephemeral port and tears it down on scope exit.
class StubServer {
public:
    explicit StubServer(httplib::Server::Handler handler) {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~StubServer() {
        server_.stop();
        thread_.join();
    }

    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

EndpointConfig endpoint_for(const StubServer& server) {
    EndpointConfig config;
    config.base_url = server.base_url();
    config.model = "stub-model";
    config.timeout_ms = 2000;
    config.max_retries = 3;
    config.retry_base_ms = 1; // keep test backoff snappy
    return config;
}

AgentSpec echo_agent() {
    AgentSpec agent;
    agent.name = "remote-agent";
    agent.system_prompt = "system";
    agent.toolset = {
        ToolSchema{"lookup", "Look something up.", {ParamSpec{"key", ParamType::String, true}}}};
    return agent;
}

Transcript small_transcript() {
    Transcript t;
    t.seed = 1;
    t.scenario_id = "remote-test";
    t.messages.push_back(system_message("system"));
    t.messages.push_back(user_message("hello there"));
    return t;
}

std::string assistant_body(const std::string& content) {
    return nlohmann::json{
        {"choices",
         nlohmann::json::array(
             {nlohmann::json{{"message", nlohmann::json{{"role", "assistant"}, {"content", content}}}}})}}
        .dump();
}

} // namespace

TEST_CASE("endpoint config parses and validates") {
    const auto config = endpoint_config_from_json(
        nlohmann::json{{"base_url", "http://x"}, {"model", "m"}, {"max_retries", 5}});
    CHECK(config.base_url == "http://x");
    CHECK(config.max_retries == 5);
    CHECK(config.path == "/v1/chat/completions");
    CHECK_THROWS_WITH_AS(endpoint_config_from_json(nlohmann::json{{"model", "m"}}),
                         doctest::Contains("config_invalid"), Error);
    CHECK_THROWS_WITH_AS(
        endpoint_config_from_json(nlohmann::json{{"base_url", "http://x"}, {"dialect", "klingon"}}),
        doctest::Contains("config_invalid"), Error);
}

TEST_CASE("request body carries messages, tools and tool results") {
    const auto agent = echo_agent();
    Transcript t = small_transcript();
    ChatMessage assistant;
    assistant.role = Role::Assistant;
    ToolCall call;
    call.call_id = "call_0";
    call.tool_name = "lookup";
    call.arguments = nlohmann::json{{"key", "k"}};
    assistant.tool_calls.push_back(call);
    t.messages.push_back(assistant);
    ChatMessage tool;
    tool.role = Role::Tool;
    tool.tool_result = ToolResult{"call_0", nlohmann::json{{"status", "ok"}}};
    t.messages.push_back(tool);

    const auto body = build_chat_request(endpoint_config_from_json(
                                             nlohmann::json{{"base_url", "http://x"}, {"model", "m"}}),
                                         agent, t);
    CHECK(body.at("model") == "m");
    CHECK(body.at("messages").size() == 4);
    CHECK(body.at("messages").at(2).at("tool_calls").at(0).at("function").at("name") == "lookup");
    CHECK(body.at("messages").at(3).at("tool_call_id") == "call_0");
    CHECK(body.at("tools").at(0).at("function").at("name") == "lookup");
    CHECK(body.at("tools").at(0).at("function").at("parameters").at("required").at(0) == "key");
}

TEST_CASE("a fixed stub reply maps onto an assistant message with one request") {
    std::atomic<int> requests{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        ++requests;
        res.set_content(assistant_body("stubbed reply"), "application/json");
    });
    const ChatMessage reply = remote_backend_step(endpoint_for(server), echo_agent(), small_transcript());
    CHECK(reply.role == Role::Assistant);
    CHECK(reply.content == "stubbed reply");
    CHECK(reply.tool_calls.empty());
    CHECK(requests.load() == 1);
}

TEST_CASE("transient 500s are retried until success") {
    std::atomic<int> requests{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        const int n = ++requests;
        if (n <= 2) {
            res.status = 500;
            res.set_content("busy", "text/plain");
            return;
        }
        res.set_content(assistant_body("third time lucky"), "application/json");
    });
    const ChatMessage reply = remote_backend_step(endpoint_for(server), echo_agent(), small_transcript());
    CHECK(reply.content == "third time lucky");
    CHECK(requests.load() == 3);
}

TEST_CASE("persistent 401 is an auth failure, without retries") {
    std::atomic<int> requests{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        ++requests;
        res.status = 401;
    });
    CHECK_THROWS_WITH_AS(remote_backend_step(endpoint_for(server), echo_agent(), small_transcript()),
                         doctest::Contains("auth_failure"), Error);
    CHECK(requests.load() == 1);
}

TEST_CASE("exhausted 429 retries surface as rate_limited") {
    StubServer server([&](const httplib::Request&, httplib::Response& res) { res.status = 429; });
    auto config = endpoint_for(server);
    config.max_retries = 2;
    CHECK_THROWS_WITH_AS(remote_backend_step(config, echo_agent(), small_transcript()),
                         doctest::Contains("rate_limited"), Error);
}

TEST_CASE("garbage bodies surface as malformed_response") {
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        res.set_content("certainly not json", "application/json");
    });
    CHECK_THROWS_WITH_AS(remote_backend_step(endpoint_for(server), echo_agent(), small_transcript()),
                         doctest::Contains("malformed_response"), Error);

    CHECK_THROWS_WITH_AS(parse_chat_response(nlohmann::json{{"choices", nlohmann::json::array()}}),
                         doctest::Contains("malformed_response"), Error);
}

TEST_CASE("tool calls in the reply parse into structured arguments") {
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        const nlohmann::json body{
            {"choices",
             nlohmann::json::array(
                 {nlohmann::json{{"message",
                                  nlohmann::json{{"role", "assistant"},
                                                 {"content", ""},
                                                 {"tool_calls",
                                                  nlohmann::json::array(
                                                      {nlohmann::json{{"id", "abc"},
                                                                      {"type", "function"},
                                                                      {"function",
                                                                       nlohmann::json{{"name", "lookup"},
                                                                                      {"arguments",
                                                                                       "{\"key\": \"v\"}"}}}}})}}}}})}};
        res.set_content(body.dump(), "application/json");
    });
    const ChatMessage reply = remote_backend_step(endpoint_for(server), echo_agent(), small_transcript());
    REQUIRE(reply.tool_calls.size() == 1);
    CHECK(reply.tool_calls[0].call_id == "abc");
    CHECK(reply.tool_calls[0].tool_name == "lookup");
    CHECK(reply.tool_calls[0].arguments.at("key") == "v");
}

TEST_CASE("bearer token is read from the configured environment variable") {
    std::string seen_auth;
    StubServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        res.set_content(assistant_body("ok"), "application/json");
    });
    ::setenv("AGENTSEC_TEST_TOKEN", "sekret-token", 1);
    auto config = endpoint_for(server);
    config.api_key_env = "AGENTSEC_TEST_TOKEN";
    remote_backend_step(config, echo_agent(), small_transcript());
    CHECK(seen_auth == "Bearer sekret-token");
    ::unsetenv("AGENTSEC_TEST_TOKEN");
}

TEST_CASE("unreachable endpoints fail with backend_failure after retries") {
    EndpointConfig config;
    config.base_url = "http://127.0.0.1:1"; // nothing listens here
    config.timeout_ms = 200;
    config.max_retries = 1;
    config.retry_base_ms = 1;
    CHECK_THROWS_AS(remote_backend_step(config, echo_agent(), small_transcript()), Error);
}
