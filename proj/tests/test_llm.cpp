#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "autoforge/domain/errors.hpp"
#include "autoforge/llm/backend.hpp"
#include "autoforge/llm/gateway.hpp"
#include "support.hpp"

using namespace autoforge;
using namespace autoforge::llm;
using nlohmann::json;
using testsupport::ScriptBuilder;
using testsupport::TempDir;

namespace {

BackendRef scripted_ref(const std::string& dir, const std::string& model = "scripted") {
    BackendRef ref;
    ref.kind = BackendKind::scripted;
    ref.script_dir = dir;
    ref.model_name = model;
    return ref;
}

std::vector<ChatMessage> simple_messages(const std::string& user_text) {
    return {system_message("You answer."), user_message(user_text)};
}

// Loopback OpenAI-style endpoint with a programmable handler.
class MockEndpoint {
public:
    MockEndpoint() {
        server_.Post("/v1/chat/completions",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         const int n = hits_.fetch_add(1);
                         {
                             std::lock_guard<std::mutex> lock(mutex_);
                             last_body_ = req.body;
                             last_auth_ = req.get_header_value("Authorization");
                         }
                         handler_(n, res);
                     });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockEndpoint() {
        server_.stop();
        thread_.join();
    }

    void respond_with(std::function<void(int call_index, httplib::Response&)> handler) {
        handler_ = std::move(handler);
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    int hits() const { return hits_.load(); }
    json last_request() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return json::parse(last_body_);
    }
    std::string last_auth() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return last_auth_;
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> hits_{0};
    mutable std::mutex mutex_;
    std::string last_body_;
    std::string last_auth_;
    std::function<void(int, httplib::Response&)> handler_ = [](int, httplib::Response& res) {
        res.status = 500;
    };
};

void set_ok_response(httplib::Response& res, const std::string& content, long prompt_tokens,
                     long completion_tokens) {
    json reply;
    reply["choices"] = json::array();
    reply["choices"].push_back({{"message", {{"role", "assistant"}, {"content", content}}},
                                {"finish_reason", "stop"}});
    reply["usage"] = {{"prompt_tokens", prompt_tokens}, {"completion_tokens", completion_tokens}};
    res.set_content(reply.dump(), "application/json");
}

BackendRef remote_ref(const std::string& endpoint, const std::string& model = "mock-chat") {
    BackendRef ref;
    ref.kind = BackendKind::remote;
    ref.model_name = model;
    ref.endpoint = endpoint;
    ref.credential_env = "AUTOFORGE_TEST_KEY";
    return ref;
}

}  // namespace

TEST_CASE("scripted backend serves responses in file-number order per queue") {
    TempDir dir;
    // Written out of order on purpose; consumption must follow NNN order.
    testsupport::write_file(dir.path() / "coder.draft.002.txt", "second");
    testsupport::write_file(dir.path() / "coder.draft.001.txt", "first");
    testsupport::write_file(dir.path() / "tester.draft_tests.001.txt", "tests");
    ScriptedBackend backend(scripted_ref(dir.str()));

    CHECK(backend.remaining("coder.draft") == 2);
    CHECK(backend.remaining("tester.draft_tests") == 1);
    CHECK(backend.remaining("absent.queue") == 0);

    CallContext coder{AgentRole::coder, "draft"};
    CHECK(coder.fixture_key() == "coder.draft");
    CHECK(backend.complete(simple_messages("a"), {}, coder).text == "first");
    CHECK(backend.complete(simple_messages("b"), {}, coder).text == "second");

    CallContext tester{AgentRole::tester, "draft_tests"};
    CHECK(backend.complete(simple_messages("c"), {}, tester).text == "tests");

    CHECK_THROWS_WITH_AS(backend.complete(simple_messages("d"), {}, coder),
                         doctest::Contains("coder.draft"), FixtureExhaustedError);

    const auto transcript = backend.transcript();
    REQUIRE(transcript.size() == 3);
    CHECK(transcript[0].key == "coder.draft");
    CHECK(transcript[0].messages.size() == 2);
    CHECK(transcript[0].response == "first");
    CHECK(transcript[2].key == "tester.draft_tests");
}

TEST_CASE("scripted backend usage is the deterministic approximate token count") {
    TempDir dir;
    testsupport::write_file(dir.path() / "coder.draft.001.txt", "12345678");  // 2 tokens
    ScriptedBackend backend(scripted_ref(dir.str()));
    const auto messages = simple_messages("123456789012");  // 3 tokens + system
    const Completion out = backend.complete(messages, {}, {AgentRole::coder, "draft"});
    CHECK(out.usage.completion_tokens == approx_token_count("12345678"));
    CHECK(out.usage.prompt_tokens ==
          approx_token_count(messages[0].content) + approx_token_count(messages[1].content));
    CHECK(approx_token_count("") == 0);
    CHECK(approx_token_count("abcd") == 1);
    CHECK(approx_token_count("abcde") == 2);
}

TEST_CASE("scripted backend requires an existing fixture directory") {
    CHECK_THROWS_AS(ScriptedBackend(scripted_ref("/nonexistent/fixture/dir")), ConfigError);
    BackendRef wrong_kind = remote_ref("http://127.0.0.1:1/v1");
    CHECK_THROWS_AS(ScriptedBackend(wrong_kind), ConfigError);
}

TEST_CASE("gateway routes by role and applies role temperatures") {
    TempDir decision_dir, implementer_dir;
    ScriptBuilder decision(decision_dir.path());
    decision.add("team_leader.split_modules", "plan");
    decision.add("module_leader.split_functions", "functions");
    ScriptBuilder implementer(implementer_dir.path());
    implementer.add("coder.draft", "code");
    implementer.add("coder.draft", "code2");

    auto decision_backend =
        std::make_unique<ScriptedBackend>(scripted_ref(decision.dir(), "scripted-decision"));
    auto implementer_backend =
        std::make_unique<ScriptedBackend>(scripted_ref(implementer.dir(), "scripted-implementer"));
    ScriptedBackend* decision_raw = decision_backend.get();
    ScriptedBackend* implementer_raw = implementer_backend.get();
    Gateway gateway(std::move(decision_backend), std::move(implementer_backend), 4);
    CHECK(gateway.all_scripted());

    CHECK(gateway.complete({AgentRole::team_leader, "split_modules"}, simple_messages("x")).text ==
          "plan");
    CHECK(gateway.complete({AgentRole::module_leader, "split_functions"}, simple_messages("y"))
              .text == "functions");
    CHECK(gateway.complete({AgentRole::coder, "draft"}, simple_messages("z")).text == "code");
    // A caller-specified temperature wins over the role default.
    CompletionLimits custom;
    custom.temperature = 0.7;
    gateway.complete({AgentRole::coder, "draft"}, simple_messages("w"), custom);

    const auto decision_calls = decision_raw->transcript();
    REQUIRE(decision_calls.size() == 2);
    CHECK(decision_calls[0].limits.temperature == Gateway::kDecisionTemperature);
    CHECK(decision_calls[1].limits.temperature == Gateway::kDecisionTemperature);

    const auto implementer_calls = implementer_raw->transcript();
    REQUIRE(implementer_calls.size() == 2);
    CHECK(implementer_calls[0].limits.temperature == Gateway::kImplementerTemperature);
    CHECK(implementer_calls[1].limits.temperature == doctest::Approx(0.7));

    // Role splits land on the right backends.
    const auto per_backend = gateway.ledger().per_backend();
    CHECK(per_backend.at("scripted-decision").requests == 2);
    CHECK(per_backend.at("scripted-implementer").requests == 2);
    CHECK(gateway.ledger().decision_maker_total().requests == 2);
    CHECK(gateway.ledger().implementer_total().requests == 2);
}

TEST_CASE("gateway enforces the single leading system message contract") {
    TempDir dir;
    ScriptBuilder script(dir.path());
    script.add("coder.draft", "code");
    Gateway gateway(std::make_unique<ScriptedBackend>(scripted_ref(dir.str())),
                    std::make_unique<ScriptedBackend>(scripted_ref(dir.str())), 2);

    CHECK_THROWS_AS(gateway.complete({AgentRole::coder, "draft"}, {user_message("no system")}),
                    DomainError);
    CHECK_THROWS_AS(gateway.complete({AgentRole::coder, "draft"},
                                     {system_message("a"), system_message("b")}),
                    DomainError);
    CHECK_THROWS_AS(gateway.complete({AgentRole::coder, "draft"}, {}), DomainError);
}

TEST_CASE("ledger splits by role always sum to the per-backend totals") {
    UsageLedger ledger;
    ledger.record("big", BackendKind::remote, true, {100, 20});
    ledger.record("big", BackendKind::remote, true, {50, 10});
    ledger.record("small", BackendKind::remote, false, {200, 40});
    ledger.record("big", BackendKind::remote, false, {10, 5});

    const auto per_backend = ledger.per_backend();
    const UsageLedger::Tally decision = ledger.decision_maker_total();
    const UsageLedger::Tally implementer = ledger.implementer_total();

    long backend_prompt = 0, backend_completion = 0, backend_requests = 0;
    for (const auto& [model, tally] : per_backend) {
        backend_prompt += tally.prompt_tokens;
        backend_completion += tally.completion_tokens;
        backend_requests += tally.requests;
    }
    CHECK(backend_requests == decision.requests + implementer.requests);
    CHECK(backend_prompt == decision.prompt_tokens + implementer.prompt_tokens);
    CHECK(backend_completion == decision.completion_tokens + implementer.completion_tokens);
    CHECK(per_backend.at("big").requests == 3);
    CHECK(decision.prompt_tokens == 150);
    CHECK(implementer.prompt_tokens == 210);

    CHECK_THROWS_AS(ledger.kind_of("unknown"), LedgerError);
}

TEST_CASE("fixed usage of 1000+1000 tokens at prices 1 and 2 per 1k costs exactly 3") {
    MockEndpoint endpoint;
    endpoint.respond_with(
        [](int, httplib::Response& res) { set_ok_response(res, "hello", 1000, 1000); });
    setenv("AUTOFORGE_TEST_KEY", "not-a-real-credential", 1);

    TempDir dir;
    ScriptBuilder script(dir.path());
    script.add("coder.draft", "code");
    Gateway gateway(make_backend(remote_ref(endpoint.endpoint())),
                    std::make_unique<ScriptedBackend>(scripted_ref(dir.str())), 2);
    CHECK_FALSE(gateway.all_scripted());

    const Completion out =
        gateway.complete({AgentRole::team_leader, "split_modules"}, simple_messages("hi"));
    CHECK(out.text == "hello");
    CHECK(out.usage.prompt_tokens == 1000);
    CHECK(out.usage.completion_tokens == 1000);
    CHECK(endpoint.last_auth() == "Bearer not-a-real-credential");
    const json request = endpoint.last_request();
    CHECK(request["model"] == "mock-chat");
    CHECK(request["temperature"] == doctest::Approx(0.0));
    CHECK(request["messages"].size() == 2);

    PriceTable prices;
    prices["mock-chat"] = {1.0, 2.0};
    const CostSummary summary = ledger_report(gateway.ledger(), prices);
    CHECK(summary.total_cost == doctest::Approx(3.0).epsilon(1e-12));
    REQUIRE(summary.models.size() == 1);
    CHECK(summary.models[0].model == "mock-chat");
    CHECK(summary.models[0].cost == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(summary.decision_maker.requests == 1);
    CHECK(summary.implementer.requests == 0);

    // The rendered summary carries the exact figures.
    const std::string rendered = render_cost_summary(summary);
    CHECK(rendered.find("mock-chat: 1 requests, 1000 prompt + 1000 completion tokens") !=
          std::string::npos);
    CHECK(rendered.find("total cost: 3.0000") != std::string::npos);
}

TEST_CASE("a scripted run is always priced at zero even when a price table exists") {
    TempDir dir;
    ScriptBuilder script(dir.path());
    script.add("coder.draft", "code");
    Gateway gateway(std::make_unique<ScriptedBackend>(scripted_ref(dir.str())),
                    std::make_unique<ScriptedBackend>(scripted_ref(dir.str())), 2);
    gateway.complete({AgentRole::coder, "draft"}, simple_messages("x"));

    PriceTable prices;
    prices["scripted"] = {5.0, 5.0};  // must be ignored for scripted backends
    const CostSummary summary = ledger_report(gateway.ledger(), prices);
    CHECK(summary.total_cost == 0.0);
    REQUIRE(summary.models.size() == 1);
    CHECK(summary.models[0].cost == 0.0);
    CHECK(summary.models[0].tally.completion_tokens > 0);
}

TEST_CASE("a remote model without a price entry is a ledger error") {
    UsageLedger ledger;
    ledger.record("unpriced", BackendKind::remote, true, {10, 10});
    CHECK_THROWS_WITH_AS(ledger_report(ledger, {}), doctest::Contains("unpriced"), LedgerError);
}

TEST_CASE("remote backend retries transient failures then succeeds") {
    MockEndpoint endpoint;
    endpoint.respond_with([](int call_index, httplib::Response& res) {
        if (call_index == 0) {
            res.status = 500;
            res.set_content("flaky", "text/plain");
            return;
        }
        set_ok_response(res, "recovered", 5, 7);
    });
    setenv("AUTOFORGE_TEST_KEY", "k", 1);
    RemoteBackend backend(remote_ref(endpoint.endpoint()));
    const Completion out = backend.complete(simple_messages("x"), {}, {AgentRole::coder, "draft"});
    CHECK(out.text == "recovered");
    CHECK(endpoint.hits() == 2);
}

TEST_CASE("remote backend maps HTTP failures to typed errors") {
    setenv("AUTOFORGE_TEST_KEY", "k", 1);

    SUBCASE("hard HTTP errors do not retry") {
        MockEndpoint endpoint;
        endpoint.respond_with([](int, httplib::Response& res) {
            res.status = 404;
            res.set_content("nope", "text/plain");
        });
        RemoteBackend backend(remote_ref(endpoint.endpoint()));
        CHECK_THROWS_WITH_AS(backend.complete(simple_messages("x"), {}, {}),
                             doctest::Contains("404"), Error);
        CHECK(endpoint.hits() == 1);
    }

    SUBCASE("token overflow is distinguished") {
        MockEndpoint endpoint;
        endpoint.respond_with([](int, httplib::Response& res) {
            json reply;
            reply["choices"] = json::array();
            reply["choices"].push_back(
                {{"message", {{"role", "assistant"}, {"content", "cut"}}},
                 {"finish_reason", "length"}});
            res.set_content(reply.dump(), "application/json");
        });
        RemoteBackend backend(remote_ref(endpoint.endpoint()));
        CHECK_THROWS_AS(backend.complete(simple_messages("x"), {}, {}), TokenOverflowError);
    }

    SUBCASE("missing usage falls back to approximate counts") {
        MockEndpoint endpoint;
        endpoint.respond_with([](int, httplib::Response& res) {
            json reply;
            reply["choices"] = json::array();
            reply["choices"].push_back({{"message", {{"role", "assistant"}, {"content", "hi"}}},
                                        {"finish_reason", "stop"}});
            res.set_content(reply.dump(), "application/json");
        });
        RemoteBackend backend(remote_ref(endpoint.endpoint()));
        const Completion out = backend.complete(simple_messages("abcdefgh"), {}, {});
        CHECK(out.usage.completion_tokens == approx_token_count("hi"));
        CHECK(out.usage.prompt_tokens > 0);
    }

    SUBCASE("an unreachable endpoint is a transport error after bounded retries") {
        RemoteBackend backend(remote_ref("http://127.0.0.1:1/v1"));
        CHECK_THROWS_AS(backend.complete(simple_messages("x"), {}, {}), TransportError);
    }
}

TEST_CASE("remote backend refuses to run without its credential variable") {
    unsetenv("AUTOFORGE_TEST_KEY");
    RemoteBackend backend(remote_ref("http://127.0.0.1:1/v1"));
    CHECK_THROWS_WITH_AS(backend.complete(simple_messages("x"), {}, {}),
                         doctest::Contains("AUTOFORGE_TEST_KEY"), ConfigError);
    setenv("AUTOFORGE_TEST_KEY", "", 1);
    CHECK_THROWS_AS(backend.complete(simple_messages("x"), {}, {}), ConfigError);
}

TEST_CASE("backoff schedule is exponential and bounded for tests") {
    CHECK(RemoteBackend::backoff_ms(0) == 100);
    CHECK(RemoteBackend::backoff_ms(1) == 200);
    CHECK(RemoteBackend::kTransportRetries == 2);
}

TEST_CASE("make_backend dispatches on the ref kind") {
    TempDir dir;
    ScriptBuilder script(dir.path());
    script.add("coder.draft", "x");
    CHECK(make_backend(scripted_ref(dir.str()))->ref().kind == BackendKind::scripted);
    CHECK(make_backend(remote_ref("http://127.0.0.1:1/v1"))->ref().kind == BackendKind::remote);
}
