#include <doctest.h>

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <random>
#include <thread>

#include "support.hpp"

#include "hypogen/gateway.hpp"

using namespace hypogen::gateway;
using hypogen::agents::AgentRole;

namespace {

nlohmann::json demo_script() {
    return nlohmann::json::parse(testsupport::read_file(testsupport::data_dir() / "demo_script.json"));
}

ProviderProfile scripted_profile() {
    ProviderProfile p;
    p.id = "scripted";
    p.kind = "scripted";
    p.rate_in = 3e-6;
    p.rate_out = 15e-6;
    return p;
}

ChatRequest request_for(AgentRole role, int iteration, int agent_index = 0) {
    ChatRequest r;
    r.role = role;
    r.agent_index = agent_index;
    r.iteration = iteration;
    r.provider_id = "scripted";
    r.system_prompt = "prompt";
    return r;
}

}  // namespace

TEST_CASE("scripted backend serves canned text keyed by role and occurrence") {
    auto backend = std::make_shared<ScriptedBackend>(demo_script());
    Gateway gw(backend, scripted_profile());

    auto analyst = gw.complete(request_for(AgentRole::DataAnalyst, 1));
    CHECK(analyst.response_text.find("presence table") != std::string::npos);
    CHECK(analyst.attempts == 1);
    CHECK(analyst.latency_seconds == 0.0);
    CHECK(analyst.input_tokens == (long)((std::string("prompt").size() + 3) / 4));

    auto s1 = gw.complete(request_for(AgentRole::Scientist, 1, 1));
    auto s2 = gw.complete(request_for(AgentRole::Scientist, 1, 2));
    CHECK(s1.response_text != s2.response_text);
    CHECK(s1.response_text.find("Methylated naphthalene homologs") != std::string::npos);
}

TEST_CASE("scripted backend is a pure map: repeated calls are byte-identical") {
    auto backend = std::make_shared<ScriptedBackend>(demo_script());
    Gateway gw(backend, scripted_profile());
    for (AgentRole role : {AgentRole::DataAnalyst, AgentRole::Planner, AgentRole::Critic}) {
        auto a = gw.complete(request_for(role, 2)).response_text;
        auto b = gw.complete(request_for(role, 2)).response_text;
        CHECK(a == b);
    }
}

TEST_CASE("scripted entry precedence: specific beats wildcard") {
    auto script = nlohmann::json::parse(R"({"entries":[
        {"role":"Planner","text":"generic"},
        {"role":"Planner","iteration":2,"text":"special"},
        {"role":"Planner","iteration":2,"attempt":2,"text":"retry"}]})");
    auto backend = std::make_shared<ScriptedBackend>(script);
    Gateway gw(backend, scripted_profile());
    CHECK(gw.complete(request_for(AgentRole::Planner, 1)).response_text == "generic");
    CHECK(gw.complete(request_for(AgentRole::Planner, 2)).response_text == "special");
    auto retry = request_for(AgentRole::Planner, 2);
    retry.attempt = 2;
    CHECK(gw.complete(retry).response_text == "retry");
}

TEST_CASE("missing script entry is a config error") {
    auto script = nlohmann::json::parse(R"({"entries":[{"role":"Planner","text":"x"}]})");
    auto backend = std::make_shared<ScriptedBackend>(script);
    Gateway gw(backend, scripted_profile());
    CHECK_THROWS_AS(gw.complete(request_for(AgentRole::Critic, 1)), GatewayError);
}

TEST_CASE("cost follows the configured rates") {
    // (rate_in, rate_out) = (3e-6, 15e-6), usage (1000, 500) -> 0.0105.
    ChatExchange e;
    e.input_tokens = 1000;
    e.output_tokens = 500;
    e.cost = 1000 * 3e-6 + 500 * 15e-6;
    CHECK(e.cost == doctest::Approx(0.0105).epsilon(1e-12));

    struct FixedBackend : ChatBackend {
        BackendResult complete_once(const ChatRequest&) override {
            return {"ok", 1000, 500, 0.0};
        }
    };
    Gateway gw(std::make_shared<FixedBackend>(), scripted_profile());
    auto exchange = gw.complete(request_for(AgentRole::DataAnalyst, 1));
    CHECK(exchange.cost == doctest::Approx(0.0105).epsilon(1e-12));
}

TEST_CASE("transport failures retry with non-decreasing backoff, then succeed") {
    struct FlakyBackend : ChatBackend {
        int calls = 0;
        BackendResult complete_once(const ChatRequest&) override {
            if (++calls <= 2) throw RetryableError("HTTP 429 from provider");
            return {"recovered", 10, 10, 0.0};
        }
    };
    auto backend = std::make_shared<FlakyBackend>();
    std::vector<std::chrono::milliseconds> delays;
    Gateway gw(backend, scripted_profile(), RetryPolicy{5, std::chrono::milliseconds(1), 2.0},
               [&](std::chrono::milliseconds d) { delays.push_back(d); });
    auto exchange = gw.complete(request_for(AgentRole::DataAnalyst, 1));
    CHECK(exchange.attempts == 3);
    CHECK(exchange.response_text == "recovered");
    REQUIRE(delays.size() == 2);
    CHECK(delays[0] <= delays[1]);
}

TEST_CASE("retries exhaust after five attempts") {
    struct DeadBackend : ChatBackend {
        int calls = 0;
        BackendResult complete_once(const ChatRequest&) override {
            ++calls;
            throw RetryableError("connection refused");
        }
    };
    auto backend = std::make_shared<DeadBackend>();
    Gateway gw(backend, scripted_profile(), RetryPolicy{5, std::chrono::milliseconds(0), 2.0},
               [](std::chrono::milliseconds) {});
    try {
        gw.complete(request_for(AgentRole::DataAnalyst, 1));
        FAIL("expected GatewayError");
    } catch (const GatewayError& e) {
        CHECK(e.kind() == FailureKind::RetriesExhausted);
    }
    CHECK(backend->calls == 5);
}

TEST_CASE("http backend against a mock endpoint: 429 twice then 200") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
        int n = ++hits;
        auto body = nlohmann::json::parse(req.body);
        CHECK(body["system"] == "prompt");
        CHECK(body["model"] == "demo-model");
        if (n <= 2) {
            res.status = 429;
            return;
        }
        res.set_content(nlohmann::json{{"content", {{{"text", "hello from mock"}}}},
                                       {"usage", {{"input_tokens", 42}, {"output_tokens", 7}}}}
                            .dump(),
                        "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));

    ProviderProfile p;
    p.id = "mock";
    p.kind = "http";
    p.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
    p.model = "demo-model";
    p.rate_in = 3e-6;
    p.rate_out = 15e-6;
    p.request_fields = {{"/model", "$MODEL"},
                        {"/max_tokens", "$MAX_TOKENS"},
                        {"/temperature", "$TEMPERATURE"},
                        {"/system", "$SYSTEM_PROMPT"},
                        {"/messages/0/role", "user"},
                        {"/messages/0/content", "Proceed."}};
    p.response_text_path = "/content/0/text";
    p.response_input_tokens_path = "/usage/input_tokens";
    p.response_output_tokens_path = "/usage/output_tokens";

    Gateway gw(std::make_shared<HttpBackend>(p), p,
               RetryPolicy{5, std::chrono::milliseconds(1), 2.0},
               [](std::chrono::milliseconds) {});
    auto exchange = gw.complete(request_for(AgentRole::DataAnalyst, 1));
    CHECK(exchange.attempts == 3);
    CHECK(exchange.response_text == "hello from mock");
    CHECK(exchange.input_tokens == 42);
    CHECK(exchange.output_tokens == 7);
    CHECK(exchange.cost == doctest::Approx(42 * 3e-6 + 7 * 15e-6));

    server.stop();
    server_thread.join();
}

TEST_CASE("http auth failure is distinguishable and not retried") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 401;
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));

    ProviderProfile p;
    p.id = "mock";
    p.kind = "http";
    p.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
    p.response_text_path = "/content/0/text";
    Gateway gw(std::make_shared<HttpBackend>(p), p, RetryPolicy{5, std::chrono::milliseconds(1), 2.0},
               [](std::chrono::milliseconds) {});
    try {
        gw.complete(request_for(AgentRole::DataAnalyst, 1));
        FAIL("expected GatewayError");
    } catch (const GatewayError& e) {
        CHECK(e.kind() == FailureKind::AuthFailure);
    }
    CHECK(hits == 1);

    server.stop();
    server_thread.join();
}

TEST_CASE("provider content error is distinguishable") {
    httplib::Server server;
    server.Post("/v1/chat", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"oops\": true}", "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));

    ProviderProfile p;
    p.id = "mock";
    p.kind = "http";
    p.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
    p.response_text_path = "/content/0/text";
    Gateway gw(std::make_shared<HttpBackend>(p), p);
    try {
        gw.complete(request_for(AgentRole::DataAnalyst, 1));
        FAIL("expected GatewayError");
    } catch (const GatewayError& e) {
        CHECK(e.kind() == FailureKind::ContentError);
    }
    server.stop();
    server_thread.join();
}

TEST_CASE("ledger totals and breakdowns") {
    CHECK(ledger_total({}) == 0.0);

    CostLedger ledger;
    ChatExchange a, b;
    a.request.role = AgentRole::DataAnalyst;
    a.request.iteration = 1;
    a.cost = 0.01;
    b.request.role = AgentRole::Critic;
    b.request.iteration = 2;
    b.cost = 0.02;
    ledger.append(a);
    ledger.append(b);
    CHECK(ledger.total() == doctest::Approx(0.03));
    CHECK(ledger.by_role().at("DataAnalyst") == doctest::Approx(0.01));
    CHECK(ledger.by_iteration().at(2) == doctest::Approx(0.02));
}

TEST_CASE("ledger total is permutation invariant") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> cost(0.0, 0.01);
    std::vector<ChatExchange> exchanges(20);
    for (auto& e : exchanges) e.cost = cost(rng);
    double base = ledger_total(exchanges);
    for (int trial = 0; trial < 10; ++trial) {
        std::shuffle(exchanges.begin(), exchanges.end(), rng);
        CHECK(ledger_total(exchanges) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("exchange JSONL round-trips with full precision") {
    CostLedger ledger;
    ChatExchange e;
    e.request.role = AgentRole::Scientist;
    e.request.agent_index = 2;
    e.request.iteration = 4;
    e.request.system_prompt = "prompt with\nnewline";
    e.response_text = "text";
    e.input_tokens = 1234;
    e.output_tokens = 567;
    e.cost = 1234 * 3e-6 + 567 * 15e-6;
    ledger.append(e);
    auto parsed = CostLedger::parse_jsonl(ledger.to_jsonl());
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0].cost == e.cost);  // bit-exact through serialization
    CHECK(parsed[0].request.system_prompt == e.request.system_prompt);
    CHECK(parsed[0].input_tokens == 1234);
}

TEST_CASE("concurrent completes respect the in-flight cap") {
    struct SlowBackend : ChatBackend {
        std::atomic<int> active{0};
        std::atomic<int> peak{0};
        BackendResult complete_once(const ChatRequest&) override {
            int now = ++active;
            int expected = peak.load();
            while (now > expected && !peak.compare_exchange_weak(expected, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            --active;
            return {"ok", 1, 1, 0.0};
        }
    };
    auto backend = std::make_shared<SlowBackend>();
    ProviderProfile p = scripted_profile();
    p.max_in_flight = 2;
    Gateway gw(backend, p);
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i)
        threads.emplace_back([&] { gw.complete(request_for(AgentRole::Scientist, 1, 1)); });
    for (auto& t : threads) t.join();
    CHECK(backend->peak.load() <= 2);
}
