#include "hypogen/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace hypogen::gateway {

namespace {

long estimate_tokens(std::string_view text) {
    return static_cast<long>((text.size() + 3) / 4);
}

}  // namespace

nlohmann::json ChatExchange::to_json() const {
    return nlohmann::json{{"role", agents::to_string(request.role)},
                          {"agent_index", request.agent_index},
                          {"iteration", request.iteration},
                          {"attempt", request.attempt},
                          {"provider_id", request.provider_id},
                          {"temperature", request.temperature},
                          {"max_output_tokens", request.max_output_tokens},
                          {"system_prompt", request.system_prompt},
                          {"response_text", response_text},
                          {"input_tokens", input_tokens},
                          {"output_tokens", output_tokens},
                          {"cost", cost},
                          {"latency_seconds", latency_seconds},
                          {"attempts", attempts}};
}

ChatExchange ChatExchange::from_json(const nlohmann::json& j) {
    ChatExchange e;
    e.request.role = agents::role_from_string(j.at("role").get<std::string>());
    e.request.agent_index = j.value("agent_index", 0);
    e.request.iteration = j.value("iteration", 1);
    e.request.attempt = j.value("attempt", 1);
    e.request.provider_id = j.value("provider_id", "");
    e.request.temperature = j.value("temperature", 0.7);
    e.request.max_output_tokens = j.value("max_output_tokens", 4096);
    e.request.system_prompt = j.value("system_prompt", "");
    e.response_text = j.value("response_text", "");
    e.input_tokens = j.value("input_tokens", 0L);
    e.output_tokens = j.value("output_tokens", 0L);
    e.cost = j.value("cost", 0.0);
    e.latency_seconds = j.value("latency_seconds", 0.0);
    e.attempts = j.value("attempts", 1);
    return e;
}

nlohmann::json ProviderProfile::to_json() const {
    nlohmann::json j{{"id", id},
                     {"kind", kind},
                     {"endpoint", endpoint},
                     {"auth_header", auth_header},
                     {"auth_prefix", auth_prefix},
                     {"auth_env", auth_env},
                     {"model", model},
                     {"rate_in", rate_in},
                     {"rate_out", rate_out},
                     {"max_in_flight", max_in_flight},
                     {"script_path", script_path},
                     {"request_fields", request_fields},
                     {"response_text_path", response_text_path},
                     {"response_input_tokens_path", response_input_tokens_path},
                     {"response_output_tokens_path", response_output_tokens_path}};
    return j;
}

ProviderProfile ProviderProfile::from_json(const nlohmann::json& j) {
    ProviderProfile p;
    p.id = j.value("id", "");
    p.kind = j.value("kind", "scripted");
    p.endpoint = j.value("endpoint", "");
    p.auth_header = j.value("auth_header", "");
    p.auth_prefix = j.value("auth_prefix", "");
    p.auth_env = j.value("auth_env", "LLM_API_KEY");
    p.model = j.value("model", "");
    p.rate_in = j.value("rate_in", 0.0);
    p.rate_out = j.value("rate_out", 0.0);
    p.max_in_flight = j.value("max_in_flight", 4);
    p.script_path = j.value("script_path", "");
    p.request_fields = j.value("request_fields", std::map<std::string, std::string>{});
    p.response_text_path = j.value("response_text_path", "");
    p.response_input_tokens_path = j.value("response_input_tokens_path", "");
    p.response_output_tokens_path = j.value("response_output_tokens_path", "");
    return p;
}

// ---------------------------------------------------------------------------
// ScriptedBackend

ScriptedBackend::ScriptedBackend(const nlohmann::json& script) {
    if (!script.is_object() || !script.contains("entries") || !script["entries"].is_array())
        throw GatewayError(FailureKind::Config, "script must be {\"entries\": [...]}");
    for (const auto& je : script["entries"]) {
        Entry e;
        e.role = agents::role_from_string(je.at("role").get<std::string>());
        if (je.contains("iteration")) e.iteration = je["iteration"].get<int>();
        if (je.contains("occurrence")) e.occurrence = je["occurrence"].get<int>();
        if (je.contains("attempt")) e.attempt = je["attempt"].get<int>();
        e.text = je.at("text").get<std::string>();
        entries_.push_back(std::move(e));
    }
}

ScriptedBackend ScriptedBackend::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw GatewayError(FailureKind::Config, "cannot open script file " + path);
    nlohmann::json j;
    in >> j;
    return ScriptedBackend(j);
}

BackendResult ScriptedBackend::complete_once(const ChatRequest& request) {
    int occurrence = request.agent_index > 0 ? request.agent_index : 1;
    const Entry* best = nullptr;
    int best_score = -1;
    for (const auto& e : entries_) {
        if (e.role != request.role) continue;
        if (e.iteration && *e.iteration != request.iteration) continue;
        if (e.occurrence && *e.occurrence != occurrence) continue;
        if (e.attempt && *e.attempt != request.attempt) continue;
        int score = (e.iteration ? 4 : 0) + (e.occurrence ? 2 : 0) + (e.attempt ? 1 : 0);
        if (score > best_score) {
            best = &e;
            best_score = score;
        }
    }
    if (!best)
        throw GatewayError(FailureKind::Config,
                           "script has no entry for role " + agents::to_string(request.role) +
                               " iteration " + std::to_string(request.iteration) + " occurrence " +
                               std::to_string(occurrence));
    BackendResult result;
    result.text = best->text;
    result.input_tokens = estimate_tokens(request.system_prompt);
    result.output_tokens = estimate_tokens(result.text);
    result.latency_seconds = 0.0;
    return result;
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, ProviderProfile profile, RetryPolicy policy,
                 Sleeper sleeper)
    : backend_(std::move(backend)),
      profile_(std::move(profile)),
      policy_(policy),
      sleeper_(std::move(sleeper)) {
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ChatExchange Gateway::complete(const ChatRequest& request) {
    if (request.system_prompt.empty())
        throw GatewayError(FailureKind::Config, "chat request has empty system prompt");

    {
        std::unique_lock<std::mutex> lock(slots_mutex_);
        slots_cv_.wait(lock, [&] { return in_flight_ < profile_.max_in_flight; });
        ++in_flight_;
    }
    struct SlotGuard {
        Gateway* g;
        ~SlotGuard() {
            {
                std::lock_guard<std::mutex> lock(g->slots_mutex_);
                --g->in_flight_;
            }
            g->slots_cv_.notify_one();
        }
    } guard{this};

    std::chrono::milliseconds delay = policy_.base_delay;
    std::string last_error;
    for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
        try {
            BackendResult r = backend_->complete_once(request);
            ChatExchange exchange;
            exchange.request = request;
            exchange.response_text = r.text;
            exchange.input_tokens = r.input_tokens;
            exchange.output_tokens = r.output_tokens;
            exchange.latency_seconds = r.latency_seconds;
            exchange.attempts = attempt;
            exchange.cost = static_cast<double>(r.input_tokens) * profile_.rate_in +
                            static_cast<double>(r.output_tokens) * profile_.rate_out;
            return exchange;
        } catch (const RetryableError& e) {
            last_error = e.what();
            if (attempt == policy_.max_attempts) break;
            sleeper_(delay);
            delay = std::chrono::milliseconds(
                static_cast<long>(static_cast<double>(delay.count()) * policy_.factor));
        }
    }
    throw GatewayError(FailureKind::RetriesExhausted,
                       "provider " + profile_.id + " failed after " +
                           std::to_string(policy_.max_attempts) + " attempts: " + last_error);
}

// ---------------------------------------------------------------------------
// CostLedger

void CostLedger::append(ChatExchange exchange) {
    std::lock_guard<std::mutex> lock(mutex_);
    records_.push_back(std::move(exchange));
}

std::vector<ChatExchange> CostLedger::records() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return records_;
}

double CostLedger::total() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return ledger_total(records_);
}

std::map<std::string, double> CostLedger::by_role() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::map<std::string, double> out;
    for (const auto& e : records_) out[agents::to_string(e.request.role)] += e.cost;
    return out;
}

std::map<int, double> CostLedger::by_iteration() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::map<int, double> out;
    for (const auto& e : records_) out[e.request.iteration] += e.cost;
    return out;
}

std::string CostLedger::to_jsonl() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::string out;
    for (const auto& e : records_) {
        out += e.to_json().dump();
        out += '\n';
    }
    return out;
}

std::vector<ChatExchange> CostLedger::parse_jsonl(std::string_view text) {
    std::vector<ChatExchange> out;
    std::istringstream ss{std::string(text)};
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        out.push_back(ChatExchange::from_json(nlohmann::json::parse(line)));
    }
    return out;
}

double ledger_total(const std::vector<ChatExchange>& exchanges) {
    double total = 0.0;
    for (const auto& e : exchanges) total += e.cost;
    return total;
}

Gateway make_gateway(const ProviderProfile& profile, RetryPolicy policy, Sleeper sleeper) {
    std::shared_ptr<ChatBackend> backend;
    if (profile.kind == "scripted") {
        if (profile.script_path.empty())
            throw GatewayError(FailureKind::Config, "scripted provider needs script_path");
        backend = std::make_shared<ScriptedBackend>(ScriptedBackend::from_file(profile.script_path));
    } else if (profile.kind == "http") {
        backend = std::make_shared<HttpBackend>(profile);
    } else {
        throw GatewayError(FailureKind::Config, "unknown provider kind '" + profile.kind + "'");
    }
    return Gateway(std::move(backend), profile, policy, std::move(sleeper));
}

}  // namespace hypogen::gateway
