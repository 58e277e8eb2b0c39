#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypogen/agents.hpp"

namespace hypogen::gateway {

enum class FailureKind { RetriesExhausted, AuthFailure, ContentError, Config };

class GatewayError : public std::runtime_error {
public:
    GatewayError(FailureKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    FailureKind kind() const { return kind_; }

private:
    FailureKind kind_;
};

/// Transient transport or rate-limit failure; the gateway retries these.
class RetryableError : public std::runtime_error {
public:
    explicit RetryableError(const std::string& what) : std::runtime_error(what) {}
};

struct ChatRequest {
    agents::AgentRole role = agents::AgentRole::DataAnalyst;
    int agent_index = 0;  // scientist index; 0 for singleton roles
    std::string system_prompt;
    std::string provider_id;
    int max_output_tokens = 4096;
    double temperature = 0.7;
    int iteration = 1;
    int attempt = 1;  // stage-level re-prompt counter (1-based)
};

struct ChatExchange {
    ChatRequest request;
    std::string response_text;
    long input_tokens = 0;
    long output_tokens = 0;
    double cost = 0.0;  // USD
    double latency_seconds = 0.0;
    int attempts = 1;  // transport attempts inside the gateway

    nlohmann::json to_json() const;
    static ChatExchange from_json(const nlohmann::json& j);
};

/// Declarative provider profile: one chat-shaped HTTPS JSON endpoint,
/// described by request field assignments and response extraction paths.
struct ProviderProfile {
    std::string id;
    std::string kind = "scripted";  // "scripted" or "http"
    std::string endpoint;           // e.g. https://api.example.com/v1/messages
    std::string auth_header;        // e.g. "x-api-key" or "Authorization"
    std::string auth_prefix;        // e.g. "Bearer "
    std::string auth_env = "LLM_API_KEY";
    std::string model;
    double rate_in = 0.0;   // USD per input token
    double rate_out = 0.0;  // USD per output token
    int max_in_flight = 4;
    std::string script_path;  // scripted backend response map
    // JSON-pointer -> value template. "$SYSTEM_PROMPT", "$MODEL",
    // "$MAX_TOKENS", "$TEMPERATURE" are substituted; other strings are
    // taken literally.
    std::map<std::string, std::string> request_fields;
    std::string response_text_path;           // JSON pointer, e.g. /content/0/text
    std::string response_input_tokens_path;   // optional
    std::string response_output_tokens_path;  // optional

    nlohmann::json to_json() const;
    static ProviderProfile from_json(const nlohmann::json& j);
};

struct BackendResult {
    std::string text;
    long input_tokens = 0;
    long output_tokens = 0;
    double latency_seconds = 0.0;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// One attempt. Throws RetryableError for transient failures and
    /// GatewayError for definitive ones.
    virtual BackendResult complete_once(const ChatRequest& request) = 0;
};

/// Deterministic test double: a pure map (role, iteration, occurrence,
/// attempt) -> text loaded from a JSON script. Entries may omit iteration,
/// occurrence or attempt to act as wildcards; the most specific match wins.
class ScriptedBackend : public ChatBackend {
public:
    explicit ScriptedBackend(const nlohmann::json& script);
    static ScriptedBackend from_file(const std::string& path);

    BackendResult complete_once(const ChatRequest& request) override;

private:
    struct Entry {
        agents::AgentRole role;
        std::optional<int> iteration;
        std::optional<int> occurrence;
        std::optional<int> attempt;
        std::string text;
    };
    std::vector<Entry> entries_;
};

/// HTTP(S) chat backend driven entirely by the provider profile.
class HttpBackend : public ChatBackend {
public:
    explicit HttpBackend(ProviderProfile profile);
    BackendResult complete_once(const ChatRequest& request) override;

private:
    ProviderProfile profile_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;
};

/// Wraps a backend with retry/backoff, a per-provider concurrency cap and
/// cost accounting.
class Gateway {
public:
    Gateway(std::shared_ptr<ChatBackend> backend, ProviderProfile profile,
            RetryPolicy policy = {}, Sleeper sleeper = nullptr);

    ChatExchange complete(const ChatRequest& request);

    const ProviderProfile& profile() const { return profile_; }

private:
    std::shared_ptr<ChatBackend> backend_;
    ProviderProfile profile_;
    RetryPolicy policy_;
    Sleeper sleeper_;
    std::mutex slots_mutex_;
    std::condition_variable slots_cv_;
    int in_flight_ = 0;
};

/// Thread-safe exchange log with a total order on appended records.
class CostLedger {
public:
    void append(ChatExchange exchange);
    std::vector<ChatExchange> records() const;
    double total() const;
    std::map<std::string, double> by_role() const;
    std::map<int, double> by_iteration() const;

    std::string to_jsonl() const;
    static std::vector<ChatExchange> parse_jsonl(std::string_view text);

private:
    mutable std::mutex mutex_;
    std::vector<ChatExchange> records_;
};

double ledger_total(const std::vector<ChatExchange>& exchanges);

/// Builds a gateway for the profile: scripted profiles get the scripted
/// backend, http profiles the HTTP one.
Gateway make_gateway(const ProviderProfile& profile, RetryPolicy policy = {},
                     Sleeper sleeper = nullptr);

}  // namespace hypogen::gateway
