#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypogen/agents.hpp"

namespace hypogen::scholar {

class ScholarError : public std::runtime_error {
public:
    explicit ScholarError(const std::string& what) : std::runtime_error(what) {}
};

struct PaperSnippet {
    std::string title;
    std::string abstract_excerpt;  // first 600 characters of the abstract
    std::optional<int> year;
    std::string external_id;

    bool operator==(const PaperSnippet&) const = default;
};

struct SearchResult {
    std::string query;
    std::vector<PaperSnippet> snippets;
    std::string fetched_at;  // ISO-8601 UTC; empty for offline misses
    bool from_cache = false;
};

/// Search query from a hypothesis statement: id tokens and id
/// parentheticals stripped, truncated to 300 characters at a word
/// boundary.
std::string build_query(const agents::Hypothesis& hypothesis);
std::string build_query(std::string_view statement);

struct ScholarOptions {
    std::string mode = "http";  // "http" or "offline" (cache only)
    std::string endpoint = "https://api.semanticscholar.org";
    std::string api_key_env = "S2_API_KEY";
    int snippet_limit = 5;  // hard-capped at 5
    std::chrono::milliseconds min_request_interval{1000};
    std::string cache_dir = "cache";

    nlohmann::json to_json() const;
    static ScholarOptions from_json(const nlohmann::json& j);
};

/// Paper-search client with an on-disk cache keyed by SHA-256 of
/// (query, limit) and a rate limiter serializing outbound requests.
class ScholarClient {
public:
    explicit ScholarClient(ScholarOptions options);

    /// limit is clamped to 5; transport failures retry (3 attempts) before
    /// surfacing. Offline mode serves only cache hits, returning an empty
    /// result on a miss.
    SearchResult search(const std::string& query, int limit);

private:
    SearchResult fetch(const std::string& query, int limit);
    std::filesystem::path cache_path(const std::string& query, int limit) const;

    ScholarOptions options_;
    std::mutex rate_mutex_;
    std::chrono::steady_clock::time_point last_request_{};
};

std::string sha256_hex(std::string_view data);

}  // namespace hypogen::scholar
