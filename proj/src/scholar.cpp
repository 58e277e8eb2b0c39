#include "hypogen/scholar.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <openssl/evp.h>

namespace hypogen::scholar {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string collapse_spaces(const std::string& s) {
    std::string out;
    bool prev_space = false;
    for (char c : s) {
        bool space = c == ' ' || c == '\t';
        if (space && prev_space) continue;
        out.push_back(space ? ' ' : c);
        prev_space = space;
    }
    return out;
}

std::string now_utc_iso8601() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string url_encode(const std::string& s) {
    std::ostringstream os;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            os << c;
        } else if (c == ' ') {
            os << '+';
        } else {
            os << '%' << std::uppercase << std::hex << std::setw(2) << std::setfill('0')
               << static_cast<int>(c) << std::nouppercase << std::dec;
        }
    }
    return os.str();
}

nlohmann::json snippet_to_json(const PaperSnippet& s) {
    nlohmann::json j{{"title", s.title}, {"abstract_excerpt", s.abstract_excerpt},
                     {"external_id", s.external_id}};
    if (s.year) j["year"] = *s.year;
    return j;
}

PaperSnippet snippet_from_json(const nlohmann::json& j) {
    PaperSnippet s;
    s.title = j.value("title", "");
    s.abstract_excerpt = j.value("abstract_excerpt", "");
    s.external_id = j.value("external_id", "");
    if (j.contains("year") && j["year"].is_number()) s.year = j["year"].get<int>();
    return s;
}

constexpr size_t kExcerptChars = 600;
constexpr size_t kQueryChars = 300;

}  // namespace

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i)
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return os.str();
}

std::string build_query(const agents::Hypothesis& hypothesis) {
    return build_query(hypothesis.statement);
}

std::string build_query(std::string_view statement) {
    std::string text(statement);

    // Drop parentheticals containing id tokens: "(IDs 12,13)", "(ID 4)",
    // "(ID 44, MW 180)".
    std::string out;
    for (size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '(') {
            size_t close = text.find(')', i);
            if (close != std::string::npos) {
                std::string inside = text.substr(i + 1, close - i - 1);
                std::string low = inside;
                std::transform(low.begin(), low.end(), low.begin(),
                               [](unsigned char c) { return std::tolower(c); });
                if (low.rfind("id ", 0) == 0 || low.rfind("ids ", 0) == 0 ||
                    low.rfind("id:", 0) == 0 || low.rfind("ids:", 0) == 0) {
                    i = close;
                    continue;
                }
            }
        }
        out.push_back(text[i]);
    }

    // Drop bare "ID <n>" / "IDs <n>, <n>" tokens.
    std::string cleaned;
    for (size_t i = 0; i < out.size();) {
        bool at_boundary = i == 0 || !(std::isalnum(static_cast<unsigned char>(out[i - 1])));
        if (at_boundary && (out.compare(i, 3, "IDs") == 0 || out.compare(i, 2, "ID") == 0)) {
            size_t j = i + (out.compare(i, 3, "IDs") == 0 ? 3 : 2);
            size_t k = j;
            bool saw_digit = false;
            while (k < out.size()) {
                char c = out[k];
                if (std::isdigit(static_cast<unsigned char>(c))) {
                    saw_digit = true;
                    ++k;
                } else if (c == ' ' || c == ',' ) {
                    ++k;
                } else {
                    break;
                }
            }
            if (saw_digit) {
                i = k;
                continue;
            }
        }
        cleaned.push_back(out[i]);
        ++i;
    }

    cleaned = trim(collapse_spaces(cleaned));
    if (cleaned.size() <= kQueryChars) return cleaned;
    size_t cut = cleaned.rfind(' ', kQueryChars);
    if (cut == std::string::npos || cut == 0) cut = kQueryChars;
    return trim(cleaned.substr(0, cut));
}

nlohmann::json ScholarOptions::to_json() const {
    return nlohmann::json{{"mode", mode},
                          {"endpoint", endpoint},
                          {"api_key_env", api_key_env},
                          {"snippet_limit", snippet_limit},
                          {"min_request_interval_ms", min_request_interval.count()},
                          {"cache_dir", cache_dir}};
}

ScholarOptions ScholarOptions::from_json(const nlohmann::json& j) {
    ScholarOptions o;
    o.mode = j.value("mode", "http");
    o.endpoint = j.value("endpoint", "https://api.semanticscholar.org");
    o.api_key_env = j.value("api_key_env", "S2_API_KEY");
    o.snippet_limit = j.value("snippet_limit", 5);
    o.min_request_interval = std::chrono::milliseconds(j.value("min_request_interval_ms", 1000L));
    o.cache_dir = j.value("cache_dir", "cache");
    return o;
}

ScholarClient::ScholarClient(ScholarOptions options) : options_(std::move(options)) {
    options_.snippet_limit = std::min(options_.snippet_limit, 5);
    if (options_.snippet_limit < 1) options_.snippet_limit = 1;
}

std::filesystem::path ScholarClient::cache_path(const std::string& query, int limit) const {
    std::string hash = sha256_hex(query + "\x1f" + std::to_string(limit));
    return std::filesystem::path(options_.cache_dir) / hash.substr(0, 2) / (hash + ".json");
}

SearchResult ScholarClient::search(const std::string& query, int limit) {
    limit = std::min(limit, options_.snippet_limit);
    if (limit < 1) limit = 1;

    auto path = cache_path(query, limit);
    if (std::filesystem::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        nlohmann::json j;
        in >> j;
        SearchResult result;
        result.query = j.value("query", query);
        result.fetched_at = j.value("fetched_at", "");
        for (const auto& js : j.value("snippets", nlohmann::json::array()))
            result.snippets.push_back(snippet_from_json(js));
        result.from_cache = true;
        return result;
    }

    if (options_.mode == "offline") {
        // No network in offline mode; a miss is an empty result.
        return SearchResult{query, {}, "", false};
    }

    SearchResult result = fetch(query, limit);

    nlohmann::json j{{"query", result.query},
                     {"limit", limit},
                     {"fetched_at", result.fetched_at},
                     {"snippets", nlohmann::json::array()}};
    for (const auto& s : result.snippets) j["snippets"].push_back(snippet_to_json(s));
    std::filesystem::create_directories(path.parent_path());
    static std::atomic<unsigned> tmp_counter{0};
    auto tmp = path;
    tmp += ".tmp" + std::to_string(tmp_counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary);
        out << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
    return result;
}

SearchResult ScholarClient::fetch(const std::string& query, int limit) {
    std::string url = "/graph/v1/paper/search?query=" + url_encode(query) +
                      "&limit=" + std::to_string(limit) + "&fields=title,abstract,year,externalIds";

    httplib::Headers headers;
    if (const char* key = std::getenv(options_.api_key_env.c_str()); key && *key)
        headers.emplace("x-api-key", key);

    std::string body;
    std::string last_error;
    const int max_attempts = 3;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        {
            // Rate limiter: serialize outbound requests, at most one per
            // configured interval.
            std::lock_guard<std::mutex> lock(rate_mutex_);
            auto now = std::chrono::steady_clock::now();
            if (last_request_.time_since_epoch().count() != 0) {
                auto next = last_request_ + options_.min_request_interval;
                if (now < next) std::this_thread::sleep_for(next - now);
            }
            last_request_ = std::chrono::steady_clock::now();
        }
        httplib::Client client(options_.endpoint);
        client.set_connection_timeout(15, 0);
        client.set_read_timeout(60, 0);
        httplib::Result res = client.Get(url, headers);
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw ScholarError("paper search returned HTTP " + std::to_string(res->status) + ": " +
                               res->body);
        body = res->body;
        break;
    }
    if (body.empty() && !last_error.empty())
        throw ScholarError("paper search failed after " + std::to_string(max_attempts) +
                           " attempts: " + last_error);

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw ScholarError(std::string("malformed paper-search response: ") + e.what());
    }

    SearchResult result;
    result.query = query;
    result.fetched_at = now_utc_iso8601();
    if (j.contains("data") && j["data"].is_array()) {
        for (const auto& paper : j["data"]) {
            if (static_cast<int>(result.snippets.size()) >= limit) break;
            PaperSnippet s;
            s.title = paper.value("title", "");
            if (s.title.empty()) continue;
            if (paper.contains("abstract") && paper["abstract"].is_string()) {
                std::string abs = paper["abstract"].get<std::string>();
                s.abstract_excerpt = abs.substr(0, kExcerptChars);
            }
            if (paper.contains("year") && paper["year"].is_number())
                s.year = paper["year"].get<int>();
            if (paper.contains("externalIds") && paper["externalIds"].is_object()) {
                const auto& ids = paper["externalIds"];
                for (const char* pref : {"DOI", "ArXiv", "CorpusId"}) {
                    if (ids.contains(pref)) {
                        s.external_id = ids[pref].is_string()
                                            ? ids[pref].get<std::string>()
                                            : ids[pref].dump();
                        break;
                    }
                }
            }
            if (s.external_id.empty() && paper.contains("paperId") && paper["paperId"].is_string())
                s.external_id = paper["paperId"].get<std::string>();
            result.snippets.push_back(std::move(s));
        }
    }
    return result;
}

}  // namespace hypogen::scholar
