#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "hypogen/gateway.hpp"

namespace hypogen::gateway {

namespace {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    size_t scheme = url.find("://");
    if (scheme == std::string::npos)
        throw GatewayError(FailureKind::Config, "endpoint URL missing scheme: " + url);
    size_t path = url.find('/', scheme + 3);
    if (path == std::string::npos) return {url, "/"};
    return {url.substr(0, path), url.substr(path)};
}

std::string substitute_value(const std::string& tmpl, const ChatRequest& request,
                             const ProviderProfile& profile, nlohmann::json& out) {
    if (tmpl == "$SYSTEM_PROMPT") {
        out = request.system_prompt;
    } else if (tmpl == "$MODEL") {
        out = profile.model;
    } else if (tmpl == "$MAX_TOKENS") {
        out = request.max_output_tokens;
    } else if (tmpl == "$TEMPERATURE") {
        out = request.temperature;
    } else {
        out = tmpl;
    }
    return tmpl;
}

std::optional<nlohmann::json> at_pointer(const nlohmann::json& j, const std::string& pointer) {
    if (pointer.empty()) return std::nullopt;
    try {
        return j.at(nlohmann::json::json_pointer(pointer));
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

long estimate_tokens(std::string_view text) {
    return static_cast<long>((text.size() + 3) / 4);
}

}  // namespace

HttpBackend::HttpBackend(ProviderProfile profile) : profile_(std::move(profile)) {
    if (profile_.endpoint.empty())
        throw GatewayError(FailureKind::Config, "http provider needs an endpoint");
    if (profile_.response_text_path.empty())
        throw GatewayError(FailureKind::Config, "http provider needs response_text_path");
}

BackendResult HttpBackend::complete_once(const ChatRequest& request) {
    nlohmann::json body = nlohmann::json::object();
    for (const auto& [pointer, tmpl] : profile_.request_fields) {
        nlohmann::json value;
        substitute_value(tmpl, request, profile_, value);
        body[nlohmann::json::json_pointer(pointer)] = value;
    }

    auto [base, path] = split_url(profile_.endpoint);
    httplib::Client client(base);
    client.set_connection_timeout(30, 0);
    client.set_read_timeout(120, 0);

    httplib::Headers headers;
    if (!profile_.auth_header.empty()) {
        const char* key = std::getenv(profile_.auth_env.c_str());
        if (!key || !*key)
            throw GatewayError(FailureKind::AuthFailure,
                               "credential environment variable " + profile_.auth_env + " not set");
        headers.emplace(profile_.auth_header, profile_.auth_prefix + key);
    }

    auto start = std::chrono::steady_clock::now();
    httplib::Result res = client.Post(path, headers, body.dump(), "application/json");
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!res) throw RetryableError("transport failure: " + httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403)
        throw GatewayError(FailureKind::AuthFailure,
                           "authentication rejected (HTTP " + std::to_string(res->status) + ")");
    if (res->status == 429 || res->status >= 500)
        throw RetryableError("HTTP " + std::to_string(res->status) + " from provider");
    if (res->status != 200)
        throw GatewayError(FailureKind::ContentError,
                           "HTTP " + std::to_string(res->status) + ": " + res->body);

    nlohmann::json response;
    try {
        response = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw GatewayError(FailureKind::ContentError,
                           std::string("unparseable provider response: ") + e.what());
    }

    auto text = at_pointer(response, profile_.response_text_path);
    if (!text || !text->is_string())
        throw GatewayError(FailureKind::ContentError,
                           "provider response has no text at " + profile_.response_text_path);

    BackendResult result;
    result.text = text->get<std::string>();
    result.latency_seconds = elapsed;
    auto in_tok = at_pointer(response, profile_.response_input_tokens_path);
    auto out_tok = at_pointer(response, profile_.response_output_tokens_path);
    result.input_tokens = in_tok && in_tok->is_number() ? in_tok->get<long>()
                                                        : estimate_tokens(request.system_prompt);
    result.output_tokens =
        out_tok && out_tok->is_number() ? out_tok->get<long>() : estimate_tokens(result.text);
    return result;
}

}  // namespace hypogen::gateway
