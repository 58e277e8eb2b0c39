#include "hypogen/config.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hypogen::config {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Parses one TOML scalar or flat array.
nlohmann::json parse_value(const std::string& raw, int line_no) {
    std::string v = trim(raw);
    if (v.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value");
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"')
            throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
        std::string out;
        for (size_t i = 1; i + 1 < v.size(); ++i) {
            char c = v[i];
            if (c == '\\' && i + 2 < v.size() + 1) {
                char n = v[++i];
                switch (n) {
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    case 'r': out.push_back('\r'); break;
                    case '"': out.push_back('"'); break;
                    case '\\': out.push_back('\\'); break;
                    default:
                        throw ConfigError("line " + std::to_string(line_no) +
                                          ": unsupported escape \\" + std::string(1, n));
                }
            } else {
                out.push_back(c);
            }
        }
        return out;
    }
    if (v.front() == '[') {
        if (v.back() != ']')
            throw ConfigError("line " + std::to_string(line_no) + ": unterminated array");
        nlohmann::json arr = nlohmann::json::array();
        std::string inner = v.substr(1, v.size() - 2);
        std::string item;
        bool in_string = false;
        for (size_t i = 0; i <= inner.size(); ++i) {
            char c = i < inner.size() ? inner[i] : ',';
            if (in_string) {
                item.push_back(c);
                if (c == '\\' && i + 1 < inner.size()) item.push_back(inner[++i]);
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') {
                in_string = true;
                item.push_back(c);
            } else if (c == ',') {
                if (!trim(item).empty()) arr.push_back(parse_value(item, line_no));
                item.clear();
            } else {
                item.push_back(c);
            }
        }
        return arr;
    }
    if (v == "true") return true;
    if (v == "false") return false;
    try {
        if (v.find('.') != std::string::npos || v.find('e') != std::string::npos ||
            v.find('E') != std::string::npos) {
            size_t used = 0;
            double d = std::stod(v, &used);
            if (used == v.size()) return d;
        } else {
            size_t used = 0;
            long l = std::stol(v, &used);
            if (used == v.size()) return l;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("line " + std::to_string(line_no) + ": cannot parse value '" + v + "'");
}

// Strips a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            in_string = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

}  // namespace

std::map<std::string, nlohmann::json> parse_toml(const std::string& text) {
    std::map<std::string, nlohmann::json> sections;
    sections[""] = nlohmann::json::object();
    std::string current;
    std::istringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            current = trim(line.substr(1, line.size() - 2));
            if (current.empty())
                throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
            if (!sections.count(current)) sections[current] = nlohmann::json::object();
            continue;
        }
        size_t eq = std::string::npos;
        {
            bool in_string = false;
            for (size_t i = 0; i < line.size(); ++i) {
                char c = line[i];
                if (in_string) {
                    if (c == '\\') ++i;
                    else if (c == '"') in_string = false;
                } else if (c == '"') {
                    in_string = true;
                } else if (c == '=') {
                    eq = i;
                    break;
                }
            }
        }
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        if (key.size() >= 2 && key.front() == '"' && key.back() == '"')
            key = key.substr(1, key.size() - 2);
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        sections[current][key] = parse_value(line.substr(eq + 1), line_no);
    }
    return sections;
}

std::map<std::string, nlohmann::json> parse_toml_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str());
}

nlohmann::json RunConfig::to_json() const {
    return nlohmann::json{{"iterations", iterations},
                          {"scientist_count", scientist_count},
                          {"snippet_limit", snippet_limit},
                          {"provider_id", provider_id},
                          {"context_paths", context_paths},
                          {"context_budget_tokens", context_budget_tokens},
                          {"data_path", data_path},
                          {"user_instructions", user_instructions},
                          {"output_dir", output_dir},
                          {"random_seed", random_seed},
                          {"prompts_dir", prompts_dir}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    c.iterations = j.value("iterations", 10);
    c.scientist_count = j.value("scientist_count", 3);
    c.snippet_limit = j.value("snippet_limit", 5);
    c.provider_id = j.value("provider_id", "");
    c.context_paths = j.value("context_paths", std::vector<std::string>{});
    c.context_budget_tokens = j.value("context_budget_tokens", 200000L);
    c.data_path = j.value("data_path", "");
    c.user_instructions = j.value("user_instructions", "");
    c.output_dir = j.value("output_dir", "runs");
    c.random_seed = j.value("random_seed", 0L);
    c.prompts_dir = j.value("prompts_dir", "");
    return c;
}

nlohmann::json EngineConfig::to_json() const {
    return nlohmann::json{{"run", run.to_json()},
                          {"provider", provider.to_json()},
                          {"scholar", scholar.to_json()}};
}

EngineConfig EngineConfig::from_json(const nlohmann::json& j) {
    EngineConfig c;
    c.run = RunConfig::from_json(j.at("run"));
    c.provider = gateway::ProviderProfile::from_json(j.at("provider"));
    c.scholar = scholar::ScholarOptions::from_json(j.at("scholar"));
    return c;
}

namespace {

template <typename T>
T get_or(const nlohmann::json& section, const std::string& key, T fallback) {
    if (!section.contains(key)) return fallback;
    try {
        return section[key].get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return p;
    std::filesystem::path path(p);
    if (path.is_absolute()) return path.string();
    return (base / path).lexically_normal().string();
}

}  // namespace

EngineConfig EngineConfig::load(const std::string& path) {
    auto sections = parse_toml_file(path);
    std::filesystem::path base = std::filesystem::absolute(path).parent_path();

    EngineConfig cfg;
    const auto& run = sections.count("run") ? sections["run"] : nlohmann::json::object();
    cfg.run.iterations = static_cast<int>(get_or<long>(run, "iterations", 10));
    cfg.run.scientist_count = static_cast<int>(get_or<long>(run, "scientists", 3));
    cfg.run.snippet_limit = static_cast<int>(get_or<long>(run, "snippet_limit", 5));
    cfg.run.user_instructions = get_or<std::string>(run, "user_instructions", "");
    cfg.run.output_dir = resolve_path(base, get_or<std::string>(run, "out_dir", "runs"));
    cfg.run.random_seed = get_or<long>(run, "seed", 0L);
    cfg.run.prompts_dir = get_or<std::string>(run, "prompts_dir", "");
    if (!cfg.run.prompts_dir.empty()) cfg.run.prompts_dir = resolve_path(base, cfg.run.prompts_dir);
    cfg.run.provider_id = get_or<std::string>(run, "provider", "");

    const auto& data = sections.count("data") ? sections["data"] : nlohmann::json::object();
    cfg.run.data_path = resolve_path(base, get_or<std::string>(data, "table", ""));

    const auto& ctx = sections.count("context") ? sections["context"] : nlohmann::json::object();
    for (const auto& p : get_or<std::vector<std::string>>(ctx, "paths", {}))
        cfg.run.context_paths.push_back(resolve_path(base, p));
    cfg.run.context_budget_tokens = get_or<long>(ctx, "budget_tokens", 200000L);

    const auto& prov = sections.count("provider") ? sections["provider"] : nlohmann::json::object();
    cfg.provider.id = get_or<std::string>(prov, "id", "default");
    cfg.provider.kind = get_or<std::string>(prov, "kind", "scripted");
    cfg.provider.endpoint = get_or<std::string>(prov, "endpoint", "");
    cfg.provider.auth_header = get_or<std::string>(prov, "auth_header", "");
    cfg.provider.auth_prefix = get_or<std::string>(prov, "auth_prefix", "");
    cfg.provider.auth_env = get_or<std::string>(prov, "auth_env", "LLM_API_KEY");
    cfg.provider.model = get_or<std::string>(prov, "model", "");
    cfg.provider.rate_in = get_or<double>(prov, "rate_in", 0.0);
    cfg.provider.rate_out = get_or<double>(prov, "rate_out", 0.0);
    cfg.provider.max_in_flight = static_cast<int>(get_or<long>(prov, "max_in_flight", 4L));
    cfg.provider.script_path = get_or<std::string>(prov, "script", "");
    if (!cfg.provider.script_path.empty())
        cfg.provider.script_path = resolve_path(base, cfg.provider.script_path);
    cfg.provider.response_text_path = get_or<std::string>(prov, "response_text_path", "");
    cfg.provider.response_input_tokens_path =
        get_or<std::string>(prov, "response_input_tokens_path", "");
    cfg.provider.response_output_tokens_path =
        get_or<std::string>(prov, "response_output_tokens_path", "");
    if (sections.count("provider.request")) {
        for (const auto& [k, v] : sections["provider.request"].items()) {
            if (!v.is_string())
                throw ConfigError("provider.request values must be strings (key '" + k + "')");
            cfg.provider.request_fields[k] = v.get<std::string>();
        }
    }
    if (cfg.run.provider_id.empty()) cfg.run.provider_id = cfg.provider.id;

    const auto& sch = sections.count("scholar") ? sections["scholar"] : nlohmann::json::object();
    cfg.scholar.mode = get_or<std::string>(sch, "mode", "http");
    cfg.scholar.endpoint = get_or<std::string>(sch, "endpoint", "https://api.semanticscholar.org");
    cfg.scholar.api_key_env = get_or<std::string>(sch, "api_key_env", "S2_API_KEY");
    cfg.scholar.snippet_limit = static_cast<int>(get_or<long>(sch, "snippet_limit", 5L));
    cfg.scholar.min_request_interval =
        std::chrono::milliseconds(get_or<long>(sch, "min_interval_ms", 1000L));
    cfg.scholar.cache_dir = resolve_path(base, get_or<std::string>(sch, "cache_dir", "cache"));

    return cfg;
}

void EngineConfig::validate() const {
    if (run.iterations < 1) throw ConfigError("iterations must be positive");
    if (run.scientist_count < 1) throw ConfigError("scientist count must be positive");
    if (run.snippet_limit < 1 || run.snippet_limit > 5)
        throw ConfigError("snippet_limit must be in 1..5");
    if (run.data_path.empty()) throw ConfigError("no data table configured ([data] table = ...)");
    if (!std::filesystem::exists(run.data_path))
        throw ConfigError("data table not found: " + run.data_path);
    for (const auto& p : run.context_paths)
        if (!std::filesystem::exists(p)) throw ConfigError("context document not found: " + p);
    std::string prompts = run.prompts_dir.empty() ? default_prompts_dir() : run.prompts_dir;
    if (!std::filesystem::exists(prompts))
        throw ConfigError("prompts directory not found: " + prompts);
    if (provider.kind == "scripted" && !std::filesystem::exists(provider.script_path))
        throw ConfigError("script file not found: " + provider.script_path);
}

std::string default_prompts_dir() {
#ifdef HYPOGEN_SHARE_DIR
    return std::string(HYPOGEN_SHARE_DIR) + "/prompts";
#else
    return "share/prompts";
#endif
}

}  // namespace hypogen::config
