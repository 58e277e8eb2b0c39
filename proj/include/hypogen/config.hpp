#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypogen/gateway.hpp"
#include "hypogen/scholar.hpp"

namespace hypogen::config {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Minimal TOML subset: [section] and [dotted.section] headers, bare or
/// quoted keys, string/integer/float/boolean values and flat arrays,
/// '#' comments. Returns one JSON object per section keyed by the dotted
/// section path ("" for top-level keys).
std::map<std::string, nlohmann::json> parse_toml(const std::string& text);
std::map<std::string, nlohmann::json> parse_toml_file(const std::string& path);

struct RunConfig {
    int iterations = 10;
    int scientist_count = 3;
    int snippet_limit = 5;
    std::string provider_id;
    std::vector<std::string> context_paths;
    long context_budget_tokens = 200000;
    std::string data_path;
    std::string user_instructions;
    std::string output_dir = "runs";
    long random_seed = 0;  // used by the scripted backend only
    std::string prompts_dir;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
};

/// Everything a run needs, persisted verbatim as config.json inside the
/// run directory so resume can rebuild the engine.
struct EngineConfig {
    RunConfig run;
    gateway::ProviderProfile provider;
    scholar::ScholarOptions scholar;

    nlohmann::json to_json() const;
    static EngineConfig from_json(const nlohmann::json& j);

    /// Loads a TOML run configuration. Relative paths in the file are
    /// resolved against the file's directory.
    static EngineConfig load(const std::string& path);

    void validate() const;  // paths resolvable, counts positive
};

/// Compile-time default for the shipped prompt templates; used when the
/// configuration does not name a prompts directory.
std::string default_prompts_dir();

}  // namespace hypogen::config
