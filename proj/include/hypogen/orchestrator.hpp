#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hypogen/agents.hpp"
#include "hypogen/config.hpp"
#include "hypogen/context.hpp"
#include "hypogen/gateway.hpp"
#include "hypogen/scholar.hpp"
#include "hypogen/specdata.hpp"

namespace hypogen::orchestrator {

class RunError : public std::runtime_error {
public:
    RunError(std::string stage, int iteration, const std::string& what)
        : std::runtime_error("iteration " + std::to_string(iteration) + " failed at stage " +
                             stage + ": " + what),
          stage_(std::move(stage)),
          iteration_(iteration) {}
    const std::string& stage() const { return stage_; }
    int iteration() const { return iteration_; }

private:
    std::string stage_;
    int iteration_;
};

class IntegrityError : public std::runtime_error {
public:
    explicit IntegrityError(const std::string& what) : std::runtime_error(what) {}
};

enum class RunStatus { Completed, Failed, InProgress };

std::string to_string(RunStatus s);
RunStatus run_status_from_string(std::string_view s);

/// Everything one pass of the loop produced.
struct IterationRecord {
    int index = 1;
    std::string analyst_text;
    agents::PlannerPlan plan;
    std::vector<std::vector<agents::Hypothesis>> scientist_outputs;
    std::vector<agents::Hypothesis> accumulated;  // H_final_* ids, sequential from one
    std::string literature_text;
    std::map<std::string, std::string> literature_digests;  // per-hypothesis sections
    agents::CriticReview critic;
    std::vector<gateway::ChatExchange> exchanges;
};

struct RunRecord {
    config::EngineConfig config;
    std::string run_id;
    std::filesystem::path run_dir;
    std::vector<IterationRecord> iterations;
    double total_cost = 0.0;
    RunStatus status = RunStatus::InProgress;
};

/// File layout inside one run directory.
struct RunPaths {
    std::filesystem::path root;

    std::filesystem::path config() const { return root / "config.json"; }
    std::filesystem::path manifest() const { return root / "manifest.json"; }
    std::filesystem::path hypotheses() const { return root / "hypotheses.jsonl"; }
    std::filesystem::path lock() const { return root / ".lock"; }
    std::filesystem::path iteration_dir(int i) const {
        return root / ("iteration_" + std::to_string(i));
    }
    std::filesystem::path analyst(int i) const { return iteration_dir(i) / "analyst.md"; }
    std::filesystem::path planner(int i) const { return iteration_dir(i) / "planner.json"; }
    std::filesystem::path scientist(int i, int k) const {
        return iteration_dir(i) / ("scientist_" + std::to_string(k) + ".json");
    }
    std::filesystem::path accumulated(int i) const { return iteration_dir(i) / "accumulated.json"; }
    std::filesystem::path literature(int i) const { return iteration_dir(i) / "literature.md"; }
    std::filesystem::path critic(int i) const { return iteration_dir(i) / "critic.md"; }
    std::filesystem::path exchanges(int i) const { return iteration_dir(i) / "exchanges.jsonl"; }
};

/// Drives the analyst -> planner -> scientists -> accumulator ->
/// literature -> critic loop, persisting every artifact before the next
/// stage starts and threading each critique into the next iteration.
class Orchestrator {
public:
    explicit Orchestrator(config::EngineConfig cfg, gateway::Sleeper sleeper = nullptr);

    /// Runs config.iterations iterations in a fresh run directory.
    RunRecord run(std::optional<std::string> run_id = std::nullopt);

    /// Continues a persisted run from its first missing iteration; a
    /// completed run is returned unchanged.
    static RunRecord resume(const std::filesystem::path& run_dir,
                            gateway::Sleeper sleeper = nullptr);

    /// Loads a persisted run without executing anything.
    static RunRecord load(const std::filesystem::path& run_dir);

    static std::vector<agents::Hypothesis> collect_hypotheses(const RunRecord& run);
    static std::vector<agents::Hypothesis> load_hypotheses(const std::filesystem::path& run_dir);

    const specdata::PresenceMatrix& matrix() const { return *matrix_; }

private:
    RunRecord execute(RunRecord state, int first_iteration, std::string prior_critique);
    IterationRecord run_iteration(const RunPaths& paths, int index,
                                  const std::string& prior_critique);
    gateway::ChatExchange complete_stage(const RunPaths& paths, int iteration,
                                         const std::string& stage, gateway::ChatRequest request);
    void write_manifest(const RunRecord& state, std::optional<std::string> failed_stage,
                        std::optional<int> failed_iteration) const;

    config::EngineConfig cfg_;
    std::unique_ptr<gateway::Gateway> gateway_;
    std::unique_ptr<scholar::ScholarClient> scholar_;
    std::map<agents::AgentRole, agents::PromptTemplate> templates_;
    context::ContextBundle context_;
    std::string input_data_;
    std::unique_ptr<specdata::PresenceMatrix> matrix_;
};

}  // namespace hypogen::orchestrator
