#include "hypogen/orchestrator.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <future>
#include <iomanip>
#include <random>
#include <sstream>

namespace hypogen::orchestrator {

namespace {

constexpr double kGenerativeTemperature = 0.7;
constexpr double kStructuredTemperature = 0.2;  // planner and accumulator
constexpr int kMaxOutputTokens = 4096;
constexpr int kStageAttempts = 3;  // one call plus two re-prompts
const char* kJsonReminder = "\n\nrespond ONLY with valid JSON";

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IntegrityError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw IntegrityError("cannot write " + path.string());
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

void atomic_write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    auto tmp = path;
    tmp += ".tmp";
    write_text_file(tmp, j.dump(2) + "\n");
    std::filesystem::rename(tmp, path);
}

void append_file(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << content;
    if (!out) throw IntegrityError("cannot append to " + path.string());
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

std::string timestamp_run_id() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
    std::random_device rd;
    std::uniform_int_distribution<int> dist(0, 0xffff);
    os << "-" << std::hex << std::setw(4) << std::setfill('0') << dist(rd);
    return os.str();
}

/// Single-writer guard: an exclusively created lock file in the run dir.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& path) : path_(path) {
        int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0)
            throw IntegrityError("run directory is locked by another writer (remove " +
                                 path.string() + " if stale)");
        ::close(fd);
    }
    ~RunLock() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path path_;
};

nlohmann::json hypothesis_line(const agents::Hypothesis& h) {
    return nlohmann::json{{"iteration", h.iteration},
                          {"id", h.id},
                          {"statement", h.statement},
                          {"key_datapoints", h.key_datapoints}};
}

}  // namespace

std::string to_string(RunStatus s) {
    switch (s) {
        case RunStatus::Completed: return "Completed";
        case RunStatus::Failed: return "Failed";
        case RunStatus::InProgress: return "InProgress";
    }
    return "?";
}

RunStatus run_status_from_string(std::string_view s) {
    if (s == "Completed") return RunStatus::Completed;
    if (s == "Failed") return RunStatus::Failed;
    if (s == "InProgress") return RunStatus::InProgress;
    throw IntegrityError("unknown run status '" + std::string(s) + "'");
}

Orchestrator::Orchestrator(config::EngineConfig cfg, gateway::Sleeper sleeper) : cfg_(std::move(cfg)) {
    cfg_.validate();
    gateway_ = std::make_unique<gateway::Gateway>(
        gateway::make_gateway(cfg_.provider, gateway::RetryPolicy{}, std::move(sleeper)));
    scholar_ = std::make_unique<scholar::ScholarClient>(cfg_.scholar);

    std::string prompts =
        cfg_.run.prompts_dir.empty() ? config::default_prompts_dir() : cfg_.run.prompts_dir;
    const std::map<agents::AgentRole, std::string> files = {
        {agents::AgentRole::DataAnalyst, "data_analyst.txt"},
        {agents::AgentRole::Planner, "planner.txt"},
        {agents::AgentRole::Scientist, "scientist.txt"},
        {agents::AgentRole::Accumulator, "accumulator.txt"},
        {agents::AgentRole::LiteratureReviewer, "literature_review.txt"},
        {agents::AgentRole::Critic, "critic.txt"}};
    for (const auto& [role, file] : files)
        templates_.emplace(role, agents::PromptTemplate::load(
                                     role, std::filesystem::path(prompts) / file));

    auto docs = context::load_documents(cfg_.run.context_paths);
    context_ = context::assemble_context(std::move(docs), cfg_.run.context_budget_tokens);

    std::string table_text = read_text_file(cfg_.run.data_path);
    matrix_ = std::make_unique<specdata::PresenceMatrix>(specdata::parse_presence_table(table_text));
    input_data_ = table_text;
    if (!cfg_.run.user_instructions.empty()) input_data_ += "\n\n" + cfg_.run.user_instructions;
}

gateway::ChatExchange Orchestrator::complete_stage(const RunPaths& paths, int iteration,
                                                   const std::string& stage,
                                                   gateway::ChatRequest request) {
    try {
        gateway::ChatExchange exchange = gateway_->complete(request);
        append_file(paths.exchanges(iteration), exchange.to_json().dump() + "\n");
        return exchange;
    } catch (const gateway::GatewayError& e) {
        throw RunError(stage, iteration, e.what());
    }
}

IterationRecord Orchestrator::run_iteration(const RunPaths& paths, int index,
                                            const std::string& prior_critique) {
    IterationRecord record;
    record.index = index;
    const std::string papers = context_.render();

    auto base_request = [&](agents::AgentRole role, double temperature, int agent_index = 0) {
        gateway::ChatRequest req;
        req.role = role;
        req.agent_index = agent_index;
        req.provider_id = cfg_.provider.id;
        req.max_output_tokens = kMaxOutputTokens;
        req.temperature = temperature;
        req.iteration = index;
        return req;
    };

    // Re-prompts a JSON-producing stage up to twice before failing the
    // iteration; every attempt's exchange is persisted.
    auto staged = [&](const std::string& stage, gateway::ChatRequest req, auto parse) {
        std::string base_prompt = req.system_prompt;
        std::string last_error;
        for (int attempt = 1; attempt <= kStageAttempts; ++attempt) {
            req.attempt = attempt;
            req.system_prompt = attempt == 1 ? base_prompt : base_prompt + kJsonReminder;
            gateway::ChatExchange exchange = complete_stage(paths, index, stage, req);
            record.exchanges.push_back(exchange);
            try {
                return std::make_pair(parse(exchange.response_text), exchange);
            } catch (const agents::ParseError& e) {
                last_error = e.what();
            }
        }
        throw RunError(stage, index, last_error);
    };

    // Data analyst: the single critic-feedback slot carries only the most
    // recent critique.
    {
        gateway::ChatRequest req = base_request(agents::AgentRole::DataAnalyst, kGenerativeTemperature);
        req.system_prompt = agents::render_prompt(templates_.at(agents::AgentRole::DataAnalyst),
                                                  {{"SELECTED_PAPERS", papers},
                                                   {"INPUT_DATA", input_data_},
                                                   {"CRITIC_FEEDBACK", prior_critique}});
        gateway::ChatExchange exchange = complete_stage(paths, index, "analyst", req);
        record.exchanges.push_back(exchange);
        record.analyst_text = exchange.response_text;
        write_text_file(paths.analyst(index), record.analyst_text);
    }

    // Planner.
    {
        gateway::ChatRequest req = base_request(agents::AgentRole::Planner, kStructuredTemperature);
        req.system_prompt = agents::render_prompt(
            templates_.at(agents::AgentRole::Planner),
            {{"INPUT_DATA", input_data_}, {"DATA_ANALYSIS", record.analyst_text}});
        auto [plan, exchange] = staged("planner", req, [&](const std::string& text) {
            return agents::parse_planner_output(text, cfg_.run.scientist_count);
        });
        record.plan = std::move(plan);
        nlohmann::json plan_json = nlohmann::json::object();
        for (size_t k = 0; k < record.plan.instructions.size(); ++k)
            plan_json["Agent" + std::to_string(k + 1) + "_instructions"] = record.plan.instructions[k];
        write_json_file(paths.planner(index), plan_json);
    }

    // Scientists fan out concurrently; results join in agent-index order.
    {
        std::vector<std::future<std::pair<std::vector<agents::Hypothesis>, std::vector<gateway::ChatExchange>>>>
            futures;
        for (int k = 1; k <= cfg_.run.scientist_count; ++k) {
            futures.push_back(std::async(std::launch::async, [&, k] {
                gateway::ChatRequest req =
                    base_request(agents::AgentRole::Scientist, kGenerativeTemperature, k);
                req.system_prompt = agents::render_prompt(
                    templates_.at(agents::AgentRole::Scientist),
                    {{"AGENT_ID", std::to_string(k)},
                     {"AGENT_INSTRUCTION", record.plan.instructions[k - 1]},
                     {"SELECTED_PAPERS", papers},
                     {"INPUT_DATA", input_data_}});
                std::vector<gateway::ChatExchange> attempts;
                std::string base_prompt = req.system_prompt;
                std::string last_error;
                for (int attempt = 1; attempt <= kStageAttempts; ++attempt) {
                    req.attempt = attempt;
                    req.system_prompt = attempt == 1 ? base_prompt : base_prompt + kJsonReminder;
                    gateway::ChatExchange exchange = gateway_->complete(req);
                    attempts.push_back(exchange);
                    try {
                        auto hyps = agents::parse_hypotheses(exchange.response_text,
                                                             agents::AgentRole::Scientist, k, index);
                        return std::make_pair(std::move(hyps), std::move(attempts));
                    } catch (const agents::ParseError& e) {
                        last_error = e.what();
                    }
                }
                throw RunError("scientist_" + std::to_string(k), index, last_error);
            }));
        }
        std::exception_ptr first_failure;
        for (int k = 1; k <= cfg_.run.scientist_count; ++k) {
            try {
                auto [hyps, attempts] = futures[k - 1].get();
                for (auto& e : attempts) {
                    append_file(paths.exchanges(index), e.to_json().dump() + "\n");
                    record.exchanges.push_back(std::move(e));
                }
                write_text_file(paths.scientist(index, k), agents::serialize_hypotheses(hyps) + "\n");
                record.scientist_outputs.push_back(std::move(hyps));
            } catch (const gateway::GatewayError& e) {
                if (!first_failure)
                    first_failure = std::make_exception_ptr(
                        RunError("scientist_" + std::to_string(k), index, e.what()));
            } catch (...) {
                if (!first_failure) first_failure = std::current_exception();
            }
        }
        if (first_failure) std::rethrow_exception(first_failure);
    }

    // Deterministic duplicate pre-pass, then the accumulator call.
    {
        std::vector<agents::Hypothesis> pooled;
        for (const auto& outputs : record.scientist_outputs)
            pooled.insert(pooled.end(), outputs.begin(), outputs.end());
        agents::DedupResult dedup = agents::prefilter_duplicates(pooled);

        gateway::ChatRequest req = base_request(agents::AgentRole::Accumulator, kStructuredTemperature);
        req.system_prompt =
            agents::render_prompt(templates_.at(agents::AgentRole::Accumulator),
                                  {{"HYPOTHESES", agents::serialize_hypotheses(dedup.kept)}});
        auto [accumulated, exchange] = staged("accumulator", req, [&](const std::string& text) {
            return agents::parse_hypotheses(text, agents::AgentRole::Accumulator, 0, index);
        });
        record.accumulated = agents::renumber_final(std::move(accumulated));
        write_text_file(paths.accumulated(index),
                        agents::serialize_hypotheses(record.accumulated) + "\n");
    }

    // Literature: one bounded search per hypothesis (concurrent, joined in
    // hypothesis order), then a single review call.
    {
        std::vector<std::future<scholar::SearchResult>> futures;
        for (const auto& h : record.accumulated) {
            futures.push_back(std::async(std::launch::async, [this, &h] {
                return scholar_->search(scholar::build_query(h), cfg_.run.snippet_limit);
            }));
        }
        std::ostringstream results_block, statements_block;
        for (size_t i = 0; i < record.accumulated.size(); ++i) {
            const auto& h = record.accumulated[i];
            scholar::SearchResult result;
            try {
                result = futures[i].get();
            } catch (const scholar::ScholarError& e) {
                throw RunError("literature_search", index, e.what());
            }
            statements_block << h.id << ": " << h.statement << "\n";
            results_block << "Hypothesis " << h.id << ":\nQuery: " << result.query << "\n";
            if (result.snippets.empty()) results_block << "(no search results)\n";
            for (size_t s = 0; s < result.snippets.size(); ++s) {
                const auto& sn = result.snippets[s];
                results_block << (s + 1) << ". " << sn.title;
                if (sn.year) results_block << " (" << *sn.year << ")";
                if (!sn.external_id.empty()) results_block << " [" << sn.external_id << "]";
                results_block << "\n";
                if (!sn.abstract_excerpt.empty()) results_block << sn.abstract_excerpt << "\n";
            }
            results_block << "===\n";
        }

        gateway::ChatRequest req =
            base_request(agents::AgentRole::LiteratureReviewer, kGenerativeTemperature);
        req.system_prompt =
            agents::render_prompt(templates_.at(agents::AgentRole::LiteratureReviewer),
                                  {{"HYPOTHESES", statements_block.str()},
                                   {"SEARCH_RESULTS", results_block.str()}});
        gateway::ChatExchange exchange = complete_stage(paths, index, "literature_review", req);
        record.exchanges.push_back(exchange);
        record.literature_text = exchange.response_text;
        write_text_file(paths.literature(index), record.literature_text);

        std::vector<std::string> ids;
        for (const auto& h : record.accumulated) ids.push_back(h.id);
        record.literature_digests = agents::split_sections(record.literature_text, ids);
    }

    // Critic.
    {
        gateway::ChatRequest req = base_request(agents::AgentRole::Critic, kGenerativeTemperature);
        req.system_prompt = agents::render_prompt(
            templates_.at(agents::AgentRole::Critic),
            {{"SELECTED_PAPERS", papers},
             {"INPUT_DATA", input_data_},
             {"LITERATURE_REVIEW", record.literature_text},
             {"HYPOTHESES", agents::serialize_hypotheses(record.accumulated)}});
        gateway::ChatExchange exchange = complete_stage(paths, index, "critic", req);
        record.exchanges.push_back(exchange);
        std::vector<std::string> ids;
        for (const auto& h : record.accumulated) ids.push_back(h.id);
        record.critic = agents::parse_critic(exchange.response_text, ids);
        write_text_file(paths.critic(index), record.critic.text);
    }

    return record;
}

void Orchestrator::write_manifest(const RunRecord& state, std::optional<std::string> failed_stage,
                                  std::optional<int> failed_iteration) const {
    RunPaths paths{state.run_dir};
    nlohmann::json j{{"run_id", state.run_id},
                     {"status", to_string(state.status)},
                     {"completed_iterations", state.iterations.size()},
                     {"planned_iterations", state.config.run.iterations},
                     {"total_cost", state.total_cost},
                     {"updated_at", now_utc_iso8601()}};
    if (failed_stage) j["failed_stage"] = *failed_stage;
    if (failed_iteration) j["failed_iteration"] = *failed_iteration;
    atomic_write_json(paths.manifest(), j);
}

RunRecord Orchestrator::run(std::optional<std::string> run_id) {
    RunRecord state;
    state.config = cfg_;
    std::filesystem::create_directories(cfg_.run.output_dir);

    // Never reuse an existing run id.
    for (int attempt = 0;; ++attempt) {
        state.run_id = run_id ? *run_id : timestamp_run_id();
        state.run_dir = std::filesystem::path(cfg_.run.output_dir) / state.run_id;
        if (!std::filesystem::exists(state.run_dir)) break;
        if (run_id || attempt > 16)
            throw IntegrityError("run directory already exists: " + state.run_dir.string());
    }
    std::filesystem::create_directories(state.run_dir);

    RunPaths paths{state.run_dir};
    write_json_file(paths.config(), cfg_.to_json());
    return execute(std::move(state), 1, "");
}

RunRecord Orchestrator::execute(RunRecord state, int first_iteration, std::string prior_critique) {
    RunPaths paths{state.run_dir};
    RunLock lock(paths.lock());

    state.status = RunStatus::InProgress;
    write_manifest(state, std::nullopt, std::nullopt);

    for (int i = first_iteration; i <= cfg_.run.iterations; ++i) {
        // A partially executed iteration is re-run from scratch.
        if (std::filesystem::exists(paths.iteration_dir(i)))
            std::filesystem::remove_all(paths.iteration_dir(i));
        try {
            IterationRecord record = run_iteration(paths, i, prior_critique);
            prior_critique = record.critic.text;
            for (const auto& e : record.exchanges) state.total_cost += e.cost;
            std::string lines;
            for (const auto& h : record.accumulated) lines += hypothesis_line(h).dump() + "\n";
            append_file(paths.hypotheses(), lines);
            state.iterations.push_back(std::move(record));
            state.status =
                state.iterations.size() == static_cast<size_t>(cfg_.run.iterations)
                    ? RunStatus::Completed
                    : RunStatus::InProgress;
            write_manifest(state, std::nullopt, std::nullopt);
        } catch (const RunError& e) {
            // Cost of the failed iteration's persisted exchanges still counts.
            if (std::filesystem::exists(paths.exchanges(i))) {
                for (const auto& ex :
                     gateway::CostLedger::parse_jsonl(read_text_file(paths.exchanges(i))))
                    state.total_cost += ex.cost;
            }
            state.status = RunStatus::Failed;
            write_manifest(state, e.stage(), e.iteration());
            throw;
        }
    }
    return state;
}

RunRecord Orchestrator::load(const std::filesystem::path& run_dir) {
    RunPaths paths{run_dir};
    if (!std::filesystem::exists(paths.manifest()))
        throw IntegrityError("no manifest.json in " + run_dir.string());
    if (!std::filesystem::exists(paths.config()))
        throw IntegrityError("no config.json in " + run_dir.string());

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_text_file(paths.manifest()));
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError("corrupt manifest: " + std::string(e.what()));
    }

    RunRecord state;
    state.config = config::EngineConfig::from_json(nlohmann::json::parse(read_text_file(paths.config())));
    state.run_id = manifest.value("run_id", run_dir.filename().string());
    state.run_dir = run_dir;
    state.total_cost = manifest.value("total_cost", 0.0);
    state.status = run_status_from_string(manifest.value("status", "InProgress"));

    int completed = manifest.value("completed_iterations", 0);
    for (int i = 1; i <= completed; ++i) {
        IterationRecord record;
        record.index = i;
        std::vector<std::filesystem::path> required = {paths.analyst(i), paths.planner(i),
                                                       paths.accumulated(i), paths.literature(i),
                                                       paths.critic(i), paths.exchanges(i)};
        for (int k = 1; k <= state.config.run.scientist_count; ++k)
            required.push_back(paths.scientist(i, k));
        for (const auto& f : required) {
            if (!std::filesystem::exists(f))
                throw IntegrityError("iteration " + std::to_string(i) +
                                     " is marked complete but " + f.string() + " is missing");
        }
        record.analyst_text = read_text_file(paths.analyst(i));
        nlohmann::json plan = nlohmann::json::parse(read_text_file(paths.planner(i)));
        for (int k = 1; k <= state.config.run.scientist_count; ++k)
            record.plan.instructions.push_back(
                plan.at("Agent" + std::to_string(k) + "_instructions").get<std::string>());
        for (int k = 1; k <= state.config.run.scientist_count; ++k)
            record.scientist_outputs.push_back(agents::parse_hypotheses(
                read_text_file(paths.scientist(i, k)), agents::AgentRole::Scientist, k, i));
        record.accumulated = agents::parse_hypotheses(read_text_file(paths.accumulated(i)),
                                                      agents::AgentRole::Accumulator, 0, i);
        record.literature_text = read_text_file(paths.literature(i));
        std::vector<std::string> ids;
        for (const auto& h : record.accumulated) ids.push_back(h.id);
        record.literature_digests = agents::split_sections(record.literature_text, ids);
        record.critic = agents::parse_critic(read_text_file(paths.critic(i)), ids);
        record.exchanges = gateway::CostLedger::parse_jsonl(read_text_file(paths.exchanges(i)));
        state.iterations.push_back(std::move(record));
    }
    return state;
}

RunRecord Orchestrator::resume(const std::filesystem::path& run_dir, gateway::Sleeper sleeper) {
    RunRecord state = load(run_dir);
    if (state.status == RunStatus::Completed &&
        state.iterations.size() == static_cast<size_t>(state.config.run.iterations))
        return state;

    std::string prior_critique =
        state.iterations.empty() ? "" : state.iterations.back().critic.text;
    Orchestrator engine(state.config, std::move(sleeper));
    return engine.execute(std::move(state), static_cast<int>(state.iterations.size()) + 1,
                          std::move(prior_critique));
}

std::vector<agents::Hypothesis> Orchestrator::collect_hypotheses(const RunRecord& run) {
    std::vector<agents::Hypothesis> out;
    for (const auto& record : run.iterations)
        out.insert(out.end(), record.accumulated.begin(), record.accumulated.end());
    return out;
}

std::vector<agents::Hypothesis> Orchestrator::load_hypotheses(const std::filesystem::path& run_dir) {
    RunPaths paths{run_dir};
    std::vector<agents::Hypothesis> out;
    if (!std::filesystem::exists(paths.hypotheses())) return out;
    std::istringstream ss(read_text_file(paths.hypotheses()));
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        agents::Hypothesis h;
        h.id = j.at("id").get<std::string>();
        h.statement = j.at("statement").get<std::string>();
        h.key_datapoints = j.at("key_datapoints").get<std::string>();
        h.iteration = j.at("iteration").get<int>();
        h.source = agents::AgentRole::Accumulator;
        out.push_back(std::move(h));
    }
    return out;
}

}  // namespace hypogen::orchestrator
