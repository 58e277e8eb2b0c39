#include "hypogen/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hypogen/evaluation.hpp"
#include "hypogen/orchestrator.hpp"

namespace hypogen::cli {

namespace {

std::string money(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6) << v;
    return os.str();
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config::ConfigError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

specdata::PresenceMatrix load_matrix(const std::string& data_path) {
    return specdata::parse_presence_table(read_text_file(data_path));
}

// Sort key for stable eval output: ordinal first, then the raw id and
// iteration so recurring ids across iterations stay deterministic.
bool card_order(const evaluation::ScoreCard& a, const evaluation::ScoreCard& b) {
    auto key = [](const std::string& id) {
        std::string bare = id;
        if (size_t colon = bare.find(':'); colon != std::string::npos)
            bare = bare.substr(colon + 1);
        int ordinal = 0;
        try {
            ordinal = agents::word_index(bare);
        } catch (const agents::ParseError&) {
            ordinal = 1 << 20;  // unparseable ids sort last
        }
        return std::make_pair(ordinal, id);
    };
    return key(a.hypothesis_id) < key(b.hypothesis_id);
}

void check_cards_against_run(const std::vector<evaluation::ScoreCard>& cards,
                             const std::vector<agents::Hypothesis>& hypotheses) {
    for (const auto& card : cards) {
        bool known = std::any_of(hypotheses.begin(), hypotheses.end(), [&](const auto& h) {
            return evaluation::card_matches(card.hypothesis_id, h);
        });
        if (!known)
            throw evaluation::ScoreError("scorecard references unknown hypothesis '" +
                                         card.hypothesis_id + "'");
    }
}

}  // namespace

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
    config::EngineConfig cfg;
    try {
        cfg = config::EngineConfig::load(args.config_path);
        if (args.iterations) cfg.run.iterations = *args.iterations;
        if (args.out_dir) cfg.run.output_dir = *args.out_dir;
        if (args.provider && *args.provider != cfg.provider.id)
            throw config::ConfigError("provider '" + *args.provider +
                                      "' is not defined in this configuration (found '" +
                                      cfg.provider.id + "')");
        cfg.validate();
    } catch (const std::exception& e) {
        err << "configuration error: " << e.what() << "\n";
        return 1;
    }

    try {
        orchestrator::Orchestrator engine(cfg);
        orchestrator::RunRecord record = engine.run();
        auto hypotheses = orchestrator::Orchestrator::collect_hypotheses(record);
        out << "run " << record.run_id << " completed " << record.iterations.size()
            << " iterations\n";
        out << hypotheses.size() << " hypotheses accumulated\n";
        out << "total cost: $" << money(record.total_cost) << "\n";
        out << "artifacts: " << record.run_dir.string() << "\n";
        return 0;
    } catch (const orchestrator::RunError& e) {
        err << "run failed at stage " << e.stage() << " (iteration " << e.iteration()
            << "): " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "run failed: " << e.what() << "\n";
        return 2;
    }
}

int cmd_resume(const std::string& run_dir, std::ostream& out, std::ostream& err) {
    try {
        orchestrator::RunRecord record = orchestrator::Orchestrator::resume(run_dir);
        out << "run " << record.run_id << ": " << record.iterations.size() << "/"
            << record.config.run.iterations << " iterations, status "
            << orchestrator::to_string(record.status) << "\n";
        out << "total cost: $" << money(record.total_cost) << "\n";
        return record.status == orchestrator::RunStatus::Completed ? 0 : 2;
    } catch (const orchestrator::RunError& e) {
        err << "resume failed at stage " << e.stage() << " (iteration " << e.iteration()
            << "): " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "resume error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_verify(const std::string& run_dir, const std::string& data_path, std::ostream& out,
               std::ostream& err) {
    std::vector<agents::Hypothesis> hypotheses;
    std::optional<specdata::PresenceMatrix> matrix;
    try {
        matrix = load_matrix(data_path);
        hypotheses = orchestrator::Orchestrator::load_hypotheses(run_dir);
        if (hypotheses.empty())
            throw orchestrator::IntegrityError("no hypotheses.jsonl found under " + run_dir);
    } catch (const std::exception& e) {
        err << "verify error: " << e.what() << "\n";
        return 1;
    }

    size_t total_violations = 0;
    for (const auto& h : hypotheses) {
        auto refs = specdata::extract_claim_refs(*matrix, h.key_datapoints);
        auto report = specdata::verify_grounding(*matrix, refs);
        out << "iteration " << h.iteration << " " << h.id << ": " << report.supported.size()
            << " supported, " << report.violated.size() << " violated, "
            << report.unresolved.size() << " unresolved\n";
        for (const auto& a : report.violated) out << "  VIOLATED " << specdata::to_string(a) << "\n";
        for (const auto& t : report.unresolved) out << "  unresolved: " << t << "\n";
        total_violations += report.violated.size();
    }
    if (total_violations > 0) {
        err << total_violations << " violated assertion(s) found\n";
        return 2;
    }
    out << "all resolvable assertions are supported by the data\n";
    return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& scores_csv, std::ostream& out,
             std::ostream& err) {
    try {
        auto cards = evaluation::ingest_scores_file(scores_csv);
        auto hypotheses = orchestrator::Orchestrator::load_hypotheses(run_dir);
        check_cards_against_run(cards, hypotheses);

        std::sort(cards.begin(), cards.end(), card_order);
        for (const auto& card : cards) {
            auto cls = evaluation::classify(card);
            out << card.hypothesis_id << ": " << (cls.novel ? "novel" : "not novel") << ", "
                << (cls.plausible ? "plausible" : "not plausible") << "\n";
        }
        if (!cards.empty()) {
            auto agg = evaluation::aggregate(cards);
            out << "\n";
            for (size_t c = 0; c < 6; ++c) {
                out << evaluation::criterion_names()[c] << ": " << std::fixed
                    << std::setprecision(2) << agg.criteria[c].mean << " +/- "
                    << agg.criteria[c].stddev << "\n";
            }
            out << "overall: " << std::fixed << std::setprecision(2) << agg.overall_mean
                << " +/- " << agg.overall_std << "\n";
            out << "total " << agg.total << ", plausible " << agg.plausible_count
                << ", novel and plausible " << agg.novel_and_plausible_count << "\n";
        } else {
            out << "no scorecards in " << scores_csv << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        err << "eval error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_report(const std::string& run_dir, const std::string& scores_csv,
               const std::string& out_path, std::ostream& out, std::ostream& err) {
    try {
        evaluation::ReportInputs inputs;
        inputs.cards = evaluation::ingest_scores_file(scores_csv);
        inputs.hypotheses = orchestrator::Orchestrator::load_hypotheses(run_dir);
        check_cards_against_run(inputs.cards, inputs.hypotheses);

        orchestrator::RunRecord record = orchestrator::Orchestrator::load(run_dir);
        inputs.total_cost = record.total_cost;
        gateway::CostLedger ledger;
        for (const auto& it : record.iterations)
            for (const auto& e : it.exchanges) ledger.append(e);
        inputs.cost_by_role = ledger.by_role();

        std::optional<specdata::PresenceMatrix> matrix;
        if (!record.config.run.data_path.empty() &&
            std::filesystem::exists(record.config.run.data_path)) {
            matrix = load_matrix(record.config.run.data_path);
            inputs.matrix = &*matrix;
        }

        std::string markdown = evaluation::render_report(inputs);
        std::ofstream file(out_path, std::ios::binary | std::ios::trunc);
        if (!file) throw config::ConfigError("cannot write report to " + out_path);
        file << markdown;

        // Machine-readable counts on stdout.
        if (!inputs.cards.empty())
            out << evaluation::aggregate(inputs.cards).counts_json().dump() << "\n";
        else
            out << nlohmann::json{{"total", 0}}.dump() << "\n";
        out << "report written to " << out_path << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "report error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace hypogen::cli
