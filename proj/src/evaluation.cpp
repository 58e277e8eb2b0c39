#include "hypogen/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "hypogen/agents.hpp"
#include "hypogen/specdata.hpp"

namespace hypogen::evaluation {

Classification classify(const ScoreCard& card) {
    Classification c;
    c.novel = card.novelty >= 5;
    c.plausible = card.other_mean() >= 8.0;
    return c;
}

const std::array<std::string, 6>& criterion_names() {
    static const std::array<std::string, 6> names = {
        "novelty", "consistency", "clarity", "empirical", "scope", "predictive"};
    return names;
}

CriterionStats mean_and_population_std(const std::vector<double>& values) {
    if (values.empty()) throw ScoreError("cannot aggregate an empty score set");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

CriterionStats overall_of_criterion_means(const std::array<double, 6>& means) {
    return mean_and_population_std(std::vector<double>(means.begin(), means.end()));
}

AggregateReport aggregate(const std::vector<ScoreCard>& cards) {
    if (cards.empty()) throw ScoreError("cannot aggregate an empty score set");
    AggregateReport report;
    report.total = static_cast<int>(cards.size());
    std::array<double, 6> means{};
    for (size_t c = 0; c < 6; ++c) {
        std::vector<double> column;
        column.reserve(cards.size());
        for (const auto& card : cards) column.push_back(card.values()[c]);
        report.criteria[c] = mean_and_population_std(column);
        means[c] = report.criteria[c].mean;
    }
    CriterionStats overall = overall_of_criterion_means(means);
    report.overall_mean = overall.mean;
    report.overall_std = overall.stddev;
    for (const auto& card : cards) {
        Classification cls = classify(card);
        if (cls.plausible) ++report.plausible_count;
        if (cls.plausible && cls.novel) ++report.novel_and_plausible_count;
    }
    return report;
}

nlohmann::json AggregateReport::counts_json() const {
    nlohmann::json criteria_json = nlohmann::json::object();
    for (size_t c = 0; c < 6; ++c) {
        criteria_json[criterion_names()[c]] = {{"mean", criteria[c].mean},
                                               {"std", criteria[c].stddev}};
    }
    return nlohmann::json{{"total", total},
                          {"plausible", plausible_count},
                          {"novel_and_plausible", novel_and_plausible_count},
                          {"overall_mean", overall_mean},
                          {"overall_std", overall_std},
                          {"criteria", criteria_json}};
}

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int parse_score(const std::string& cell, int row, const std::string& column) {
    std::string t = trim(cell);
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); }))
        throw ScoreError("row " + std::to_string(row) + ": " + column +
                         " must be an integer, got '" + cell + "'");
    int v = std::stoi(t);
    if (v < 0 || v > 10)
        throw ScoreError("row " + std::to_string(row) + ": " + column + " out of range 0-10, got " +
                         t);
    return v;
}

}  // namespace

std::vector<ScoreCard> ingest_scores(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ScoreError("empty score file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string expected = "hypothesis_id,novelty,consistency,clarity,empirical,scope,predictive";
    if (trim(line) != expected)
        throw ScoreError("bad score CSV header; expected '" + expected + "'");

    std::vector<ScoreCard> cards;
    std::set<std::string> seen;
    int row = 1;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 7)
            throw ScoreError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                             " fields, expected 7");
        ScoreCard card;
        card.hypothesis_id = trim(cells[0]);
        if (card.hypothesis_id.empty())
            throw ScoreError("row " + std::to_string(row) + ": empty hypothesis_id");
        if (!seen.insert(card.hypothesis_id).second)
            throw ScoreError("duplicate hypothesis_id '" + card.hypothesis_id + "' at row " +
                             std::to_string(row));
        card.novelty = parse_score(cells[1], row, "novelty");
        card.consistency = parse_score(cells[2], row, "consistency");
        card.clarity = parse_score(cells[3], row, "clarity");
        card.empirical = parse_score(cells[4], row, "empirical");
        card.scope = parse_score(cells[5], row, "scope");
        card.predictive = parse_score(cells[6], row, "predictive");
        cards.push_back(std::move(card));
        ++row;
    }
    return cards;
}

std::vector<ScoreCard> ingest_scores_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScoreError("cannot open score file " + path);
    return ingest_scores(in);
}

bool card_matches(const std::string& card_id, const agents::Hypothesis& hypothesis) {
    if (card_id == hypothesis.id) return true;
    // Iteration-qualified form for ids that recur across iterations.
    std::string prefix = "iter" + std::to_string(hypothesis.iteration) + ":";
    return card_id == prefix + hypothesis.id;
}

namespace {

std::string fmt(double v, int precision = 2) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

std::string truncate_words(const std::string& s, size_t max_chars) {
    if (s.size() <= max_chars) return s;
    size_t cut = s.rfind(' ', max_chars);
    if (cut == std::string::npos || cut == 0) cut = max_chars;
    return s.substr(0, cut) + "...";
}

std::string escape_pipes(std::string s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += "\\|";
        else if (c == '\n') out += ' ';
        else out.push_back(c);
    }
    return out;
}

}  // namespace

std::string render_report(const ReportInputs& inputs) {
    // Every card must reference a hypothesis of the run.
    for (const auto& card : inputs.cards) {
        bool found = std::any_of(inputs.hypotheses.begin(), inputs.hypotheses.end(),
                                 [&](const agents::Hypothesis& h) { return card_matches(card.hypothesis_id, h); });
        if (!found)
            throw ScoreError("scorecard references unknown hypothesis '" + card.hypothesis_id + "'");
    }

    std::ostringstream md;
    md << "# Hypothesis evaluation report\n\n";
    md << "## Hypotheses\n\n";
    md << "| Iter | Id | Statement | N | C | Cl | E | S | P | Classification | Grounding |\n";
    md << "|---|---|---|---|---|---|---|---|---|---|---|\n";

    int scored = 0;
    for (const auto& h : inputs.hypotheses) {
        const ScoreCard* card = nullptr;
        for (const auto& c : inputs.cards)
            if (card_matches(c.hypothesis_id, h)) card = &c;

        std::string grounding = "-";
        if (inputs.matrix) {
            auto refs = specdata::extract_claim_refs(*inputs.matrix, h.key_datapoints);
            auto rep = specdata::verify_grounding(*inputs.matrix, refs);
            grounding = std::to_string(rep.supported.size()) + " supported, " +
                        std::to_string(rep.violated.size()) + " violated, " +
                        std::to_string(rep.unresolved.size()) + " unresolved";
        }
        md << "| " << h.iteration << " | " << h.id << " | "
           << escape_pipes(truncate_words(h.statement, 160)) << " | ";
        if (card) {
            ++scored;
            Classification cls = classify(*card);
            for (int v : card->values()) md << v << " | ";
            md << (cls.novel ? "novel" : "not novel") << ", "
               << (cls.plausible ? "plausible" : "not plausible");
        } else {
            md << "- | - | - | - | - | - | unscored";
        }
        md << " | " << grounding << " |\n";
    }
    md << "\n" << scored << " of " << inputs.hypotheses.size() << " hypotheses scored.\n";

    if (!inputs.cards.empty()) {
        AggregateReport agg = aggregate(inputs.cards);
        md << "\n## Aggregate scores\n\n";
        md << "| Criterion | Mean | Std |\n|---|---|---|\n";
        for (size_t c = 0; c < 6; ++c) {
            md << "| " << criterion_names()[c] << " | " << fmt(agg.criteria[c].mean) << " | "
               << fmt(agg.criteria[c].stddev) << " |\n";
        }
        md << "| overall | " << fmt(agg.overall_mean) << " | " << fmt(agg.overall_std) << " |\n";
        md << "\nTotal " << agg.total << ", plausible " << agg.plausible_count
           << ", novel and plausible " << agg.novel_and_plausible_count << ".\n";
    } else {
        md << "\n## Aggregate scores\n\nNo scorecards supplied.\n";
    }

    md << "\n## Cost\n\nTotal cost: $" << fmt(inputs.total_cost, 6) << "\n";
    if (!inputs.cost_by_role.empty()) {
        md << "\n| Role | Cost (USD) |\n|---|---|\n";
        for (const auto& [role, cost] : inputs.cost_by_role)
            md << "| " << role << " | " << fmt(cost, 6) << " |\n";
    }
    return md.str();
}

}  // namespace hypogen::evaluation
