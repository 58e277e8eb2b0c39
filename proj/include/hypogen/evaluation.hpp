#pragma once

#include <array>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace hypogen::specdata {
class PresenceMatrix;
}
namespace hypogen::agents {
struct Hypothesis;
}

namespace hypogen::evaluation {

class ScoreError : public std::runtime_error {
public:
    explicit ScoreError(const std::string& what) : std::runtime_error(what) {}
};

/// One expert scorecard: six 0-10 integer criteria.
struct ScoreCard {
    std::string hypothesis_id;
    int novelty = 0;
    int consistency = 0;
    int clarity = 0;
    int empirical = 0;
    int scope = 0;
    int predictive = 0;

    std::array<int, 6> values() const {
        return {novelty, consistency, clarity, empirical, scope, predictive};
    }
    /// Mean of the five non-novelty criteria.
    double other_mean() const {
        return (consistency + clarity + empirical + scope + predictive) / 5.0;
    }
};

struct Classification {
    bool novel = false;      // novelty >= 5
    bool plausible = false;  // mean of the other five criteria >= 8
};

Classification classify(const ScoreCard& card);

struct CriterionStats {
    double mean = 0.0;
    double stddev = 0.0;  // population (divide by n)
};

struct AggregateReport {
    std::array<CriterionStats, 6> criteria;  // novelty, consistency, clarity, empirical, scope, predictive
    double overall_mean = 0.0;               // mean of the six criterion means
    double overall_std = 0.0;                // population std of the six criterion means
    int total = 0;
    int plausible_count = 0;
    int novel_and_plausible_count = 0;

    nlohmann::json counts_json() const;
};

const std::array<std::string, 6>& criterion_names();

/// Population mean and standard deviation.
CriterionStats mean_and_population_std(const std::vector<double>& values);

/// The overall row is computed over the six criterion means, not over raw
/// scores; only that reading reproduces the published aggregates.
CriterionStats overall_of_criterion_means(const std::array<double, 6>& means);

AggregateReport aggregate(const std::vector<ScoreCard>& cards);

/// CSV with header hypothesis_id,novelty,consistency,clarity,empirical,
/// scope,predictive; integer scores 0-10. Errors name the offending row.
std::vector<ScoreCard> ingest_scores(std::istream& in);
std::vector<ScoreCard> ingest_scores_file(const std::string& path);

/// True when the card's id matches the hypothesis: either the bare id or
/// an iteration-qualified "iter<k>:<id>" form.
bool card_matches(const std::string& card_id, const agents::Hypothesis& hypothesis);

struct ReportInputs {
    std::vector<agents::Hypothesis> hypotheses;
    std::vector<ScoreCard> cards;
    const specdata::PresenceMatrix* matrix = nullptr;  // optional grounding section
    double total_cost = 0.0;
    std::map<std::string, double> cost_by_role;
};

/// Markdown report: per-hypothesis table with scores, classification and
/// grounding summary, an aggregate section, and the cost ledger section.
/// Throws ScoreError when a card references no hypothesis in the run.
std::string render_report(const ReportInputs& inputs);

}  // namespace hypogen::evaluation
