#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hypogen::agents {

enum class AgentRole { DataAnalyst, Planner, Scientist, Accumulator, LiteratureReviewer, Critic };

std::string to_string(AgentRole role);
AgentRole role_from_string(std::string_view name);

class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Prompt body with {SLOT_NAME} markers. The shipped template files under
/// share/prompts/ carry the role prompts verbatim.
struct PromptTemplate {
    AgentRole role = AgentRole::DataAnalyst;
    std::string body;

    static PromptTemplate load(AgentRole role, const std::filesystem::path& file);
};

/// The slot names a template body may use.
const std::vector<std::string>& known_slots();

using Bindings = std::map<std::string, std::string>;

/// Substitutes every {SLOT} marker. Throws ParseError naming the first
/// slot that appears in the body without a binding. Braces that are not
/// known slot markers (e.g. JSON examples inside prompts) pass through.
std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings);

struct Hypothesis {
    std::string id;  // "H_one", "H_final_two", ...
    std::string statement;
    std::string key_datapoints;
    AgentRole source = AgentRole::Scientist;
    int source_index = 0;  // scientist index, 0 for other roles
    int iteration = 1;

    bool operator==(const Hypothesis&) const = default;
};

struct PlannerPlan {
    std::vector<std::string> instructions;  // index k-1 holds AgentK_instructions
};

enum class Verdict { Keep, Revise, Reject };

std::string to_string(Verdict v);

struct CriticReview {
    struct Entry {
        Verdict verdict = Verdict::Keep;
        std::string excerpt;
    };
    std::string text;
    std::map<std::string, Entry> per_hypothesis;
};

/// Returns the first balanced top-level JSON value ({...} or [...]) in the
/// text, tolerating Markdown code fences, surrounding prose, and trailing
/// commas. Throws ParseError when no parseable value exists.
std::string extract_json(std::string_view text);

PlannerPlan parse_planner_output(std::string_view text, int scientist_count);

std::vector<Hypothesis> parse_hypotheses(std::string_view text, AgentRole source, int source_index,
                                         int iteration);

/// Wrapped-object emission shape: {"hypothesis": [...]}.
std::string serialize_hypotheses(const std::vector<Hypothesis>& hyps);

/// "H_one" -> 1, "H_final_twelve" -> 12, "H_3" -> 3. Word ordinals cover
/// one..ninety_nine; decimal numerals are accepted as drift tolerance.
int word_index(std::string_view id);

/// 1 -> "one", 21 -> "twenty_one"; falls back to the decimal numeral
/// above ninety-nine so renumbering round-trips through word_index.
std::string ordinal_word(int n);

struct DedupResult {
    std::vector<Hypothesis> kept;
    std::vector<Hypothesis> dropped;
};

/// Deterministic near-duplicate pre-pass: token-set Jaccard on normalized
/// statements; the later of any pair at or above the threshold is dropped.
DedupResult prefilter_duplicates(const std::vector<Hypothesis>& hyps, double threshold = 0.9);

double statement_jaccard(std::string_view a, std::string_view b);

/// Rewrites ids to H_final_<ordinal> in list order; statements and
/// key_datapoints are untouched.
std::vector<Hypothesis> renumber_final(std::vector<Hypothesis> hyps);

/// Splits free text into per-id sections starting at each id's first
/// mention; ids never mentioned map to an empty section.
std::map<std::string, std::string> split_sections(std::string_view text,
                                                  const std::vector<std::string>& ids);

CriticReview parse_critic(std::string_view text, const std::vector<std::string>& hypothesis_ids);

}  // namespace hypogen::agents
