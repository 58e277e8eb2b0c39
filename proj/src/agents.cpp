#include "hypogen/agents.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hypogen::agents {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

std::string to_string(AgentRole role) {
    switch (role) {
        case AgentRole::DataAnalyst: return "DataAnalyst";
        case AgentRole::Planner: return "Planner";
        case AgentRole::Scientist: return "Scientist";
        case AgentRole::Accumulator: return "Accumulator";
        case AgentRole::LiteratureReviewer: return "LiteratureReviewer";
        case AgentRole::Critic: return "Critic";
    }
    return "?";
}

AgentRole role_from_string(std::string_view name) {
    for (AgentRole r : {AgentRole::DataAnalyst, AgentRole::Planner, AgentRole::Scientist,
                        AgentRole::Accumulator, AgentRole::LiteratureReviewer, AgentRole::Critic}) {
        if (to_string(r) == name) return r;
    }
    throw ParseError("unknown agent role '" + std::string(name) + "'");
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Keep: return "Keep";
        case Verdict::Revise: return "Revise";
        case Verdict::Reject: return "Reject";
    }
    return "?";
}

PromptTemplate PromptTemplate::load(AgentRole role, const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ParseError("cannot open prompt template " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return PromptTemplate{role, ss.str()};
}

const std::vector<std::string>& known_slots() {
    static const std::vector<std::string> slots = {
        "SELECTED_PAPERS", "INPUT_DATA",     "CRITIC_FEEDBACK",   "AGENT_ID",      "AGENT_INSTRUCTION",
        "DATA_ANALYSIS",   "HYPOTHESES",     "SEARCH_RESULTS",    "LITERATURE_REVIEW"};
    return slots;
}

std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings) {
    std::string out;
    out.reserve(tmpl.body.size());
    const std::string& body = tmpl.body;
    size_t pos = 0;
    while (pos < body.size()) {
        size_t open = body.find('{', pos);
        if (open == std::string::npos) {
            out.append(body, pos, std::string::npos);
            break;
        }
        out.append(body, pos, open - pos);
        size_t close = body.find('}', open);
        bool substituted = false;
        if (close != std::string::npos) {
            std::string name = body.substr(open + 1, close - open - 1);
            if (std::find(known_slots().begin(), known_slots().end(), name) != known_slots().end()) {
                auto it = bindings.find(name);
                if (it == bindings.end())
                    throw ParseError("unbound slot {" + name + "} in " + to_string(tmpl.role) +
                                     " template");
                out.append(it->second);
                pos = close + 1;
                substituted = true;
            }
        }
        if (!substituted) {
            out.push_back('{');
            pos = open + 1;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON extraction and repair

namespace {

// Removes trailing commas before '}' or ']' outside of strings.
std::string strip_trailing_commas(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool in_string = false;
    for (size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            out.push_back(c);
            if (c == '\\' && i + 1 < s.size()) {
                out.push_back(s[++i]);
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
            out.push_back(c);
            continue;
        }
        if (c == ',') {
            size_t j = i + 1;
            while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
            if (j < s.size() && (s[j] == '}' || s[j] == ']')) continue;  // drop the comma
        }
        out.push_back(c);
    }
    return out;
}

std::optional<std::string> balanced_value_at(std::string_view text, size_t start) {
    char open = text[start];
    char close = open == '{' ? '}' : ']';
    int depth = 0;
    bool in_string = false;
    for (size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == open || (c == '{' || c == '[')) ++depth;
        else if (c == close || (c == '}' || c == ']')) {
            --depth;
            if (depth == 0) return std::string(text.substr(start, i - start + 1));
            if (depth < 0) return std::nullopt;
        }
    }
    return std::nullopt;
}

}  // namespace

std::string extract_json(std::string_view text) {
    for (size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{' && text[i] != '[') continue;
        auto candidate = balanced_value_at(text, i);
        if (!candidate) continue;
        if (nlohmann::json::accept(*candidate)) return *candidate;
        std::string repaired = strip_trailing_commas(*candidate);
        if (nlohmann::json::accept(repaired)) return repaired;
    }
    throw ParseError("no balanced JSON value found in model output");
}

PlannerPlan parse_planner_output(std::string_view text, int scientist_count) {
    nlohmann::json j = nlohmann::json::parse(extract_json(text));
    if (!j.is_object()) throw ParseError("planner output is not a JSON object");
    PlannerPlan plan;
    for (int k = 1; k <= scientist_count; ++k) {
        std::string key = "Agent" + std::to_string(k) + "_instructions";
        if (!j.contains(key)) throw ParseError("planner output missing key " + key);
        std::string instruction = j[key].get<std::string>();
        if (instruction.empty()) throw ParseError("planner key " + key + " is empty");
        plan.instructions.push_back(std::move(instruction));
    }
    return plan;
}

std::vector<Hypothesis> parse_hypotheses(std::string_view text, AgentRole source, int source_index,
                                         int iteration) {
    nlohmann::json j = nlohmann::json::parse(extract_json(text));
    nlohmann::json arr;
    if (j.is_array()) {
        arr = j;
    } else if (j.is_object() && j.contains("hypothesis") && j["hypothesis"].is_array()) {
        arr = j["hypothesis"];
    } else {
        throw ParseError("expected a hypothesis array or {\"hypothesis\": [...]} object");
    }
    std::vector<Hypothesis> out;
    int index = 0;
    for (const auto& e : arr) {
        if (!e.is_object())
            throw ParseError("element " + std::to_string(index) + " is not an object");
        for (const char* field : {"id", "statement", "key_datapoints"}) {
            if (!e.contains(field) || !e[field].is_string() || e[field].get<std::string>().empty())
                throw ParseError("element " + std::to_string(index) + " missing " + field);
        }
        Hypothesis h;
        h.id = e["id"].get<std::string>();
        h.statement = e["statement"].get<std::string>();
        h.key_datapoints = e["key_datapoints"].get<std::string>();
        h.source = source;
        h.source_index = source_index;
        h.iteration = iteration;
        word_index(h.id);  // validates the id shape
        out.push_back(std::move(h));
        ++index;
    }
    return out;
}

std::string serialize_hypotheses(const std::vector<Hypothesis>& hyps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& h : hyps) {
        arr.push_back({{"id", h.id}, {"statement", h.statement}, {"key_datapoints", h.key_datapoints}});
    }
    nlohmann::json j{{"hypothesis", arr}};
    return j.dump(4);
}

// ---------------------------------------------------------------------------
// Ordinals

namespace {

const std::array<const char*, 10> kUnits = {"",     "one", "two",   "three", "four",
                                            "five", "six", "seven", "eight", "nine"};
const std::array<const char*, 10> kTeens = {"ten",     "eleven",  "twelve",    "thirteen",
                                            "fourteen", "fifteen", "sixteen",  "seventeen",
                                            "eighteen", "nineteen"};
const std::array<const char*, 10> kTens = {"", "",      "twenty", "thirty", "forty",
                                           "fifty", "sixty", "seventy", "eighty", "ninety"};

}  // namespace

std::string ordinal_word(int n) {
    if (n <= 0) throw ParseError("ordinal must be positive, got " + std::to_string(n));
    if (n >= 100) return std::to_string(n);
    if (n < 10) return kUnits[n];
    if (n < 20) return kTeens[n - 10];
    std::string word = kTens[n / 10];
    if (n % 10) word += std::string("_") + kUnits[n % 10];
    return word;
}

int word_index(std::string_view id) {
    std::string s(id);
    if (s.rfind("H_", 0) != 0) throw ParseError("hypothesis id '" + s + "' does not start with H_");
    std::string ordinal = s.substr(2);
    if (ordinal.rfind("final_", 0) == 0) ordinal = ordinal.substr(6);
    if (ordinal.empty()) throw ParseError("hypothesis id '" + s + "' has no ordinal");

    if (std::all_of(ordinal.begin(), ordinal.end(),
                    [](unsigned char c) { return std::isdigit(c); })) {
        int v = std::stoi(ordinal);
        if (v <= 0) throw ParseError("hypothesis id '" + s + "' has non-positive ordinal");
        return v;
    }
    std::replace(ordinal.begin(), ordinal.end(), '-', '_');
    for (int n = 1; n < 100; ++n) {
        if (ordinal_word(n) == ordinal) return n;
    }
    throw ParseError("unrecognized ordinal '" + ordinal + "' in hypothesis id '" + s + "'");
}

// ---------------------------------------------------------------------------
// Deduplication

namespace {

std::set<std::string> statement_tokens(std::string_view statement) {
    std::string norm;
    norm.reserve(statement.size());
    for (char c : statement) {
        unsigned char u = static_cast<unsigned char>(c);
        norm.push_back(std::isalnum(u) ? static_cast<char>(std::tolower(u)) : ' ');
    }
    std::set<std::string> tokens;
    std::istringstream ss(norm);
    std::string tok;
    while (ss >> tok) tokens.insert(tok);
    return tokens;
}

}  // namespace

double statement_jaccard(std::string_view a, std::string_view b) {
    auto ta = statement_tokens(a), tb = statement_tokens(b);
    if (ta.empty() && tb.empty()) return 1.0;
    size_t inter = 0;
    for (const auto& t : ta) inter += tb.count(t);
    size_t uni = ta.size() + tb.size() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

DedupResult prefilter_duplicates(const std::vector<Hypothesis>& hyps, double threshold) {
    DedupResult result;
    for (const auto& h : hyps) {
        bool duplicate = std::any_of(result.kept.begin(), result.kept.end(), [&](const Hypothesis& k) {
            return statement_jaccard(k.statement, h.statement) >= threshold;
        });
        (duplicate ? result.dropped : result.kept).push_back(h);
    }
    return result;
}

std::vector<Hypothesis> renumber_final(std::vector<Hypothesis> hyps) {
    for (size_t i = 0; i < hyps.size(); ++i)
        hyps[i].id = "H_final_" + ordinal_word(static_cast<int>(i) + 1);
    return hyps;
}

// ---------------------------------------------------------------------------
// Critic parsing

std::map<std::string, std::string> split_sections(std::string_view text,
                                                  const std::vector<std::string>& ids) {
    struct Anchor {
        size_t pos;
        std::string id;
    };
    std::vector<Anchor> anchors;
    std::string body(text);
    for (const auto& id : ids) {
        size_t pos = body.find(id);
        if (pos != std::string::npos) anchors.push_back({pos, id});
    }
    std::sort(anchors.begin(), anchors.end(),
              [](const Anchor& a, const Anchor& b) { return a.pos < b.pos; });
    std::map<std::string, std::string> sections;
    for (const auto& id : ids) sections[id] = "";
    for (size_t i = 0; i < anchors.size(); ++i) {
        size_t start = anchors[i].pos;
        size_t end = i + 1 < anchors.size() ? anchors[i + 1].pos : body.size();
        sections[anchors[i].id] = body.substr(start, end - start);
    }
    return sections;
}

CriticReview parse_critic(std::string_view text, const std::vector<std::string>& hypothesis_ids) {
    CriticReview review;
    review.text = std::string(text);
    auto sections = split_sections(text, hypothesis_ids);
    for (const auto& id : hypothesis_ids) {
        const std::string& section = sections[id];
        std::string low = to_lower(section);
        CriticReview::Entry entry;
        if (low.find("reject") != std::string::npos) {
            entry.verdict = Verdict::Reject;
        } else if (low.find("weakness") != std::string::npos ||
                   low.find("flaw") != std::string::npos) {
            entry.verdict = Verdict::Revise;
        } else {
            entry.verdict = Verdict::Keep;
        }
        std::string excerpt = section.substr(0, 240);
        if (section.size() > 240) {
            size_t cut = excerpt.find_last_of(" \n");
            if (cut != std::string::npos && cut > 0) excerpt = excerpt.substr(0, cut);
            excerpt += "...";
        }
        entry.excerpt = excerpt;
        review.per_hypothesis[id] = std::move(entry);
    }
    return review;
}

}  // namespace hypogen::agents
