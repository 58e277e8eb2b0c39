#include <doctest.h>

#include <algorithm>

#include "support.hpp"

#include "hypogen/agents.hpp"

using namespace hypogen::agents;

namespace {

PromptTemplate load_template(AgentRole role, const char* file) {
    return PromptTemplate::load(role, testsupport::prompts_dir() / file);
}

}  // namespace

TEST_CASE("shipped templates carry the role prompts and their slots") {
    auto analyst = load_template(AgentRole::DataAnalyst, "data_analyst.txt");
    CHECK(analyst.body.find("You are a sophisticated analytical scientist specializing in "
                            "astrobiological data analysis") != std::string::npos);
    CHECK(analyst.body.find("Critic Feedback:") != std::string::npos);
    CHECK(analyst.body.find("{SELECTED_PAPERS}") != std::string::npos);
    CHECK(analyst.body.find("{INPUT_DATA}") != std::string::npos);
    CHECK(analyst.body.find("{CRITIC_FEEDBACK}") != std::string::npos);

    auto planner = load_template(AgentRole::Planner, "planner.txt");
    CHECK(planner.body.find("You are an experienced scientific planner and coordinator") !=
          std::string::npos);
    CHECK(planner.body.find("Agent1_instructions") != std::string::npos);
    CHECK(planner.body.find("Ensure the JSON is properly formatted.") != std::string::npos);

    auto scientist = load_template(AgentRole::Scientist, "scientist.txt");
    CHECK(scientist.body.find("You are Scientist {AGENT_ID}.") != std::string::npos);
    CHECK(scientist.body.find("Format it like H_one, H_two, etc.") != std::string::npos);

    auto accumulator = load_template(AgentRole::Accumulator, "accumulator.txt");
    CHECK(accumulator.body.find("H_final_one, H_final_two") != std::string::npos);
    CHECK(accumulator.body.find("Don't change the hypothesis statement") != std::string::npos);

    auto reviewer = load_template(AgentRole::LiteratureReviewer, "literature_review.txt");
    CHECK(reviewer.body.find("specialized literature review agent") != std::string::npos);

    auto critic = load_template(AgentRole::Critic, "critic.txt");
    CHECK(critic.body.find("you should discard the hypothesis and generate a new one") !=
          std::string::npos);
}

TEST_CASE("render keeps the literal critic-feedback header with an empty binding") {
    auto analyst = load_template(AgentRole::DataAnalyst, "data_analyst.txt");
    std::string rendered = render_prompt(analyst, {{"SELECTED_PAPERS", "PAPERS"},
                                                   {"INPUT_DATA", "DATA"},
                                                   {"CRITIC_FEEDBACK", ""}});
    CHECK(rendered.find("Critic Feedback:\n\n\n") != std::string::npos);
    CHECK(rendered.find('{') == std::string::npos);  // analyst body has no JSON example
    for (const auto& slot : known_slots())
        CHECK(rendered.find("{" + slot + "}") == std::string::npos);
}

TEST_CASE("render substitutes the scientist index") {
    auto scientist = load_template(AgentRole::Scientist, "scientist.txt");
    std::string rendered = render_prompt(scientist, {{"AGENT_ID", "2"},
                                                     {"AGENT_INSTRUCTION", "check sulfur"},
                                                     {"SELECTED_PAPERS", "papers"},
                                                     {"INPUT_DATA", "data"}});
    CHECK(rendered.find("You are Scientist 2.") != std::string::npos);
    CHECK(rendered.find("Instructions: check sulfur.") != std::string::npos);
    // The JSON example braces in the template survive rendering.
    CHECK(rendered.find("\"hypothesis\": [") != std::string::npos);
}

TEST_CASE("render equals straight textual substitution") {
    PromptTemplate t{AgentRole::Planner, "A {INPUT_DATA} B {DATA_ANALYSIS} C {INPUT_DATA}"};
    CHECK(render_prompt(t, {{"INPUT_DATA", "x"}, {"DATA_ANALYSIS", "y"}}) == "A x B y C x");
}

TEST_CASE("unbound slot error names the slot") {
    PromptTemplate t{AgentRole::Planner, "needs {DATA_ANALYSIS}"};
    CHECK_THROWS_WITH_AS(render_prompt(t, {}), doctest::Contains("DATA_ANALYSIS"), ParseError);
}

TEST_CASE("extract_json unwraps fences and prose") {
    CHECK(extract_json("```json\n{\"a\":1}\n```") == "{\"a\":1}");
    CHECK(extract_json("Here is my plan: {\"Agent1_instructions\": \"x\"} Hope this helps") ==
          "{\"Agent1_instructions\": \"x\"}");
    CHECK(extract_json("[1,2,3] trailing") == "[1,2,3]");
    CHECK_THROWS_AS(extract_json("no json here"), ParseError);
    CHECK_THROWS_AS(extract_json("{ unbalanced"), ParseError);
}

TEST_CASE("extract_json repairs trailing commas") {
    std::string repaired = extract_json("{\"hypothesis\": [{\"id\": \"H_one\",}],}");
    CHECK(nlohmann::json::parse(repaired)["hypothesis"][0]["id"] == "H_one");
}

TEST_CASE("extract_json skips a brace in prose before the real object") {
    std::string out = extract_json("weird { prose\n{\"a\": 2}");
    CHECK(nlohmann::json::parse(out)["a"] == 2);
}

TEST_CASE("planner output parses in key order") {
    std::string text = R"({"Agent2_instructions": "b", "Agent1_instructions": "a",
                           "Agent3_instructions": "naphthalene (ID 1)"})";
    auto plan = parse_planner_output(text, 3);
    REQUIRE(plan.instructions.size() == 3);
    CHECK(plan.instructions[0] == "a");
    CHECK(plan.instructions[1] == "b");
    CHECK(plan.instructions[2] == "naphthalene (ID 1)");
}

TEST_CASE("planner output missing a key names it") {
    std::string text = R"({"Agent1_instructions": "a", "Agent2_instructions": "b"})";
    CHECK_THROWS_WITH_AS(parse_planner_output(text, 3), doctest::Contains("Agent3_instructions"),
                         ParseError);
    CHECK_THROWS_AS(parse_planner_output("no json", 3), ParseError);
}

TEST_CASE("hypotheses parse from both printed shapes") {
    const char* bare = R"([
        {"id": "H_one", "statement": "S one", "key_datapoints": "IDs 2, 8"},
        {"id": "H_two", "statement": "S two", "key_datapoints": "ID 12"}
    ])";
    const char* wrapped = R"({"hypothesis": [
        {"id": "H_one", "statement": "S one", "key_datapoints": "IDs 2, 8"},
        {"id": "H_two", "statement": "S two", "key_datapoints": "ID 12"}
    ]})";
    auto a = parse_hypotheses(bare, AgentRole::Scientist, 1, 1);
    auto b = parse_hypotheses(wrapped, AgentRole::Scientist, 1, 1);
    CHECK(a == b);
    REQUIRE(a.size() == 2);
    CHECK(a[0].statement == "S one");
    CHECK(a[1].id == "H_two");
}

TEST_CASE("hypothesis element errors name index and field") {
    CHECK_THROWS_WITH_AS(
        parse_hypotheses(R"([{"id": "H_one", "statement": "s"}])", AgentRole::Scientist, 1, 1),
        doctest::Contains("element 0 missing key_datapoints"), ParseError);
    CHECK_THROWS_AS(parse_hypotheses(R"({"not_hypothesis": 1})", AgentRole::Scientist, 1, 1),
                    ParseError);
}

TEST_CASE("serialization emits the wrapped shape and round-trips") {
    std::vector<Hypothesis> hyps = {{"H_one", "statement A", "ID 1", AgentRole::Scientist, 1, 3},
                                    {"H_two", "statement B", "ID 2", AgentRole::Scientist, 1, 3}};
    std::string wire = serialize_hypotheses(hyps);
    CHECK(nlohmann::json::parse(wire).contains("hypothesis"));
    auto back = parse_hypotheses(wire, AgentRole::Scientist, 1, 3);
    CHECK(back == hyps);
}

TEST_CASE("word_index reads word ordinals and numeral drift") {
    CHECK(word_index("H_one") == 1);
    CHECK(word_index("H_final_two") == 2);
    CHECK(word_index("H_final_twelve") == 12);
    CHECK(word_index("H_twenty_one") == 21);
    CHECK(word_index("H_ninety_nine") == 99);
    CHECK(word_index("H_3") == 3);
    CHECK(word_index("H_final_120") == 120);
    CHECK_THROWS_AS(word_index("H_zero"), ParseError);
    CHECK_THROWS_AS(word_index("H_"), ParseError);
    CHECK_THROWS_AS(word_index("hypothesis one"), ParseError);
    CHECK_THROWS_AS(word_index("H_oneish"), ParseError);
}

TEST_CASE("ordinal words round-trip through word_index for 1..99") {
    for (int n = 1; n <= 99; ++n) {
        CHECK(word_index("H_" + ordinal_word(n)) == n);
        CHECK(word_index("H_final_" + ordinal_word(n)) == n);
    }
}

TEST_CASE("renumber_final rewrites ids in order and nothing else") {
    std::vector<Hypothesis> hyps;
    for (int i = 0; i < 12; ++i)
        hyps.push_back({"H_one", "statement " + std::to_string(i), "ID " + std::to_string(i),
                        AgentRole::Scientist, 1 + i % 3, 1});
    auto out = renumber_final(hyps);
    REQUIRE(out.size() == 12);
    CHECK(out.front().id == "H_final_one");
    CHECK(out.back().id == "H_final_twelve");
    for (size_t k = 0; k < out.size(); ++k) {
        CHECK(word_index(out[k].id) == static_cast<int>(k) + 1);
        CHECK(out[k].statement == hyps[k].statement);
        CHECK(out[k].key_datapoints == hyps[k].key_datapoints);
    }
    CHECK(renumber_final({}).empty());
}

TEST_CASE("duplicate pre-filter: byte-identical statements drop") {
    std::vector<Hypothesis> hyps = {{"H_one", "The same statement.", "k", AgentRole::Scientist, 1, 1},
                                    {"H_one", "The same statement.", "k", AgentRole::Scientist, 2, 1},
                                    {"H_two", "Entirely different words here.", "k",
                                     AgentRole::Scientist, 2, 1}};
    auto result = prefilter_duplicates(hyps);
    CHECK(result.kept.size() == 2);
    REQUIRE(result.dropped.size() == 1);
    CHECK(result.dropped[0].source_index == 2);
}

TEST_CASE("jaccard matches the hand-computed 9/11 example") {
    // Token sets of size 10 each sharing 9 tokens: J = 9/11.
    std::string a = "a b c d e f g h i j";
    std::string b = "a b c d e f g h i k";
    CHECK(statement_jaccard(a, b) == doctest::Approx(9.0 / 11.0));
    auto result = prefilter_duplicates({{"H_one", a, "k", AgentRole::Scientist, 1, 1},
                                        {"H_two", b, "k", AgentRole::Scientist, 2, 1}},
                                       0.8);
    CHECK(result.kept.size() == 1);
    CHECK(result.dropped.size() == 1);
    // At the default 0.9 threshold the same pair survives.
    auto strict = prefilter_duplicates({{"H_one", a, "k", AgentRole::Scientist, 1, 1},
                                        {"H_two", b, "k", AgentRole::Scientist, 2, 1}});
    CHECK(strict.kept.size() == 2);
}

TEST_CASE("normalization ignores case, punctuation and spacing") {
    CHECK(statement_jaccard("Sulfur, in space!", "sulfur   in SPACE") == doctest::Approx(1.0));
}

TEST_CASE("prefilter partitions the input") {
    std::mt19937 rng(3);
    std::vector<Hypothesis> hyps;
    const char* words[] = {"alpha", "beta", "gamma", "delta", "epsilon"};
    std::uniform_int_distribution<int> len(1, 5), pick(0, 4);
    for (int i = 0; i < 30; ++i) {
        std::string statement;
        int n = len(rng);
        for (int w = 0; w < n; ++w) statement += std::string(words[pick(rng)]) + " ";
        hyps.push_back({"H_one", statement, "k", AgentRole::Scientist, 1, 1});
    }
    auto result = prefilter_duplicates(hyps);
    CHECK(result.kept.size() + result.dropped.size() == hyps.size());
    // Every kept/dropped statement is one of the inputs.
    for (const auto& h : result.kept) {
        CHECK(std::any_of(hyps.begin(), hyps.end(),
                          [&](const Hypothesis& x) { return x.statement == h.statement; }));
    }
}

TEST_CASE("critic verdicts: reject, revise, keep") {
    std::string critique =
        "Overall remarks.\n\n"
        "H_final_one - strengths: clear pattern. Ignores preservation effects but remains "
        "sound.\n\n"
        "H_final_two - Critical Flaws: correlation is not causation. This hypothesis should be "
        "rejected due to the sample overlap problem.\n\n"
        "H_final_three - Critical Weaknesses: mechanism asserted without evidence.\n";
    auto review = parse_critic(critique, {"H_final_one", "H_final_two", "H_final_three"});
    CHECK(review.per_hypothesis.at("H_final_one").verdict == Verdict::Keep);
    CHECK(review.per_hypothesis.at("H_final_two").verdict == Verdict::Reject);
    CHECK(review.per_hypothesis.at("H_final_three").verdict == Verdict::Revise);
    CHECK(review.text == critique);
}

TEST_CASE("critique naming no hypothesis keeps everything") {
    auto review = parse_critic("Looks fine in general.", {"H_final_one", "H_final_two"});
    CHECK(review.per_hypothesis.size() == 2);
    for (const auto& [id, entry] : review.per_hypothesis) CHECK(entry.verdict == Verdict::Keep);
}

TEST_CASE("split_sections attributes text between id mentions") {
    auto sections = split_sections("preamble H_final_one: aaa H_final_two: bbb",
                                   {"H_final_one", "H_final_two"});
    CHECK(sections["H_final_one"].find("aaa") != std::string::npos);
    CHECK(sections["H_final_one"].find("bbb") == std::string::npos);
    CHECK(sections["H_final_two"].find("bbb") != std::string::npos);
}
