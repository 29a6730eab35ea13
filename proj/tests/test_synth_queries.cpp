#include <catch2/catch_amalgamated.hpp>

#include "evoskill/synth_queries.hpp"

using namespace evoskill;

namespace {

SkillRecord sample_skill() {
    SkillRecord s;
    s.id = "csv-wrangler";
    s.name = "CSV wrangler";
    s.description = "Cleans and reshapes CSV files.";
    s.spec_text = "# CSV wrangler\n\nUse pandas-style operations.\n";
    return s;
}

const char* kGoodResponse = R"({
  "positive_queries": [
    {"query": "merge two csv exports by customer id", "why_fit": "reshaping"},
    {"query": "drop duplicate rows from a big csv", "why_fit": "cleaning"}
  ],
  "negative_queries": [
    {"query": "plot csv columns as a bar chart", "why_relevant": "csv domain", "why_useless": "visualisation"}
  ]
})";

}  // namespace

TEST_CASE("prompt template is filled verbatim") {
    auto s = sample_skill();
    std::vector<QueryPair> existing = {
        {"csv-wrangler", "already accepted positive", Polarity::positive, ""},
        {"csv-wrangler", "already accepted negative", Polarity::hard_negative, ""},
    };
    auto prompt = build_synth_prompt(s, 3, 2, existing, {"csv", "tables"});
    CHECK(prompt.find("- name: CSV wrangler") != std::string::npos);
    CHECK(prompt.find("- description: Cleans and reshapes CSV files.") != std::string::npos);
    CHECK(prompt.find("- keywords: csv, tables") != std::string::npos);
    CHECK(prompt.find("- 3 positive queries") != std::string::npos);
    CHECK(prompt.find("- 2 hard negative queries") != std::string::npos);
    CHECK(prompt.find("- already accepted positive") != std::string::npos);
    CHECK(prompt.find("- already accepted negative") != std::string::npos);
    // no placeholder survives, and the literal JSON schema braces do
    CHECK(prompt.find("{skill_name}") == std::string::npos);
    CHECK(prompt.find("{need_pos}") == std::string::npos);
    CHECK(prompt.find("\"positive_queries\"") != std::string::npos);
    // fixed instruction lines survive verbatim
    CHECK(prompt.find("The router state is ONLY a text goal (routing_goal).") != std::string::npos);
    CHECK(prompt.find("- Must be \"relevant but useless\" for THIS target skill.") !=
          std::string::npos);
    CHECK(prompt.find("Return ONLY JSON in this schema:") != std::string::npos);
}

TEST_CASE("empty existing lists render as (none)") {
    auto prompt = build_synth_prompt(sample_skill(), 1, 1, {});
    CHECK(prompt.find("(none)") != std::string::npos);
}

TEST_CASE("well-formed response is parsed into pairs") {
    ScriptedKernel k;
    k.set_default(kGoodResponse);
    auto s = sample_skill();
    auto pairs = generate_synthetic_queries(s, k, 2, 1, {});
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].skill_id == "csv-wrangler");
    CHECK(pairs[0].polarity == Polarity::positive);
    CHECK(pairs[0].query == "merge two csv exports by customer id");
    CHECK(pairs[0].rationale == "reshaping");
    CHECK(pairs[2].polarity == Polarity::hard_negative);
    CHECK(pairs[2].rationale == "csv domain; visualisation");
}

TEST_CASE("JSON wrapped in prose is still extracted") {
    ScriptedKernel k;
    k.set_default(std::string("Sure, here you go:\n") + kGoodResponse + "\nHope that helps!");
    auto pairs = generate_synthetic_queries(sample_skill(), k, 2, 1, {});
    CHECK(pairs.size() == 3);
}

TEST_CASE("duplicates of already-accepted queries are dropped") {
    ScriptedKernel k;
    k.set_default(kGoodResponse);
    std::vector<QueryPair> existing = {
        {"csv-wrangler", "merge two csv exports by customer id", Polarity::positive, ""}};
    auto pairs = generate_synthetic_queries(sample_skill(), k, 2, 1, existing);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].query == "drop duplicate rows from a big csv");
}

TEST_CASE("in-response duplicates are kept once") {
    ScriptedKernel k;
    k.set_default(R"({"positive_queries":[{"query":"same"},{"query":"same"}],
                      "negative_queries":[]})");
    auto pairs = generate_synthetic_queries(sample_skill(), k, 2, 0, {});
    CHECK(pairs.size() == 1);
}

TEST_CASE("persistent garbage exhausts retries") {
    ScriptedKernel k;
    k.set_default("no json here at all");
    CHECK_THROWS(generate_synthetic_queries(sample_skill(), k, 1, 1, {}, 1));
    k.set_default(R"({"wrong_key": []})");
    CHECK_THROWS(generate_synthetic_queries(sample_skill(), k, 1, 1, {}, 1));
}

TEST_CASE("judge filter keeps accepted pairs and rejects the rest") {
    std::vector<QueryPair> pairs = {
        {"csv-wrangler", "good query", Polarity::positive, ""},
        {"csv-wrangler", "bad query", Polarity::positive, ""},
        {"csv-wrangler", "weird query", Polarity::hard_negative, ""},
    };
    ScriptedKernel judge;
    judge.add_rule({"Query: good query", "ACCEPT\nlooks on-target"});
    judge.add_rule({"Query: bad query", "REJECT\noff-domain"});
    judge.add_rule({"Query: weird query", "hmm, not sure"});
    std::vector<std::string> warnings;
    auto kept = judge_filter_queries(pairs, sample_skill(), judge, &warnings);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].query == "good query");
    REQUIRE(warnings.size() == 1);  // malformed verdict rejects, with a warning
    CHECK(warnings[0].find("weird query") != std::string::npos);
}

TEST_CASE("judge prompt includes the full skill artefacts") {
    auto s = sample_skill();
    s.prompt_files["clean.md"] = "unique-prompt-marker";
    s.script_files["run.py"] = "unique-script-marker";
    ScriptedKernel judge;
    judge.add_rule({"unique-prompt-marker", "ACCEPT", "last_user", "unique-script-marker"});
    judge.set_default("REJECT");
    auto kept = judge_filter_queries({{"csv-wrangler", "q", Polarity::positive, ""}}, s, judge);
    CHECK(kept.size() == 1);
}
