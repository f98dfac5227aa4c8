#include <doctest.h>

#include "docstep/errors.hpp"
#include "docstep/stepparse.hpp"
#include "exemplars.hpp"

using namespace docstep;
namespace ex = docstep::exemplars;

TEST_SUITE("stepparse") {
  TEST_CASE("rationale exemplar table") {
    StepTable t = parse_step_table(ex::kRationaleResponse);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].index == 1);
    CHECK(t.rows[0].payload == R"({"SARS": "10%", "MERS": "34%", "EBOLA": "50%+"})");
    CHECK(t.rows[1].payload == "EBOLA has the highest mortality rate.");
  }

  TEST_CASE("question generation exemplar table") {
    StepTable t = parse_step_table(ex::kQaGenResponse);
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0].payload == "Which disease has the highest mortality rate?");
    CHECK(t.rows[2].index == 3);
  }

  TEST_CASE("malformed tables") {
    CHECK_THROWS_AS(parse_step_table("no table here"), ParseError);
    CHECK_THROWS_AS(parse_step_table("| step | output |\n| 2 | x |\n"), ParseError);
    CHECK_THROWS_AS(parse_step_table("| step | output |\n| 1 | x |\n| 1 | y |\n"), ParseError);
    CHECK_THROWS_AS(parse_step_table("| step | output |\n| 1 |  |\n"), ParseError);
    CHECK_THROWS_AS(parse_step_table("| step | output |\n"), ParseError);
  }

  TEST_CASE("header and separator tolerance") {
    StepTable t = parse_step_table("|Step|Output|\n|---|---|\n|1| a |\n|2|b|\n");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1].payload == "b");
  }

  TEST_CASE("evidence maps") {
    EvidenceMap m = parse_evidence_map(R"({"SARS": "10%", "MERS": "34%", "EBOLA": "50%+"})");
    REQUIRE(m.entries.size() == 3);
    CHECK(m.entries[0] == std::pair<std::string, std::string>{"SARS", "10%"});
    CHECK(m.entries[2] == std::pair<std::string, std::string>{"EBOLA", "50%+"});
    REQUIRE(m.find("MERS"));
    CHECK(*m.find("MERS") == "34%");

    EvidenceMap frags = parse_evidence_map("ctx-A # ctx-B");
    REQUIRE(frags.entries.size() == 2);
    CHECK(frags.entries[0] == std::pair<std::string, std::string>{"frag1", "ctx-A"});
    CHECK(frags.entries[1] == std::pair<std::string, std::string>{"frag2", "ctx-B"});

    EvidenceMap plain = parse_evidence_map("plain sentence");
    REQUIRE(plain.entries.size() == 1);
    CHECK(plain.entries[0].second == "plain sentence");

    EvidenceMap countries = parse_evidence_map(R"({"Montenegro":16111.01, "Czechia": 15 587.77, "Total": 1,234})");
    REQUIRE(countries.entries.size() == 3);
    CHECK(countries.entries[1].second == "15 587.77");
    CHECK(countries.entries[2].second == "1,234");
  }

  TEST_CASE("evidence map errors") {
    CHECK_THROWS_AS(parse_evidence_map(R"({"a": "1")"), ParseError);
    CHECK_THROWS_AS(parse_evidence_map("{}"), ParseError);
    CHECK_THROWS_AS(parse_evidence_map(R"({"a": 1, "a": 2})"), ParseError);
  }

  TEST_CASE("chart chains") {
    ReasoningChain c1 = parse_chart_chain(ex::kChart1);
    CHECK(c1.steps.size() == 3);
    CHECK(c1.final_answer == "0.57");
    CHECK(c1.steps[1].text ==
          "Perform the calculation of the difference in value between Lamb and Corn: 103.7-103.13=0.57");

    ReasoningChain c2 = parse_chart_chain(ex::kChart2);
    CHECK(c2.steps.size() == 6);
    CHECK(c2.final_answer == "2017");
    CHECK(c2.steps[1].text.find("In 2019, the green graph is at 69") != std::string::npos);

    CHECK(parse_chart_chain(ex::kChart4).final_answer == "Slovakia");
    CHECK(parse_chart_chain(ex::kChart5).final_answer == "27.13");
    CHECK(parse_chart_question(ex::kChart4) == "Which country has the third highest rate of cases in Europe?");
    CHECK(parse_chart_question(ex::kChart5) == "What is the sum of all the blue bar?");
  }

  TEST_CASE("chart chain errors") {
    CHECK_THROWS_AS(parse_chart_chain("Question: x\nAnswer: the value is 3"), ParseError);
    CHECK_THROWS_AS(parse_chart_chain("Answer:\nStep1. a\nStep3. b"), ParseError);
  }

  TEST_CASE("final answer extraction") {
    CHECK(extract_final_answer(ex::kQaGenResponse) == "EBOLA");
    CHECK(extract_final_answer(ex::kChart5) == "27.13");
    CHECK(extract_final_answer("| step | output |\n| 1 | a |\n| 2 | forty two |\n") == "forty two");
    CHECK(extract_final_answer("The answer is: 1.\nmore\nThe answer is: 2.") == "2");
    CHECK_THROWS_AS(extract_final_answer("nothing structured"), ParseError);
  }

  TEST_CASE("verdict exemplar") {
    Verdict v = parse_verdict(ex::kJudgeResponse);
    CHECK_FALSE(v.is_faithful);
    CHECK(v.is_include);
    CHECK_FALSE(v.result);
    CHECK_FALSE(v.mismatch);
  }

  TEST_CASE("verdict recomputes the conjunction for every combination") {
    for (bool f : {false, true}) {
      for (bool i : {false, true}) {
        for (bool stated : {false, true}) {
          auto word = [](bool b) { return b ? "True" : "False"; };
          std::string text = std::string("| step | output |\n| 1 | ") + word(f) + " |\n| 2 | " + word(i) +
                             " |\nThe answer is: " + word(stated);
          Verdict v = parse_verdict(text);
          CHECK(v.result == (f && i));
          CHECK(v.mismatch == (stated != (f && i)));
        }
      }
    }
  }

  TEST_CASE("verdict errors") {
    CHECK_THROWS_AS(parse_verdict("| step | output |\n| 1 | maybe |\n| 2 | True |\n"), ParseError);
    CHECK_THROWS_AS(parse_verdict("| step | output |\n| 1 | True |\n"), ParseError);
    CHECK_THROWS_AS(parse_verdict("True"), ParseError);
  }

  TEST_CASE("render then parse") {
    std::vector<StepRow> rows{{1, "a"}, {2, "b c"}};
    CHECK(parse_step_table(render_step_table(rows)).rows == rows);
    ReasoningChain c = parse_chart_chain(ex::kChart1);
    ReasoningChain again = parse_chart_chain(render_chart_chain(c, "What is it?"));
    CHECK(again.steps == c.steps);
  }

  TEST_CASE("punctuation and trimming") {
    CHECK(strip_trailing_punctuation("EBOLA.") == "EBOLA");
    CHECK(strip_trailing_punctuation("\"x\",") == "\"x");
    CHECK(trim("  a b \n") == "a b");
  }
}
