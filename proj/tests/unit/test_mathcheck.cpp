#include <doctest.h>

#include "docstep/errors.hpp"
#include "docstep/mathcheck.hpp"
#include "docstep/stepparse.hpp"
#include "exemplars.hpp"
#include "oracles.hpp"

using namespace docstep;
namespace ex = docstep::exemplars;

namespace {

Decimal eval_text(std::string_view text) { return evaluate(parse_expression(text)); }

Decimal to_decimal(const oracle::Rational& r) {
  return Decimal(boost::multiprecision::numerator(r).str()) / Decimal(boost::multiprecision::denominator(r).str());
}

}  // namespace

TEST_SUITE("mathcheck") {
  TEST_CASE("expressions from the chart exemplars") {
    CHECK(eval_text("103.7-103.13") == Decimal("0.57"));
    CHECK(eval_text("8.12+9.04+9.97") == Decimal("27.13"));
    CHECK(eval_text("5-5") == 0);
    CHECK(eval_text("15 587.77") == Decimal("15587.77"));
    // 65 / 3 by long division: 21.666...
    const Decimal avg = eval_text("(29+19+17)/3");
    CHECK(abs(avg - Decimal("21.666666666666666666")) < Decimal("1e-15"));
    CHECK(eval_text("2*3+4") == 10);
    CHECK(eval_text("2*(3+4)") == 14);
    CHECK(eval_text("10-4-3") == 3);
    CHECK(eval_text("-2*-3") == 6);
  }

  TEST_CASE("malformed expressions") {
    for (const char* bad : {"2++3", "", "3+", "(1+2", "1+2)", "4/0", "abc", "2 3"}) {
      CHECK_THROWS_AS(parse_expression(bad), ParseError);
    }
    CHECK_THROWS_AS(evaluate(parse_expression("1/(2-2)")), EvalError);
  }

  TEST_CASE("operand and operator counts") {
    Expr e = parse_expression("29 + 19 + 17");
    CHECK(e.operand_count() == 3);
    CHECK(e.operator_count() == 2);
  }

  TEST_CASE("random expressions agree with an exact rational oracle") {
    std::mt19937_64 rng(7);
    int checked = 0;
    while (checked < 500) {
      oracle::Node tree = oracle::random_tree(rng, 4);
      if (!oracle::well_defined(tree)) continue;
      const std::string text = oracle::render(tree, rng);
      const Decimal expected = to_decimal(oracle::eval(tree));
      const Decimal got = eval_text(text);
      const Decimal scale = std::max(Decimal(abs(expected)), Decimal(1));
      INFO(text);
      CHECK(abs(got - expected) / scale <= Decimal("1e-9"));
      ++checked;
    }
  }

  TEST_CASE("claims in a step") {
    auto claims = extract_claims(
        "Calculate the difference between the green and blue graphs for each year: In 2017: 65-56=9, in 2018: "
        "70-41=29, in 2019: 69-50=19");
    REQUIRE(claims.size() == 3);
    CHECK(claims[0].lhs == "65-56");
    CHECK(claims[0].rhs == 9);
    CHECK(claims[1].lhs == "70-41");
    CHECK(claims[2].lhs == "69-50");
    CHECK(claims[2].rhs == 19);

    CHECK(extract_claims("The value of Lamb is 103.7").empty());

    auto avg = extract_claims(
        "Perform the calculation of the average of all the values in the green bars: 29 + 19 + 17 = 21.6");
    REQUIRE(avg.size() == 1);
    CHECK(avg[0].context_hint == ContextHint::Average);
    CHECK(avg[0].rhs == Decimal("21.6"));
  }

  TEST_CASE("claim verification") {
    NumericClaim c = extract_claims("103.7-103.13=0.57").at(0);
    CHECK(verify_claim(c, ToleranceRule::claim_default()).pass);

    NumericClaim wrong = extract_claims("103.7-103.13=0.75").at(0);
    CheckResult r = verify_claim(wrong, ToleranceRule::claim_default());
    CHECK_FALSE(r.pass);
    CHECK(r.computed == Decimal("0.57"));

    NumericClaim avg = extract_claims("the average of the values: 29 + 19 + 17 = 21.6").at(0);
    CheckResult repaired = verify_claim(avg, ToleranceRule::claim_default());
    CHECK(repaired.pass);
    CHECK(repaired.repaired);
    // 65/3 = 21.667; |21.667 - 21.6| / 21.667 = 0.31%
    CHECK(abs(repaired.computed - Decimal(65) / 3) < Decimal("1e-20"));

    NumericClaim sum = extract_claims("the total: 29 + 19 + 17 = 21.6").at(0);
    CHECK_FALSE(verify_claim(sum, ToleranceRule::claim_default()).pass);
  }

  TEST_CASE("sort claims") {
    auto sorted = detect_sort_claim(
        R"(Sort all values: {"Montenegro":16111.01, "Czechia": 15 587.77, "Slovakia":14259.69, "Slovenia": 12276, "Sweden": 10546.7})");
    REQUIRE(sorted);
    CHECK(sorted->entries.size() == 5);
    CHECK(verify_sort_claim(*sorted).pass);

    auto swapped = detect_sort_claim(
        R"(Sort all values: {"Montenegro":16111.01, "Czechia": 15 587.77, "Slovakia":14259.69, "Sweden": 10546.7, "Slovenia": 12276})");
    REQUIRE(swapped);
    CHECK_FALSE(verify_sort_claim(*swapped).pass);

    auto single = detect_sort_claim(R"(Sort the values: {"A": 3})");
    REQUIRE(single);
    CHECK(verify_sort_claim(*single).pass);

    CHECK_FALSE(detect_sort_claim(R"(Identify the values: {"A": 3, "B": 4})").has_value());
    CHECK_FALSE(detect_sort_claim(R"(Sort: {"Characteristic": "US, EU", "More": "29, 19"})").has_value());

    auto ascending = detect_sort_claim(R"(Sort in ascending order: {"A": 1, "B": 2, "C": 3})");
    REQUIRE(ascending);
    CHECK(ascending->direction == SortClaim::Direction::Ascending);
    CHECK(verify_sort_claim(*ascending).pass);
  }

  TEST_CASE("chain verdicts for the five exemplars") {
    const ToleranceRule tol = ToleranceRule::claim_default();
    ChainReport e1 = verify_chain(parse_chart_chain(ex::kChart1), tol);
    CHECK(e1.verdict == ChainReport::Verdict::Pass);
    CHECK(e1.claims_checked() == 1);
    CHECK(e1.final_answer_checked);

    ChainReport e2 = verify_chain(parse_chart_chain(ex::kChart2), tol);
    CHECK(e2.verdict == ChainReport::Verdict::Pass);
    CHECK(e2.claims_checked() == 3);
    CHECK_FALSE(e2.final_answer_checked);

    ChainReport e3 = verify_chain(parse_chart_chain(ex::kChart3), tol);
    CHECK(e3.verdict == ChainReport::Verdict::Pass);
    CHECK(e3.per_step.at(1).repaired == 1);

    ChainReport e4 = verify_chain(parse_chart_chain(ex::kChart4), tol);
    CHECK(e4.verdict == ChainReport::Verdict::Pass);
    CHECK(e4.claims_checked() == 1);

    ChainReport e5 = verify_chain(parse_chart_chain(ex::kChart5), tol);
    CHECK(e5.verdict == ChainReport::Verdict::Pass);
  }

  TEST_CASE("a wrong final answer fails the chain") {
    ReasoningChain c = parse_chart_chain(ex::kChart1);
    c.steps.back().text = "The final calculation result is obtained: 0.75";
    c.final_answer = "0.75";
    CHECK(verify_chain(c, ToleranceRule::claim_default()).verdict == ChainReport::Verdict::Fail);
  }

  TEST_CASE("chains without claims") {
    ReasoningChain c{{{1, "The sky is blue"}}, "blue"};
    CHECK(verify_chain(c, ToleranceRule::claim_default()).verdict == ChainReport::Verdict::NoClaims);
  }

  TEST_CASE("serial and parallel batch verification agree") {
    std::vector<ReasoningChain> chains;
    for (int i = 0; i < 40; ++i) {
      for (const auto* text : {&ex::kChart1, &ex::kChart2, &ex::kChart3, &ex::kChart4, &ex::kChart5}) {
        chains.push_back(parse_chart_chain(*text));
      }
      chains.push_back({{{1, "1+1=" + std::to_string(i % 3 + 1)}}, std::to_string(i % 3 + 1)});
    }
    auto serial = verify_chains_serial(chains, ToleranceRule::claim_default());
    auto parallel = verify_chains_parallel(chains, ToleranceRule::claim_default(), 4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) CHECK(serial[i].to_json() == parallel[i].to_json());
  }
}
