#include <doctest.h>

#include <fstream>

#include "docstep/errors.hpp"
#include "docstep/templates.hpp"
#include "synthetic.hpp"

using namespace docstep;

TEST_SUITE("templates") {
  TEST_CASE("rationale template places the question after its header") {
    const std::string text =
        render(TemplateId::RationaleGen, {{"question", "Which disease has the highest mortality rate?"}, {"answer", "EBOLA"}});
    const auto header = text.find("###Question");
    REQUIRE(header != std::string::npos);
    const auto q = text.find("Which disease has the highest mortality rate?", header);
    CHECK(q != std::string::npos);
    CHECK(text.find("###Gold_answer", q) != std::string::npos);
    CHECK(text.find("{evidence}") != std::string::npos);
    CHECK(text.find("[[") == std::string::npos);
  }

  TEST_CASE("checker template") {
    const std::string text = render(TemplateId::Checker, {{"qa", "Q answer: A"}, {"rationale", "| step | output |"}});
    CHECK(text.find("assess whether the evidence is faithful") != std::string::npos);
    CHECK(text.find("{is_faithful}") != std::string::npos);
    CHECK(text.find("Q answer: A") != std::string::npos);
  }

  TEST_CASE("missing slot names the slot") {
    try {
      render(TemplateId::QaGen, {});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("constraint") != std::string::npos);
    }
  }

  TEST_CASE("slot values are not re-expanded") {
    const std::string text = render(TemplateId::Classifier, {{"question", "what is [[question]]?"}});
    CHECK(text.find("what is [[question]]?") != std::string::npos);
  }

  TEST_CASE("required slots") {
    TemplateRegistry r;
    CHECK(r.get(TemplateId::RationaleGen).required_slots == std::set<std::string>{"answer", "question"});
    CHECK(r.get(TemplateId::QaGen).required_slots == std::set<std::string>{"constraint"});
    CHECK(r.get(TemplateId::ChartFewshot).required_slots.empty());
    CHECK(r.get(TemplateId::Checker).required_slots == std::set<std::string>{"qa", "rationale"});
    CHECK(r.get(TemplateId::Classifier).required_slots == std::set<std::string>{"question"});
    CHECK(slots_in("[[b]] [[a]] [[b]] [[Not]] {x}") == std::vector<std::string>{"b", "a"});
  }

  TEST_CASE("qa template numbers its steps 1, 2, 3") {
    const std::string text = render(TemplateId::QaGen, {{"constraint", "The question should require counting."}});
    CHECK(text.find("1. In the first step") != std::string::npos);
    CHECK(text.find("2. In the second step") != std::string::npos);
    CHECK(text.find("3. In the third step") != std::string::npos);
    CHECK(text.find("| 3 | {answer} |") != std::string::npos);
  }

  TEST_CASE("constraint lists") {
    auto doc = constraint_list(DatasetKind::DocVQA).constraints;
    REQUIRE(doc.size() == 3);
    CHECK(doc[0].find("spatial") != std::string::npos);
    CHECK(doc[1].find("counting") != std::string::npos);
    CHECK(doc[2].find("reasoning") != std::string::npos);
    auto info = constraint_list(DatasetKind::InfoVQA).constraints;
    CHECK(info.size() == 6);
    CHECK(info[3] == "The question should require color understanding of the image.");
    auto chart = constraint_list(DatasetKind::ChartQA).constraints;
    CHECK(chart.size() == 20);
    CHECK(std::find(chart.begin(), chart.end(),
                    "The question should require math reasoning about average and max.") != chart.end());
  }

  TEST_CASE("overrides must keep the built-in slots") {
    auto dir = docstep::testing::scratch_dir("templates-override");
    std::ofstream(dir / "classifier.txt") << "Label this: [[question]]\n";
    TemplateRegistry r = TemplateRegistry::with_overrides(dir);
    CHECK(r.render(TemplateId::Classifier, {{"question", "Q?"}}) == "Label this: Q?");
    std::ofstream(dir / "checker.txt") << "only [[qa]]";
    CHECK_THROWS_AS(TemplateRegistry::with_overrides(dir), ValidationError);
  }

  TEST_CASE("ids round trip") {
    for (TemplateId id : {TemplateId::RationaleGen, TemplateId::QaGen, TemplateId::ChartFewshot, TemplateId::Checker,
                          TemplateId::Classifier}) {
      CHECK(parse_template_id(to_string(id)) == id);
    }
    CHECK_FALSE(parse_template_id("nope").has_value());
  }
}
