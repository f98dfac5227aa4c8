#include "docstep/templates.hpp"

#include <fstream>
#include <sstream>

#include "docstep/errors.hpp"

namespace docstep {

namespace {

constexpr std::pair<TemplateId, std::string_view> kIds[] = {
    {TemplateId::RationaleGen, "rationale_gen"},
    {TemplateId::QaGen, "qa_gen"},
    {TemplateId::ChartFewshot, "chart_fewshot"},
    {TemplateId::Checker, "checker"},
    {TemplateId::Classifier, "classifier"}};

constexpr std::string_view kRationaleGen = R"(### Instruction:

Given an image and a question in the following, what is the answer to the question? Please complete the task in two steps:
1. In the first step, extract the relevant contexts related to the keywords in the question from the provided image.
Store these in the variable "{evidence}". If there are multiple contexts, separate them using the "#" symbol.
2. In the second step, predict the answer based on the {evidence} and store it in the variable "{answer}".

Please organize the results in the following table:
| step | output |
| 1 | {evidence} |
| 2 | {answer} |

The example format of response:
### Response
| step | output |
| 1 | {"SARS": "10%", "MERS": "34%", "EBOLA": "50%+"} |
| 2 | EBOLA has the highest mortality rate. |

Follow the format of the instruction above, Generate the corresponding response based on the question and answer. ###Question
[[question]]
###Gold_answer
[[answer]])";

// Step numbering is 1/2/3 throughout.
constexpr std::string_view kQaGen = R"(### Instruction:

Given an image in the following, generate a question and the corresponding answer. Please complete the task in three steps:
1. In the first step, Generate a question, [[constraint]] Store the question in the Variable {question}.
2. In the second step, extract the relevant contexts related to the keywords in the question from the provided image.
Store these in the variable "{evidence}". If there are multiple contexts, separate them using the "#" symbol.
3. In the third step, predict the answer based on the {evidence} and store it in the variable "{answer}".

Please organize the results in the following table:
| step | output |
| 1 | {question} |
| 2 | {evidence} |
| 3 | {answer} |

The example format of response:
### Response
| step | output |
| 1 | Which disease has the highest mortality rate? |
| 2 | {"SARS": "10%", "MERS": "34%", "EBOLA": "50%+"} |
| 3 | EBOLA has the highest mortality rate. |
The answer is: EBOLA.

Follow the format of the instruction above, Generate the corresponding response based on the image.)";

constexpr std::string_view kChartFewshot = R"(###Instruction
The following are given a chart image and five examples to complete the task of generating chart question and answer data.

Example1:
    Generate a question and the corresponding answer step by step based on the image:

    Question: What is the difference in value between Lamb and Corn?
    Answer:
        Step1. The values of relevant indicators in the question are identified: The value of Lamb is 103.7 and the value of Corn is 103.13,
        Step2. Perform the calculation of the difference in value between Lamb and Corn: 103.7-103.13=0.57,
        Step3. The final calculation result is obtained: 0.57.

Example2:
    Generate a question and the corresponding answer step by step based on the image:

    Question: In which year is the difference between the green and blue graphs lowest?
    Answer:
        Step1. Identify the years of the chart: 2017, 2018, 2019.,
        Step2. Compare the values of the green and blue graphs for each year: in 2017, the green graph is at 65 and the blue graph is at 56.
In 2018, the green graph is at 70 and the blue graph is at 41. In 2019, the green graph is at 69 and the blue graph is at 50.,
        Step3. Calculate the difference between the green and blue graphs for each year: In 2017: 65-56=9, in 2018: 70-41=29, in 2019: 69-50=19,
        Step4. Sort all the differences": "In 2017: 9, in 2018: 19, in 2019: 29,
        Step5. Perform the calculations required in the question: in 2017, the difference between green and blue graphs is the lowest,
        Step6. The final calculation result is obtained: 2017.

Example3:
    Generate a question and the corresponding answer step by step based on the image:

    Question: What's the average of all the values in the green bars?
    Answer:
        Step1. Identify all information of the blue bar: {"Characteristic": "US, EU, China", "More": "29, 19, 17"},
        Step2. Perform the calculation of the average of all the values in the green bars: 29 + 19 + 17 = 21.6,
        Step3. The final calculation result is obtained: 21.6.

Example4:
    Generate a question and the corresponding answer step by step based on the image:

    Question: Which country has the third highest rate of cases in Europe?
    Answer:
        Step1. Identify all values of countries in Europe: {"Montenegro":16111.01, "Czechia": 15 587.77, "Sweden": 10546.7, "Slovenia": 12276, "Slovakia":14259.69},
        Step2. Sort all values: {"Montenegro":16111.01, "Czechia": 15 587.77, "Slovakia":14259.69, "Slovenia": 12276, "Sweden": 10546.7},
        Step3. The third highest rate of cases in Europe is obtained: Slovakia.

Example5:
    Generate a question and the corresponding answer step by step based on the image:

    question: What is the sum of all the blue bar?
    Answer:
        Step1. Identify all information of the blue bar: {"Characteristic": "Number of gamers in millions", "2012": 8.12, "2013": 9.04, "2014": 9.97},
        Step2. Calculate the sum of all values: 8.12+9.04+9.97=27.13,
        Step3. The final calculation result is obtained: 27.13.

Follow the format of the example above, generate a question and the corresponding answer step by step based on the image.)";

constexpr std::string_view kChecker = R"(Below is an instruction that describes an evidence error detection task in the general document domain, paired with an image.
Generate an appropriate response to the given instruction.

### Instruction:
        Given an image, question-answer pair, and corresponding evidence, assess whether the evidence is faithful to the images and
corresponding text information, and whether it accurately contains the context information of the question-answer pair in the
image and table. Please complete the task in three steps:
        1. In the first step, assess whether each step of evidence is consistent with the information in the image and the table.
If consistent, store "True" in the variable {is_faithful}; otherwise, store "False".
        2. In the second step, assess whether each step of evidence contains the context information of the question-answer pair in the image.
If it does, store "True" in the variable {is_include}; otherwise, store "False".
        3. If {is_faithful} is True and {is_include} is True, store "True" in the variable {result}; otherwise, store "False" in the variable {result}.
        Please organize the results in the following table:
        | step | output |
        | 1 | {is_faithful} |
        | 2 | {is_include} |
        Finally, present the predicted answer in the format: "The answer is: {result}"

        ###Follow the example:

        ### Question_answer pairs
        LIver is a source of how many of the vitamins shown here? answer: 6
        ### Evidences
        | step | output |
        | 1 | 40% of visitors to VIC went to Melbourne. |
        | 2 | 60% |
        The answer is: 60%

        ### Response
        |step | output|
        |1 | False |
        |2 | True |
        The answer is: False

Follow the format of the instruction above, Generate the corresponding response based on the image, evidence, and question-answer pairs:
###Question_answer pairs
[[qa]]
###Evidence
[[rationale]])";

constexpr std::string_view kClassifier = R"(Given a dataset consisting of DocVQA/InfographicsVQA/ChartQA and corresponding questions.
The task is to classify each question into one of the following five types based on the image and the type of information
required to answer the question.

        Here are the definitions for each type:

        Color: Questions that require an understanding of colors.
        Spatial: Questions that involve spatial relationships or positions (e.g., "next to," "above," "below", "left", "right").
        Text_extractive: Questions that require extracting specific text information from the document image.
        Count: Questions that involve counting elements or objects in the document image.
        Reasoning: Questions that require logical reasoning, inference, or combining multiple pieces of information.

        For each question, analyze the content and determine the appropriate type.
Now, classify the following questions from the DocVQA/InfographicVQA/ChartQA dataset:
###Question
    [[question]])";

const std::vector<std::string>& shared_constraints() {
  static const std::vector<std::string> kList = {
      "The question should require spatial understanding of the image.",
      "The question should require counting.",
      "The question should require reasoning of the image.",
  };
  return kList;
}

const std::vector<std::string>& color_constraints() {
  static const std::vector<std::string> kList = {
      "The question should require color understanding of the image.",
      "The question should require counting of colors.",
      "The question should require counting and color understanding.",
  };
  return kList;
}

const std::vector<std::string>& chart_math_constraints() {
  static const std::vector<std::string> kList = {
      "The question should require math reasoning about min.",
      "The question should require math reasoning about average.",
      "The question should require math reasoning about the difference between max and min.",
      "The question should require math reasoning about difference.",
      "The question should require math reasoning about comparison.",
      "The question should require math reasoning about average and max.",
      "The question should require math reasoning about sum.",
      "The question should require math reasoning about max.",
      "The question should require math reasoning about average and min.",
      "The question should require math reasoning about ratio.",
      "The question should require color understanding and math reasoning to compute the difference.",
      "The question should require color understanding and math reasoning about comparison.",
      "The question should require spatial understanding and math reasoning to compute difference.",
      "The question should require spatial understanding and math reasoning about average.",
  };
  return kList;
}

PromptTemplate make_template(TemplateId id, std::string body) {
  PromptTemplate t{id, std::move(body), {}};
  for (auto& name : slots_in(t.body)) t.required_slots.insert(std::move(name));
  return t;
}

}  // namespace

std::string_view to_string(TemplateId id) {
  for (const auto& [v, name] : kIds) {
    if (v == id) return name;
  }
  return "?";
}

std::optional<TemplateId> parse_template_id(std::string_view text) {
  for (const auto& [v, name] : kIds) {
    if (name == text) return v;
  }
  return std::nullopt;
}

std::vector<std::string> slots_in(std::string_view body) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while ((pos = body.find("[[", pos)) != std::string_view::npos) {
    const std::size_t end = body.find("]]", pos + 2);
    if (end == std::string_view::npos) break;
    std::string name(body.substr(pos + 2, end - pos - 2));
    const bool identifier = !name.empty() && name.find_first_not_of("abcdefghijklmnopqrstuvwxyz_0123456789") ==
                                                 std::string::npos;
    if (identifier && std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    pos = identifier ? end + 2 : pos + 2;
  }
  return names;
}

TemplateRegistry::TemplateRegistry() {
  templates_.emplace(TemplateId::RationaleGen, make_template(TemplateId::RationaleGen, std::string(kRationaleGen)));
  templates_.emplace(TemplateId::QaGen, make_template(TemplateId::QaGen, std::string(kQaGen)));
  templates_.emplace(TemplateId::ChartFewshot, make_template(TemplateId::ChartFewshot, std::string(kChartFewshot)));
  templates_.emplace(TemplateId::Checker, make_template(TemplateId::Checker, std::string(kChecker)));
  templates_.emplace(TemplateId::Classifier, make_template(TemplateId::Classifier, std::string(kClassifier)));
}

TemplateRegistry TemplateRegistry::with_overrides(const std::filesystem::path& dir) {
  TemplateRegistry registry;
  if (!std::filesystem::is_directory(dir)) throw Error("template directory not found: " + dir.string());
  for (const auto& [id, name] : kIds) {
    const auto file = dir / (std::string(name) + ".txt");
    if (!std::filesystem::exists(file)) continue;
    std::ifstream in(file, std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    std::string text = body.str();
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    const auto& builtin = registry.templates_.at(id);
    PromptTemplate replacement = make_template(id, std::move(text));
    for (const auto& slot : builtin.required_slots) {
      if (!replacement.required_slots.count(slot)) {
        throw ValidationError("override " + file.string() + " lacks slot [[" + slot + "]]");
      }
    }
    registry.templates_.insert_or_assign(id, std::move(replacement));
  }
  return registry;
}

const PromptTemplate& TemplateRegistry::get(TemplateId id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw ValidationError("unknown template id");
  return it->second;
}

std::string TemplateRegistry::render(TemplateId id, const SlotMap& slots) const {
  const PromptTemplate& t = get(id);
  for (const auto& name : t.required_slots) {
    if (!slots.count(name)) {
      throw ValidationError("template " + std::string(to_string(id)) + ": missing slot '" + name + "'");
    }
  }
  // Single pass, so slot values are never rescanned for markers.
  std::string out;
  out.reserve(t.body.size() + 256);
  std::size_t pos = 0;
  const std::string_view body = t.body;
  while (pos < body.size()) {
    const std::size_t open = body.find("[[", pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = body.find("]]", open + 2);
    if (close == std::string_view::npos) break;
    const std::string name(body.substr(open + 2, close - open - 2));
    auto it = slots.find(name);
    if (it == slots.end() || !t.required_slots.count(name)) {
      out.append(body.substr(pos, open + 2 - pos));
      pos = open + 2;
      continue;
    }
    out.append(body.substr(pos, open - pos));
    out.append(it->second);
    pos = close + 2;
  }
  out.append(body.substr(pos));
  return out;
}

std::string render(TemplateId id, const SlotMap& slots) {
  static const TemplateRegistry kBuiltin;
  return kBuiltin.render(id, slots);
}

ConstraintList constraint_list(DatasetKind kind) {
  ConstraintList list{kind, shared_constraints()};
  if (kind == DatasetKind::InfoVQA || kind == DatasetKind::ChartQA) {
    list.constraints.insert(list.constraints.end(), color_constraints().begin(), color_constraints().end());
  }
  if (kind == DatasetKind::ChartQA) {
    list.constraints.insert(list.constraints.end(), chart_math_constraints().begin(), chart_math_constraints().end());
  }
  return list;
}

}  // namespace docstep
