#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "docstep/corpus.hpp"

namespace docstep {

struct StepRow {
  int index = 0;
  std::string payload;

  bool operator==(const StepRow&) const = default;
};

// "| step | output |" table. Indices strictly increase from 1.
struct StepTable {
  std::vector<StepRow> rows;
};

struct EvidenceMap {
  std::vector<std::pair<std::string, std::string>> entries;

  const std::string* find(std::string_view key) const;
};

// Checker verdict; result is always recomputed as is_faithful && is_include.
struct Verdict {
  bool is_faithful = false;
  bool is_include = false;
  bool result = false;
  std::optional<bool> stated_result;  // the model's own "The answer is: ..." line
  bool mismatch = false;              // stated_result present and != result
};

StepTable parse_step_table(std::string_view text);

// Brace map {"k": v, ...} when the payload contains braces, otherwise one entry per
// '#'-separated fragment keyed frag1, frag2, ...
EvidenceMap parse_evidence_map(std::string_view payload);

// Splits on Step markers (Step1. / Step 1. / step1:); final answer from the last
// step's "obtained:" clause, else the last step's text.
ReasoningChain parse_chart_chain(std::string_view text);

// The text after a "Question:" label, if any.
std::optional<std::string> parse_chart_question(std::string_view text);

std::string extract_final_answer(std::string_view text);

Verdict parse_verdict(std::string_view text);

// Inverse renderings, used when a chain goes back into a prompt.
std::string render_step_table(const std::vector<StepRow>& rows);
std::string render_chart_chain(const ReasoningChain& chain, std::string_view question = {});

// Strips trailing '.', ',' and closing quotes; never '%' or digits.
std::string strip_trailing_punctuation(std::string_view text);

std::string trim(std::string_view text);

}  // namespace docstep
