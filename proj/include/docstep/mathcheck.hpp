#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "docstep/corpus.hpp"
#include "docstep/decimal.hpp"

namespace docstep {

// Arithmetic expression tree: numbers, negation and the four binary operators.
class Expr {
 public:
  enum class Kind { Number, Negate, Add, Subtract, Multiply, Divide };

  static Expr number(Decimal value);
  static Expr negate(Expr operand);
  static Expr binary(Kind op, Expr lhs, Expr rhs);

  Kind kind() const { return kind_; }
  const Decimal& value() const { return value_; }
  const Expr& lhs() const { return *children_.first; }
  const Expr& rhs() const { return *children_.second; }
  const Expr& operand() const { return *children_.first; }

  // Number of numeric leaves, e.g. 3 for "29 + 19 + 17".
  std::size_t operand_count() const;
  std::size_t operator_count() const;

 private:
  Kind kind_ = Kind::Number;
  Decimal value_{0};
  std::pair<std::shared_ptr<const Expr>, std::shared_ptr<const Expr>> children_;
};

// Standard precedence, left association, parentheses, unary minus.
Expr parse_expression(std::string_view text);

// Throws EvalError on division by zero.
Decimal evaluate(const Expr& expr);

enum class ContextHint { None, Average, Ratio, Difference, Sum };

std::string_view to_string(ContextHint hint);

struct NumericClaim {
  std::string lhs;
  Decimal rhs{0};
  std::string rhs_text;
  std::pair<std::size_t, std::size_t> span;  // [begin, end) bytes in the step text
  ContextHint context_hint = ContextHint::None;
};

// Every maximal "<expr>=<number>" whose left side has at least one operator.
std::vector<NumericClaim> extract_claims(std::string_view step_text);

struct CheckResult {
  bool pass = false;
  bool repaired = false;    // passed only after dividing by the operand count
  Decimal computed{0};      // value of the lhs (after repair when repaired)
  Decimal stated{0};
  std::string reason;       // set when the lhs cannot be evaluated
};

CheckResult verify_claim(const NumericClaim& claim, const ToleranceRule& tolerance);

struct SortClaim {
  enum class Direction { Ascending, Descending };

  std::vector<std::pair<std::string, Decimal>> entries;
  Direction direction = Direction::Descending;
};

CheckResult verify_sort_claim(const SortClaim& claim);

// A sort claim in a step mentioning "sort" whose brace map has only numeric values.
std::optional<SortClaim> detect_sort_claim(std::string_view step_text);

struct ClaimFailure {
  std::string claim;
  Decimal computed{0};
  Decimal stated{0};
};

struct StepReport {
  int index = 0;
  std::size_t claims_checked = 0;
  std::size_t repaired = 0;
  std::vector<ClaimFailure> failures;
};

struct ChainReport {
  enum class Verdict { Pass, Fail, NoClaims };

  std::vector<StepReport> per_step;
  Verdict verdict = Verdict::NoClaims;
  bool final_answer_checked = false;

  std::size_t claims_checked() const;
  std::size_t failure_count() const;
  nlohmann::json to_json() const;
};

std::string_view to_string(ChainReport::Verdict verdict);

// Checks every numeric and sort claim per step. When the final answer is numeric, is not
// used as a label in an earlier step (a year, say), and the last arithmetic happens in
// the final step or the one before it, that claim's value must also match the answer.
ChainReport verify_chain(const ReasoningChain& chain, const ToleranceRule& tolerance);

// Batch verification kernels; the parallel one must agree with the serial one.
std::vector<ChainReport> verify_chains_serial(const std::vector<ReasoningChain>& chains,
                                              const ToleranceRule& tolerance);
std::vector<ChainReport> verify_chains_parallel(const std::vector<ReasoningChain>& chains,
                                                const ToleranceRule& tolerance, int threads = 0);

}  // namespace docstep
