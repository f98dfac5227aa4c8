#include "docstep/mathcheck.hpp"

#include <algorithm>
#include <cctype>

#include <omp.h>

#include "docstep/errors.hpp"
#include "docstep/stepparse.hpp"

namespace docstep {

namespace {

class ExprParser {
 public:
  explicit ExprParser(std::string_view text) : text_(text) {}

  Expr parse() {
    skip_space();
    if (pos_ == text_.size()) throw ParseError("empty expression", 0);
    Expr e = parse_sum();
    skip_space();
    if (pos_ != text_.size()) {
      if (text_[pos_] == ')') throw ParseError("unbalanced ')'", pos_);
      throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    }
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_sum() {
    Expr lhs = parse_product();
    while (true) {
      if (accept('+')) lhs = Expr::binary(Expr::Kind::Add, std::move(lhs), parse_product());
      else if (accept('-')) lhs = Expr::binary(Expr::Kind::Subtract, std::move(lhs), parse_product());
      else return lhs;
    }
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    while (true) {
      if (accept('*')) {
        lhs = Expr::binary(Expr::Kind::Multiply, std::move(lhs), parse_unary());
      } else if (accept('/')) {
        const std::size_t at = pos_;
        Expr rhs = parse_unary();
        if (rhs.kind() == Expr::Kind::Number && rhs.value() == 0) throw ParseError("division by literal zero", at);
        lhs = Expr::binary(Expr::Kind::Divide, std::move(lhs), std::move(rhs));
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (accept('-')) return Expr::negate(parse_unary());
    return parse_primary();
  }

  Expr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("dangling operator", pos_);
    if (text_[pos_] == '(') {
      const std::size_t open = pos_++;
      Expr inner = parse_sum();
      if (!accept(')')) throw ParseError("unbalanced '('", open);
      return inner;
    }
    auto number = scan_number(text_.substr(pos_));
    if (!number) throw ParseError(std::string("expected a number, found '") + text_[pos_] + "'", pos_);
    pos_ += number->second;
    return Expr::number(number->first);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

bool icontains(std::string_view text, std::string_view needle) {
  auto it = std::search(text.begin(), text.end(), needle.begin(), needle.end(), [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
  });
  return it != text.end();
}

ContextHint hint_for(std::string_view text) {
  if (icontains(text, "average")) return ContextHint::Average;
  if (icontains(text, "ratio")) return ContextHint::Ratio;
  if (icontains(text, "difference")) return ContextHint::Difference;
  if (icontains(text, "sum")) return ContextHint::Sum;
  return ContextHint::None;
}

bool expression_char(char c) {
  return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == ',' || c == '%' || c == ' ' || c == '+' ||
         c == '-' || c == '*' || c == '/' || c == '(' || c == ')' || c == '$';
}

bool is_digit(std::string_view s, std::size_t i) {
  return i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]));
}

}  // namespace

Expr Expr::number(Decimal value) {
  Expr e;
  e.kind_ = Kind::Number;
  e.value_ = std::move(value);
  return e;
}

Expr Expr::negate(Expr operand) {
  Expr e;
  e.kind_ = Kind::Negate;
  e.children_.first = std::make_shared<const Expr>(std::move(operand));
  return e;
}

Expr Expr::binary(Kind op, Expr lhs, Expr rhs) {
  Expr e;
  e.kind_ = op;
  e.children_.first = std::make_shared<const Expr>(std::move(lhs));
  e.children_.second = std::make_shared<const Expr>(std::move(rhs));
  return e;
}

std::size_t Expr::operand_count() const {
  switch (kind_) {
    case Kind::Number: return 1;
    case Kind::Negate: return operand().operand_count();
    default: return lhs().operand_count() + rhs().operand_count();
  }
}

std::size_t Expr::operator_count() const {
  switch (kind_) {
    case Kind::Number: return 0;
    case Kind::Negate: return operand().operator_count();
    default: return 1 + lhs().operator_count() + rhs().operator_count();
  }
}

Expr parse_expression(std::string_view text) { return ExprParser(text).parse(); }

Decimal evaluate(const Expr& expr) {
  switch (expr.kind()) {
    case Expr::Kind::Number: return expr.value();
    case Expr::Kind::Negate: return -evaluate(expr.operand());
    case Expr::Kind::Add: return evaluate(expr.lhs()) + evaluate(expr.rhs());
    case Expr::Kind::Subtract: return evaluate(expr.lhs()) - evaluate(expr.rhs());
    case Expr::Kind::Multiply: return evaluate(expr.lhs()) * evaluate(expr.rhs());
    case Expr::Kind::Divide: {
      Decimal denominator = evaluate(expr.rhs());
      if (denominator == 0) throw EvalError("division by zero");
      return evaluate(expr.lhs()) / denominator;
    }
  }
  throw EvalError("unknown expression node");
}

std::string_view to_string(ContextHint hint) {
  switch (hint) {
    case ContextHint::None: return "none";
    case ContextHint::Average: return "average";
    case ContextHint::Ratio: return "ratio";
    case ContextHint::Difference: return "difference";
    case ContextHint::Sum: return "sum";
  }
  return "none";
}

std::vector<NumericClaim> extract_claims(std::string_view text) {
  std::vector<NumericClaim> claims;
  const ContextHint hint = hint_for(text);
  std::size_t floor = 0;  // claims never overlap
  for (std::size_t eq = text.find('='); eq != std::string_view::npos; eq = text.find('=', eq + 1)) {
    if (eq + 1 < text.size() && text[eq + 1] == '=') continue;

    std::size_t r = eq + 1;
    while (r < text.size() && text[r] == ' ') ++r;
    bool negative = false;
    if (r < text.size() && text[r] == '-') {
      negative = true;
      ++r;
    }
    auto rhs = scan_number(text.substr(r));
    if (!rhs) continue;
    const std::size_t rhs_end = r + rhs->second;
    if (rhs_end < text.size() && std::isalnum(static_cast<unsigned char>(text[rhs_end]))) continue;

    std::size_t start = eq;
    while (start > floor && expression_char(text[start - 1])) --start;

    std::optional<Expr> lhs_expr;
    std::size_t lhs_begin = eq;
    for (std::size_t k = start; k < eq; ++k) {
      const char c = text[k];
      if (c == ' ') continue;
      if (k > start && is_digit(text, k) && (is_digit(text, k - 1) || text[k - 1] == '.')) continue;
      try {
        Expr e = parse_expression(text.substr(k, eq - k));
        if (e.operator_count() == 0) continue;
        lhs_expr = std::move(e);
        lhs_begin = k;
        break;
      } catch (const ParseError&) {
      }
    }
    if (!lhs_expr) continue;

    NumericClaim claim;
    claim.lhs = trim(text.substr(lhs_begin, eq - lhs_begin));
    claim.rhs = negative ? Decimal(-rhs->first) : rhs->first;
    claim.rhs_text = std::string(text.substr(eq + 1, rhs_end - eq - 1));
    claim.rhs_text = trim(claim.rhs_text);
    claim.span = {lhs_begin, rhs_end};
    claim.context_hint = hint;
    claims.push_back(std::move(claim));
    floor = rhs_end;
    eq = rhs_end - 1;
  }
  return claims;
}

CheckResult verify_claim(const NumericClaim& claim, const ToleranceRule& tolerance) {
  CheckResult result;
  result.stated = claim.rhs;
  Expr expr = Expr::number(0);
  try {
    expr = parse_expression(claim.lhs);
    result.computed = evaluate(expr);
  } catch (const Error& e) {
    result.reason = e.what();
    return result;
  }
  if (tolerance.within(claim.rhs, result.computed)) {
    result.pass = true;
    return result;
  }
  if (claim.context_hint == ContextHint::Average) {
    const Decimal mean = result.computed / static_cast<unsigned>(expr.operand_count());
    if (tolerance.within(claim.rhs, mean)) {
      result.pass = true;
      result.repaired = true;
      result.computed = mean;
    }
  }
  return result;
}

std::optional<SortClaim> detect_sort_claim(std::string_view text) {
  if (!icontains(text, "sort") || text.find('{') == std::string_view::npos) return std::nullopt;
  EvidenceMap map;
  try {
    map = parse_evidence_map(text);
  } catch (const ParseError&) {
    return std::nullopt;
  }
  SortClaim claim;
  for (const auto& [label, value] : map.entries) {
    auto number = parse_number(value);
    if (!number) return std::nullopt;
    claim.entries.emplace_back(label, *number);
  }
  if (icontains(text, "ascend") || icontains(text, "increas") || icontains(text, "smallest to largest") ||
      icontains(text, "lowest to highest")) {
    claim.direction = SortClaim::Direction::Ascending;
  } else if (icontains(text, "descend") || icontains(text, "decreas") || icontains(text, "largest to smallest") ||
             icontains(text, "highest to lowest")) {
    claim.direction = SortClaim::Direction::Descending;
  } else {
    // Unstated direction: the first unequal neighbours decide it.
    for (std::size_t i = 1; i < claim.entries.size(); ++i) {
      if (claim.entries[i].second != claim.entries[i - 1].second) {
        claim.direction = claim.entries[i].second > claim.entries[i - 1].second ? SortClaim::Direction::Ascending
                                                                                 : SortClaim::Direction::Descending;
        break;
      }
    }
  }
  return claim;
}

CheckResult verify_sort_claim(const SortClaim& claim) {
  CheckResult result;
  result.pass = true;
  for (std::size_t i = 1; i < claim.entries.size(); ++i) {
    const Decimal& prev = claim.entries[i - 1].second;
    const Decimal& cur = claim.entries[i].second;
    const bool ordered = claim.direction == SortClaim::Direction::Ascending ? prev <= cur : prev >= cur;
    if (!ordered) {
      result.pass = false;
      result.computed = prev;
      result.stated = cur;
      result.reason = "'" + claim.entries[i].first + "' out of order";
      break;
    }
  }
  return result;
}

std::size_t ChainReport::claims_checked() const {
  std::size_t n = 0;
  for (const auto& s : per_step) n += s.claims_checked;
  return n;
}

std::size_t ChainReport::failure_count() const {
  std::size_t n = 0;
  for (const auto& s : per_step) n += s.failures.size();
  return n;
}

std::string_view to_string(ChainReport::Verdict verdict) {
  switch (verdict) {
    case ChainReport::Verdict::Pass: return "pass";
    case ChainReport::Verdict::Fail: return "fail";
    case ChainReport::Verdict::NoClaims: return "no_claims";
  }
  return "no_claims";
}

nlohmann::json ChainReport::to_json() const {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : per_step) {
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : s.failures) {
      failures.push_back({{"claim", f.claim}, {"computed", format_decimal(f.computed)}, {"stated", format_decimal(f.stated)}});
    }
    steps.push_back({{"index", s.index}, {"claims_checked", s.claims_checked}, {"repaired", s.repaired}, {"failures", failures}});
  }
  return {{"verdict", std::string(to_string(verdict))},
          {"claims_checked", claims_checked()},
          {"final_answer_checked", final_answer_checked},
          {"steps", steps}};
}

namespace {

// Whole-token occurrence, e.g. the year "2017" used as a label rather than a result.
bool mentions(std::string_view text, std::string_view token) {
  if (token.empty()) return false;
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '.'; };
  for (std::size_t pos = text.find(token); pos != std::string_view::npos; pos = text.find(token, pos + 1)) {
    const std::size_t end = pos + token.size();
    const bool left = pos == 0 || !is_word(text[pos - 1]);
    const bool right = end == text.size() || !is_word(text[end]) ||
                       (text[end] == '.' && (end + 1 == text.size() || !std::isdigit(static_cast<unsigned char>(text[end + 1]))));
    if (left && right) return true;
  }
  return false;
}

}  // namespace

ChainReport verify_chain(const ReasoningChain& chain, const ToleranceRule& tolerance) {
  ChainReport report;
  std::optional<std::size_t> last_claim_step;
  Decimal last_value{0};
  bool answer_is_label = false;

  for (std::size_t i = 0; i < chain.steps.size(); ++i) {
    const Step& step = chain.steps[i];
    StepReport sr;
    sr.index = step.index;
    const auto claims = extract_claims(step.text);
    if (i + 1 < chain.steps.size() && !answer_is_label) {
      std::string prose = step.text;
      for (auto it = claims.rbegin(); it != claims.rend(); ++it) {
        prose.replace(it->span.first, it->span.second - it->span.first, " ");
      }
      answer_is_label = mentions(prose, chain.final_answer);
    }
    for (const auto& claim : claims) {
      CheckResult r = verify_claim(claim, tolerance);
      ++sr.claims_checked;
      if (r.repaired) ++sr.repaired;
      if (!r.pass) sr.failures.push_back({claim.lhs + "=" + claim.rhs_text, r.computed, r.stated});
      last_claim_step = i;
      last_value = r.computed;
    }
    if (auto sort = detect_sort_claim(step.text)) {
      CheckResult r = verify_sort_claim(*sort);
      ++sr.claims_checked;
      if (!r.pass) sr.failures.push_back({"sort: " + r.reason, r.computed, r.stated});
    }
    report.per_step.push_back(std::move(sr));
  }

  const std::size_t final_step = chain.steps.empty() ? 0 : chain.steps.size() - 1;
  if (auto final_value = parse_number(chain.final_answer);
      final_value && !answer_is_label && last_claim_step && *last_claim_step + 1 >= final_step) {
    report.final_answer_checked = true;
    if (!tolerance.within(*final_value, last_value)) {
      report.per_step.back().failures.push_back({"final answer " + chain.final_answer, last_value, *final_value});
    }
  }

  if (report.failure_count() > 0) report.verdict = ChainReport::Verdict::Fail;
  else if (report.claims_checked() == 0) report.verdict = ChainReport::Verdict::NoClaims;
  else report.verdict = ChainReport::Verdict::Pass;
  return report;
}

std::vector<ChainReport> verify_chains_serial(const std::vector<ReasoningChain>& chains,
                                              const ToleranceRule& tolerance) {
  std::vector<ChainReport> reports;
  reports.reserve(chains.size());
  for (const auto& chain : chains) reports.push_back(verify_chain(chain, tolerance));
  return reports;
}

std::vector<ChainReport> verify_chains_parallel(const std::vector<ReasoningChain>& chains,
                                                const ToleranceRule& tolerance, int threads) {
  std::vector<ChainReport> reports(chains.size());
  const auto n = static_cast<std::ptrdiff_t>(chains.size());
  if (threads <= 0) threads = omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    reports[static_cast<std::size_t>(i)] = verify_chain(chains[static_cast<std::size_t>(i)], tolerance);
  }
  return reports;
}

}  // namespace docstep
