#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include <boost/multiprecision/cpp_dec_float.hpp>

namespace docstep {

// 50 significant decimal digits: sums and products of short decimals are exact,
// quotients keep far more than the 10 digits the checks need.
using Decimal = boost::multiprecision::cpp_dec_float_50;

// Parses a number as it appears in chart text: optional sign and currency symbol,
// ',' or single-space thousands separators, optional fraction, optional trailing '%'
// (which divides by 100). Returns nullopt for anything else.
std::optional<Decimal> parse_number(std::string_view text);

// Longest unsigned number (currency and separators allowed) at the start of text:
// its value and the bytes consumed.
std::optional<std::pair<Decimal, std::size_t>> scan_number(std::string_view text);

// Shortest fixed-point rendering with at most `digits` fractional digits.
std::string format_decimal(const Decimal& value, int digits = 10);

struct ToleranceRule {
  Decimal relative{0};
  Decimal absolute{0};

  // |stated - reference| <= max(relative * |reference|, absolute)
  bool within(const Decimal& stated, const Decimal& reference) const;

  // Arithmetic-claim default: 1% relative, 0.01 absolute.
  static ToleranceRule claim_default();
  // ChartQA relaxed accuracy: 5% relative.
  static ToleranceRule relaxed_default();
  static ToleranceRule exact();
  static ToleranceRule from_strings(std::string_view relative, std::string_view absolute);
};

}  // namespace docstep
