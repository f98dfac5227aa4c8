#include "docstep/decimal.hpp"

#include <cctype>

#include "docstep/errors.hpp"

namespace docstep {

namespace {

bool digit_at(std::string_view s, std::size_t i) {
  return i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]));
}

std::size_t currency_length(std::string_view s, std::size_t i) {
  if (i >= s.size()) return 0;
  if (s[i] == '$') return 1;
  for (std::string_view symbol : {"\xE2\x82\xAC", "\xC2\xA3", "\xC2\xA5"}) {  // euro, pound, yen
    if (s.substr(i, symbol.size()) == symbol) return symbol.size();
  }
  return 0;
}

}  // namespace

std::optional<std::pair<Decimal, std::size_t>> scan_number(std::string_view text) {
  std::size_t i = currency_length(text, 0);
  std::string digits;
  const std::size_t first = i;
  while (digit_at(text, i)) digits.push_back(text[i++]);
  if (digits.empty()) return std::nullopt;
  if (i - first <= 3) {
    // Thousands groups: separator followed by exactly three digits.
    while (true) {
      if (i >= text.size() || (text[i] != ',' && text[i] != ' ')) break;
      if (!(digit_at(text, i + 1) && digit_at(text, i + 2) && digit_at(text, i + 3)) || digit_at(text, i + 4)) break;
      digits.append(text.substr(i + 1, 3));
      i += 4;
    }
  }
  if (i + 1 < text.size() && text[i] == '.' && digit_at(text, i + 1)) {
    digits.push_back('.');
    ++i;
    while (digit_at(text, i)) digits.push_back(text[i++]);
  }
  Decimal value(digits);
  if (i < text.size() && text[i] == '%') {
    value /= 100;
    ++i;
  }
  return std::make_pair(value, i);
}

std::optional<Decimal> parse_number(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  bool negative = false;
  if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  auto scanned = scan_number(text);
  if (!scanned || scanned->second != text.size()) return std::nullopt;
  return negative ? Decimal(-scanned->first) : scanned->first;
}

std::string format_decimal(const Decimal& value, int digits) {
  std::string s = value.str(digits, std::ios_base::fixed);
  if (s.find('.') != std::string::npos) {
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

bool ToleranceRule::within(const Decimal& stated, const Decimal& reference) const {
  const Decimal gap = abs(stated - reference);
  const Decimal scaled = relative * abs(reference);
  return gap <= (scaled > absolute ? scaled : absolute);
}

ToleranceRule ToleranceRule::claim_default() { return {Decimal("0.01"), Decimal("0.01")}; }

ToleranceRule ToleranceRule::relaxed_default() { return {Decimal("0.05"), Decimal(0)}; }

ToleranceRule ToleranceRule::exact() { return {Decimal(0), Decimal(0)}; }

ToleranceRule ToleranceRule::from_strings(std::string_view relative, std::string_view absolute) {
  auto rel = parse_number(relative);
  auto abs_ = parse_number(absolute);
  if (!rel || !abs_ || *rel < 0 || *abs_ < 0) {
    throw ValidationError("tolerance values must be non-negative numbers");
  }
  return {*rel, *abs_};
}

}  // namespace docstep
