#include <doctest.h>

#include "docstep/decimal.hpp"

using namespace docstep;

TEST_SUITE("decimal") {
  TEST_CASE("number scanning") {
    CHECK(parse_number("15 587.77") == Decimal("15587.77"));
    CHECK(parse_number("1,234,567") == Decimal("1234567"));
    CHECK(parse_number("$12.5") == Decimal("12.5"));
    CHECK(parse_number("50%") == Decimal("0.5"));
    CHECK(parse_number("-3") == Decimal("-3"));
    CHECK_FALSE(parse_number("12 34").has_value());
    CHECK_FALSE(parse_number("1,23").has_value());
    CHECK_FALSE(parse_number("abc").has_value());
    CHECK_FALSE(parse_number("").has_value());
    auto scanned = scan_number("27.13, then");
    REQUIRE(scanned);
    CHECK(scanned->second == 5);
  }

  TEST_CASE("tolerance") {
    ToleranceRule relaxed = ToleranceRule::relaxed_default();
    CHECK(relaxed.within(Decimal("21.0"), Decimal("20.0")));
    CHECK_FALSE(relaxed.within(Decimal("21.2"), Decimal("20.0")));
    ToleranceRule claim = ToleranceRule::claim_default();
    CHECK(claim.within(Decimal("0.57"), Decimal("0.57")));
    CHECK(claim.within(Decimal("0.005"), Decimal("0")));
    CHECK_FALSE(ToleranceRule::exact().within(Decimal("1.0000001"), Decimal("1")));
  }

  TEST_CASE("formatting") {
    CHECK(format_decimal(Decimal("0.57")) == "0.57");
    CHECK(format_decimal(Decimal(65) / 3) == "21.6666666667");
    CHECK(format_decimal(Decimal(65) / 3, 4) == "21.6667");
  }
}
