#include <hydla/hydla.hpp>
#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace hydla;

TEST_CASE("parse_rational accepts integers, fractions, and decimals") {
  REQUIRE(parse_rational("7") == Rational(7));
  REQUIRE(parse_rational("-49/5") == Rational(-49, 5));
  REQUIRE(parse_rational("+3/4") == Rational(3, 4));
  REQUIRE(parse_rational("9.8") == Rational(49, 5));
  REQUIRE(parse_rational("-0.25") == Rational(-1, 4));
  REQUIRE(parse_rational("4.9") == Rational(49, 10));
  REQUIRE(parse_rational("0.1") == Rational(1, 10));
  REQUIRE(parse_rational("10.00") == Rational(10));
}

TEST_CASE("parse_rational rejects malformed input") {
  for (const char* s : {"", "-", "1/0", "1/", ".", ".5", "1.", "1.2.3", "1e3",
                        "1/2/3", "one", "2 ", " 2", "--3"})
    REQUIRE_FALSE(parse_rational(s).has_value());
}

TEST_CASE("to_string round-trips through parse_rational") {
  std::mt19937 rng(20260814);
  std::uniform_int_distribution<long long> num(-1000, 1000);
  std::uniform_int_distribution<long long> den(1, 60);
  for (int i = 0; i < 500; ++i) {
    Rational q(num(rng), den(rng));
    REQUIRE(parse_rational(to_string(q)) == q);
  }
}

TEST_CASE("floor and ceiling agree with the definition on negatives") {
  REQUIRE(rat_floor(Rational(7, 2)) == 3);
  REQUIRE(rat_floor(Rational(-7, 2)) == -4);
  REQUIRE(rat_floor(Rational(-4)) == -4);
  REQUIRE(rat_ceil(Rational(7, 2)) == 4);
  REQUIRE(rat_ceil(Rational(-7, 2)) == -3);
  REQUIRE(rat_ceil(Rational(4)) == 4);
  REQUIRE(rat_abs(Rational(-5, 3)) == Rational(5, 3));
  REQUIRE(rat_abs(Rational(5, 3)) == Rational(5, 3));
}

namespace {

// Brute force: the rational of smallest denominator (then smallest |numerator|)
// strictly inside (lo, hi), searching denominators upward.
Rational simplest_brute(const Rational& lo, const Rational& hi) {
  for (Int d = 1;; ++d) {
    Int n_lo = rat_floor(lo * Rational(d)) + 1;
    Int n_hi = rat_ceil(hi * Rational(d)) - 1;
    std::optional<Rational> best;
    for (Int n = n_lo; n <= n_hi; ++n) {
      Rational q(n, d);
      if (!(lo < q && q < hi)) continue;
      if (den(q) != d) continue;  // not in lowest terms at this denominator
      if (!best || rat_abs(q) < rat_abs(*best)) best = q;
    }
    if (best) return *best;
  }
}

}  // namespace

TEST_CASE("simplest_rational_between minimizes the denominator") {
  REQUIRE(simplest_rational_between(Rational(1, 3), Rational(1, 2)) == Rational(2, 5));
  REQUIRE(simplest_rational_between(Rational(3), Rational(4)) == Rational(7, 2));
  REQUIRE(simplest_rational_between(Rational(-1, 2), Rational(1, 2)) == Rational(0));
  REQUIRE(simplest_rational_between(Rational(5, 2), Rational(11, 4)) == Rational(8, 3));

  std::mt19937 rng(99);
  std::uniform_int_distribution<long long> num(-40, 40);
  std::uniform_int_distribution<long long> dnm(1, 12);
  for (int i = 0; i < 300; ++i) {
    Rational a(num(rng), dnm(rng));
    Rational b(num(rng), dnm(rng));
    if (!(a < b)) continue;
    Rational got = simplest_rational_between(a, b);
    REQUIRE(a < got);
    REQUIRE(got < b);
    REQUIRE(got == simplest_brute(a, b));
  }
}

TEST_CASE("simplest_rational_between rejects empty intervals") {
  REQUIRE_THROWS_AS(simplest_rational_between(Rational(1), Rational(1)), std::invalid_argument);
  REQUIRE_THROWS_AS(simplest_rational_between(Rational(2), Rational(1)), std::invalid_argument);
}
