#pragma once

// ── Exact rational scalar ────────────────────────────────────────────────────
// All semantic computation (trajectories, event times, Q-store breakpoints)
// runs over arbitrary-precision rationals; nothing downstream may round.

#include <boost/multiprecision/cpp_int.hpp>

#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>

namespace hydla {

using Int = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline Int num(const Rational& q) { return boost::multiprecision::numerator(q); }
inline Int den(const Rational& q) { return boost::multiprecision::denominator(q); }

inline int sign(const Rational& q) { return q.sign(); }

inline Rational rat_abs(const Rational& q) { return q < 0 ? Rational(-q) : q; }

/// Largest integer n with n <= q.
inline Int rat_floor(const Rational& q) {
  Int n = num(q), d = den(q);
  Int t = n / d;
  if (n < 0 && t * d != n) --t;
  return t;
}

/// Smallest integer n with n >= q.
inline Int rat_ceil(const Rational& q) { return -rat_floor(-q); }

/// Canonical text form: "7", "-49/5".
inline std::string to_string(const Rational& q) { return q.str(); }

/// Parses "7", "-49/5", "9.8", "-0.25". Returns nullopt on malformed input.
inline std::optional<Rational> parse_rational(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::size_t i = 0;
  bool neg = false;
  if (text[i] == '-' || text[i] == '+') {
    neg = text[i] == '-';
    ++i;
  }
  auto digits = [&](Int& out) -> bool {
    if (i >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i]))) return false;
    out = 0;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      out = out * 10 + (text[i] - '0');
      ++i;
    }
    return true;
  };
  Int whole;
  if (!digits(whole)) return std::nullopt;
  Rational value(whole);
  if (i < text.size() && text[i] == '.') {
    ++i;
    std::size_t frac_begin = i;
    Int frac;
    if (!digits(frac)) return std::nullopt;
    Int scale = 1;
    for (std::size_t k = frac_begin; k < i; ++k) scale *= 10;
    value += Rational(frac, scale);
  } else if (i < text.size() && text[i] == '/') {
    ++i;
    Int d;
    if (!digits(d) || d == 0) return std::nullopt;
    value = Rational(whole, d);
  }
  if (i != text.size()) return std::nullopt;
  return neg ? Rational(-value) : value;
}

/// The unique rational of minimal denominator (then minimal |numerator|)
/// strictly inside the open interval (lo, hi). Precondition: lo < hi.
inline Rational simplest_rational_between(const Rational& lo, const Rational& hi) {
  if (!(lo < hi)) throw std::invalid_argument("simplest_rational_between: empty interval");
  if (lo < 0 && 0 < hi) return 0;
  if (hi <= 0) return -simplest_rational_between(-hi, -lo);
  // Now 0 <= lo < hi. Continued-fraction descent.
  Int k = rat_floor(lo);
  if (Rational(k + 1) < hi) return Rational(k + 1);  // smallest integer > lo fits
  Rational lo_frac = lo - Rational(k);               // (lo,hi) within (k, k+1]
  if (lo_frac == 0) {
    // x = k + 1/y with y ranging over (1/(hi-k), inf); simplest y is an integer.
    Int y = rat_floor(Rational(1) / (hi - Rational(k))) + 1;
    return Rational(k) + Rational(Int(1), y);
  }
  Rational y = simplest_rational_between(Rational(1) / (hi - Rational(k)),
                                         Rational(1) / lo_frac);
  return Rational(k) + Rational(1) / y;
}

}  // namespace hydla
