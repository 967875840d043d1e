#pragma once

// ── Exact univariate polynomials and real-root isolation ─────────────────────
// Dense rational coefficients.  Root isolation uses Sturm chains with
// bisection; a root is decided rational (exactly) by refining its isolating
// interval below 1/L² (L = leading coefficient of the primitive integer
// squarefree part) and testing the simplest rational inside — an interval
// that narrow contains at most one rational with denominator ≤ L.

#include <hydla/rational.hpp>

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hydla {

/// Trajectory degree cap; exceeding it signals runaway symbolic growth.
inline constexpr int kMaxPolyDegree = 16;

class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<Rational> coeffs) : c_(std::move(coeffs)) { trim(); }
  static Polynomial constant(Rational v) { return Polynomial({std::move(v)}); }
  static Polynomial identity() { return Polynomial({Rational(0), Rational(1)}); }

  [[nodiscard]] int degree() const { return static_cast<int>(c_.size()) - 1; }
  [[nodiscard]] bool is_zero() const { return c_.empty(); }
  [[nodiscard]] bool is_constant() const { return c_.size() <= 1; }
  [[nodiscard]] Rational coeff(int k) const {
    return k >= 0 && k < static_cast<int>(c_.size()) ? c_[static_cast<std::size_t>(k)]
                                                     : Rational(0);
  }
  [[nodiscard]] const std::vector<Rational>& coeffs() const { return c_; }
  [[nodiscard]] const Rational& leading() const { return c_.back(); }

  [[nodiscard]] Rational eval(const Rational& x) const {
    Rational acc(0);
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  [[nodiscard]] Polynomial derivative() const {
    if (c_.size() <= 1) return {};
    std::vector<Rational> d(c_.size() - 1);
    for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = c_[k] * Rational(Int(k));
    return Polynomial(std::move(d));
  }

  /// Antiderivative whose value at 0 is `init`.
  [[nodiscard]] Polynomial antiderivative(const Rational& init) const {
    std::vector<Rational> a(c_.size() + 1);
    a[0] = init;
    for (std::size_t k = 0; k < c_.size(); ++k) a[k + 1] = c_[k] / Rational(Int(k + 1));
    return Polynomial(std::move(a));
  }

  /// p(x + delta).
  [[nodiscard]] Polynomial shifted(const Rational& delta) const {
    Polynomial acc;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) {
      acc = acc * Polynomial({delta, Rational(1)});
      acc = acc + Polynomial::constant(*it);
    }
    return acc;
  }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<Rational> r(std::max(a.c_.size(), b.c_.size()), Rational(0));
    for (std::size_t i = 0; i < a.c_.size(); ++i) r[i] += a.c_[i];
    for (std::size_t i = 0; i < b.c_.size(); ++i) r[i] += b.c_[i];
    return Polynomial(std::move(r));
  }
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) {
    std::vector<Rational> r(std::max(a.c_.size(), b.c_.size()), Rational(0));
    for (std::size_t i = 0; i < a.c_.size(); ++i) r[i] += a.c_[i];
    for (std::size_t i = 0; i < b.c_.size(); ++i) r[i] -= b.c_[i];
    return Polynomial(std::move(r));
  }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<Rational> r(a.c_.size() + b.c_.size() - 1, Rational(0));
    for (std::size_t i = 0; i < a.c_.size(); ++i)
      for (std::size_t j = 0; j < b.c_.size(); ++j) r[i + j] += a.c_[i] * b.c_[j];
    return Polynomial(std::move(r));
  }
  friend Polynomial operator*(const Polynomial& a, const Rational& s) {
    std::vector<Rational> r = a.c_;
    for (auto& v : r) v *= s;
    return Polynomial(std::move(r));
  }
  friend Polynomial operator-(const Polynomial& a) { return a * Rational(-1); }
  friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.c_ == b.c_; }

  /// Remainder of a / b (b nonzero).
  [[nodiscard]] Polynomial rem(const Polynomial& b) const {
    if (b.is_zero()) throw std::invalid_argument("polynomial division by zero");
    Polynomial r = *this;
    while (!r.is_zero() && r.degree() >= b.degree()) {
      Rational factor = r.leading() / b.leading();
      int shift = r.degree() - b.degree();
      std::vector<Rational> m(static_cast<std::size_t>(shift) + 1, Rational(0));
      m.back() = factor;
      r = r - b * Polynomial(std::move(m));
    }
    return r;
  }

  [[nodiscard]] std::string str(const std::string& var = "t") const {
    if (is_zero()) return "0";
    std::string s;
    for (int k = degree(); k >= 0; --k) {
      Rational c = coeff(k);
      if (c == 0) continue;
      if (!s.empty()) s += c > 0 ? " + " : " - ";
      else if (c < 0) s += "-";
      Rational a = rat_abs(c);
      if (k == 0 || a != 1) s += to_string(a);
      if (k > 0) {
        if (a != 1) s += "*";
        s += var;
        if (k > 1) s += "^" + std::to_string(k);
      }
    }
    return s;
  }

 private:
  std::vector<Rational> c_;
  void trim() {
    while (!c_.empty() && c_.back() == 0) c_.pop_back();
  }
};

// ── Sign queries ─────────────────────────────────────────────────────────────

inline int sign_at(const Polynomial& p, const Rational& x) { return sign(p.eval(x)); }

/// Sign of p on an immediate right-neighborhood of a (0 iff p ≡ 0).
inline int sign_just_after(const Polynomial& p, const Rational& a) {
  Polynomial q = p;
  while (!q.is_zero()) {
    int s = sign_at(q, a);
    if (s != 0) return s;
    q = q.derivative();
  }
  return 0;
}

/// Sign of p on an immediate left-neighborhood of a (0 iff p ≡ 0).
inline int sign_just_before(const Polynomial& p, const Rational& a) {
  Polynomial q = p;
  int parity = 1;
  while (!q.is_zero()) {
    int s = sign_at(q, a);
    if (s != 0) return s * parity;
    q = q.derivative();
    parity = -parity;
  }
  return 0;
}

// ── Squarefree part and Sturm chains ─────────────────────────────────────────

inline Polynomial poly_gcd(Polynomial a, Polynomial b) {
  while (!b.is_zero()) {
    Polynomial r = a.rem(b);
    a = std::move(b);
    b = std::move(r);
    if (!b.is_zero()) b = b * (Rational(1) / b.leading());  // keep coefficients tame
  }
  if (!a.is_zero()) a = a * (Rational(1) / a.leading());
  return a;
}

/// p with repeated roots collapsed to simple ones.
inline Polynomial squarefree_part(const Polynomial& p) {
  if (p.degree() <= 1) return p;
  Polynomial g = poly_gcd(p, p.derivative());
  if (g.degree() <= 0) return p;
  // Exact division p / g.
  Polynomial q, r = p;
  std::vector<Rational> qc(static_cast<std::size_t>(p.degree() - g.degree()) + 1, Rational(0));
  while (!r.is_zero() && r.degree() >= g.degree()) {
    Rational factor = r.leading() / g.leading();
    int shift = r.degree() - g.degree();
    qc[static_cast<std::size_t>(shift)] = factor;
    std::vector<Rational> m(static_cast<std::size_t>(shift) + 1, Rational(0));
    m.back() = factor;
    r = r - g * Polynomial(std::move(m));
  }
  return Polynomial(std::move(qc));
}

inline std::vector<Polynomial> sturm_chain(const Polynomial& p) {
  std::vector<Polynomial> chain;
  if (p.is_zero()) return chain;
  chain.push_back(p);
  if (p.degree() == 0) return chain;
  chain.push_back(p.derivative());
  while (!chain.back().is_zero() && chain.back().degree() > 0) {
    Polynomial r = chain[chain.size() - 2].rem(chain.back());
    if (r.is_zero()) break;
    chain.push_back(-r);
  }
  return chain;
}

namespace detail {

inline int variations(const std::vector<int>& signs) {
  int v = 0, prev = 0;
  for (int s : signs) {
    if (s == 0) continue;
    if (prev != 0 && s != prev) ++v;
    prev = s;
  }
  return v;
}

/// Sign variations of the chain immediately to the right of x.
inline int variations_just_after(const std::vector<Polynomial>& chain, const Rational& x) {
  std::vector<int> signs;
  signs.reserve(chain.size());
  for (const auto& q : chain) signs.push_back(sign_just_after(q, x));
  return variations(signs);
}

inline int variations_at(const std::vector<Polynomial>& chain, const Rational& x) {
  std::vector<int> signs;
  signs.reserve(chain.size());
  for (const auto& q : chain) signs.push_back(sign_at(q, x));
  return variations(signs);
}

}  // namespace detail

/// Number of distinct real roots of the chain's polynomial in (a, b].
inline int count_roots(const std::vector<Polynomial>& chain, const Rational& a,
                       const Rational& b) {
  if (chain.empty() || chain.front().degree() <= 0) return 0;
  return detail::variations_just_after(chain, a) - detail::variations_at(chain, b);
}

/// Strict upper bound on the absolute value of any real root.
inline Rational root_bound(const Polynomial& p) {
  Rational b(1);
  for (int k = 0; k < p.degree(); ++k) b += rat_abs(p.coeff(k) / p.leading());
  return b;
}

// ── Root isolation ───────────────────────────────────────────────────────────

struct RootLoc {
  bool exact = false;
  Rational value;       // exact root when exact
  Rational lo, hi;      // isolating open interval otherwise (also set when exact)
};

namespace detail {

/// 1/L² threshold below which an isolating interval pins down rationality.
inline Rational rational_root_resolution(const Polynomial& squarefree) {
  Int lcm = 1;
  for (const auto& c : squarefree.coeffs())
    lcm = boost::multiprecision::lcm(lcm, den(c));
  Int lead = rat_abs(squarefree.leading() * Rational(lcm)).convert_to<Int>();
  // Divide out the integer content to get the primitive leading coefficient.
  Int content = 0;
  for (const auto& c : squarefree.coeffs()) {
    Int ci = boost::multiprecision::abs((c * Rational(lcm)).convert_to<Int>());
    content = boost::multiprecision::gcd(content, ci);
  }
  if (content > 1) lead /= content;
  if (lead == 0) lead = 1;
  return Rational(Int(1), lead * lead);
}

inline void isolate_in(const Polynomial& p, const std::vector<Polynomial>& chain,
                       const Rational& a, const Rational& b, const Rational& resolution,
                       const Rational& target_width, std::vector<RootLoc>& out) {
  int n = count_roots(chain, a, b);
  if (n == 0) return;
  if (n == 1) {
    Rational lo = a, hi = b;
    if (sign_at(p, hi) == 0) {
      out.push_back({true, hi, hi, hi});
      return;
    }
    bool decided_irrational = false;
    while (true) {
      Rational width = hi - lo;
      if (!decided_irrational && width < resolution) {
        Rational guess = simplest_rational_between(lo, hi);
        if (sign_at(p, guess) == 0) {
          out.push_back({true, guess, lo, hi});
          return;
        }
        decided_irrational = true;
      }
      if (decided_irrational && width <= target_width) {
        out.push_back({false, (lo + hi) / 2, lo, hi});
        return;
      }
      Rational mid = (lo + hi) / 2;
      int sm = sign_at(p, mid);
      if (sm == 0) {
        out.push_back({true, mid, lo, hi});
        return;
      }
      if (count_roots(chain, lo, mid) == 1)
        hi = mid;
      else
        lo = mid;
    }
  }
  Rational mid = (a + b) / 2;
  isolate_in(p, chain, a, mid, resolution, target_width, out);
  isolate_in(p, chain, mid, b, resolution, target_width, out);
}

}  // namespace detail

/// Distinct real roots of p in the half-open interval (from, to], sorted
/// ascending.  Irrational roots carry isolating intervals of width ≤
/// target_width whose endpoints are not roots.
inline std::vector<RootLoc> isolate_roots(const Polynomial& p, const Rational& from,
                                          const Rational& to,
                                          const Rational& target_width = Rational(Int(1),
                                                                                  Int(1000000000))) {
  std::vector<RootLoc> out;
  if (p.is_zero() || p.degree() == 0 || !(from < to)) return out;
  Polynomial sf = squarefree_part(p);
  std::vector<Polynomial> chain = sturm_chain(sf);
  Rational resolution = detail::rational_root_resolution(sf);
  detail::isolate_in(sf, chain, from, to, resolution, target_width, out);
  std::sort(out.begin(), out.end(),
            [](const RootLoc& x, const RootLoc& y) { return x.lo < y.lo; });
  return out;
}

/// Distinct real roots of p strictly greater than `from`.
inline std::vector<RootLoc> roots_after(const Polynomial& p, const Rational& from,
                                        const Rational& target_width = Rational(Int(1),
                                                                                Int(1000000000))) {
  if (p.is_zero() || p.degree() <= 0) return {};
  Rational bound = root_bound(p);
  if (!(from < bound)) return {};
  return isolate_roots(p, from, bound, target_width);
}

// ── Truth-change events ──────────────────────────────────────────────────────

enum class RelKind { eq, neq, lt, le, gt, ge };

inline bool rel_truth(RelKind op, int s) {
  switch (op) {
    case RelKind::eq: return s == 0;
    case RelKind::neq: return s != 0;
    case RelKind::lt: return s < 0;
    case RelKind::le: return s <= 0;
    case RelKind::gt: return s > 0;
    case RelKind::ge: return s >= 0;
  }
  return false;
}

struct EventTime {
  bool exact = true;
  Rational time;     // exact event time, or isolating-interval midpoint
  Rational lo, hi;   // isolating interval (degenerate when exact)
};

/// Smallest t > from at which the truth of (p(t) op 0) differs from its value
/// on an immediate right-neighborhood of `from`.  nullopt when the truth is
/// constant on (from, ∞); a zero polynomial is constant for every relop.
inline std::optional<EventTime> earliest_sign_change(const Polynomial& p, RelKind op,
                                                     const Rational& from) {
  if (p.is_zero() || p.degree() == 0) return std::nullopt;
  bool base = rel_truth(op, sign_just_after(p, from));
  for (const RootLoc& r : roots_after(p, from)) {
    if (r.exact) {
      bool at = rel_truth(op, 0);
      bool after = rel_truth(op, sign_just_after(p, r.value));
      if (at != base || after != base) return EventTime{true, r.value, r.value, r.value};
    } else {
      // Irrational root: p has constant nonzero sign on (root, hi].
      bool at = rel_truth(op, 0);
      bool after = rel_truth(op, sign_at(p, r.hi));
      if (at != base || after != base) return EventTime{false, (r.lo + r.hi) / 2, r.lo, r.hi};
    }
  }
  return std::nullopt;
}

}  // namespace hydla
