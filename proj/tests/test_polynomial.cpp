#include <hydla/hydla.hpp>
#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace hydla;

namespace {

std::mt19937 rng(4242);

Rational small_rat() {
  std::uniform_int_distribution<long long> num(-20, 20);
  std::uniform_int_distribution<long long> dnm(1, 6);
  return Rational(num(rng), dnm(rng));
}

Polynomial random_poly(int max_deg) {
  std::uniform_int_distribution<int> deg(0, max_deg);
  std::vector<Rational> cs(static_cast<std::size_t>(deg(rng)) + 1);
  for (auto& c : cs) c = small_rat();
  return Polynomial(cs);
}

// Naive power-sum evaluation as the oracle for Horner.
Rational eval_naive(const Polynomial& p, const Rational& x) {
  Rational acc(0), pw(1);
  for (const Rational& c : p.coeffs()) {
    acc += c * pw;
    pw *= x;
  }
  return acc;
}

}  // namespace

TEST_CASE("construction trims trailing zero coefficients") {
  Polynomial p({Rational(1), Rational(2), Rational(0), Rational(0)});
  REQUIRE(p.degree() == 1);
  REQUIRE(Polynomial({Rational(0)}).is_zero());
  REQUIRE(Polynomial({}).is_zero());
  REQUIRE(Polynomial::constant(Rational(5)).degree() == 0);
  REQUIRE(Polynomial::identity().degree() == 1);
}

TEST_CASE("evaluation agrees with the power-sum oracle") {
  for (int i = 0; i < 400; ++i) {
    Polynomial p = random_poly(6);
    Rational x = small_rat();
    REQUIRE(p.eval(x) == eval_naive(p, x));
  }
}

TEST_CASE("derivative of an antiderivative is the identity") {
  for (int i = 0; i < 200; ++i) {
    Polynomial p = random_poly(5);
    Rational c = small_rat();
    Polynomial ad = p.antiderivative(c);
    REQUIRE(ad.derivative().coeffs() == p.coeffs());
    REQUIRE(ad.eval(Rational(0)) == c);
  }
}

TEST_CASE("shifted composes with translation") {
  for (int i = 0; i < 200; ++i) {
    Polynomial p = random_poly(4);
    Rational d = small_rat(), x = small_rat();
    REQUIRE(p.shifted(d).eval(x) == p.eval(x + d));
  }
}

TEST_CASE("one-sided signs at a root") {
  // (t - 1)^2 (t + 2): root at -2 crosses, root at 1 touches.
  Polynomial p = Polynomial({Rational(-1), Rational(1)});
  p = p * p * Polynomial({Rational(2), Rational(1)});
  REQUIRE(sign_at(p, Rational(-2)) == 0);
  REQUIRE(sign_just_before(p, Rational(-2)) == -1);
  REQUIRE(sign_just_after(p, Rational(-2)) == 1);
  REQUIRE(sign_at(p, Rational(1)) == 0);
  REQUIRE(sign_just_before(p, Rational(1)) == 1);
  REQUIRE(sign_just_after(p, Rational(1)) == 1);
  REQUIRE(sign_just_after(Polynomial::constant(Rational(-3)), Rational(0)) == -1);
}

TEST_CASE("Sturm root counting matches known factorizations") {
  // Roots at 0, 3/2, and -5 with multiplicities 2, 1, 1.
  Polynomial p = Polynomial::identity() * Polynomial::identity() *
                 Polynomial({Rational(-3, 2), Rational(1)}) *
                 Polynomial({Rational(5), Rational(1)});
  auto chain = sturm_chain(squarefree_part(p));
  REQUIRE(count_roots(chain, Rational(-10), Rational(10)) == 3);
  REQUIRE(count_roots(chain, Rational(-10), Rational(-1)) == 1);
  REQUIRE(count_roots(chain, Rational(1), Rational(10)) == 1);
  // Half-open convention (a, b]: a root at the left endpoint is not counted.
  REQUIRE(count_roots(chain, Rational(0), Rational(1)) == 0);
  REQUIRE(count_roots(chain, Rational(-1, 2), Rational(0)) == 1);
}

TEST_CASE("isolate_roots recovers rational roots exactly") {
  // Roots 1/3, 2, and 7 (distinct, all rational).
  Polynomial p = Polynomial({Rational(-1, 3), Rational(1)}) *
                 Polynomial({Rational(-2), Rational(1)}) *
                 Polynomial({Rational(-7), Rational(1)});
  auto rs = isolate_roots(p, Rational(-100), Rational(100));
  REQUIRE(rs.size() == 3);
  for (const RootLoc& r : rs) REQUIRE(r.exact);
  REQUIRE(rs[0].value == Rational(1, 3));
  REQUIRE(rs[1].value == Rational(2));
  REQUIRE(rs[2].value == Rational(7));
}

TEST_CASE("isolate_roots isolates irrational roots in disjoint intervals") {
  // t^2 - 2: two irrational roots.
  Polynomial p({Rational(-2), Rational(0), Rational(1)});
  auto rs = isolate_roots(p, Rational(-10), Rational(10), Rational(1, 1000));
  REQUIRE(rs.size() == 2);
  for (const RootLoc& r : rs) {
    REQUIRE_FALSE(r.exact);
    REQUIRE(r.hi - r.lo <= Rational(1, 1000));
    REQUIRE(sign_at(p, r.lo) * sign_at(p, r.hi) < 0);
  }
  REQUIRE(rs[0].hi <= rs[1].lo);
}

TEST_CASE("random products: every planted rational root is found") {
  std::uniform_int_distribution<int> nroots(1, 4);
  for (int i = 0; i < 100; ++i) {
    std::set<Rational> roots;
    int n = nroots(rng);
    for (int k = 0; k < n; ++k) roots.insert(small_rat());
    Polynomial p = Polynomial::constant(Rational(1));
    for (const Rational& r : roots) p = p * Polynomial({-r, Rational(1)});
    auto rs = isolate_roots(p, Rational(-100), Rational(100));
    REQUIRE(rs.size() == roots.size());
    auto it = roots.begin();
    for (const RootLoc& r : rs) {
      REQUIRE(r.exact);
      REQUIRE(r.value == *it++);
    }
  }
}

TEST_CASE("earliest_sign_change honors the relation at and after the root") {
  // p = t - 2 starts negative after 0.
  Polynomial p({Rational(-2), Rational(1)});
  auto ev = earliest_sign_change(p, RelKind::lt, Rational(0));
  REQUIRE(ev);
  REQUIRE(ev->exact);
  REQUIRE(ev->time == Rational(2));  // t < 2 stops holding at t = 2

  // p >= 0 first holds at t = 2 as well.
  ev = earliest_sign_change(p, RelKind::ge, Rational(0));
  REQUIRE(ev);
  REQUIRE(ev->time == Rational(2));

  // neq flips exactly at the root even though the sign recovers after it:
  // (t-2)^2 != 0 fails only at the touch point.
  Polynomial sq = p * p;
  ev = earliest_sign_change(sq, RelKind::neq, Rational(0));
  REQUIRE(ev);
  REQUIRE(ev->exact);
  REQUIRE(ev->time == Rational(2));

  // A touch does not end (p <= 0): -(t-2)^2 stays <= 0 everywhere.
  Polynomial neg = -sq;
  REQUIRE_FALSE(earliest_sign_change(neg, RelKind::le, Rational(0)).has_value());

  // Constant truth: no event.
  REQUIRE_FALSE(earliest_sign_change(Polynomial::constant(Rational(3)), RelKind::gt,
                                     Rational(0))
                    .has_value());
  REQUIRE_FALSE(earliest_sign_change(Polynomial{}, RelKind::eq, Rational(0)).has_value());
}

TEST_CASE("earliest_sign_change flags irrational event times") {
  // t^2 - 2 > 0 fails first at sqrt(2).
  Polynomial p({Rational(-2), Rational(0), Rational(1)});
  auto ev = earliest_sign_change(p, RelKind::lt, Rational(0));
  REQUIRE(ev);
  REQUIRE_FALSE(ev->exact);
  REQUIRE(ev->lo < ev->hi);
  REQUIRE(Rational(2) > ev->lo * ev->lo);
  REQUIRE(Rational(2) < ev->hi * ev->hi);
}

TEST_CASE("rel_truth truth table") {
  REQUIRE(rel_truth(RelKind::eq, 0));
  REQUIRE_FALSE(rel_truth(RelKind::eq, 1));
  REQUIRE(rel_truth(RelKind::neq, -1));
  REQUIRE(rel_truth(RelKind::lt, -1));
  REQUIRE_FALSE(rel_truth(RelKind::lt, 0));
  REQUIRE(rel_truth(RelKind::le, 0));
  REQUIRE(rel_truth(RelKind::gt, 1));
  REQUIRE(rel_truth(RelKind::ge, 0));
  REQUIRE_FALSE(rel_truth(RelKind::ge, -1));
}

TEST_CASE("polynomial printing uses descending powers") {
  Polynomial p({Rational(10), Rational(0), Rational(-49, 10)});
  REQUIRE(p.str() == "-49/10*t^2 + 10");
  REQUIRE(Polynomial{}.str() == "0");
}
