#include <hydla/hydla.hpp>
#include <catch2/catch_amalgamated.hpp>

using namespace hydla;

TEST_CASE("point jets are exact and per-order") {
  Trajectory tr;
  tr.declare("x", Rational(0));
  tr.set_point("x", Rational(0), 0, Rational(10));
  tr.set_point("x", Rational(0), 1, Rational(-3, 2));
  REQUIRE(tr.try_value("x", 0, Rational(0)) == Rational(10));
  REQUIRE(tr.try_value("x", 1, Rational(0)) == Rational(-3, 2));
  REQUIRE_FALSE(tr.try_value("x", 2, Rational(0)).has_value());  // order not stored
  REQUIRE_FALSE(tr.try_value("y", 0, Rational(0)).has_value());  // unknown variable
}

TEST_CASE("segments evaluate in local time") {
  Trajectory tr;
  tr.declare("x", Rational(0));
  // x = 10 - (49/10)τ² on (0, 10/7), τ = t.
  tr.add_segment("x", Rational(0), Rational(10, 7),
                 Polynomial({Rational(10), Rational(0), Rational(-49, 10)}));
  REQUIRE(tr.try_value("x", 0, Rational(1)) == Rational(51, 10));
  REQUIRE(tr.try_value("x", 1, Rational(1)) == Rational(-49, 5));
  REQUIRE(tr.try_value("x", 2, Rational(1)) == Rational(-49, 5));
  REQUIRE(tr.try_value("x", 3, Rational(1)) == Rational(0));
  // Next segment is in its own local time: x = 7τ on (10/7, 2).
  tr.add_segment("x", Rational(10, 7), Rational(2), Polynomial({Rational(0), Rational(7)}));
  REQUIRE(tr.try_value("x", 0, Rational(3, 2)) == Rational(1, 2));
}

TEST_CASE("segment endpoints are open") {
  Trajectory tr;
  tr.declare("x", Rational(0));
  tr.add_segment("x", Rational(0), Rational(1), Polynomial::constant(Rational(4)));
  REQUIRE_FALSE(tr.try_value("x", 0, Rational(0)).has_value());
  REQUIRE_FALSE(tr.try_value("x", 0, Rational(1)).has_value());
  REQUIRE(tr.try_value("x", 0, Rational(1, 2)) == Rational(4));
}

TEST_CASE("a point jet shadows the surrounding segment") {
  Trajectory tr;
  tr.declare("g", Rational(0));
  tr.add_segment("g", Rational(0), Rational(10), Polynomial::constant(Rational(0)));
  tr.set_point("g", Rational(7), 0, Rational(1));  // pulse
  REQUIRE(tr.try_value("g", 0, Rational(7)) == Rational(1));
  REQUIRE(tr.try_value("g", 0, Rational(13, 2)) == Rational(0));
  // The left limit at the pulse comes from the segment, not the jet.
  REQUIRE(tr.try_left_limit("g", 0, Rational(7)) == Rational(0));
}

TEST_CASE("left limits come from the closing or containing segment") {
  Trajectory tr;
  tr.declare("x", Rational(0));
  tr.add_segment("x", Rational(0), Rational(2), Polynomial({Rational(0), Rational(3)}));
  REQUIRE(tr.try_left_limit("x", 0, Rational(2)) == Rational(6));   // closes at 2
  REQUIRE(tr.try_left_limit("x", 0, Rational(1)) == Rational(3));   // interior
  REQUIRE(tr.try_left_limit("x", 1, Rational(2)) == Rational(3));
  REQUIRE_FALSE(tr.try_left_limit("x", 0, Rational(0)).has_value());  // at birth
  REQUIRE_FALSE(tr.try_left_limit("x", 0, Rational(3)).has_value());  // past the data
}

TEST_CASE("explicit left-limit overrides shadow segments") {
  Trajectory tr;
  tr.declare("x", Rational(0));
  tr.add_segment("x", Rational(0), Rational(1), Polynomial::constant(Rational(5)));
  tr.set_left_limit("x", Rational(1), 0, Rational(0));
  REQUIRE(tr.try_left_limit("x", 0, Rational(1)) == Rational(0));
  // An override names specific orders; others become undefined at that instant.
  REQUIRE_FALSE(tr.try_left_limit("x", 1, Rational(1)).has_value());
}

TEST_CASE("declare keeps the earliest birth and gates evaluation") {
  Trajectory tr;
  tr.declare("a", Rational(5));
  tr.declare("a", Rational(7));  // later birth does not move it
  tr.set_point("a", Rational(5), 0, Rational(0));
  REQUIRE(tr.try_value("a", 0, Rational(5)) == Rational(0));
  REQUIRE_FALSE(tr.try_value("a", 0, Rational(4)).has_value());
  REQUIRE_FALSE(tr.try_left_limit("a", 0, Rational(5)).has_value());
}

TEST_CASE("overlapping or empty segments are rejected") {
  Trajectory tr;
  tr.declare("x", Rational(0));
  tr.add_segment("x", Rational(0), Rational(2), Polynomial::constant(Rational(1)));
  REQUIRE_THROWS_AS(
      tr.add_segment("x", Rational(1), Rational(3), Polynomial::constant(Rational(1))),
      std::invalid_argument);
  REQUIRE_THROWS_AS(
      tr.add_segment("x", Rational(3), Rational(3), Polynomial::constant(Rational(1))),
      std::invalid_argument);
}

TEST_CASE("eval and left_limit throw structured errors off the data") {
  Trajectory tr;
  tr.declare("x", Rational(0));
  tr.set_point("x", Rational(0), 0, Rational(1));
  REQUIRE_THROWS_AS(tr.eval("y", 0, Rational(0)), EvalException);
  REQUIRE_THROWS_AS(tr.eval("x", 1, Rational(0)), EvalException);
  REQUIRE_THROWS_AS(tr.left_limit("x", 0, Rational(0)), EvalException);
  REQUIRE(tr.eval("x", 0, Rational(0)) == Rational(1));
}
