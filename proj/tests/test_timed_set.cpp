#include <hydla/hydla.hpp>
#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace hydla;

namespace {

std::vector<std::string> piece_strings(const TimedConstraintSet& tcs, std::size_t idx) {
  std::vector<std::string> out;
  for (const ConstraintPtr& c : tcs.piece_set(idx).items()) out.push_back(to_string(c));
  return out;
}

// The definition body of the single module in `src`.
ConstraintPtr only_def(const std::string& src) {
  ParsedProgram p = parse_program(src);
  REQUIRE(p.definitions.size() == 1);
  return p.definitions.front().second;
}

// Piece-wise copy with one element dropped from one piece.
TimedConstraintSet rebuild_without(const TimedConstraintSet& src, std::size_t piece,
                                   const ConstraintPtr& drop) {
  TimedConstraintSet out;
  for (const Rational& b : src.breakpoints()) out.add_breakpoint(b);
  for (std::size_t i = 0; i < src.piece_count(); ++i)
    for (const ConstraintPtr& c : src.piece_set(i).items())
      if (i != piece || compare(c, drop) != 0) out.insert_at_piece(i, c);
  return out;
}

bool is_closed(const TimedConstraintSet& s) { return box_closure(s) == s; }

// Every piece of `small` is contained in the same piece of `big` (they share
// breakpoints by construction here).
bool piecewise_subset(const TimedConstraintSet& small, const TimedConstraintSet& big) {
  REQUIRE(small.breakpoints() == big.breakpoints());
  for (std::size_t i = 0; i < small.piece_count(); ++i)
    if (!big.piece_set(i).includes(small.piece_set(i))) return false;
  return true;
}

}  // namespace

TEST_CASE("pieces alternate points and open intervals") {
  TimedConstraintSet tcs;
  REQUIRE(tcs.piece_count() == 2);  // [0], (0, ∞)
  tcs.add_breakpoint(Rational(3));
  tcs.add_breakpoint(Rational(1));
  REQUIRE(tcs.breakpoints() == std::vector<Rational>{Rational(0), Rational(1), Rational(3)});
  REQUIRE(tcs.piece_count() == 6);
  REQUIRE(tcs.piece_is_point(0));
  REQUIRE_FALSE(tcs.piece_is_point(1));
  REQUIRE(tcs.piece_index_of(Rational(0)) == 0);
  REQUIRE(tcs.piece_index_of(Rational(1, 2)) == 1);
  REQUIRE(tcs.piece_index_of(Rational(1)) == 2);
  REQUIRE(tcs.piece_index_of(Rational(2)) == 3);
  REQUIRE(tcs.piece_index_of(Rational(100)) == 5);
  auto [lo, hi] = tcs.piece_range(3);
  REQUIRE(lo == Rational(1));
  REQUIRE(hi == Rational(3));
  REQUIRE_FALSE(tcs.piece_range(5).second.has_value());
}

TEST_CASE("splitting a piece never changes the represented function") {
  ConstraintPtr a = only_def("M <=> x = 1.\n");
  ConstraintPtr b = only_def("M <=> y = 2.\n");
  TimedConstraintSet tcs;
  tcs.insert_at_piece(1, a);
  tcs.insert_at_point(Rational(2), b);
  TimedConstraintSet refined = tcs;
  refined.add_breakpoint(Rational(1));
  refined.add_breakpoint(Rational(5, 2));
  REQUIRE(tcs == refined);
  for (const Rational& t : {Rational(1, 3), Rational(1), Rational(2), Rational(7, 3),
                            Rational(5, 2), Rational(17)})
    REQUIRE(tcs.at(t) == refined.at(t));
}

TEST_CASE("at_open requires a single piece") {
  TimedConstraintSet tcs;
  tcs.add_breakpoint(Rational(1));
  REQUIRE_NOTHROW(tcs.at_open(Rational(0), Rational(1)));
  REQUIRE_THROWS_AS(tcs.at_open(Rational(0), Rational(2)), std::invalid_argument);
  REQUIRE_NOTHROW(tcs.at_open(Rational(1), Rational(100)));  // final open piece
}

TEST_CASE("closure spreads law members forward, boxes stay put") {
  // From the definition f = 0 & [](f' = 1): the store at [0] is
  // {f = 0, f' = 1, [](f' = 1)}; at every t > 0 it is {f' = 1} alone.
  std::map<std::string, ConstraintPtr> defs;
  defs["A"] = only_def("A <=> f = 0 & [](f' = 1).\n");
  QStore q(defs);
  const TimedConstraintSet& tcs = q.of("A");
  REQUIRE(piece_strings(tcs, 0) ==
          std::vector<std::string>{"f = 0", "f' = 1", "[](f' = 1)"});
  REQUIRE(piece_strings(tcs, 1) == std::vector<std::string>{"f' = 1"});
}

TEST_CASE("nested boxes close transitively") {
  ConstraintPtr c = only_def("M <=> [](x = 1 & [](y = 2)).\n");
  TimedConstraintSet tcs;
  tcs.add_breakpoint(Rational(4));
  tcs.insert_at_point(Rational(4), c);
  TimedConstraintSet closed = box_closure(tcs);
  // Nothing leaks backward.
  REQUIRE(closed.piece_set(0).empty());
  REQUIRE(closed.piece_set(1).empty());
  // At [4]: the box, both inner members, and the inner box.
  REQUIRE(piece_strings(closed, 2) ==
          std::vector<std::string>{"x = 1", "y = 2", "[](y = 2)", "[](x = 1 & [](y = 2))"});
  // After 4: the outer box stays where it was introduced, but the inner box is
  // one of its members and spreads like any other member.
  REQUIRE(piece_strings(closed, 3) ==
          std::vector<std::string>{"x = 1", "y = 2", "[](y = 2)"});
}

TEST_CASE("box closure: extension, idempotence, closedness, minimality") {
  std::vector<ConstraintPtr> pool = {
      only_def("M <=> x = 1.\n"),
      only_def("M <=> y = 2.\n"),
      only_def("M <=> z' = 3.\n"),
      only_def("M <=> w < 0.\n"),
      only_def("M <=> [](x = 1).\n"),
      only_def("M <=> [](y = 2 & z' = 3).\n"),
      only_def("M <=> [](w < 0 & [](y = 2)).\n"),
      only_def("M <=> [](x = 1 => y = 2).\n"),
  };
  std::mt19937 rng(20260814);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> nelem(0, 6), nbreak(0, 2), tpick(1, 4);

  for (int trial = 0; trial < 1100; ++trial) {
    TimedConstraintSet in;
    for (int b = nbreak(rng); b > 0; --b) in.add_breakpoint(Rational(tpick(rng)));
    std::uniform_int_distribution<std::size_t> piece(0, in.piece_count() - 1);
    for (int e = nelem(rng); e > 0; --e) in.insert_at_piece(piece(rng), pool[pick(rng)]);

    TimedConstraintSet out = box_closure(in);

    REQUIRE(out.breakpoints() == in.breakpoints());
    REQUIRE(piecewise_subset(in, out));           // extension
    REQUIRE(box_closure(out) == out);             // idempotence
    for (std::size_t i = 0; i < out.piece_count(); ++i)  // closedness
      for (const ConstraintPtr& c : out.piece_set(i).items()) {
        if (c->kind != Constraint::Kind::always) continue;
        for (const ConstraintPtr& m : flatten(c->body))
          for (std::size_t j = i; j < out.piece_count(); ++j)
            REQUIRE(out.piece_set(j).contains(m));
      }

    // Minimality: dropping any element the closure added leaves a set that is
    // no longer closed (were it closed, it would be a smaller closed superset
    // of the input than the closure itself).
    std::size_t added = 0;
    for (std::size_t i = 0; i < out.piece_count(); ++i)
      for (const ConstraintPtr& c : out.piece_set(i).items())
        if (!in.piece_set(i).contains(c)) ++added;
    if (added > 0 && added <= 8) {
      for (std::size_t i = 0; i < out.piece_count(); ++i)
        for (const ConstraintPtr& c : out.piece_set(i).items()) {
          if (in.piece_set(i).contains(c)) continue;
          REQUIRE_FALSE(is_closed(rebuild_without(out, i, c)));
        }
    }
  }
}

TEST_CASE("skolem names are a pure function of site, base, and time") {
  SkolemContext ctx;
  REQUIRE(ctx.fresh("site1", "a", Rational(5)) == "a#5");
  REQUIRE(ctx.fresh("site1", "a", Rational(5)) == "a#5");        // idempotent
  REQUIRE(ctx.fresh("site2", "a", Rational(5)) == "a#5#2");      // second site
  REQUIRE(ctx.fresh("site1", "a", Rational(1, 2)) == "a#1_2");   // denominator
  REQUIRE(ctx.fresh("site2", "a", Rational(1, 2)) == "a#1_2#2");
  REQUIRE(ctx.fresh("site1", "a", Rational(7)) == "a#7");
  REQUIRE(ctx.fresh("site1", "b", Rational(5)) == "b#5");

  SkolemContext fresh_ctx;  // same queries, fresh context: identical names
  REQUIRE(fresh_ctx.fresh("site1", "a", Rational(5)) == "a#5");
}

TEST_CASE("skolemize witnesses nested quantifiers outside conditionals") {
  ConstraintPtr c = only_def("M <=> E x.(x = 0 & [](x' = 1)).\n");
  SkolemContext ctx;
  ConstraintPtr w = skolemize(c, Rational(5), ctx, "s");
  REQUIRE(to_string(w) == "x#5 = 0 & [](x#5' = 1)");

  // Quantifiers inside a conditional consequent wait for the fire.
  ConstraintPtr guarded = only_def("M <=> [](f = 5 => E a.(a = 0)).\n");
  SkolemContext ctx2;
  ConstraintPtr g = skolemize_outside_conditionals(guarded, Rational(0), ctx2, "s");
  REQUIRE(to_string(g) == to_string(guarded));
  REQUIRE(ctx2.assigned.empty());
}

TEST_CASE("expand_consequent logs exactly the newly present members") {
  std::map<std::string, ConstraintPtr> defs;
  defs["F"] = only_def("F <=> [](y = 5 => x = 1).\n");
  QStore q(defs);
  ConstraintPtr body = defs["F"]->body->body;  // consequent x = 1
  auto added = q.expand_consequent("F", body, Rational(5));
  REQUIRE(added.size() == 1);
  REQUIRE(to_string(added[0]) == "x = 1");
  REQUIRE(q.of("F").at(Rational(5)).contains(body));
  REQUIRE_FALSE(q.of("F").at_open(Rational(5), Rational(6)).contains(body));

  // Re-firing the same consequent at the same instant adds nothing.
  REQUIRE(q.expand_consequent("F", body, Rational(5)).empty());
  REQUIRE(q.additions().size() == 1);
}

TEST_CASE("expand_on_interval lands on the piece after the phase start") {
  std::map<std::string, ConstraintPtr> defs;
  defs["M"] = only_def("M <=> [](x > 0 => y = 1).\n");
  QStore q(defs);
  q.add_breakpoint_everywhere(Rational(2));
  q.add_breakpoint_everywhere(Rational(3));
  ConstraintPtr body = defs["M"]->body->body;
  auto added = q.expand_on_interval("M", body, Rational(2));
  REQUIRE(added.size() == 1);
  const TimedConstraintSet& tcs = q.of("M");
  REQUIRE_FALSE(tcs.at(Rational(2)).contains(body));
  REQUIRE(tcs.at_open(Rational(2), Rational(3)).contains(body));
  REQUIRE_FALSE(tcs.at(Rational(3)).contains(body));
}

TEST_CASE("a fired box persists from its instant onward") {
  std::map<std::string, ConstraintPtr> defs;
  defs["V"] = only_def("V <=> [](v- = 0 => [](h = 0)).\n");
  QStore q(defs);
  ConstraintPtr body = defs["V"]->body->body;  // [](h = 0)
  q.expand_consequent("V", body, Rational(30, 7));
  const TimedConstraintSet& tcs = q.of("V");
  ConstraintPtr h0 = only_def("M <=> h = 0.\n");
  REQUIRE(tcs.at(Rational(30, 7)).contains(h0));
  REQUIRE(tcs.at(Rational(100)).contains(h0));
  REQUIRE_FALSE(tcs.at(Rational(4)).contains(h0));
}
