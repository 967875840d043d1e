#include <hydla/hydla.hpp>
#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace hydla;

namespace {

Decl decl_of(const std::string& src) {
  ParsedProgram p = parse_program(src);
  REQUIRE(p.declaration);
  return *p.declaration;
}

ModuleSet ms(std::initializer_list<const char*> names) {
  ModuleSet s;
  for (const char* n : names) s.insert(n);
  return s;
}

}  // namespace

TEST_CASE("a declaration with one weak module derives a two-element chain") {
  Decl d = decl_of("INIT <=> x = 1.\nPARAMS <=> y = 2.\nFALL <=> z = 3.\n"
                   "BOUNCE <=> w = 4.\nINIT, PARAMS, (FALL << BOUNCE).\n");
  ModuleSetPoset p = derive_module_poset(d);
  REQUIRE(p.elements.size() == 2);
  REQUIRE(p.elements[0] == ms({"BOUNCE", "INIT", "PARAMS"}));
  REQUIRE(p.elements[1] == ms({"BOUNCE", "FALL", "INIT", "PARAMS"}));
  REQUIRE(p.hasse_edges() == std::vector<std::pair<int, int>>{{0, 1}});
  REQUIRE(p.is_maximal(1));
  REQUIRE_FALSE(p.is_maximal(0));
}

TEST_CASE("priority chains justify omission transitively") {
  // A << B << C: dropping A needs B or C present; dropping A and B needs C.
  Decl d = decl_of("A <=> x = 1.\nB <=> x = 2.\nC <=> x = 3.\nA << B << C.\n");
  ModuleSetPoset p = derive_module_poset(d);
  std::vector<ModuleSet> want = {ms({"C"}), ms({"B", "C"}), ms({"A", "B", "C"})};
  REQUIRE(p.elements == want);
  // Dropping B alone is not admissible even though C is stronger than A.
  REQUIRE(p.index_of(ms({"A", "C"})) == -1);
}

TEST_CASE("parallel groups compose priorities independently") {
  Decl d = decl_of("A <=> x = 1.\nB <=> y = 1.\nC <=> y = 2.\nD <=> z = 1.\n"
                   "E2 <=> z = 2.\nA, (B << C), (D << E2).\n");
  ModuleSetPoset p = derive_module_poset(d);
  REQUIRE(p.elements.size() == 4);
  REQUIRE(p.index_of(ms({"A", "C", "E2"})) >= 0);
  REQUIRE(p.index_of(ms({"A", "B", "C", "E2"})) >= 0);
  REQUIRE(p.index_of(ms({"A", "C", "D", "E2"})) >= 0);
  REQUIRE(p.index_of(ms({"A", "B", "C", "D", "E2"})) >= 0);
  REQUIRE(p.index_of(ms({"B", "C", "D", "E2"})) == -1);  // A is unomittable
}

TEST_CASE("admissible sets match the defining predicate on random priorities") {
  std::mt19937 rng(7321);
  std::bernoulli_distribution edge(0.35);
  for (int trial = 0; trial < 400; ++trial) {
    std::uniform_int_distribution<std::size_t> nmod(1, 5);
    std::size_t n = nmod(rng);
    ModulePriority pr;
    for (std::size_t i = 0; i < n; ++i) pr.modules.push_back("M" + std::to_string(i));
    pr.weaker.assign(n, std::vector<bool>(n, false));
    // A random DAG: only lower index ≺ higher index, then closed transitively.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (edge(rng)) pr.weaker[i][j] = true;
    pr.close_transitively();

    std::set<ModuleSet> got;
    for (const ModuleSet& s : admissible_sets(pr)) got.insert(s);

    std::set<ModuleSet> want;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      bool ok = true;
      for (std::size_t m = 0; m < n && ok; ++m) {
        if (mask & (1u << m)) continue;
        bool justified = false;
        for (std::size_t s = 0; s < n; ++s)
          if ((mask & (1u << s)) && pr.weaker[m][s]) justified = true;
        ok = justified;
      }
      if (!ok) continue;
      ModuleSet s;
      for (std::size_t m = 0; m < n; ++m)
        if (mask & (1u << m)) s.insert(pr.modules[m]);
      want.insert(s);
    }
    REQUIRE(got == want);
  }
}

TEST_CASE("explicit posets accept scrambled element order") {
  // Elements supplied in non-canonical order; indices refer to that order.
  std::vector<ModuleSet> elems = {ms({"D", "E", "F"}), ms({"D"}), ms({})};
  ModuleSetPoset p = make_explicit_poset(elems, {{2, 1}, {1, 0}});
  REQUIRE(p.elements[0] == ms({}));
  REQUIRE(p.elements[1] == ms({"D"}));
  REQUIRE(p.elements[2] == ms({"D", "E", "F"}));
  REQUIRE(p.less[0][1]);
  REQUIRE(p.less[1][2]);
  REQUIRE(p.less[0][2]);  // transitive closure
  REQUIRE_FALSE(p.less[1][0]);
  REQUIRE(p.hasse_edges() == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});
}

TEST_CASE("explicit poset validation") {
  std::vector<ModuleSet> dup = {ms({"A"}), ms({"A"})};
  REQUIRE_THROWS_AS(make_explicit_poset(dup, {}), std::invalid_argument);

  std::vector<ModuleSet> two = {ms({"A"}), ms({"B"})};
  REQUIRE_THROWS_AS(make_explicit_poset(two, {{0, 2}}), std::invalid_argument);
  REQUIRE_THROWS_AS(make_explicit_poset(two, {{-1, 0}}), std::invalid_argument);
  REQUIRE_THROWS_AS(make_explicit_poset(two, {{0, 0}}), std::invalid_argument);
  REQUIRE_THROWS_AS(make_explicit_poset(two, {{0, 1}, {1, 0}}), std::invalid_argument);
}

TEST_CASE("maximal-consistent adoption: exact semantics on random posets") {
  // Invariant: the chosen indices are exactly the satisfiable elements with
  // every strictly greater element unsatisfiable — and thus an antichain.
  std::mt19937 rng(555);
  std::bernoulli_distribution keep(0.6), sat(0.5);
  int cases = 0;
  while (cases < 1200) {
    std::uniform_int_distribution<std::size_t> nmod(1, 5);
    std::size_t n = nmod(rng);
    std::vector<ModuleSet> elems;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      if (!keep(rng)) continue;
      ModuleSet s;
      for (std::size_t m = 0; m < n; ++m)
        if (mask & (1u << m)) s.insert("M" + std::to_string(m));
      elems.push_back(s);
    }
    if (elems.empty()) continue;
    ++cases;
    ModuleSetPoset poset = detail::poset_from_subset_order(elems);

    std::vector<char> satisfiable(poset.elements.size());
    for (auto& v : satisfiable) v = sat(rng);

    Adoption a = find_maximal_consistent(poset, [&](std::size_t i) {
      ElementOutcome oc;
      oc.status = satisfiable[i] ? Feasibility::consistent : Feasibility::inconsistent;
      return oc;
    });

    std::vector<std::size_t> want;
    for (std::size_t i = 0; i < poset.elements.size(); ++i) {
      if (!satisfiable[i]) continue;
      bool dominated = false;
      for (std::size_t j = 0; j < poset.elements.size(); ++j)
        if (poset.less[i][j] && satisfiable[j]) dominated = true;
      if (!dominated) want.push_back(i);
    }
    REQUIRE(a.chosen == want);

    for (std::size_t i : a.chosen) {
      for (std::size_t j : a.chosen) REQUIRE_FALSE(poset.less[i][j]);  // antichain
      for (int j : poset.strictly_above(static_cast<int>(i)))
        REQUIRE_FALSE(satisfiable[static_cast<std::size_t>(j)]);        // maximality
      auto it = a.outcomes.find(i);
      REQUIRE(it != a.outcomes.end());
      REQUIRE(it->second.status == Feasibility::consistent);
    }
  }
}

TEST_CASE("adoption never runs the test below a satisfiable element") {
  // Chain {} < {A} < {A,B}: the top is satisfiable, nothing else is probed.
  std::vector<ModuleSet> elems = {ms({}), ms({"A"}), ms({"A", "B"})};
  ModuleSetPoset poset = detail::poset_from_subset_order(elems);
  int calls = 0;
  Adoption a = find_maximal_consistent(poset, [&](std::size_t) {
    ++calls;
    ElementOutcome oc;
    oc.status = Feasibility::consistent;
    return oc;
  });
  REQUIRE(calls == 1);
  REQUIRE(a.chosen == std::vector<std::size_t>{2});
}
