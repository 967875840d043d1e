#include <hydla/hydla.hpp>
#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

using namespace hydla;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("canonical text is a fixed point of parse") {
  const char* sources[] = {
      "A <=> f = 0 & [](f' = 1).\nB <=> [](g = 0).\nA, B.\n",
      "M <=> [](x'' = -9.8) & x = 10.\nM.\n",
      "C <=> [](f = 5 => E a.(a = 0 & [](a' = 1) & [](a = 2 => g = 1))).\n",
      "W <=> [](x- = 0 => x' = -1/2 * x'-).\n",
      "P <=> x > 0 & y >= 1 & z < 2 & w <= 3 & u != 4.\n",
  };
  for (const char* src : sources) {
    ParsedProgram p1 = parse_program(src);
    std::string c1 = canonical_text(p1);
    ParsedProgram p2 = parse_program(c1);
    REQUIRE(canonical_text(p2) == c1);
    REQUIRE(program_hash(p2) == program_hash(p1));
  }
}

TEST_CASE("golden programs round-trip through their canonical text") {
  const char* files[] = {"bouncing_ball.hydla", "bouncing_ball_vmax.hydla",
                         "example1.hydla", "p2.hydla", "p3.hydla"};
  for (const char* f : files) {
    ParsedProgram p1 = parse_program(slurp(std::string(HYDLA_PROGRAMS_DIR) + "/" + f));
    std::string c1 = canonical_text(p1);
    REQUIRE(canonical_text(parse_program(c1)) == c1);
  }
}

TEST_CASE("decimal literals are exact rationals") {
  ParsedProgram p = parse_program("M <=> x = 4.9 & y = 9.8 & z = -0.25.\n");
  REQUIRE(canonical_text(p) == "M <=> x = 49/10 & y = 49/5 & z = -1/4.\n");
}

TEST_CASE("literal arithmetic folds exactly") {
  ParsedProgram p = parse_program("M <=> x = 1/2 + 1/3 & y = 2 * 3 - 10 & z = (1/3) / (1/6).\n");
  REQUIRE(canonical_text(p) == "M <=> x = 5/6 & y = -4 & z = 2.\n");
}

TEST_CASE("left limits bind to the primed name") {
  // ht'- is the left limit of ht'; with a space, '-' is subtraction.
  ParsedProgram p = parse_program("M <=> [](ht'- != ht') & [](v = ht' - 1).\n");
  std::string c = canonical_text(p);
  REQUIRE(c.find("ht'- != ht'") != std::string::npos);
  REQUIRE(c.find("v = ht' - 1") != std::string::npos);

  ParsedProgram q = parse_program("M <=> x''- = 0.\n");
  REQUIRE(canonical_text(q) == "M <=> x''- = 0.\n");
}

TEST_CASE("conjunctions flatten, sort, and deduplicate") {
  ParsedProgram a = parse_program("M <=> (x = 1 & y = 2) & x = 1.\n");
  ParsedProgram b = parse_program("M <=> y = 2 & x = 1.\n");
  REQUIRE(canonical_text(a) == canonical_text(b));
}

TEST_CASE("guards are conjunctions of atomics") {
  ParsedProgram p = parse_program("M <=> [](x = 1 & y- = 2 => z = 3).\n");
  const ConstraintPtr* c = p.find("M");
  REQUIRE(c);
  REQUIRE((*c)->kind == Constraint::Kind::always);
  const ConstraintPtr& body = (*c)->body;
  REQUIRE(body->kind == Constraint::Kind::conditional);
  REQUIRE(body->guard.size() == 2);
}

TEST_CASE("a module may be named E; the binder needs a dot") {
  ParsedProgram p = parse_program("E <=> [](y' = 1).\nF <=> E x.(x = y).\nE, F.\n");
  REQUIRE(p.find("E"));
  const ConstraintPtr* f = p.find("F");
  REQUIRE(f);
  REQUIRE((*f)->kind == Constraint::Kind::exists);
  REQUIRE((*f)->bound == "x");
}

TEST_CASE("declarations keep priority grouping") {
  ParsedProgram p = parse_program("A <=> x = 1.\nB <=> x = 2.\nC <=> x = 3.\nA, (B << C).\n");
  REQUIRE(p.declaration);
  REQUIRE(to_string(*p.declaration) == "A, B << C");
  ParsedProgram q = parse_program("A <=> x = 1.\nB <=> x = 2.\nC <=> x = 3.\n(A, B) << C.\n");
  REQUIRE(to_string(*q.declaration) == "(A, B) << C");
}

TEST_CASE("comments and whitespace are ignored") {
  ParsedProgram p = parse_program("// leading\nM <=> x = 1. // trailing\n  \nM.\n");
  REQUIRE(p.definitions.size() == 1);
  REQUIRE(p.declaration);
}

TEST_CASE("parse errors carry a position") {
  try {
    parse_program("M <=> x = .\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    REQUIRE(e.line == 1);
    REQUIRE(e.col > 0);
    REQUIRE_FALSE(e.unsupported);
  }
}

TEST_CASE("division by a zero literal is an error") {
  for (const char* src : {"M <=> x = 1 / 0.\n", "M <=> x = 1 / (2 - 2).\n",
                          "M <=> (x = 1 / 0).\n"}) {
    try {
      parse_program(src);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      REQUIRE_FALSE(e.unsupported);
      REQUIRE(std::string(e.what()).find("division by zero") != std::string::npos);
    }
  }
}

TEST_CASE("division by a variable is out of scope, not a syntax error") {
  for (const char* src : {"M <=> x = 1 / y.\n", "M <=> (x = 1 / y).\n"}) {
    try {
      parse_program(src);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      REQUIRE(e.unsupported);
    }
  }
}

TEST_CASE("a declared module without a definition fails pool construction") {
  ParsedProgram p = parse_program("A <=> x = 1.\nA, B.\n");
  REQUIRE_THROWS_AS(build_pool(p, SimOptions{}), std::invalid_argument);
}

TEST_CASE("duplicate module definitions are rejected") {
  REQUIRE_THROWS_AS(parse_program("A <=> x = 1.\nA <=> x = 2.\n"), ParseError);
}

TEST_CASE("program hash is stable across definition order") {
  ParsedProgram a = parse_program("A <=> x = 1.\nB <=> y = 2.\n");
  ParsedProgram b = parse_program("B <=> y = 2.\nA <=> x = 1.\n");
  REQUIRE(program_hash(a) == program_hash(b));
  ParsedProgram c = parse_program("A <=> x = 1.\nB <=> y = 3.\n");
  REQUIRE(program_hash(c) != program_hash(a));
}
