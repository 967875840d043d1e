#pragma once

// ── Lexer and parser ─────────────────────────────────────────────────────────
// ASCII surface syntax.  The interesting lexing rule is the left-limit marker:
// `-` is postfix iff it immediately follows an identifier/prime chain with no
// whitespace and the next raw character is not one of [A-Za-z0-9_.(].  Thus
// `ht'- != ht'` reads as a left limit while `a-b` stays subtraction.

#include <hydla/ast.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace hydla {

struct ParseError : std::runtime_error {
  int line, col;
  bool unsupported;
  ParseError(const std::string& msg, int line_, int col_, bool unsupported_ = false)
      : std::runtime_error(msg + " (line " + std::to_string(line_) + ", col " +
                           std::to_string(col_) + ")"),
        line(line_), col(col_), unsupported(unsupported_) {}
};

namespace detail {

enum class Tok {
  ident, number, prime, postfix_minus,
  lparen, rparen, comma, dot,
  amp, implies, equiv, box, exists_kw_unused,
  eq, neq, lt, le, gt, ge,
  plus, minus, star, slash, prio,
  eof
};

struct Token {
  Tok kind;
  std::string text;
  Rational value;  // number
  int line = 1, col = 1;
  std::size_t offset = 0, length = 0;
};

inline std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  std::size_t i = 0;
  int line = 1, col = 1;
  auto push = [&](Tok k, std::size_t start, std::size_t len, int l, int c) {
    out.push_back({k, src.substr(start, len), Rational(0), l, c, start, len});
  };
  while (i < src.size()) {
    char ch = src[i];
    if (ch == '\n') { ++i; ++line; col = 1; continue; }
    if (ch == ' ' || ch == '\t' || ch == '\r') { ++i; ++col; continue; }
    if (ch == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    if (ch == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      int l0 = line, c0 = col;
      i += 2; col += 2;
      while (i + 1 < src.size() && !(src[i] == '*' && src[i + 1] == '/')) {
        if (src[i] == '\n') { ++line; col = 1; } else ++col;
        ++i;
      }
      if (i + 1 >= src.size()) throw ParseError("unterminated comment", l0, c0);
      i += 2; col += 2;
      continue;
    }
    int l = line, c = col;
    std::size_t start = i;
    auto adjacent_value_tail = [&]() {
      // true when the previous token is an identifier or prime chain ending
      // exactly at `start`
      if (out.empty()) return false;
      const Token& p = out.back();
      if (p.kind != Tok::ident && p.kind != Tok::prime) return false;
      return p.offset + p.length == start;
    };
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      ++i;
      while (i < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_' ||
              src[i] == '#'))
        ++i;
      push(Tok::ident, start, i - start, l, c);
      col += static_cast<int>(i - start);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      ++i;
      while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
      if (i + 1 < src.size() && src[i] == '.' &&
          std::isdigit(static_cast<unsigned char>(src[i + 1]))) {
        ++i;
        while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
      }
      push(Tok::number, start, i - start, l, c);
      auto v = parse_rational(out.back().text);
      if (!v) throw ParseError("malformed number '" + out.back().text + "'", l, c);
      out.back().value = *v;
      col += static_cast<int>(i - start);
      continue;
    }
    auto two = [&](char a, char b) {
      return ch == a && i + 1 < src.size() && src[i + 1] == b;
    };
    if (ch == '\'') { push(Tok::prime, start, 1, l, c); ++i; ++col; continue; }
    if (two('<', '=') && i + 2 < src.size() && src[i + 2] == '>') {
      push(Tok::equiv, start, 3, l, c); i += 3; col += 3; continue;
    }
    if (two('=', '>')) { push(Tok::implies, start, 2, l, c); i += 2; col += 2; continue; }
    if (two('<', '=')) { push(Tok::le, start, 2, l, c); i += 2; col += 2; continue; }
    if (two('>', '=')) { push(Tok::ge, start, 2, l, c); i += 2; col += 2; continue; }
    if (two('<', '<')) { push(Tok::prio, start, 2, l, c); i += 2; col += 2; continue; }
    if (two('!', '=')) { push(Tok::neq, start, 2, l, c); i += 2; col += 2; continue; }
    if (two('[', ']')) { push(Tok::box, start, 2, l, c); i += 2; col += 2; continue; }
    if (two('/', '\\')) { push(Tok::amp, start, 2, l, c); i += 2; col += 2; continue; }
    if (ch == '-') {
      char next = i + 1 < src.size() ? src[i + 1] : '\0';
      bool expr_follows = std::isalnum(static_cast<unsigned char>(next)) ||
                          next == '_' || next == '.' || next == '(';
      if (adjacent_value_tail() && !expr_follows) {
        push(Tok::postfix_minus, start, 1, l, c);
      } else {
        push(Tok::minus, start, 1, l, c);
      }
      ++i; ++col;
      continue;
    }
    switch (ch) {
      case '(': push(Tok::lparen, start, 1, l, c); break;
      case ')': push(Tok::rparen, start, 1, l, c); break;
      case ',': push(Tok::comma, start, 1, l, c); break;
      case '.': push(Tok::dot, start, 1, l, c); break;
      case '&': push(Tok::amp, start, 1, l, c); break;
      case '=': push(Tok::eq, start, 1, l, c); break;
      case '<': push(Tok::lt, start, 1, l, c); break;
      case '>': push(Tok::gt, start, 1, l, c); break;
      case '+': push(Tok::plus, start, 1, l, c); break;
      case '*': push(Tok::star, start, 1, l, c); break;
      case '/': push(Tok::slash, start, 1, l, c); break;
      default:
        throw ParseError(std::string("unexpected character '") + ch + "'", l, c);
    }
    ++i; ++col;
  }
  out.push_back({Tok::eof, "", Rational(0), line, col, src.size(), 0});
  return out;
}

class Parser {
 public:
  explicit Parser(const std::string& src) : toks_(lex(src)) {}

  ParsedProgram parse_program() {
    ParsedProgram p;
    while (!at(Tok::eof)) {
      if (at(Tok::ident) && peek(1).kind == Tok::equiv) {
        std::string name = cur().text;
        if (p.find(name)) fail("duplicate definition of module '" + name + "'");
        advance(); advance();
        ConstraintPtr c = parse_constraint();
        expect(Tok::dot, "'.'");
        p.definitions.emplace_back(std::move(name), std::move(c));
      } else {
        Decl d = parse_decl();
        expect(Tok::dot, "'.'");
        p.declaration = std::move(d);  // last declaration wins
      }
    }
    return p;
  }

  ConstraintPtr parse_constraint_only() {
    ConstraintPtr c = parse_constraint();
    if (!at(Tok::eof)) fail("trailing input after constraint");
    return c;
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;

  const Token& cur() const { return toks_[pos_]; }
  const Token& peek(std::size_t n) const {
    return toks_[std::min(pos_ + n, toks_.size() - 1)];
  }
  bool at(Tok k) const { return cur().kind == k; }
  void advance() { if (pos_ + 1 < toks_.size()) ++pos_; }
  bool accept(Tok k) {
    if (!at(k)) return false;
    advance();
    return true;
  }
  void expect(Tok k, const std::string& what) {
    if (!accept(k)) fail("expected " + what);
  }
  [[noreturn]] void fail(const std::string& msg, bool unsupported = false) const {
    throw ParseError(msg, cur().line, cur().col, unsupported);
  }

  // declarations ------------------------------------------------------------
  Decl parse_decl() {
    std::vector<Decl> terms{parse_decl_term()};
    while (accept(Tok::comma)) terms.push_back(parse_decl_term());
    if (terms.size() == 1) return std::move(terms.front());
    Decl d;
    d.kind = Decl::Kind::parallel;
    d.children = std::move(terms);
    return d;
  }

  Decl parse_decl_term() {
    std::vector<Decl> factors{parse_decl_factor()};
    while (accept(Tok::prio)) factors.push_back(parse_decl_factor());
    if (factors.size() == 1) return std::move(factors.front());
    Decl d;
    d.kind = Decl::Kind::priority;
    d.children = std::move(factors);
    return d;
  }

  Decl parse_decl_factor() {
    if (accept(Tok::lparen)) {
      Decl d = parse_decl();
      expect(Tok::rparen, "')'");
      return d;
    }
    if (!at(Tok::ident)) fail("expected module name");
    Decl d;
    d.kind = Decl::Kind::module_ref;
    d.name = cur().text;
    advance();
    return d;
  }

  // constraints ---------------------------------------------------------
  ConstraintPtr parse_constraint() { return parse_implication(); }

  ConstraintPtr parse_implication() {
    ConstraintPtr lhs = parse_conjunction();
    if (!accept(Tok::implies)) return lhs;
    ConstraintPtr rhs = parse_implication();  // right associative
    std::vector<Atomic> guard;
    for (const auto& m : flatten(lhs)) {
      if (m->kind != Constraint::Kind::atomic)
        fail("guard must be a conjunction of atomic constraints");
      guard.push_back(m->atom);
    }
    return Constraint::conditional(std::move(guard), std::move(rhs));
  }

  ConstraintPtr parse_conjunction() {
    std::vector<ConstraintPtr> ms{parse_unary()};
    while (accept(Tok::amp)) ms.push_back(parse_unary());
    return Constraint::conjunction(std::move(ms));
  }

  ConstraintPtr parse_unary() {
    if (accept(Tok::box)) {
      return Constraint::always(parse_unary());
    }
    if (at(Tok::ident) && cur().text == "E" && peek(1).kind == Tok::ident &&
        peek(2).kind == Tok::dot) {
      advance();
      std::string name = cur().text;
      advance(); advance();
      return Constraint::exists(std::move(name), parse_unary());
    }
    // Ambiguity between "(expr) relop expr" and "(constraint)": try the
    // atomic reading first, fall back on the parenthesized constraint.  The
    // fallback exists only for a leading '('; anywhere else the atomic
    // attempt's error is the real one, and a semantic verdict (unsupported
    // construct) must not be masked by backtracking.
    std::size_t save = pos_;
    bool maybe_group = at(Tok::lparen);
    try {
      return Constraint::atomic(parse_atomic());
    } catch (const ParseError& e) {
      if (e.unsupported || !maybe_group) throw;
      pos_ = save;
    }
    expect(Tok::lparen, "'('");
    ConstraintPtr c = parse_constraint();
    expect(Tok::rparen, "')'");
    return c;
  }

  Atomic parse_atomic() {
    ExprPtr lhs = parse_expr();
    RelOp op;
    switch (cur().kind) {
      case Tok::eq: op = RelOp::eq; break;
      case Tok::neq: op = RelOp::neq; break;
      case Tok::lt: op = RelOp::lt; break;
      case Tok::le: op = RelOp::le; break;
      case Tok::gt: op = RelOp::gt; break;
      case Tok::ge: op = RelOp::ge; break;
      default: fail("expected relational operator");
    }
    advance();
    ExprPtr rhs = parse_expr();
    return {std::move(lhs), op, std::move(rhs)};
  }

  // expressions ---------------------------------------------------------
  ExprPtr parse_expr() {
    ExprPtr e = parse_term();
    for (;;) {
      if (accept(Tok::plus))
        e = Expr::binary(Expr::Kind::add, std::move(e), parse_term());
      else if (accept(Tok::minus))
        e = Expr::binary(Expr::Kind::sub, std::move(e), parse_term());
      else
        return e;
    }
  }

  ExprPtr parse_term() {
    ExprPtr e = parse_factor();
    for (;;) {
      if (accept(Tok::star)) {
        e = Expr::binary(Expr::Kind::mul, std::move(e), parse_factor());
      } else if (accept(Tok::slash)) {
        const Token& div_tok = cur();
        ExprPtr d = parse_factor();
        if (d->kind != Expr::Kind::literal)
          throw ParseError("division is only supported by rational literals",
                           div_tok.line, div_tok.col, /*unsupported=*/true);
        if (d->value == 0)
          throw ParseError("division by zero", div_tok.line, div_tok.col);
        e = Expr::binary(Expr::Kind::div, std::move(e), std::move(d));
      } else {
        return e;
      }
    }
  }

  ExprPtr parse_factor() {
    if (accept(Tok::minus)) return Expr::negate(parse_factor());
    return parse_primary();
  }

  ExprPtr parse_primary() {
    if (at(Tok::number)) {
      Rational v = cur().value;
      advance();
      return Expr::lit(std::move(v));
    }
    if (at(Tok::ident)) {
      std::string name = cur().text;
      std::size_t end = cur().offset + cur().length;
      advance();
      int order = 0;
      while (at(Tok::prime) && cur().offset == end) {
        end = cur().offset + cur().length;
        ++order;
        advance();
      }
      bool lim = false;
      if (at(Tok::postfix_minus) && cur().offset == end) {
        lim = true;
        advance();
      }
      return Expr::var(std::move(name), order, lim);
    }
    if (accept(Tok::lparen)) {
      ExprPtr e = parse_expr();
      expect(Tok::rparen, "')'");
      return e;
    }
    fail("expected expression");
  }
};

}  // namespace detail

/// Parses a whole source program (module definitions plus declaration).
inline ParsedProgram parse_program(const std::string& source) {
  return detail::Parser(source).parse_program();
}

/// Parses a standalone constraint (used for certificates and tests).
inline ConstraintPtr parse_constraint(const std::string& source) {
  return detail::Parser(source).parse_constraint_only();
}

}  // namespace hydla
