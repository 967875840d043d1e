#pragma once

// ── Syntax tree ──────────────────────────────────────────────────────────────
// Constraints are immutable shared trees in canonical form: conjunctions are
// flattened, sorted and deduplicated, rational literals are folded.  The
// canonical printer emits text the parser maps back to the identical tree.

#include <hydla/rational.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace hydla {

enum class RelOp { eq, neq, lt, le, gt, ge };

inline const char* to_string(RelOp op) {
  switch (op) {
    case RelOp::eq: return "=";
    case RelOp::neq: return "!=";
    case RelOp::lt: return "<";
    case RelOp::le: return "<=";
    case RelOp::gt: return ">";
    case RelOp::ge: return ">=";
  }
  return "?";
}

/// Truth of `sign(lhs - rhs) op 0`.
inline bool relop_holds(RelOp op, int sign_of_difference) {
  switch (op) {
    case RelOp::eq: return sign_of_difference == 0;
    case RelOp::neq: return sign_of_difference != 0;
    case RelOp::lt: return sign_of_difference < 0;
    case RelOp::le: return sign_of_difference <= 0;
    case RelOp::gt: return sign_of_difference > 0;
    case RelOp::ge: return sign_of_difference >= 0;
  }
  return false;
}

// ── Arithmetic expressions ───────────────────────────────────────────────────

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { literal, variable, negate, add, sub, mul, div };

  Kind kind;
  Rational value;         // literal
  std::string var_name;   // variable
  int deriv_order = 0;    // variable: number of primes
  bool left_limit = false;
  ExprPtr lhs, rhs;       // negate uses lhs only

  static ExprPtr lit(Rational v) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::literal;
    e->value = std::move(v);
    return e;
  }

  static ExprPtr var(std::string name, int order = 0, bool lim = false) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::variable;
    e->var_name = std::move(name);
    e->deriv_order = order;
    e->left_limit = lim;
    return e;
  }

  static ExprPtr negate(ExprPtr operand) {
    if (operand->kind == Kind::literal) return lit(-operand->value);
    auto e = std::make_shared<Expr>();
    e->kind = Kind::negate;
    e->lhs = std::move(operand);
    return e;
  }

  /// Binary node; folds literal operands.  Division by a literal zero throws
  /// std::domain_error (the parser reports it with a location).
  static ExprPtr binary(Kind k, ExprPtr l, ExprPtr r) {
    if (l->kind == Kind::literal && r->kind == Kind::literal) {
      switch (k) {
        case Kind::add: return lit(l->value + r->value);
        case Kind::sub: return lit(l->value - r->value);
        case Kind::mul: return lit(l->value * r->value);
        case Kind::div:
          if (r->value == 0) throw std::domain_error("division by zero");
          return lit(l->value / r->value);
        default: break;
      }
    }
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->lhs = std::move(l);
    e->rhs = std::move(r);
    return e;
  }
};

inline int compare(const ExprPtr& a, const ExprPtr& b) {
  if (a.get() == b.get()) return 0;
  auto rank = [](Expr::Kind k) { return static_cast<int>(k); };
  if (rank(a->kind) != rank(b->kind)) return rank(a->kind) < rank(b->kind) ? -1 : 1;
  switch (a->kind) {
    case Expr::Kind::literal:
      return a->value == b->value ? 0 : (a->value < b->value ? -1 : 1);
    case Expr::Kind::variable: {
      if (int c = a->var_name.compare(b->var_name)) return c < 0 ? -1 : 1;
      if (a->deriv_order != b->deriv_order) return a->deriv_order < b->deriv_order ? -1 : 1;
      if (a->left_limit != b->left_limit) return a->left_limit ? 1 : -1;
      return 0;
    }
    case Expr::Kind::negate:
      return compare(a->lhs, b->lhs);
    default: {
      if (int c = compare(a->lhs, b->lhs)) return c;
      return compare(a->rhs, b->rhs);
    }
  }
}

inline bool equal(const ExprPtr& a, const ExprPtr& b) { return compare(a, b) == 0; }

// ── Relational atoms ─────────────────────────────────────────────────────────

struct Atomic {
  ExprPtr lhs;
  RelOp op = RelOp::eq;
  ExprPtr rhs;
};

inline int compare(const Atomic& a, const Atomic& b) {
  if (int c = compare(a.lhs, b.lhs)) return c;
  if (a.op != b.op) return static_cast<int>(a.op) < static_cast<int>(b.op) ? -1 : 1;
  return compare(a.rhs, b.rhs);
}

inline bool equal(const Atomic& a, const Atomic& b) { return compare(a, b) == 0; }

// ── Constraints ──────────────────────────────────────────────────────────────

struct Constraint;
using ConstraintPtr = std::shared_ptr<const Constraint>;

int compare(const ConstraintPtr& a, const ConstraintPtr& b);

struct Constraint {
  enum class Kind { atomic, conjunction, conditional, always, exists };

  Kind kind;
  Atomic atom;                         // atomic
  std::vector<ConstraintPtr> members;  // conjunction: flat, sorted, unique, size >= 2
  std::vector<Atomic> guard;           // conditional: sorted, unique, nonempty
  ConstraintPtr body;                  // conditional consequent / always / exists
  std::string bound;                   // exists

  static ConstraintPtr atomic(Atomic a) {
    auto c = std::make_shared<Constraint>();
    c->kind = Kind::atomic;
    c->atom = std::move(a);
    return c;
  }

  /// Flattens nested conjunctions, sorts, deduplicates.  A singleton collapses
  /// to its member; an empty list is rejected.
  static ConstraintPtr conjunction(std::vector<ConstraintPtr> items) {
    std::vector<ConstraintPtr> flat;
    for (auto& it : items) {
      if (it->kind == Kind::conjunction)
        flat.insert(flat.end(), it->members.begin(), it->members.end());
      else
        flat.push_back(std::move(it));
    }
    std::sort(flat.begin(), flat.end(),
              [](const ConstraintPtr& a, const ConstraintPtr& b) { return compare(a, b) < 0; });
    flat.erase(std::unique(flat.begin(), flat.end(),
                           [](const ConstraintPtr& a, const ConstraintPtr& b) {
                             return compare(a, b) == 0;
                           }),
               flat.end());
    if (flat.empty()) throw std::invalid_argument("empty conjunction");
    if (flat.size() == 1) return flat.front();
    auto c = std::make_shared<Constraint>();
    c->kind = Kind::conjunction;
    c->members = std::move(flat);
    return c;
  }

  static ConstraintPtr conditional(std::vector<Atomic> g, ConstraintPtr consequent) {
    std::sort(g.begin(), g.end(),
              [](const Atomic& a, const Atomic& b) { return compare(a, b) < 0; });
    g.erase(std::unique(g.begin(), g.end(),
                        [](const Atomic& a, const Atomic& b) { return compare(a, b) == 0; }),
            g.end());
    if (g.empty()) throw std::invalid_argument("empty guard");
    auto c = std::make_shared<Constraint>();
    c->kind = Kind::conditional;
    c->guard = std::move(g);
    c->body = std::move(consequent);
    return c;
  }

  static ConstraintPtr always(ConstraintPtr body) {
    auto c = std::make_shared<Constraint>();
    c->kind = Kind::always;
    c->body = std::move(body);
    return c;
  }

  static ConstraintPtr exists(std::string name, ConstraintPtr body) {
    auto c = std::make_shared<Constraint>();
    c->kind = Kind::exists;
    c->bound = std::move(name);
    c->body = std::move(body);
    return c;
  }
};

inline int compare(const ConstraintPtr& a, const ConstraintPtr& b) {
  if (a.get() == b.get()) return 0;
  if (a->kind != b->kind)
    return static_cast<int>(a->kind) < static_cast<int>(b->kind) ? -1 : 1;
  switch (a->kind) {
    case Constraint::Kind::atomic:
      return compare(a->atom, b->atom);
    case Constraint::Kind::conjunction: {
      std::size_t n = std::min(a->members.size(), b->members.size());
      for (std::size_t i = 0; i < n; ++i)
        if (int c = compare(a->members[i], b->members[i])) return c;
      if (a->members.size() != b->members.size())
        return a->members.size() < b->members.size() ? -1 : 1;
      return 0;
    }
    case Constraint::Kind::conditional: {
      std::size_t n = std::min(a->guard.size(), b->guard.size());
      for (std::size_t i = 0; i < n; ++i)
        if (int c = compare(a->guard[i], b->guard[i])) return c;
      if (a->guard.size() != b->guard.size())
        return a->guard.size() < b->guard.size() ? -1 : 1;
      return compare(a->body, b->body);
    }
    case Constraint::Kind::always:
      return compare(a->body, b->body);
    case Constraint::Kind::exists: {
      if (int c = a->bound.compare(b->bound)) return c < 0 ? -1 : 1;
      return compare(a->body, b->body);
    }
  }
  return 0;
}

inline bool equal(const ConstraintPtr& a, const ConstraintPtr& b) { return compare(a, b) == 0; }

/// Top-level members: a conjunction's parts, anything else itself.
inline std::vector<ConstraintPtr> flatten(const ConstraintPtr& c) {
  if (c->kind == Constraint::Kind::conjunction) return c->members;
  return {c};
}

// ── Constraint sets ──────────────────────────────────────────────────────────

/// Sorted, deduplicated set of constraints under structural order.
class ConstraintSet {
 public:
  ConstraintSet() = default;
  explicit ConstraintSet(std::vector<ConstraintPtr> items) {
    for (auto& c : items) insert(std::move(c));
  }

  bool insert(ConstraintPtr c) {
    auto it = std::lower_bound(items_.begin(), items_.end(), c,
                               [](const ConstraintPtr& a, const ConstraintPtr& b) {
                                 return compare(a, b) < 0;
                               });
    if (it != items_.end() && compare(*it, c) == 0) return false;
    items_.insert(it, std::move(c));
    return true;
  }

  [[nodiscard]] bool contains(const ConstraintPtr& c) const {
    auto it = std::lower_bound(items_.begin(), items_.end(), c,
                               [](const ConstraintPtr& a, const ConstraintPtr& b) {
                                 return compare(a, b) < 0;
                               });
    return it != items_.end() && compare(*it, c) == 0;
  }

  bool erase(const ConstraintPtr& c) {
    auto it = std::lower_bound(items_.begin(), items_.end(), c,
                               [](const ConstraintPtr& a, const ConstraintPtr& b) {
                                 return compare(a, b) < 0;
                               });
    if (it == items_.end() || compare(*it, c) != 0) return false;
    items_.erase(it);
    return true;
  }

  void merge(const ConstraintSet& other) {
    for (const auto& c : other.items_) insert(c);
  }

  [[nodiscard]] bool includes(const ConstraintSet& other) const {
    for (const auto& c : other.items_)
      if (!contains(c)) return false;
    return true;
  }

  [[nodiscard]] std::size_t size() const { return items_.size(); }
  [[nodiscard]] bool empty() const { return items_.empty(); }
  [[nodiscard]] auto begin() const { return items_.begin(); }
  [[nodiscard]] auto end() const { return items_.end(); }
  [[nodiscard]] const std::vector<ConstraintPtr>& items() const { return items_; }

  friend bool operator==(const ConstraintSet& a, const ConstraintSet& b) {
    if (a.items_.size() != b.items_.size()) return false;
    for (std::size_t i = 0; i < a.items_.size(); ++i)
      if (compare(a.items_[i], b.items_[i]) != 0) return false;
    return true;
  }

 private:
  std::vector<ConstraintPtr> items_;
};

// ── Variable occurrences ─────────────────────────────────────────────────────

struct VarOcc {
  std::string name;
  int order = 0;
  bool lim = false;
  auto operator<=>(const VarOcc&) const = default;
};

inline void collect_occurrences(const ExprPtr& e, std::set<VarOcc>& out,
                                const std::set<std::string>& shadowed) {
  switch (e->kind) {
    case Expr::Kind::literal: return;
    case Expr::Kind::variable:
      if (!shadowed.count(e->var_name))
        out.insert({e->var_name, e->deriv_order, e->left_limit});
      return;
    case Expr::Kind::negate:
      collect_occurrences(e->lhs, out, shadowed);
      return;
    default:
      collect_occurrences(e->lhs, out, shadowed);
      collect_occurrences(e->rhs, out, shadowed);
  }
}

inline void collect_occurrences(const Atomic& a, std::set<VarOcc>& out,
                                const std::set<std::string>& shadowed) {
  collect_occurrences(a.lhs, out, shadowed);
  collect_occurrences(a.rhs, out, shadowed);
}

inline void collect_occurrences(const ConstraintPtr& c, std::set<VarOcc>& out,
                                std::set<std::string> shadowed = {}) {
  switch (c->kind) {
    case Constraint::Kind::atomic:
      collect_occurrences(c->atom, out, shadowed);
      return;
    case Constraint::Kind::conjunction:
      for (const auto& m : c->members) collect_occurrences(m, out, shadowed);
      return;
    case Constraint::Kind::conditional:
      for (const auto& g : c->guard) collect_occurrences(g, out, shadowed);
      collect_occurrences(c->body, out, shadowed);
      return;
    case Constraint::Kind::always:
      collect_occurrences(c->body, out, shadowed);
      return;
    case Constraint::Kind::exists:
      shadowed.insert(c->bound);
      collect_occurrences(c->body, out, std::move(shadowed));
      return;
  }
}

inline std::set<VarOcc> occurrences(const ConstraintPtr& c) {
  std::set<VarOcc> out;
  collect_occurrences(c, out);
  return out;
}

// ── Variable renaming (Skolem substitution) ──────────────────────────────────

inline ExprPtr rename_variable(const ExprPtr& e, const std::string& from,
                               const std::string& to) {
  switch (e->kind) {
    case Expr::Kind::literal: return e;
    case Expr::Kind::variable:
      if (e->var_name != from) return e;
      return Expr::var(to, e->deriv_order, e->left_limit);
    case Expr::Kind::negate:
      return Expr::negate(rename_variable(e->lhs, from, to));
    default:
      return Expr::binary(e->kind, rename_variable(e->lhs, from, to),
                          rename_variable(e->rhs, from, to));
  }
}

inline Atomic rename_variable(const Atomic& a, const std::string& from,
                              const std::string& to) {
  return {rename_variable(a.lhs, from, to), a.op, rename_variable(a.rhs, from, to)};
}

inline ConstraintPtr rename_variable(const ConstraintPtr& c, const std::string& from,
                                     const std::string& to) {
  switch (c->kind) {
    case Constraint::Kind::atomic:
      return Constraint::atomic(rename_variable(c->atom, from, to));
    case Constraint::Kind::conjunction: {
      std::vector<ConstraintPtr> ms;
      ms.reserve(c->members.size());
      for (const auto& m : c->members) ms.push_back(rename_variable(m, from, to));
      return Constraint::conjunction(std::move(ms));
    }
    case Constraint::Kind::conditional: {
      std::vector<Atomic> g;
      g.reserve(c->guard.size());
      for (const auto& a : c->guard) g.push_back(rename_variable(a, from, to));
      return Constraint::conditional(std::move(g), rename_variable(c->body, from, to));
    }
    case Constraint::Kind::always:
      return Constraint::always(rename_variable(c->body, from, to));
    case Constraint::Kind::exists:
      if (c->bound == from) return c;  // shadowed
      return Constraint::exists(c->bound, rename_variable(c->body, from, to));
  }
  return c;
}

// ── Printing ─────────────────────────────────────────────────────────────────
// Canonical text; parsing it yields the identical tree.

inline std::string to_string(const ExprPtr& e, int context_prec = 0) {
  auto parens = [&](int prec, std::string s) {
    return prec < context_prec ? "(" + std::move(s) + ")" : s;
  };
  switch (e->kind) {
    case Expr::Kind::literal: {
      std::string s = to_string(e->value);
      // A negative literal prints with unary minus; give it that precedence.
      return e->value < 0 ? parens(3, s) : s;
    }
    case Expr::Kind::variable: {
      std::string s = e->var_name;
      s.append(static_cast<std::size_t>(e->deriv_order), '\'');
      if (e->left_limit) s += '-';
      return s;
    }
    case Expr::Kind::negate:
      return parens(3, "-" + to_string(e->lhs, 4));
    case Expr::Kind::add:
      return parens(1, to_string(e->lhs, 1) + " + " + to_string(e->rhs, 2));
    case Expr::Kind::sub:
      return parens(1, to_string(e->lhs, 1) + " - " + to_string(e->rhs, 2));
    case Expr::Kind::mul:
      return parens(2, to_string(e->lhs, 2) + " * " + to_string(e->rhs, 3));
    case Expr::Kind::div:
      return parens(2, to_string(e->lhs, 2) + " / " + to_string(e->rhs, 3));
  }
  return "?";
}

inline std::string to_string(const Atomic& a) {
  return to_string(a.lhs) + " " + to_string(a.op) + " " + to_string(a.rhs);
}

inline std::string to_string(const ConstraintPtr& c) {
  switch (c->kind) {
    case Constraint::Kind::atomic:
      return to_string(c->atom);
    case Constraint::Kind::conjunction: {
      std::string s;
      for (std::size_t i = 0; i < c->members.size(); ++i) {
        if (i) s += " & ";
        const auto& m = c->members[i];
        if (m->kind == Constraint::Kind::conditional)
          s += "(" + to_string(m) + ")";
        else
          s += to_string(m);
      }
      return s;
    }
    case Constraint::Kind::conditional: {
      std::string s;
      for (std::size_t i = 0; i < c->guard.size(); ++i) {
        if (i) s += " & ";
        s += to_string(c->guard[i]);
      }
      return s + " => " + to_string(c->body);
    }
    case Constraint::Kind::always:
      return "[](" + to_string(c->body) + ")";
    case Constraint::Kind::exists:
      return "E " + c->bound + ".(" + to_string(c->body) + ")";
  }
  return "?";
}

// ── Module declarations ──────────────────────────────────────────────────────

struct Decl {
  enum class Kind { module_ref, parallel, priority };
  Kind kind = Kind::module_ref;
  std::string name;            // module_ref
  std::vector<Decl> children;  // parallel / priority (in source order)
};

inline std::string to_string(const Decl& d) {
  switch (d.kind) {
    case Decl::Kind::module_ref:
      return d.name;
    case Decl::Kind::parallel: {
      std::string s;
      for (std::size_t i = 0; i < d.children.size(); ++i) {
        if (i) s += ", ";
        s += to_string(d.children[i]);
      }
      return s;
    }
    case Decl::Kind::priority: {
      std::string s;
      for (std::size_t i = 0; i < d.children.size(); ++i) {
        if (i) s += " << ";
        const auto& ch = d.children[i];
        if (ch.kind == Decl::Kind::parallel)
          s += "(" + to_string(ch) + ")";
        else
          s += to_string(ch);
      }
      return s;
    }
  }
  return "?";
}

/// Leaf module names, left to right.
inline void collect_modules(const Decl& d, std::vector<std::string>& out) {
  if (d.kind == Decl::Kind::module_ref)
    out.push_back(d.name);
  else
    for (const auto& ch : d.children) collect_modules(ch, out);
}

// ── Programs (surface form) ──────────────────────────────────────────────────

struct ParsedProgram {
  std::vector<std::pair<std::string, ConstraintPtr>> definitions;  // source order
  std::optional<Decl> declaration;

  [[nodiscard]] const ConstraintPtr* find(const std::string& name) const {
    for (const auto& [n, c] : definitions)
      if (n == name) return &c;
    return nullptr;
  }
};

/// Deterministic text form used for hashing and diagnostics: definitions
/// sorted by module name, then the declaration.
inline std::string canonical_text(const ParsedProgram& p) {
  std::vector<std::pair<std::string, ConstraintPtr>> defs = p.definitions;
  std::sort(defs.begin(), defs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string s;
  for (const auto& [name, c] : defs) s += name + " <=> " + to_string(c) + ".\n";
  if (p.declaration) s += to_string(*p.declaration) + ".\n";
  return s;
}

inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string program_hash(const ParsedProgram& p) {
  std::uint64_t h = fnv1a64(canonical_text(p));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hydla
