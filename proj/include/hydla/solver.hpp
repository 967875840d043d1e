#pragma once

// ── Consistency solving ──────────────────────────────────────────────────────
// Point phases solve for exact jet values at an instant; interval phases
// solve for polynomial segments.  Both share a triangular equation solver
// over linear forms: an atom is usable once it is linear in a single unknown
// with a constant coefficient, everything else must reduce to a ground
// residual.  The parametric variant leaves the instant symbolic and returns
// satisfiability conditions as polynomials in global time; it powers the
// maximality events of adopted interval phases.
//
// Side conditions at an instant t, for each non-left-limit occurrence x^(k)
// (k ≥ 1) in an atomic member m:
//   · m is an ongoing law (present on the piece immediately left of t):
//     x^(j)(t) = x^(j)(t⁻) for 0 ≤ j ≤ k  — a law holding on a neighborhood
//     forces two-sided agreement of every derivative it touches;
//   · m holds at the point only (just fired or just born):
//     x^(j)(t) = x^(j)(t⁻) for 0 ≤ j < k  — the k-th derivative may jump.
// A side condition whose left limit does not exist is skipped, and an atom
// containing a left-limit occurrence with no defined value is vacuously
// satisfied as a constraint but never entailed as a guard.

#include <hydla/ast.hpp>
#include <hydla/polynomial.hpp>
#include <hydla/poset.hpp>
#include <hydla/timed_set.hpp>
#include <hydla/trajectory.hpp>

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace hydla {

using VarKey = std::pair<std::string, int>;  // (variable, differential order)

enum class Feasibility { consistent, inconsistent, underdetermined, unsupported };
enum class SolveMode { model, existence };
enum class ValueDomain { point, interval, parametric };

inline RelKind rel_kind(RelOp op) {
  switch (op) {
    case RelOp::eq: return RelKind::eq;
    case RelOp::neq: return RelKind::neq;
    case RelOp::lt: return RelKind::lt;
    case RelOp::le: return RelKind::le;
    case RelOp::gt: return RelKind::gt;
    case RelOp::ge: return RelKind::ge;
  }
  return RelKind::eq;
}

// ── Linear forms over unknowns ───────────────────────────────────────────────

struct LinForm {
  std::map<VarKey, Polynomial> coeff;
  Polynomial constant;
  bool nonlinear = false;
  bool vacuous = false;                // hit a left limit with no defined value
  std::set<VarKey> mentioned;          // every unknown encountered

  [[nodiscard]] bool pure() const { return coeff.empty() && !nonlinear; }

  void absorb_flags(const LinForm& o) {
    nonlinear |= o.nonlinear;
    vacuous |= o.vacuous;
    mentioned.insert(o.mentioned.begin(), o.mentioned.end());
  }
};

struct LinEnv {
  // Lookup of already-known values: rationals appear as degree-0 polynomials.
  std::function<std::optional<Polynomial>(const std::string&, int)> value;
  std::function<std::optional<Polynomial>(const std::string&, int)> limit;
  std::set<VarKey>* touched = nullptr;  // known keys substituted during eval
};

inline LinForm lin_of_expr(const ExprPtr& e, const LinEnv& env) {
  LinForm r;
  switch (e->kind) {
    case Expr::Kind::literal:
      r.constant = Polynomial::constant(e->value);
      return r;
    case Expr::Kind::variable: {
      if (e->left_limit) {
        auto v = env.limit(e->var_name, e->deriv_order);
        if (!v) {
          r.vacuous = true;
          return r;
        }
        r.constant = *v;
        return r;
      }
      r.mentioned.insert({e->var_name, e->deriv_order});
      if (auto v = env.value(e->var_name, e->deriv_order)) {
        if (env.touched) env.touched->insert({e->var_name, e->deriv_order});
        r.constant = *v;
        return r;
      }
      r.coeff[{e->var_name, e->deriv_order}] = Polynomial::constant(Rational(1));
      return r;
    }
    case Expr::Kind::negate: {
      LinForm a = lin_of_expr(e->lhs, env);
      for (auto& [k, c] : a.coeff) c = -c;
      a.constant = -a.constant;
      return a;
    }
    case Expr::Kind::add:
    case Expr::Kind::sub: {
      LinForm a = lin_of_expr(e->lhs, env);
      LinForm b = lin_of_expr(e->rhs, env);
      bool sub = e->kind == Expr::Kind::sub;
      for (const auto& [k, c] : b.coeff) {
        auto it = a.coeff.find(k);
        Polynomial add = sub ? -c : c;
        if (it == a.coeff.end()) a.coeff[k] = add;
        else {
          it->second = it->second + add;
          if (it->second.is_zero()) a.coeff.erase(it);
        }
      }
      a.constant = sub ? a.constant - b.constant : a.constant + b.constant;
      a.absorb_flags(b);
      return a;
    }
    case Expr::Kind::mul: {
      LinForm a = lin_of_expr(e->lhs, env);
      LinForm b = lin_of_expr(e->rhs, env);
      if (a.vacuous || b.vacuous) {
        LinForm v;
        v.vacuous = true;
        v.absorb_flags(a);
        v.absorb_flags(b);
        return v;
      }
      const LinForm* scalar = a.pure() ? &a : (b.pure() ? &b : nullptr);
      const LinForm* other = scalar == &a ? &b : &a;
      if (!scalar) {
        LinForm n;
        n.nonlinear = true;
        n.absorb_flags(a);
        n.absorb_flags(b);
        return n;
      }
      LinForm r2 = *other;
      for (auto& [k, c] : r2.coeff) c = c * scalar->constant;
      r2.constant = r2.constant * scalar->constant;
      r2.absorb_flags(*scalar);
      return r2;
    }
    case Expr::Kind::div: {
      LinForm a = lin_of_expr(e->lhs, env);
      LinForm b = lin_of_expr(e->rhs, env);
      if (!b.pure() || b.constant.degree() != 0)
        throw std::invalid_argument("division by a non-constant expression");
      Rational d = b.constant.coeff(0);
      if (d == 0) throw std::invalid_argument("division by zero");
      Rational inv = Rational(1) / d;
      for (auto& [k, c] : a.coeff) c = c * inv;
      a.constant = a.constant * inv;
      a.absorb_flags(b);
      return a;
    }
  }
  throw std::logic_error("unreachable");
}

/// lhs − rhs as a linear form.
inline LinForm lin_of_atomic(const Atomic& a, const LinEnv& env) {
  LinForm l = lin_of_expr(a.lhs, env);
  LinForm r = lin_of_expr(a.rhs, env);
  if (l.vacuous || r.vacuous) {
    LinForm v;
    v.vacuous = true;
    v.absorb_flags(l);
    v.absorb_flags(r);
    return v;
  }
  for (const auto& [k, c] : r.coeff) {
    auto it = l.coeff.find(k);
    if (it == l.coeff.end()) l.coeff[k] = -c;
    else {
      it->second = it->second - c;
      if (it->second.is_zero()) l.coeff.erase(it);
    }
  }
  l.constant = l.constant - r.constant;
  l.absorb_flags(r);
  return l;
}

// ── Equation system with triangular solving ──────────────────────────────────

struct SysAtom {
  std::string module;
  Atomic atom;
  bool ongoing = false;   // law present on the piece left of the instant
  bool fired = false;     // came from a fired consequent
};

struct SideEquation {
  VarKey key;
  Polynomial value;
  std::string reason;
};

struct Condition {
  Polynomial poly;  // in global time
  RelKind op;
};

struct SolveResult {
  Feasibility status = Feasibility::consistent;
  std::map<VarKey, Polynomial> known;
  std::set<VarKey> anchored;           // entries that came from phase-start anchors
  std::vector<VarKey> free_vars;
  std::vector<Condition> conditions;   // parametric residuals
  std::string diagnostic;
  bool anchor_involved = false;
};

using ValueFn = std::function<std::optional<Polynomial>(const std::string&, int)>;

class EquationSystem {
 public:
  EquationSystem(ValueDomain domain, ValueFn limit)
      : domain_(domain), limit_(std::move(limit)) {}

  // Anchors: phase-start jet used as integration constants (interval domain).
  void set_anchors(const std::map<std::string, Jet>* anchors,
                   const std::set<std::string>* no_anchor) {
    anchors_ = anchors;
    no_anchor_ = no_anchor;
  }

  void add_atom(SysAtom a) { atoms_.push_back(std::move(a)); }
  void add_side_equation(SideEquation s) { sides_.push_back(std::move(s)); }

  [[nodiscard]] const std::vector<SysAtom>& atoms() const { return atoms_; }

  [[nodiscard]] SolveResult solve(bool collect_conditions) const;

  [[nodiscard]] LinEnv env_of(const std::map<VarKey, Polynomial>& known,
                              std::set<VarKey>* touched = nullptr) const {
    LinEnv env;
    env.limit = limit_;
    env.touched = touched;
    bool derive = domain_ != ValueDomain::point;
    env.value = [&known, derive](const std::string& name,
                                 int order) -> std::optional<Polynomial> {
      if (auto it = known.find({name, order}); it != known.end()) return it->second;
      if (!derive) return std::nullopt;
      for (int j = order - 1; j >= 0; --j) {
        if (auto jt = known.find({name, j}); jt != known.end()) {
          Polynomial p = jt->second;
          for (int k = j; k < order; ++k) p = p.derivative();
          return p;
        }
      }
      return std::nullopt;
    };
    return env;
  }

 private:
  ValueDomain domain_;
  ValueFn limit_;
  const std::map<std::string, Jet>* anchors_ = nullptr;
  const std::set<std::string>* no_anchor_ = nullptr;
  std::vector<SysAtom> atoms_;
  std::vector<SideEquation> sides_;

  [[nodiscard]] std::optional<Rational> anchor_value(const std::string& var, int order) const {
    if (!anchors_ || (no_anchor_ && no_anchor_->count(var))) return std::nullopt;
    auto it = anchors_->find(var);
    if (it == anchors_->end()) return std::nullopt;
    auto jt = it->second.find(order);
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
  }
};

inline bool residual_true(ValueDomain domain, const Polynomial& residual, RelKind op) {
  switch (domain) {
    case ValueDomain::point:
      return rel_truth(op, residual.is_zero() ? 0 : sign(residual.coeff(0)));
    case ValueDomain::interval:
      // Truth just after the (local) phase start; later flips end the phase.
      return rel_truth(op, sign_just_after(residual, Rational(0)));
    case ValueDomain::parametric:
      // Identically-satisfied only; everything else becomes a condition.
      if (op == RelKind::eq) return residual.is_zero();
      if (residual.is_zero() || residual.degree() == 0)
        return rel_truth(op, residual.is_zero() ? 0 : sign(residual.coeff(0)));
      return false;
  }
  return false;
}

inline SolveResult EquationSystem::solve(bool collect_conditions) const {
  SolveResult res;
  std::map<VarKey, Polynomial> known;
  std::set<VarKey> anchored;

  struct Pending {
    const SysAtom* atom = nullptr;        // nullptr for side equations
    const SideEquation* side = nullptr;
    bool resolved = false;
  };
  std::vector<Pending> pending;
  for (const auto& a : atoms_) pending.push_back({&a, nullptr, false});
  for (const auto& s : sides_) pending.push_back({nullptr, &s, false});

  auto describe = [](const Pending& p) {
    if (p.side) return p.side->reason;
    return p.atom->module + ": " + to_string(p.atom->atom);
  };

  auto fail = [&](const Pending& p, const std::string& what, bool anchor_hit) {
    res.status = Feasibility::inconsistent;
    res.diagnostic = what + " (" + describe(p) + ")";
    res.anchor_involved = anchor_hit;
  };

  // Integrate downward from a freshly solved (var, order) using anchors.
  auto cascade = [&](const std::string& var, int order) {
    if (domain_ != ValueDomain::interval) return;
    for (int j = order - 1; j >= 0; --j) {
      if (known.count({var, j})) break;
      auto a = anchor_value(var, j);
      if (!a) break;
      known[{var, j}] = known.at({var, j + 1}).antiderivative(*a);
      anchored.insert({var, j});
    }
  };

  bool progress = true;
  while (progress) {
    progress = false;
    for (auto& p : pending) {
      if (p.resolved) continue;
      RelOp op = p.atom ? p.atom->atom.op : RelOp::eq;
      if (p.atom && op != RelOp::eq) continue;  // relational atoms checked at the end

      std::set<VarKey> touched;
      LinForm lf;
      if (p.atom) {
        lf = lin_of_atomic(p.atom->atom, env_of(known, &touched));
      } else {
        lf.constant = -p.side->value;
        if (auto it = known.find(p.side->key); it != known.end()) {
          lf.constant = it->second - p.side->value;
          touched.insert(p.side->key);
        } else {
          lf.coeff[p.side->key] = Polynomial::constant(Rational(1));
        }
        lf.mentioned.insert(p.side->key);
      }

      if (lf.vacuous) {
        p.resolved = true;
        progress = true;
        continue;
      }
      if (lf.nonlinear) continue;  // may become ground after more solving

      if (lf.coeff.empty()) {
        Polynomial r = lf.constant;
        if (r.is_zero()) {
          p.resolved = true;
          progress = true;
          continue;
        }
        if (collect_conditions) {
          res.conditions.push_back({r, RelKind::eq});
          p.resolved = true;
          progress = true;
          continue;
        }
        bool anchor_hit = std::any_of(touched.begin(), touched.end(),
                                      [&](const VarKey& k) { return anchored.count(k); });
        fail(p, "conflicting values", anchor_hit);
        res.known = std::move(known);
        res.anchored = std::move(anchored);
        return res;
      }
      if (lf.coeff.size() != 1) continue;

      const auto& [key, cpoly] = *lf.coeff.begin();
      if (cpoly.degree() != 0) {
        res.status = Feasibility::unsupported;
        res.diagnostic = "coefficient of " + key.first + " is not constant (" + describe(p) +
                         "); outside the supported constraint class";
        res.known = std::move(known);
        return res;
      }
      Polynomial value = lf.constant * (Rational(-1) / cpoly.coeff(0));

      // Direct solve of an anchored entry must respect right continuity.
      if (domain_ == ValueDomain::interval) {
        if (auto a = anchor_value(key.first, key.second)) {
          if (value.eval(Rational(0)) != *a) {
            fail(p,
                 "segment starts at " + key.first + " = " + to_string(value.eval(Rational(0))) +
                     " but right continuity of the phase-start value requires " + to_string(*a),
                 true);
            res.known = std::move(known);
            res.anchored = std::move(anchored);
            return res;
          }
        }
      }

      known[key] = value;
      cascade(key.first, key.second);
      p.resolved = true;
      progress = true;
    }
  }

  // Leftover equalities: nonlinear → unsupported, otherwise free variables.
  std::set<VarKey> free_set;
  for (auto& p : pending) {
    if (p.resolved || !p.atom) continue;  // side equations never stay pending
    if (p.atom->atom.op != RelOp::eq) continue;
    LinForm lf = lin_of_atomic(p.atom->atom, env_of(known));
    if (lf.nonlinear) {
      res.status = Feasibility::unsupported;
      res.diagnostic = "nonlinear in its unknowns (" + describe(p) +
                       "); outside the supported constraint class";
      res.known = std::move(known);
      return res;
    }
    for (const auto& [k, _] : lf.coeff) free_set.insert(k);
    p.resolved = true;
  }

  // Relational atoms: ground check, or single-unknown linear feasibility.
  struct Bound {
    std::optional<Rational> lo, hi;
    bool lo_strict = false, hi_strict = false;
    std::vector<Rational> excluded;
  };
  std::map<VarKey, Bound> bounds;
  for (auto& p : pending) {
    if (p.resolved || !p.atom) continue;
    RelKind op = rel_kind(p.atom->atom.op);
    std::set<VarKey> touched;
    LinForm lf = lin_of_atomic(p.atom->atom, env_of(known, &touched));
    if (lf.vacuous) continue;
    if (lf.coeff.empty() && !lf.nonlinear) {
      if (residual_true(domain_, lf.constant, op)) continue;
      if (collect_conditions) {
        res.conditions.push_back({lf.constant, op});
        continue;
      }
      bool anchor_hit = std::any_of(touched.begin(), touched.end(),
                                    [&](const VarKey& k) { return anchored.count(k); });
      fail(p, "violated just after the phase start", anchor_hit);
      res.known = std::move(known);
      res.anchored = std::move(anchored);
      return res;
    }
    if (lf.nonlinear || lf.coeff.size() > 1 || domain_ != ValueDomain::point) {
      for (const auto& k : lf.mentioned)
        if (!known.count(k)) free_set.insert(k);
      continue;
    }
    // αu + β op 0 with α, β rational: fold into the unknown's feasible set.
    const auto& [key, cpoly] = *lf.coeff.begin();
    if (cpoly.degree() != 0) {
      free_set.insert(key);
      continue;
    }
    Rational alpha = cpoly.coeff(0);
    Rational beta = lf.constant.coeff(0);
    Rational pivot = -beta / alpha;
    bool flip = alpha < 0;
    Bound& b = bounds[key];
    auto tighten_lo = [&](const Rational& v, bool strict) {
      if (!b.lo || v > *b.lo || (v == *b.lo && strict)) {
        b.lo = v;
        b.lo_strict = strict;
      }
    };
    auto tighten_hi = [&](const Rational& v, bool strict) {
      if (!b.hi || v < *b.hi || (v == *b.hi && strict)) {
        b.hi = v;
        b.hi_strict = strict;
      }
    };
    RelKind effective = op;
    if (flip) {
      switch (op) {
        case RelKind::lt: effective = RelKind::gt; break;
        case RelKind::le: effective = RelKind::ge; break;
        case RelKind::gt: effective = RelKind::lt; break;
        case RelKind::ge: effective = RelKind::le; break;
        default: break;
      }
    }
    switch (effective) {
      case RelKind::lt: tighten_hi(pivot, true); break;
      case RelKind::le: tighten_hi(pivot, false); break;
      case RelKind::gt: tighten_lo(pivot, true); break;
      case RelKind::ge: tighten_lo(pivot, false); break;
      case RelKind::neq: b.excluded.push_back(pivot); break;
      case RelKind::eq: break;
    }
    free_set.insert(key);
  }

  for (const auto& [key, b] : bounds) {
    bool empty = false;
    if (b.lo && b.hi) {
      if (*b.lo > *b.hi) empty = true;
      else if (*b.lo == *b.hi) {
        if (b.lo_strict || b.hi_strict) empty = true;
        else
          empty = std::find(b.excluded.begin(), b.excluded.end(), *b.lo) != b.excluded.end();
      }
    }
    if (empty) {
      res.status = Feasibility::inconsistent;
      res.diagnostic = "no value of " + key.first + " satisfies the relational constraints";
      res.known = std::move(known);
      res.anchored = std::move(anchored);
      return res;
    }
  }

  if (!free_set.empty() && res.status == Feasibility::consistent)
    res.free_vars.assign(free_set.begin(), free_set.end());

  res.known = std::move(known);
  res.anchored = std::move(anchored);
  return res;
}

// ── Left-limit stripping (open-interval substitution x⁻ ↦ x) ─────────────────

inline ExprPtr strip_limits(const ExprPtr& e) {
  switch (e->kind) {
    case Expr::Kind::literal:
      return e;
    case Expr::Kind::variable:
      return e->left_limit ? Expr::var(e->var_name, e->deriv_order, false) : e;
    case Expr::Kind::negate:
      return Expr::negate(strip_limits(e->lhs));
    default:
      return Expr::binary(e->kind, strip_limits(e->lhs), strip_limits(e->rhs));
  }
}

inline Atomic strip_limits(const Atomic& a) {
  return Atomic{strip_limits(a.lhs), a.op, strip_limits(a.rhs)};
}

// ── Guard entailment ─────────────────────────────────────────────────────────

enum class Entail { yes, no, unknown };

inline Entail guard_entailed(const std::vector<Atomic>& guard, const LinEnv& env,
                             ValueDomain domain) {
  bool unknown = false;
  for (const Atomic& a : guard) {
    LinForm lf = lin_of_atomic(a, env);
    if (lf.vacuous) return Entail::no;  // undefined left limit: never entailed
    if (lf.nonlinear || !lf.coeff.empty()) {
      unknown = true;
      continue;
    }
    if (domain == ValueDomain::parametric) {
      if (residual_true(ValueDomain::parametric, lf.constant, rel_kind(a.op))) continue;
      if (lf.constant.degree() <= 0) return Entail::no;  // constant and false
      unknown = true;
      continue;
    }
    if (!residual_true(domain, lf.constant, rel_kind(a.op))) return Entail::no;
  }
  return unknown ? Entail::unknown : Entail::yes;
}

// ── Instant solving (point and parametric) ───────────────────────────────────

struct FiredRef {
  std::string module;
  ConstraintPtr conditional;
};

struct InstantModel {
  std::map<VarKey, Polynomial> values;   // degree-0 at a concrete instant
  std::vector<FiredRef> fired;
  std::vector<Condition> conditions;     // parametric satisfiability conditions
};

struct SolveOutcome {
  Feasibility status = Feasibility::inconsistent;
  std::vector<InstantModel> models;      // nonempty iff consistent
  std::string diagnostic;
  bool anchor_involved = false;
  std::vector<VarKey> free_vars;
  // Best underdetermined-class failure, kept even when an inconsistent
  // branch outranks it: the caller may downgrade to underdetermined and
  // then this is the honest message.
  std::string under_diag;
  std::vector<VarKey> under_free_vars;

  void note_failure(Feasibility s, const std::string& diag, bool anchor,
                    const std::vector<VarKey>& fv = {}) {
    // Severity for reporting: unsupported > inconsistent-with-anchor >
    // inconsistent > underdetermined.
    auto rank = [](Feasibility f, bool a) {
      if (f == Feasibility::unsupported) return 3;
      if (f == Feasibility::inconsistent) return a ? 2 : 1;
      return 0;
    };
    if (!models.empty()) return;
    if (s == Feasibility::underdetermined && under_diag.empty()) {
      under_diag = diag;
      under_free_vars = fv;
    }
    if (diagnostic.empty() || rank(s, anchor) > rank(status, anchor_involved)) {
      status = s;
      diagnostic = diag;
      anchor_involved = anchor;
      free_vars = fv;
    }
  }
};

struct InstantQuery {
  // Q(M) members at the instant (nullptr when the module has none).
  std::function<const ConstraintSet*(const std::string&)> members_of;
  // Whether a member is an ongoing law of the module at this instant.
  std::function<bool(const std::string&, const ConstraintPtr&)> ongoing;
  ValueFn limit;
  SolveMode mode = SolveMode::model;
  ValueDomain domain = ValueDomain::point;
  SkolemContext* skolems = nullptr;
  Rational skolem_time;
  int max_conditionals = 16;
};

namespace detail {

struct CondState {
  std::string module;
  ConstraintPtr cond;
  int decided = -1;  // -1 undecided, 0 unfired, 1 fired
};

inline void add_instant_member(const std::string& module, const ConstraintPtr& c,
                               bool ongoing, bool fired, const InstantQuery& in,
                               std::vector<SysAtom>& atoms, std::vector<CondState>& conds) {
  switch (c->kind) {
    case Constraint::Kind::atomic:
      atoms.push_back({module, c->atom, ongoing, fired});
      return;
    case Constraint::Kind::conjunction:
      for (const auto& m : c->members) add_instant_member(module, m, ongoing, fired, in, atoms, conds);
      return;
    case Constraint::Kind::conditional:
      for (const auto& e : conds)
        if (e.module == module && equal(e.cond, c)) return;
      conds.push_back({module, c, -1});
      return;
    case Constraint::Kind::always:
      // At the instant, □C imposes exactly C now (its future force is the
      // closure's business).
      add_instant_member(module, c->body, ongoing, fired, in, atoms, conds);
      return;
    case Constraint::Kind::exists:
      add_instant_member(module,
                         skolemize_outside_conditionals(c, in.skolem_time, *in.skolems,
                                   module + "|" + to_string(c)),
                         ongoing, fired, in, atoms, conds);
      return;
  }
}

inline void side_conditions_for(const std::vector<SysAtom>& atoms, const InstantQuery& in,
                                EquationSystem& sys) {
  for (const SysAtom& a : atoms) {
    std::set<VarOcc> occs;
    collect_occurrences(a.atom, occs, {});
    bool vacuous = false;
    for (const VarOcc& o : occs)
      if (o.lim && !in.limit(o.name, o.order)) vacuous = true;
    if (vacuous) continue;
    for (const VarOcc& o : occs) {
      if (o.lim || o.order < 1) continue;
      int jmax = a.ongoing ? o.order : o.order - 1;
      for (int j = 0; j <= jmax; ++j) {
        auto v = in.limit(o.name, j);
        if (!v) continue;  // no left limit: the side condition is skipped
        sys.add_side_equation({{o.name, j},
                               *v,
                               a.module + ": continuity forced by " + to_string(a.atom) +
                                   " on " + o.name + " (order " + std::to_string(j) + ")"});
      }
    }
  }
}

inline void explore_instant(const InstantQuery& in, std::vector<SysAtom> atoms,
                            std::vector<CondState> conds, SolveOutcome& out) {
  // First undecided conditional branches the search.
  for (std::size_t i = 0; i < conds.size(); ++i) {
    if (conds[i].decided != -1) continue;
    if (static_cast<int>(conds.size()) > in.max_conditionals) {
      out.note_failure(Feasibility::unsupported,
                       "too many interdependent conditionals at one instant", false);
      return;
    }
    {
      auto unfired = conds;
      unfired[i].decided = 0;
      explore_instant(in, atoms, std::move(unfired), out);
    }
    {
      auto fired = conds;
      fired[i].decided = 1;
      auto more_atoms = atoms;
      ConstraintPtr body =
          skolemize_outside_conditionals(conds[i].cond->body, in.skolem_time, *in.skolems,
                    conds[i].module + "|" + to_string(conds[i].cond->body));
      add_instant_member(conds[i].module, body, false, true, in, more_atoms, fired);
      explore_instant(in, std::move(more_atoms), std::move(fired), out);
    }
    return;
  }

  EquationSystem sys(in.domain, in.limit);
  for (const auto& a : atoms) sys.add_atom(a);
  side_conditions_for(atoms, in, sys);
  SolveResult res = sys.solve(in.domain == ValueDomain::parametric);
  if (res.status == Feasibility::inconsistent || res.status == Feasibility::unsupported) {
    out.note_failure(res.status, res.diagnostic, res.anchor_involved);
    return;
  }

  LinEnv env = sys.env_of(res.known);
  std::vector<Condition> extra;
  for (const auto& c : conds) {
    Entail ent = guard_entailed(c.cond->guard, env, in.domain);
    if (in.domain == ValueDomain::parametric) {
      if (c.decided == 1) {
        // Fired at the symbolic instant: guard atoms become conditions.
        for (const Atomic& g : c.cond->guard) {
          LinForm lf = lin_of_atomic(g, env);
          if (lf.vacuous) return;  // never entailed: this subset is impossible
          if (lf.nonlinear || !lf.coeff.empty()) {
            out.note_failure(Feasibility::unsupported,
                             "guard depends on an unsolved value: " + to_string(g), false);
            return;
          }
          if (!residual_true(ValueDomain::parametric, lf.constant, rel_kind(g.op)))
            extra.push_back({lf.constant, rel_kind(g.op)});
        }
      }
      continue;  // unfired guards need no witness here; see phase-end events
    }
    if (in.mode == SolveMode::model) {
      if (ent == Entail::unknown) {
        out.note_failure(Feasibility::underdetermined,
                         "guard cannot be decided: " + c.module + ": " +
                             to_string(c.cond),
                         false, res.free_vars);
        return;
      }
      if ((ent == Entail::yes) != (c.decided == 1)) return;  // not a fixpoint
    } else {
      if (c.decided == 0 && ent == Entail::yes) return;  // entailed but unfired
    }
  }

  if (in.mode == SolveMode::model && !res.free_vars.empty()) {
    std::string names;
    for (const auto& [v, o] : res.free_vars)
      names += (names.empty() ? "" : ", ") + v + std::string(o, '\'');
    out.note_failure(Feasibility::underdetermined, "unconstrained at the instant: " + names,
                     false, res.free_vars);
    return;
  }

  InstantModel model;
  model.values = std::move(res.known);
  for (const auto& c : conds)
    if (c.decided == 1) model.fired.push_back({c.module, c.cond});
  std::sort(model.fired.begin(), model.fired.end(), [](const FiredRef& a, const FiredRef& b) {
    if (a.module != b.module) return a.module < b.module;
    return compare(a.conditional, b.conditional) < 0;
  });
  model.conditions = std::move(res.conditions);
  model.conditions.insert(model.conditions.end(), extra.begin(), extra.end());
  out.status = Feasibility::consistent;
  for (const auto& m : out.models) {
    if (m.fired.size() == model.fired.size() && m.values.size() == model.values.size()) {
      bool same = std::equal(m.values.begin(), m.values.end(), model.values.begin(),
                             [](const auto& x, const auto& y) {
                               return x.first == y.first && x.second == y.second;
                             });
      for (std::size_t i = 0; same && i < m.fired.size(); ++i)
        same = m.fired[i].module == model.fired[i].module &&
               equal(m.fired[i].conditional, model.fired[i].conditional);
      if (same) return;  // duplicate model from a redundant subset choice
    }
  }
  out.models.push_back(std::move(model));
}

}  // namespace detail

/// Solve the constraints of element E at one instant.
inline SolveOutcome solve_instant(const ModuleSet& element, const InstantQuery& in) {
  std::vector<SysAtom> atoms;
  std::vector<detail::CondState> conds;
  for (const std::string& m : element) {
    const ConstraintSet* set = in.members_of(m);
    if (!set) continue;
    for (const ConstraintPtr& c : set->items())
      detail::add_instant_member(m, c, in.ongoing(m, c), false, in, atoms, conds);
  }
  SolveOutcome out;
  detail::explore_instant(in, std::move(atoms), std::move(conds), out);
  if (out.models.empty() && out.diagnostic.empty())
    out.note_failure(Feasibility::underdetermined,
                     "no firing pattern is a fixpoint at the instant", false);
  return out;
}

// ── Interval solving ─────────────────────────────────────────────────────────

struct IntervalQuery {
  std::function<const ConstraintSet*(const std::string&)> members_of;  // interval piece
  const std::map<std::string, Jet>* anchors = nullptr;   // jet at the phase start
  const std::set<std::string>* no_anchor = nullptr;      // anchoring disabled
  SolveMode mode = SolveMode::model;
  SkolemContext* skolems = nullptr;
  Rational skolem_time;  // phase start
  int max_conditionals = 16;
};

namespace detail {

inline void add_interval_member(const std::string& module, const ConstraintPtr& c, bool fired,
                                const IntervalQuery& in, std::vector<SysAtom>& atoms,
                                std::vector<CondState>& conds) {
  switch (c->kind) {
    case Constraint::Kind::atomic:
      atoms.push_back({module, strip_limits(c->atom), false, fired});
      return;
    case Constraint::Kind::conjunction:
      for (const auto& m : c->members) add_interval_member(module, m, fired, in, atoms, conds);
      return;
    case Constraint::Kind::conditional:
      for (const auto& e : conds)
        if (e.module == module && equal(e.cond, c)) return;
      conds.push_back({module, c, -1});
      return;
    case Constraint::Kind::always:
      add_interval_member(module, c->body, fired, in, atoms, conds);
      return;
    case Constraint::Kind::exists:
      add_interval_member(module,
                          skolemize_outside_conditionals(c, in.skolem_time, *in.skolems,
                                    module + "|" + to_string(c)),
                          fired, in, atoms, conds);
      return;
  }
}

inline void explore_interval(const IntervalQuery& in, std::vector<SysAtom> atoms,
                             std::vector<CondState> conds, SolveOutcome& out) {
  for (std::size_t i = 0; i < conds.size(); ++i) {
    if (conds[i].decided != -1) continue;
    if (static_cast<int>(conds.size()) > in.max_conditionals) {
      out.note_failure(Feasibility::unsupported,
                       "too many interdependent conditionals in one phase", false);
      return;
    }
    {
      auto unfired = conds;
      unfired[i].decided = 0;
      explore_interval(in, atoms, std::move(unfired), out);
    }
    {
      auto fired = conds;
      fired[i].decided = 1;
      auto more_atoms = atoms;
      ConstraintPtr body =
          skolemize_outside_conditionals(conds[i].cond->body, in.skolem_time, *in.skolems,
                    conds[i].module + "|" + to_string(conds[i].cond->body));
      add_interval_member(conds[i].module, body, true, in, more_atoms, fired);
      explore_interval(in, std::move(more_atoms), std::move(fired), out);
    }
    return;
  }

  ValueFn no_limits = [](const std::string&, int) { return std::nullopt; };
  EquationSystem sys(ValueDomain::interval, no_limits);
  sys.set_anchors(in.anchors, in.no_anchor);
  for (const auto& a : atoms) sys.add_atom(a);
  SolveResult res = sys.solve(false);
  if (res.status == Feasibility::inconsistent || res.status == Feasibility::unsupported) {
    out.note_failure(res.status, res.diagnostic, res.anchor_involved);
    return;
  }

  // Guards with left limits read the current value inside an open interval.
  LinEnv env = sys.env_of(res.known);
  LinEnv guard_env = env;
  guard_env.limit = env.value;
  for (const auto& c : conds) {
    std::vector<Atomic> guard;
    guard.reserve(c.cond->guard.size());
    for (const Atomic& g : c.cond->guard) guard.push_back(strip_limits(g));
    Entail ent = guard_entailed(guard, guard_env, ValueDomain::interval);
    if (in.mode == SolveMode::model) {
      if (ent == Entail::unknown) {
        out.note_failure(Feasibility::underdetermined,
                         "guard cannot be decided on the interval: " + c.module + ": " +
                             to_string(c.cond),
                         false, res.free_vars);
        return;
      }
      if ((ent == Entail::yes) != (c.decided == 1)) return;
    } else {
      if (c.decided == 0 && ent == Entail::yes) return;
    }
  }

  if (in.mode == SolveMode::model && !res.free_vars.empty()) {
    std::string names;
    for (const auto& [v, o] : res.free_vars)
      names += (names.empty() ? "" : ", ") + v + std::string(o, '\'');
    out.note_failure(Feasibility::underdetermined,
                     "no law fixes these on the interval: " + names, false, res.free_vars);
    return;
  }

  InstantModel model;
  model.values = std::move(res.known);
  for (const auto& c : conds)
    if (c.decided == 1) model.fired.push_back({c.module, c.cond});
  std::sort(model.fired.begin(), model.fired.end(), [](const FiredRef& a, const FiredRef& b) {
    if (a.module != b.module) return a.module < b.module;
    return compare(a.conditional, b.conditional) < 0;
  });
  out.status = Feasibility::consistent;
  for (const auto& m : out.models) {
    if (m.fired.size() == model.fired.size()) {
      bool same = m.values.size() == model.values.size() &&
                  std::equal(m.values.begin(), m.values.end(), model.values.begin(),
                             [](const auto& x, const auto& y) {
                               return x.first == y.first && x.second == y.second;
                             });
      for (std::size_t i = 0; same && i < m.fired.size(); ++i)
        same = m.fired[i].module == model.fired[i].module &&
               equal(m.fired[i].conditional, model.fired[i].conditional);
      if (same) return;
    }
  }
  out.models.push_back(std::move(model));
}

}  // namespace detail

/// Solve the constraints of element E on an open interval after the phase
/// start; anchors provide integration constants (structural right
/// continuity).
inline SolveOutcome solve_interval(const ModuleSet& element, const IntervalQuery& in) {
  std::vector<SysAtom> atoms;
  std::vector<detail::CondState> conds;
  for (const std::string& m : element) {
    const ConstraintSet* set = in.members_of(m);
    if (!set) continue;
    for (const ConstraintPtr& c : set->items())
      detail::add_interval_member(m, c, false, in, atoms, conds);
  }
  SolveOutcome out;
  detail::explore_interval(in, std::move(atoms), std::move(conds), out);
  if (out.models.empty() && out.diagnostic.empty())
    out.note_failure(Feasibility::underdetermined,
                     "no firing pattern is a fixpoint on the interval", false);
  return out;
}

// ── Maximal-consistent adoption ──────────────────────────────────────────────

struct ElementOutcome {
  Feasibility status = Feasibility::inconsistent;
  std::string diagnostic;
  bool anchor_involved = false;
};

struct Adoption {
  std::vector<std::size_t> chosen;  // maximal satisfiable elements (an antichain)
  std::map<std::size_t, ElementOutcome> outcomes;
};

/// Explore the module-set poset from its maximal elements downward; descend
/// only below unsatisfiable elements.  `test` maps an element index to an
/// ElementOutcome.
template <class Test>
Adoption find_maximal_consistent(const ModuleSetPoset& poset, Test&& test) {
  Adoption out;
  std::size_t n = poset.elements.size();
  std::vector<std::vector<std::size_t>> below(n);
  for (const auto& [i, j] : poset.hasse_edges()) below[j].push_back(i);

  std::vector<std::size_t> frontier;
  std::vector<char> seen(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (poset.is_maximal(i)) {
      frontier.push_back(i);
      seen[i] = 1;
    }

  std::vector<std::size_t> satisfiable;
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    std::size_t i = frontier[head];
    ElementOutcome oc = test(i);
    out.outcomes.emplace(i, oc);
    if (oc.status == Feasibility::consistent) {
      satisfiable.push_back(i);
      continue;
    }
    for (std::size_t b : below[i])
      if (!seen[b]) {
        seen[b] = 1;
        frontier.push_back(b);
      }
  }

  for (std::size_t i : satisfiable) {
    bool dominated = false;
    for (std::size_t j : satisfiable)
      if (j != i && poset.less[i][j]) dominated = true;
    if (!dominated) out.chosen.push_back(i);
  }
  std::sort(out.chosen.begin(), out.chosen.end());
  return out;
}

/// Classify a dead end from the outcomes of the poset's maximal elements:
/// an inconsistent top means no trajectory exists; otherwise the run is
/// underdetermined (or unsupported when the solver had to give up).
struct DeadEnd {
  Feasibility status = Feasibility::underdetermined;
  std::string diagnostic;
};

inline DeadEnd classify_dead_end(const ModuleSetPoset& poset, const Adoption& adoption) {
  DeadEnd de;
  int best = 0;  // 0 underdetermined < 1 inconsistent < 2 +anchor < 3 unsupported
  for (std::size_t i = 0; i < poset.elements.size(); ++i) {
    if (!poset.is_maximal(i)) continue;
    auto it = adoption.outcomes.find(i);
    if (it == adoption.outcomes.end()) continue;
    const ElementOutcome& oc = it->second;
    int rank = 0;
    if (oc.status == Feasibility::unsupported) rank = 3;
    else if (oc.status == Feasibility::inconsistent) rank = oc.anchor_involved ? 2 : 1;
    if (rank > best || de.diagnostic.empty()) {
      best = std::max(best, rank);
      de.status = rank >= 3   ? Feasibility::unsupported
                  : rank >= 1 ? Feasibility::inconsistent
                              : Feasibility::underdetermined;
      de.diagnostic = oc.diagnostic;
      if (rank == 2)
        de.diagnostic += " — the clash involves a value carried across the phase start by "
                         "right continuity";
    }
  }
  if (best == 0 && de.diagnostic.empty())
    for (const auto& [i, oc] : adoption.outcomes)
      if (de.diagnostic.empty()) de.diagnostic = oc.diagnostic;
  return de;
}

}  // namespace hydla
