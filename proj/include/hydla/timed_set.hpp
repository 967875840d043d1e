#pragma once

// ── Time-indexed constraint sets and the □-closure ───────────────────────────
// A TimedConstraintSet is a piecewise-constant map from time to a constraint
// set.  Pieces alternate points and open intervals:
//   [b0], (b0,b1), [b1], …, [bn], (bn, ∞)     with b0 = 0.
// Breakpoints can be added retroactively; splitting a piece copies its set,
// so the represented function never changes under refinement.
//
// The closure rule: □a in the set at piece P forces the members of a into P
// and every later piece.  The box itself stays where it was introduced.

#include <hydla/ast.hpp>
#include <hydla/rational.hpp>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hydla {

class TimedConstraintSet {
 public:
  TimedConstraintSet() : breaks_{Rational(0)}, sets_(2) {}

  [[nodiscard]] const std::vector<Rational>& breakpoints() const { return breaks_; }
  [[nodiscard]] std::size_t piece_count() const { return sets_.size(); }
  [[nodiscard]] bool piece_is_point(std::size_t idx) const { return idx % 2 == 0; }

  /// [lo, hi] bounds of a piece; hi is nullopt for the final open interval.
  [[nodiscard]] std::pair<Rational, std::optional<Rational>> piece_range(
      std::size_t idx) const {
    std::size_t i = idx / 2;
    if (piece_is_point(idx)) return {breaks_[i], breaks_[i]};
    if (i + 1 < breaks_.size()) return {breaks_[i], breaks_[i + 1]};
    return {breaks_[i], std::nullopt};
  }

  [[nodiscard]] std::size_t piece_index_of(const Rational& t) const {
    if (t < 0) throw std::out_of_range("time before 0");
    // Last breakpoint ≤ t.
    std::size_t lo = 0, hi = breaks_.size();
    while (hi - lo > 1) {
      std::size_t mid = (lo + hi) / 2;
      if (breaks_[mid] <= t) lo = mid;
      else hi = mid;
    }
    return breaks_[lo] == t ? 2 * lo : 2 * lo + 1;
  }

  [[nodiscard]] const ConstraintSet& piece_set(std::size_t idx) const { return sets_[idx]; }
  [[nodiscard]] const ConstraintSet& at(const Rational& t) const {
    return sets_[piece_index_of(t)];
  }

  /// Set on the open interval (lo, hi); requires the interval to lie inside a
  /// single piece (refine first when unsure).
  [[nodiscard]] const ConstraintSet& at_open(const Rational& lo, const Rational& hi) const {
    if (!(lo < hi)) throw std::invalid_argument("empty interval");
    std::size_t idx = piece_index_of(lo) | 1;  // interval piece starting at or after lo
    auto [plo, phi] = piece_range(idx);
    if (phi && hi > *phi)
      throw std::invalid_argument("interval spans multiple pieces; refine first");
    return sets_[idx];
  }

  /// Set on the interval piece immediately left of the point piece [t];
  /// nullopt at t = 0 or when t is not a breakpoint.
  [[nodiscard]] const ConstraintSet* set_left_of_point(const Rational& t) const {
    std::size_t idx = piece_index_of(t);
    if (!piece_is_point(idx) || idx == 0) return nullptr;
    return &sets_[idx - 1];
  }

  /// Ensure t is a breakpoint, splitting the containing interval piece.
  void add_breakpoint(const Rational& t) {
    std::size_t idx = piece_index_of(t);
    if (piece_is_point(idx)) return;
    std::size_t i = idx / 2;  // splitting (b_i, b_{i+1}) or the final open piece
    breaks_.insert(breaks_.begin() + static_cast<std::ptrdiff_t>(i) + 1, t);
    ConstraintSet copy = sets_[idx];
    sets_.insert(sets_.begin() + static_cast<std::ptrdiff_t>(idx) + 1, 2, copy);
  }

  bool insert_at_piece(std::size_t idx, const ConstraintPtr& c) {
    return sets_[idx].insert(c);
  }
  bool insert_at_point(const Rational& t, const ConstraintPtr& c) {
    add_breakpoint(t);
    return sets_[piece_index_of(t)].insert(c);
  }

  /// Insert into piece idx and every later piece; true if anything changed.
  bool insert_from_piece(std::size_t idx, const ConstraintPtr& c) {
    bool changed = false;
    for (std::size_t i = idx; i < sets_.size(); ++i) changed |= sets_[i].insert(c);
    return changed;
  }

  /// Close under the □ rule (in place, to fixpoint).
  void box_close() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = 0; i < sets_.size(); ++i) {
        ConstraintSet snapshot = sets_[i];
        for (const ConstraintPtr& c : snapshot.items()) {
          if (c->kind != Constraint::Kind::always) continue;
          for (const ConstraintPtr& m : flatten(c->body)) changed |= insert_from_piece(i, m);
        }
      }
    }
  }

  void refine_like(const TimedConstraintSet& other) {
    for (const Rational& b : other.breaks_) add_breakpoint(b);
  }

  friend bool operator==(const TimedConstraintSet& a, const TimedConstraintSet& b) {
    TimedConstraintSet x = a, y = b;
    x.refine_like(y);
    y.refine_like(x);
    return x.breaks_ == y.breaks_ && x.sets_ == y.sets_;
  }

 private:
  std::vector<Rational> breaks_;
  std::vector<ConstraintSet> sets_;
};

[[nodiscard]] inline TimedConstraintSet box_closure(const TimedConstraintSet& in) {
  TimedConstraintSet out = in;
  out.box_close();
  return out;
}

// ── Skolemization ────────────────────────────────────────────────────────────

/// Fresh names are a pure function of (binding site, bound name, time): the
/// name is base#<time>, suffixed with an ordinal only when a second distinct
/// site binds the same base at the same time.  There is no global counter, so
/// speculative expansions during exploration cannot shift the names of the
/// ones that are committed — the simulator and a certificate replay agree.
struct SkolemContext {
  std::map<std::tuple<std::string, std::string, Rational>, std::string> assigned;
  std::map<std::pair<std::string, Rational>, int> claims;  // (base, time) → #sites

  static std::string time_token(const Rational& t) {
    std::string s = num(t).str();
    if (den(t) != 1) s += "_" + den(t).str();
    return s;
  }

  std::string fresh(const std::string& site, const std::string& base, const Rational& t) {
    auto key = std::make_tuple(site, base, t);
    if (auto it = assigned.find(key); it != assigned.end()) return it->second;
    int n = claims[{base, t}]++;
    std::string name = base + "#" + time_token(t);
    // '#' as the ordinal separator: '_' already separates a denominator, so
    // base#1_2 (t = 1/2) and base#1#2 (second site at t = 1) stay distinct.
    if (n > 0) name += "#" + std::to_string(n + 1);
    assigned.emplace(std::move(key), name);
    return name;
  }
};

/// Replace each ∃x.C by C[x ↦ fresh] outside-in.  The same (site, name, time)
/// triple always maps to the same fresh name, so re-expansion is idempotent.
inline ConstraintPtr skolemize(const ConstraintPtr& c, const Rational& t,
                               SkolemContext& ctx, const std::string& site) {
  switch (c->kind) {
    case Constraint::Kind::atomic:
      return c;
    case Constraint::Kind::conjunction: {
      std::vector<ConstraintPtr> ms;
      ms.reserve(c->members.size());
      for (const auto& m : c->members) ms.push_back(skolemize(m, t, ctx, site));
      return Constraint::conjunction(std::move(ms));
    }
    case Constraint::Kind::conditional: {
      // Guards are quantifier-free; only the consequent can bind.
      return Constraint::conditional(c->guard, skolemize(c->body, t, ctx, site));
    }
    case Constraint::Kind::always:
      return Constraint::always(skolemize(c->body, t, ctx, site));
    case Constraint::Kind::exists: {
      std::string name = ctx.fresh(site, c->bound, t);
      ConstraintPtr renamed = rename_variable(c->body, c->bound, name);
      return skolemize(renamed, t, ctx, site);
    }
  }
  throw std::logic_error("unreachable");
}

/// Skolemize only the quantifiers visible outside conditional consequents: a
/// consequent's witnesses are chosen when the conditional fires, not when the
/// conditional enters the store.
inline ConstraintPtr skolemize_outside_conditionals(const ConstraintPtr& c, const Rational& t,
                                                    SkolemContext& ctx,
                                                    const std::string& site) {
  switch (c->kind) {
    case Constraint::Kind::atomic:
    case Constraint::Kind::conditional:
      return c;
    case Constraint::Kind::conjunction: {
      std::vector<ConstraintPtr> ms;
      ms.reserve(c->members.size());
      for (const auto& m : c->members)
        ms.push_back(skolemize_outside_conditionals(m, t, ctx, site));
      return Constraint::conjunction(std::move(ms));
    }
    case Constraint::Kind::always:
      return Constraint::always(skolemize_outside_conditionals(c->body, t, ctx, site));
    case Constraint::Kind::exists: {
      std::string name = ctx.fresh(site, c->bound, t);
      ConstraintPtr renamed = rename_variable(c->body, c->bound, name);
      return skolemize_outside_conditionals(renamed, t, ctx, site);
    }
  }
  throw std::logic_error("unreachable");
}

// ── Per-module Q store ───────────────────────────────────────────────────────

struct QAddition {
  std::string module;
  Rational time;
  ConstraintPtr constraint;
};

class QStore {
 public:
  QStore() = default;

  /// Initialize Q(M) for each module: the definition's members at [0] only,
  /// then □-closure spreads law members forward.  Quantifiers outside
  /// conditional consequents are witnessed here, once, at time 0.
  explicit QStore(const std::map<std::string, ConstraintPtr>& defs) {
    for (const auto& [name, c] : defs) {
      TimedConstraintSet tcs;
      for (const ConstraintPtr& m : flatten(c)) {
        ConstraintPtr w = skolemize_outside_conditionals(m, Rational(0), skolems_,
                                                         name + "|" + to_string(m));
        for (const ConstraintPtr& f : flatten(w)) tcs.insert_at_piece(0, f);
      }
      tcs.box_close();
      q_.emplace(name, std::move(tcs));
    }
  }

  [[nodiscard]] bool has_module(const std::string& m) const { return q_.count(m) != 0; }
  [[nodiscard]] const TimedConstraintSet& of(const std::string& m) const {
    return q_.at(m);
  }
  [[nodiscard]] TimedConstraintSet& of_mut(const std::string& m) { return q_.at(m); }
  [[nodiscard]] const std::map<std::string, TimedConstraintSet>& all() const { return q_; }

  [[nodiscard]] const std::vector<QAddition>& additions() const { return additions_; }
  [[nodiscard]] SkolemContext& skolem_context() { return skolems_; }

  void add_breakpoint_everywhere(const Rational& t) {
    for (auto& [_, tcs] : q_) tcs.add_breakpoint(t);
  }

  /// Record a fired conditional: skolemize the consequent, insert its members
  /// into Q(module) at [t], re-close, and log every member newly present at
  /// [t] (direct members plus closure consequences).
  std::vector<ConstraintPtr> expand_consequent(const std::string& module,
                                               const ConstraintPtr& consequent,
                                               const Rational& t) {
    TimedConstraintSet& tcs = q_.at(module);
    tcs.add_breakpoint(t);
    return expand_at_piece(module, consequent, t, tcs.piece_index_of(t));
  }

  /// A conditional fired throughout an open interval: its consequent joins
  /// Q(module) on the interval piece just after [t_start] (the caller has
  /// already placed breakpoints at both ends of the phase).
  std::vector<ConstraintPtr> expand_on_interval(const std::string& module,
                                                const ConstraintPtr& consequent,
                                                const Rational& t_start) {
    TimedConstraintSet& tcs = q_.at(module);
    return expand_at_piece(module, consequent, t_start, tcs.piece_index_of(t_start) + 1);
  }

 private:
  std::vector<ConstraintPtr> expand_at_piece(const std::string& module,
                                             const ConstraintPtr& consequent,
                                             const Rational& t, std::size_t idx) {
    TimedConstraintSet& tcs = q_.at(module);
    ConstraintSet before = tcs.piece_set(idx);

    ConstraintPtr expanded = skolemize_outside_conditionals(
        consequent, t, skolems_, module + "|" + to_string(consequent));
    for (const ConstraintPtr& m : flatten(expanded)) tcs.insert_at_piece(idx, m);
    tcs.box_close();

    std::vector<ConstraintPtr> added;
    for (const ConstraintPtr& c : tcs.piece_set(idx).items())
      if (!before.contains(c)) {
        added.push_back(c);
        additions_.push_back({module, t, c});
      }
    return added;
  }

  std::map<std::string, TimedConstraintSet> q_;
  std::vector<QAddition> additions_;
  SkolemContext skolems_;
};

}  // namespace hydla
