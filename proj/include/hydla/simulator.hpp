#pragma once

// ── Simulation ───────────────────────────────────────────────────────────────
// Alternating point and interval phases.  Each phase adopts a maximal
// consistent module set from the (continuity-extended) poset; multiple
// incomparable adoptions or multiple firing fixpoints branch the run.
//
// Continuity defaults: every program variable x whose highest differential
// order k_max is at least 1 gets modules CONT(x,k) ⇔ □(x^(k)⁻ = x^(k)) for
// 0 ≤ k < k_max.  Differential modules are weaker than every CONT module,
// CONT modules weaker than every guarded module.  Right continuity at a
// phase start is structural: interval segments are anchored at the phase-
// start jet (removed together with the CONT modules by --no-cont).
//
// An interval phase ends at the earliest of: a truth change of any atomic
// member or guard atom of any module in the pool, the first instant at which
// a strictly greater module set becomes pointwise satisfiable, or the
// horizon.  A Zeno cascade is detected from the trailing gaps of the point-
// phase times; its accumulation point, when inside the horizon, either stops
// the run or (with post-Zeno continuation) restarts it from exact limits
// extrapolated from the cascade.

#include <hydla/ast.hpp>
#include <hydla/poset.hpp>
#include <hydla/solver.hpp>
#include <hydla/timed_set.hpp>
#include <hydla/trajectory.hpp>

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace hydla {

// ── Options and pool ─────────────────────────────────────────────────────────

struct SimOptions {
  Rational horizon = Rational(10);
  int max_phases = 64;
  int branch_limit = 8;
  int zeno_window = 3;
  Rational zeno_ratio_tol = Rational(0);
  bool post_zeno = false;
  std::set<std::string> no_cont;                  // drop CONT modules and anchors
  std::optional<ModuleSetPoset> explicit_poset;   // base poset, pre-extension
};

struct ProgramPool {
  std::map<std::string, ConstraintPtr> defs;  // base modules plus CONT modules
  ModuleSetPoset poset;
  std::map<std::string, int> max_order;
  std::set<std::string> cont_modules;
  std::set<std::string> program_vars;
};

namespace detail {

inline bool contains_conditional(const ConstraintPtr& c) {
  switch (c->kind) {
    case Constraint::Kind::atomic: return false;
    case Constraint::Kind::conjunction:
      for (const auto& m : c->members)
        if (contains_conditional(m)) return true;
      return false;
    case Constraint::Kind::conditional: return true;
    case Constraint::Kind::always:
    case Constraint::Kind::exists: return contains_conditional(c->body);
  }
  return false;
}

inline bool contains_law_derivative(const ConstraintPtr& c, bool under_box) {
  switch (c->kind) {
    case Constraint::Kind::atomic: {
      if (!under_box) return false;
      std::set<VarOcc> occs;
      collect_occurrences(c->atom, occs, {});
      for (const auto& o : occs)
        if (!o.lim && o.order >= 1) return true;
      return false;
    }
    case Constraint::Kind::conjunction:
      for (const auto& m : c->members)
        if (contains_law_derivative(m, under_box)) return true;
      return false;
    case Constraint::Kind::conditional:
      return false;  // consequents count as guarded behavior, not laws
    case Constraint::Kind::always:
      return contains_law_derivative(c->body, true);
    case Constraint::Kind::exists:
      return contains_law_derivative(c->body, under_box);
  }
  return false;
}

inline void collect_guards(const ConstraintPtr& c, std::vector<Atomic>& out) {
  switch (c->kind) {
    case Constraint::Kind::atomic: return;
    case Constraint::Kind::conjunction:
      for (const auto& m : c->members) collect_guards(m, out);
      return;
    case Constraint::Kind::conditional:
      out.insert(out.end(), c->guard.begin(), c->guard.end());
      collect_guards(c->body, out);
      return;
    case Constraint::Kind::always:
    case Constraint::Kind::exists:
      collect_guards(c->body, out);
      return;
  }
}

}  // namespace detail

inline std::string cont_module_name(const std::string& var, int order) {
  return "CONT(" + var + "," + std::to_string(order) + ")";
}

/// Assemble the module pool: continuity defaults, default priorities, and the
/// extended module-set poset (derived from the declaration, or composed with
/// an explicitly supplied base poset).
inline ProgramPool build_pool(const ParsedProgram& program, const SimOptions& opt) {
  ProgramPool pool;

  // Base modules: the declaration's, the explicit poset's, or all of them.
  std::vector<std::string> base;
  if (opt.explicit_poset) {
    for (const std::string& m : opt.explicit_poset->all_modules()) base.push_back(m);
  } else if (program.declaration) {
    collect_modules(*program.declaration, base);
    std::sort(base.begin(), base.end());
    base.erase(std::unique(base.begin(), base.end()), base.end());
  } else {
    for (const auto& [name, _] : program.definitions) base.push_back(name);
  }
  for (const std::string& m : base) {
    const ConstraintPtr* def = program.find(m);
    if (!def) throw std::invalid_argument("module '" + m + "' has no definition");
    pool.defs[m] = *def;
  }

  for (const auto& [name, def] : pool.defs) {
    std::set<VarOcc> occs;
    collect_occurrences(def, occs);
    for (const auto& o : occs) {
      pool.program_vars.insert(o.name);
      auto [it, _] = pool.max_order.try_emplace(o.name, 0);
      it->second = std::max(it->second, o.order);
    }
  }

  std::vector<std::string> differential, guarded;
  for (const auto& [name, def] : pool.defs) {
    bool g = detail::contains_conditional(def);
    if (g) guarded.push_back(name);
    else if (detail::contains_law_derivative(def, false)) differential.push_back(name);
  }

  for (const auto& [var, kmax] : pool.max_order) {
    if (kmax < 1 || opt.no_cont.count(var)) continue;
    for (int k = 0; k < kmax; ++k) {
      std::string name = cont_module_name(var, k);
      pool.defs[name] =
          Constraint::always(Constraint::atomic({Expr::var(var, k, true), RelOp::eq,
                                                 Expr::var(var, k, false)}));
      pool.cont_modules.insert(name);
    }
  }

  // Priorities: declared chains plus differential ≺ CONT ≺ guarded.
  ModulePriority pr;
  for (const auto& [name, _] : pool.defs) pr.modules.push_back(name);
  std::size_t n = pr.modules.size();
  pr.weaker.assign(n, std::vector<bool>(n, false));
  auto mark = [&](const std::string& w, const std::string& s) {
    int i = pr.index_of(w), j = pr.index_of(s);
    if (i >= 0 && j >= 0 && i != j) pr.weaker[i][j] = true;
  };
  if (program.declaration && !opt.explicit_poset) {
    std::set<std::pair<std::string, std::string>> pairs;
    detail::collect_priority_pairs(*program.declaration, pairs);
    for (const auto& [w, s] : pairs) mark(w, s);
  }
  for (const auto& d : differential)
    for (const auto& c : pool.cont_modules) mark(d, c);
  for (const auto& c : pool.cont_modules)
    for (const auto& g : guarded) mark(c, g);
  pr.close_transitively();

  if (opt.explicit_poset) {
    // An explicit poset fixes the base sets extensionally; the generated
    // defaults extend each of them with every subset of the continuity
    // modules, ranked by inclusion alongside the bases.
    std::vector<ModuleSet> extended;
    std::vector<std::string> conts(pool.cont_modules.begin(), pool.cont_modules.end());
    std::size_t cn = conts.size();
    for (const ModuleSet& s : opt.explicit_poset->elements) {
      for (std::uint32_t mask = 0; mask < (1u << cn); ++mask) {
        ModuleSet e = s;
        for (std::size_t i = 0; i < cn; ++i)
          if (mask & (1u << i)) e.insert(conts[i]);
        extended.push_back(std::move(e));
      }
    }
    std::sort(extended.begin(), extended.end());
    extended.erase(std::unique(extended.begin(), extended.end()), extended.end());
    pool.poset = detail::poset_from_subset_order(std::move(extended));
  } else {
    pool.poset = detail::poset_from_subset_order(admissible_sets(pr));
  }
  return pool;
}

// ── Phase records ────────────────────────────────────────────────────────────

struct QAddRecord {
  std::string module;
  std::string constraint;
};

struct Phase {
  enum class Kind { point, interval, zeno_gap };
  Kind kind = Kind::point;
  Rational start, end;                        // point: start == end
  ModuleSet adopted;
  std::map<std::string, Jet> jet;             // point phases
  std::map<std::string, Polynomial> polys;    // interval phases, local τ = t − start
  std::vector<QAddRecord> fired;
  std::vector<QAddRecord> q_additions;
  std::vector<std::string> q_active;
};

enum class RunStatus {
  running,
  horizon_reached,
  zeno_detected,
  no_solution,
  underdetermined,
  unsupported,
  phase_limit,
};

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::running: return "running";
    case RunStatus::horizon_reached: return "horizon_reached";
    case RunStatus::zeno_detected: return "zeno_detected";
    case RunStatus::no_solution: return "no_solution";
    case RunStatus::underdetermined: return "underdetermined";
    case RunStatus::unsupported: return "unsupported";
    case RunStatus::phase_limit: return "phase_limit";
  }
  return "?";
}

struct ZenoInfo {
  Rational accumulation;
  Rational ratio;
  std::vector<Rational> window_points;
};

struct SimBranch {
  std::vector<Phase> phases;
  Trajectory traj;
  QStore q;
  RunStatus status = RunStatus::running;
  std::string diagnostic;
  std::optional<ZenoInfo> zeno;
  std::vector<Rational> point_times;
  Rational now;
  bool at_point = true;
};

struct SimResult {
  ProgramPool pool;
  std::vector<SimBranch> branches;
  bool branch_limit_hit = false;
};

// ── Maximality events ────────────────────────────────────────────────────────

struct CompetitorScan {
  std::optional<Rational> earliest;  // global time in (t0, upper)
  std::string element;               // the strictly greater set that wakes up
  bool immediate = false;            // satisfiable just after t0
  bool unsupported = false;
  std::string diagnostic;
};

/// First instant in (t0, upper) at which a strictly greater module set is
/// pointwise satisfiable against the phase's trajectory polynomials (given in
/// local time τ = t − t0).  Parametric conditions produce candidate roots;
/// each is confirmed by a concrete point-existence solve.
inline CompetitorScan scan_competitors(
    const ModuleSetPoset& poset, std::size_t element_idx,
    const std::function<const ConstraintSet*(const std::string&)>& members_of,
    const ValueFn& local_values, const Rational& t0, const Rational& upper,
    const SkolemContext& skolems) {
  CompetitorScan out;
  ValueFn global = [&local_values, t0](const std::string& name,
                                       int order) -> std::optional<Polynomial> {
    auto p = local_values(name, order);
    if (!p) return std::nullopt;
    return p->shifted(-t0);
  };
  auto always_ongoing = [](const std::string&, const ConstraintPtr&) { return true; };

  auto verify_at = [&](std::size_t elem, const Rational& tc) {
    InstantQuery in;
    in.members_of = members_of;
    in.ongoing = always_ongoing;
    Rational local = tc - t0;
    in.limit = [&local_values, local](const std::string& name,
                                      int order) -> std::optional<Polynomial> {
      auto p = local_values(name, order);
      if (!p) return std::nullopt;
      return Polynomial::constant(p->eval(local));
    };
    in.mode = SolveMode::existence;
    in.domain = ValueDomain::point;
    SkolemContext scratch = skolems;
    in.skolems = &scratch;
    in.skolem_time = tc;
    return solve_instant(poset.elements[elem], in).status == Feasibility::consistent;
  };

  Rational best = upper;
  for (int j : poset.strictly_above(static_cast<int>(element_idx))) {
    auto ej = static_cast<std::size_t>(j);
    InstantQuery in;
    in.members_of = members_of;
    in.ongoing = always_ongoing;
    in.limit = global;
    in.mode = SolveMode::existence;
    in.domain = ValueDomain::parametric;
    SkolemContext scratch = skolems;
    in.skolems = &scratch;
    in.skolem_time = t0;
    SolveOutcome oc = solve_instant(poset.elements[ej], in);
    if (oc.status != Feasibility::consistent) continue;

    for (const InstantModel& m : oc.models) {
      bool immediate = true;
      for (const Condition& c : m.conditions)
        immediate &= rel_truth(c.op, sign_just_after(c.poly, t0));
      if (immediate) {
        out.immediate = true;
        out.element = to_string(poset.elements[ej]);
        out.diagnostic = "a strictly greater module set (" + out.element +
                         ") is satisfiable immediately after t = " + to_string(t0);
        return out;
      }

      std::vector<Rational> candidates;
      bool hazard = false;
      Rational hazard_near;
      for (const Condition& c : m.conditions) {
        if (c.poly.is_zero() || c.poly.degree() == 0) continue;
        for (const RootLoc& r : roots_after(c.poly, t0)) {
          if (r.exact) candidates.push_back(r.value);
          else if (r.lo < best && (!hazard || r.lo < hazard_near)) {
            hazard = true;
            hazard_near = (r.lo + r.hi) / 2;
          }
        }
      }
      std::sort(candidates.begin(), candidates.end());
      candidates.erase(std::unique(candidates.begin(), candidates.end()),
                       candidates.end());
      for (const Rational& tc : candidates) {
        if (!(tc > t0) || !(tc < best)) continue;
        if (verify_at(ej, tc)) {
          best = tc;
          out.earliest = tc;
          out.element = to_string(poset.elements[ej]);
          break;
        }
      }
      if (hazard && hazard_near < best) {
        out.unsupported = true;
        out.diagnostic = "a maximality event occurs at an irrational time near t = " +
                         to_string(hazard_near);
        return out;
      }
    }
  }
  return out;
}

// ── Simulator ────────────────────────────────────────────────────────────────

class Simulator {
 public:
  Simulator(const ParsedProgram& program, SimOptions opt)
      : opt_(std::move(opt)), pool_(build_pool(program, opt_)) {}

  [[nodiscard]] const ProgramPool& pool() const { return pool_; }

  [[nodiscard]] SimResult run() {
    SimResult result;
    result.pool = pool_;

    SimBranch root;
    root.q = QStore(pool_.defs);
    for (const auto& v : pool_.program_vars) root.traj.declare(v, Rational(0));
    root.now = Rational(0);
    root.at_point = true;
    root.point_times.clear();

    std::deque<SimBranch> queue;
    queue.push_back(std::move(root));
    while (!queue.empty()) {
      SimBranch b = std::move(queue.front());
      queue.pop_front();
      std::vector<SimBranch> next = step(b, result);
      for (auto& nb : next) {
        if (nb.status == RunStatus::running) {
          if (static_cast<int>(queue.size() + result.branches.size()) >=
              opt_.branch_limit) {
            result.branch_limit_hit = true;
            nb.status = RunStatus::phase_limit;
            nb.diagnostic = "branch limit reached";
            result.branches.push_back(std::move(nb));
          } else {
            queue.push_back(std::move(nb));
          }
        } else {
          result.branches.push_back(std::move(nb));
        }
      }
    }
    return result;
  }

 private:
  SimOptions opt_;
  ProgramPool pool_;

  // ---- helpers ----

  [[nodiscard]] ValueFn limits_at(const Trajectory& traj, const Rational& t) const {
    return [&traj, t](const std::string& name, int order) -> std::optional<Polynomial> {
      if (auto v = traj.try_left_limit(name, order, t)) return Polynomial::constant(*v);
      return std::nullopt;
    };
  }

  [[nodiscard]] InstantQuery point_query(SimBranch& b, const Rational& t, SolveMode mode,
                                         SkolemContext* scratch) const {
    InstantQuery in;
    in.members_of = [&b, t](const std::string& m) -> const ConstraintSet* {
      if (!b.q.has_module(m)) return nullptr;
      return &b.q.of(m).at(t);
    };
    in.ongoing = [&b, t](const std::string& m, const ConstraintPtr& c) {
      const TimedConstraintSet& tcs = b.q.of(m);
      std::size_t idx = tcs.piece_index_of(t);
      if (!tcs.piece_is_point(idx)) return true;  // interior of an interval piece
      return idx > 0 && tcs.piece_set(idx - 1).contains(c);
    };
    in.limit = limits_at(b.traj, t);
    in.mode = mode;
    in.domain = ValueDomain::point;
    in.skolems = scratch;
    in.skolem_time = t;
    return in;
  }

  static void record_model_jet(SimBranch& b, const Rational& t, const InstantModel& m) {
    for (const auto& [key, poly] : m.values) {
      b.traj.declare(key.first, t);
      b.traj.set_point(key.first, t, key.second, poly.coeff(0));
    }
  }

  /// Fired conditionals commit in sorted (module, text) order so a replay
  /// from the trace reproduces the store byte for byte.
  [[nodiscard]] static std::vector<FiredRef> sorted_fired(const InstantModel& m) {
    std::vector<FiredRef> fs = m.fired;
    std::sort(fs.begin(), fs.end(), [](const FiredRef& a, const FiredRef& b) {
      if (a.module != b.module) return a.module < b.module;
      return compare(a.conditional, b.conditional) < 0;
    });
    return fs;
  }

  [[nodiscard]] std::vector<std::string> active_q_strings(const SimBranch& b,
                                                          const ModuleSet& adopted,
                                                          const Rational& t,
                                                          bool interval_piece) const {
    std::set<std::string> out;
    for (const auto& m : adopted) {
      const TimedConstraintSet& tcs = b.q.of(m);
      std::size_t idx = tcs.piece_index_of(t);
      if (interval_piece) idx += 1;
      for (const auto& c : tcs.piece_set(idx).items()) out.insert(to_string(c));
    }
    return {out.begin(), out.end()};
  }

  void finish(SimBranch& b, RunStatus s, std::string diag = "") const {
    b.status = s;
    if (!diag.empty()) b.diagnostic = std::move(diag);
  }

  // A chosen set passed the existence solve but yields no definite model.
  // When every firing pattern clashes with a value carried across the phase
  // start by a continuity default, nothing below the chosen set can help
  // either (defaults outrank the laws), so the run is a dead end. Otherwise
  // some pattern was undecidable and the honest verdict is underdetermined.
  void finish_model_failure(SimBranch& b, const SolveOutcome& mc, const std::string& where) const {
    if (mc.status == Feasibility::unsupported) {
      finish(b, RunStatus::unsupported, where + mc.diagnostic);
      return;
    }
    if (mc.status == Feasibility::inconsistent && mc.anchor_involved) {
      finish(b, RunStatus::no_solution, where + mc.diagnostic);
      return;
    }
    const std::string& diag =
        (mc.status == Feasibility::inconsistent && !mc.under_diag.empty()) ? mc.under_diag
                                                                           : mc.diagnostic;
    finish(b, RunStatus::underdetermined, where + diag);
  }

  // ---- stepping ----

  [[nodiscard]] std::vector<SimBranch> step(SimBranch& b, SimResult& result) const {
    if (b.status != RunStatus::running) return pack(std::move(b));
    if (static_cast<int>(b.phases.size()) >= opt_.max_phases) {
      finish(b, RunStatus::phase_limit, "phase limit reached before the horizon");
      return pack(std::move(b));
    }
    if (!b.at_point) return interval_step(std::move(b));
    return point_step(std::move(b));
  }

  [[nodiscard]] static std::vector<SimBranch> pack(SimBranch&& b) {
    std::vector<SimBranch> v;
    v.push_back(std::move(b));
    return v;
  }

  [[nodiscard]] std::vector<SimBranch> point_step(SimBranch b) const {
    const Rational t = b.now;
    b.q.add_breakpoint_everywhere(t);

    // Exploration names fresh variables in a scratch context; only committed
    // expansions advance the persistent one.
    SkolemContext scratch = b.q.skolem_context();
    std::map<std::size_t, SolveOutcome> cache;
    auto outcome_of = [&](std::size_t i, SolveMode mode) -> SolveOutcome& {
      auto key = i * 2 + (mode == SolveMode::model ? 1 : 0);
      auto it = cache.find(key);
      if (it != cache.end()) return it->second;
      InstantQuery in = point_query(b, t, mode, &scratch);
      return cache.emplace(key, solve_instant(pool_.poset.elements[i], in)).first->second;
    };

    Adoption adoption = find_maximal_consistent(pool_.poset, [&](std::size_t i) {
      const SolveOutcome& oc = outcome_of(i, SolveMode::existence);
      return ElementOutcome{oc.status, oc.diagnostic, oc.anchor_involved};
    });

    std::vector<std::pair<std::size_t, InstantModel>> options;
    for (std::size_t i : adoption.chosen) {
      SolveOutcome& mc = outcome_of(i, SolveMode::model);
      if (mc.status != Feasibility::consistent) {
        finish_model_failure(b, mc, "at t = " + to_string(t) + ": ");
        return pack(std::move(b));
      }
      for (auto& m : mc.models) options.emplace_back(i, m);
    }
    if (options.empty()) {
      DeadEnd de = classify_dead_end(pool_.poset, adoption);
      RunStatus s = de.status == Feasibility::inconsistent  ? RunStatus::no_solution
                    : de.status == Feasibility::unsupported ? RunStatus::unsupported
                                                            : RunStatus::underdetermined;
      finish(b, s, "at t = " + to_string(t) + ": " + de.diagnostic);
      return pack(std::move(b));
    }

    std::vector<SimBranch> out;
    for (std::size_t k = 0; k < options.size(); ++k) {
      SimBranch nb = (k + 1 == options.size()) ? std::move(b) : b;
      commit_point(nb, t, pool_.poset.elements[options[k].first], options[k].second);
      out.push_back(std::move(nb));
    }
    return out;
  }

  // The store grows from the trajectory alone: once the phase's values are
  // committed, any guard they entail fires in its module's store, adopted or
  // not. Returns a message when some guard cannot be decided.
  [[nodiscard]] std::optional<std::string> fire_remaining(
      SimBranch& b, Phase& ph, const Rational& t, bool on_interval,
      const std::function<Entail(const std::vector<Atomic>&)>& entailed) const {
    std::set<std::pair<std::string, std::string>> done;
    for (const QAddRecord& r : ph.fired) done.insert({r.module, r.constraint});
    for (;;) {
      std::vector<std::pair<std::string, ConstraintPtr>> round;
      for (const auto& [mod, tcs] : b.q.all()) {
        std::size_t idx = tcs.piece_index_of(t) + (on_interval ? 1 : 0);
        for (const ConstraintPtr& c : tcs.piece_set(idx).items()) {
          if (c->kind != Constraint::Kind::conditional) continue;
          if (done.count({mod, to_string(c)})) continue;
          Entail e = entailed(c->guard);
          if (e == Entail::unknown)
            return "the guard of " + to_string(c) + " in Q(" + mod +
                   ") cannot be decided from the committed values";
          if (e == Entail::yes) round.emplace_back(mod, c);
        }
      }
      if (round.empty()) return std::nullopt;
      std::sort(round.begin(), round.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first < y.first;
        return compare(x.second, y.second) < 0;
      });
      for (auto& [mod, c] : round) {
        std::string text = to_string(c);
        done.insert({mod, text});
        ph.fired.push_back({mod, text});
        auto added = on_interval ? b.q.expand_on_interval(mod, c->body, t)
                                 : b.q.expand_consequent(mod, c->body, t);
        for (const ConstraintPtr& a : added) ph.q_additions.push_back({mod, to_string(a)});
      }
    }
  }

  void commit_point(SimBranch& b, const Rational& t, const ModuleSet& element,
                    const InstantModel& model) const {
    record_model_jet(b, t, model);

    Phase ph;
    ph.kind = Phase::Kind::point;
    ph.start = ph.end = t;
    ph.adopted = element;
    for (const auto& [key, poly] : model.values) ph.jet[key.first][key.second] = poly.coeff(0);

    for (const FiredRef& f : sorted_fired(model)) {
      ph.fired.push_back({f.module, to_string(f.conditional)});
      for (const ConstraintPtr& added :
           b.q.expand_consequent(f.module, f.conditional->body, t))
        ph.q_additions.push_back({f.module, to_string(added)});
    }

    LinEnv env;
    env.value = [&b, t](const std::string& n, int o) -> std::optional<Polynomial> {
      if (auto v = b.traj.try_value(n, o, t)) return Polynomial::constant(*v);
      return std::nullopt;
    };
    env.limit = [&b, t](const std::string& n, int o) -> std::optional<Polynomial> {
      if (auto v = b.traj.try_left_limit(n, o, t)) return Polynomial::constant(*v);
      return std::nullopt;
    };
    if (auto err = fire_remaining(b, ph, t, false, [&](const std::vector<Atomic>& g) {
          return guard_entailed(g, env, ValueDomain::point);
        })) {
      finish(b, RunStatus::underdetermined, "at t = " + to_string(t) + ": " + *err);
      return;
    }

    ph.q_active = active_q_strings(b, element, t, false);
    b.phases.push_back(std::move(ph));
    b.point_times.push_back(t);
    b.at_point = false;

    check_zeno(b, t);
  }

  void check_zeno(SimBranch& b, const Rational& t) const {
    if (b.status != RunStatus::running) return;
    int w = opt_.zeno_window;
    if (w < 2) return;
    if (static_cast<int>(b.point_times.size()) < w + 1) return;
    std::vector<Rational> gaps;
    for (std::size_t i = b.point_times.size() - static_cast<std::size_t>(w) - 1;
         i + 1 < b.point_times.size(); ++i)
      gaps.push_back(b.point_times[i + 1] - b.point_times[i]);
    std::vector<Rational> ratios;
    for (std::size_t i = 0; i + 1 < gaps.size(); ++i) ratios.push_back(gaps[i + 1] / gaps[i]);
    Rational r = ratios.back();
    if (!(r > 0 && r < 1)) return;
    for (const Rational& ri : ratios)
      if (rat_abs(ri - r) > opt_.zeno_ratio_tol) return;

    Rational accumulation = t + gaps.back() * r / (Rational(1) - r);
    if (accumulation > opt_.horizon) return;  // the cascade completes past the horizon

    ZenoInfo info;
    info.accumulation = accumulation;
    info.ratio = r;
    info.window_points.assign(b.point_times.end() - w - 1, b.point_times.end());
    b.zeno = info;

    if (!opt_.post_zeno) {
      finish(b, RunStatus::zeno_detected,
             "accumulation of point phases at t = " + to_string(accumulation));
      return;
    }
    resume_after_zeno(b, info);
  }

  void resume_after_zeno(SimBranch& b, const ZenoInfo& info) const {
    // Exact limits of the cascade: per variable and order, Aitken Δ² over the
    // window's jets, validated on every overlapping triple.
    const Rational& tbar = info.accumulation;
    std::map<std::string, Jet> limits;
    for (const auto& [var, track] : b.traj.tracks()) {
      std::vector<const Jet*> jets;
      for (const Rational& pt : info.window_points) {
        auto it = track.points.find(pt);
        if (it == track.points.end()) break;
        jets.push_back(&it->second);
      }
      if (jets.size() != info.window_points.size()) continue;
      std::set<int> orders;
      for (const auto& [o, _] : *jets.front()) orders.insert(o);
      for (int o : orders) {
        std::vector<Rational> series;
        bool complete = true;
        for (const Jet* j : jets) {
          auto it = j->find(o);
          if (it == j->end()) {
            complete = false;
            break;
          }
          series.push_back(it->second);
        }
        if (!complete) continue;
        bool constant = true;
        for (const Rational& v : series) constant &= v == series.front();
        if (constant) {
          limits[var][o] = series.front();
          continue;
        }
        std::optional<Rational> limit;
        bool ok = true;
        for (std::size_t i = 0; i + 2 < series.size() && ok; ++i) {
          Rational a = series[i], m = series[i + 1], c = series[i + 2];
          Rational denom = c - m * 2 + a;
          if (denom == 0) {
            ok = false;
            break;
          }
          Rational l = a - (m - a) * (m - a) / denom;
          if (limit && *limit != l) ok = false;
          else limit = l;
        }
        if (ok && limit) limits[var][o] = *limit;
        // A non-convergent component simply leaves no left limit at t̄.
      }
    }

    Phase gap;
    gap.kind = Phase::Kind::zeno_gap;
    gap.start = b.point_times.back();
    gap.end = tbar;
    gap.jet = limits;  // the extrapolated left limits at the accumulation point
    b.phases.push_back(std::move(gap));

    for (const auto& [var, jet] : limits)
      for (const auto& [o, v] : jet) b.traj.set_left_limit(var, tbar, o, v);

    b.now = tbar;
    b.at_point = true;
    b.point_times.clear();
  }

  // ---- interval phases ----

  [[nodiscard]] std::vector<SimBranch> interval_step(SimBranch b) const {
    const Rational t0 = b.now;
    if (!(t0 < opt_.horizon)) {
      finish(b, RunStatus::horizon_reached);
      return pack(std::move(b));
    }

    // Right continuity holds only for trajectories described by differential
    // constraints; a variable without a derivative occurrence in the active
    // store (a pulse) may jump freely at the phase start.
    std::set<std::string> differentiable;
    for (const auto& [mod, tcs] : b.q.all()) {
      for (const ConstraintPtr& c : tcs.piece_set(tcs.piece_index_of(t0) + 1).items()) {
        std::set<VarOcc> occs;
        collect_occurrences(c, occs);
        for (const auto& o : occs)
          if (o.order >= 1) differentiable.insert(o.name);
      }
    }
    std::map<std::string, Jet> anchors;
    for (const auto& [var, track] : b.traj.tracks()) {
      if (!differentiable.count(var)) continue;
      auto it = track.points.find(t0);
      if (it != track.points.end()) anchors[var] = it->second;
    }

    auto members_of = [&b, t0](const std::string& m) -> const ConstraintSet* {
      if (!b.q.has_module(m)) return nullptr;
      const TimedConstraintSet& tcs = b.q.of(m);
      return &tcs.piece_set(tcs.piece_index_of(t0) + 1);
    };

    SkolemContext scratch = b.q.skolem_context();
    std::map<std::size_t, SolveOutcome> cache;
    auto outcome_of = [&](std::size_t i, SolveMode mode) -> SolveOutcome& {
      auto key = i * 2 + (mode == SolveMode::model ? 1 : 0);
      auto it = cache.find(key);
      if (it != cache.end()) return it->second;
      IntervalQuery in;
      in.members_of = members_of;
      in.anchors = &anchors;
      in.no_anchor = &opt_.no_cont;
      in.mode = mode;
      in.skolems = &scratch;
      in.skolem_time = t0;
      return cache.emplace(key, solve_interval(pool_.poset.elements[i], in)).first->second;
    };

    Adoption adoption = find_maximal_consistent(pool_.poset, [&](std::size_t i) {
      const SolveOutcome& oc = outcome_of(i, SolveMode::existence);
      return ElementOutcome{oc.status, oc.diagnostic, oc.anchor_involved};
    });

    std::vector<std::pair<std::size_t, InstantModel>> options;
    for (std::size_t i : adoption.chosen) {
      SolveOutcome& mc = outcome_of(i, SolveMode::model);
      if (mc.status != Feasibility::consistent) {
        finish_model_failure(b, mc, "on (" + to_string(t0) + ", …): ");
        return pack(std::move(b));
      }
      for (auto& m : mc.models) options.emplace_back(i, m);
    }
    if (options.empty()) {
      DeadEnd de = classify_dead_end(pool_.poset, adoption);
      RunStatus s = de.status == Feasibility::inconsistent  ? RunStatus::no_solution
                    : de.status == Feasibility::unsupported ? RunStatus::unsupported
                                                            : RunStatus::underdetermined;
      finish(b, s, "on (" + to_string(t0) + ", …): " + de.diagnostic);
      return pack(std::move(b));
    }

    std::vector<SimBranch> out;
    for (std::size_t k = 0; k < options.size(); ++k) {
      SimBranch nb = (k + 1 == options.size()) ? std::move(b) : b;
      commit_interval(nb, t0, options[k].first, options[k].second, anchors);
      out.push_back(std::move(nb));
    }
    return out;
  }

  void commit_interval(SimBranch& b, const Rational& t0, std::size_t element_idx,
                       const InstantModel& model, const std::map<std::string, Jet>& anchors) const {
    const ModuleSet& element = pool_.poset.elements[element_idx];

    // Variables first seen in this phase (witnesses fired on the interval)
    // are born here; declare them before the coverage scan below.
    for (const auto& [key, poly] : model.values) b.traj.declare(key.first, t0);

    // Coverage: every living variable needs an order-0 polynomial.
    ValueFn lookup = [&model](const std::string& name, int order) -> std::optional<Polynomial> {
      if (auto it = model.values.find({name, order}); it != model.values.end())
        return it->second;
      for (int j = order - 1; j >= 0; --j)
        if (auto jt = model.values.find({name, j}); jt != model.values.end()) {
          Polynomial p = jt->second;
          for (int k = j; k < order; ++k) p = p.derivative();
          return p;
        }
      return std::nullopt;
    };
    for (const auto& [var, track] : b.traj.tracks()) {
      if (track.birth > t0) continue;
      auto p = lookup(var, 0);
      if (!p) {
        finish(b, RunStatus::underdetermined,
               "on (" + to_string(t0) + ", …): no law fixes " + var);
        return;
      }
      if (p->degree() > kMaxPolyDegree) {
        finish(b, RunStatus::unsupported,
               "degree of " + var + " exceeds " + std::to_string(kMaxPolyDegree));
        return;
      }
    }

    PhaseEnd end = phase_end(b, t0, element_idx, model, lookup);
    if (end.unsupported) {
      finish(b, RunStatus::unsupported, end.diagnostic);
      return;
    }
    if (end.immediate_competitor) {
      finish(b, RunStatus::no_solution, end.diagnostic);
      return;
    }
    const Rational te = end.te;

    b.q.add_breakpoint_everywhere(te);
    Phase ph;
    ph.kind = Phase::Kind::interval;
    ph.start = t0;
    ph.end = te;
    ph.adopted = element;
    for (const FiredRef& f : sorted_fired(model)) {
      ph.fired.push_back({f.module, to_string(f.conditional)});
      for (const ConstraintPtr& added :
           b.q.expand_on_interval(f.module, f.conditional->body, t0))
        ph.q_additions.push_back({f.module, to_string(added)});
    }

    // Guard truth is constant on (t0, te): phase_end already split at the
    // first flip of every decidable guard atom.
    const Rational len = te - t0;
    LinEnv ienv;
    ienv.value = lookup;
    ienv.limit = lookup;
    auto atom_throughout = [&](const Atomic& raw) -> Entail {
      Atomic a = strip_limits(raw);
      LinForm lf = lin_of_atomic(a, ienv);
      if (lf.nonlinear || !lf.coeff.empty()) return Entail::unknown;
      bool at_start = rel_truth(rel_kind(a.op), sign_just_after(lf.constant, Rational(0)));
      if (auto ev = earliest_sign_change(lf.constant, rel_kind(a.op), Rational(0)))
        if (ev->exact ? ev->time < len : ev->lo < len) return Entail::unknown;
      return at_start ? Entail::yes : Entail::no;
    };
    if (auto err = fire_remaining(b, ph, t0, true, [&](const std::vector<Atomic>& g) {
          for (const Atomic& a : g) {
            Entail e = atom_throughout(a);
            if (e != Entail::yes) return e;
          }
          return Entail::yes;
        })) {
      finish(b, RunStatus::underdetermined, "on (" + to_string(t0) + ", …): " + *err);
      return;
    }

    for (const auto& [var, track] : b.traj.tracks()) {
      if (track.birth > t0) continue;
      Polynomial p = *lookup(var, 0);
      ph.polys[var] = p;
      b.traj.add_segment(var, t0, te, p);
    }
    ph.q_active = active_q_strings(b, element, t0, true);
    b.phases.push_back(std::move(ph));

    b.now = te;
    b.at_point = true;
    if (te == opt_.horizon) finish(b, RunStatus::horizon_reached);
  }

  // ---- phase-end events ----

  struct PhaseEnd {
    Rational te;
    std::string cause;
    bool unsupported = false;
    bool immediate_competitor = false;
    std::string diagnostic;
  };

  [[nodiscard]] PhaseEnd phase_end(SimBranch& b, const Rational& t0, std::size_t element_idx,
                                   const InstantModel& model, const ValueFn& lookup) const {
    PhaseEnd out;
    out.te = opt_.horizon;
    out.cause = "horizon";

    LinEnv env;
    env.value = lookup;
    env.limit = lookup;  // inside the open interval the left limit is the value

    auto consider_atom = [&](const Atomic& raw) {
      Atomic a = strip_limits(raw);
      LinForm lf = lin_of_atomic(a, env);
      if (lf.nonlinear || !lf.coeff.empty() || lf.vacuous) return;  // undecidable: skip
      auto ev = earliest_sign_change(lf.constant, rel_kind(a.op), Rational(0));
      if (!ev) return;
      if (!ev->exact) {
        if (t0 + ev->lo < out.te) {
          out.unsupported = true;
          out.diagnostic = "a truth change of '" + to_string(a) +
                           "' occurs at an irrational time near t = " +
                           to_string(t0 + ev->time);
        }
        return;
      }
      Rational when = t0 + ev->time;
      if (when < out.te) {
        out.te = when;
        out.cause = "truth change of " + to_string(raw);
      }
    };

    for (const auto& [mod, _] : pool_.defs) {
      const TimedConstraintSet& tcs = b.q.of(mod);
      const ConstraintSet& piece = tcs.piece_set(tcs.piece_index_of(t0) + 1);
      for (const ConstraintPtr& c : piece.items()) {
        if (c->kind == Constraint::Kind::atomic) consider_atom(c->atom);
        std::vector<Atomic> guards;
        detail::collect_guards(c, guards);
        for (const Atomic& g : guards) consider_atom(g);
      }
    }
    for (const FiredRef& f : model.fired) {
      std::vector<ConstraintPtr> queue{f.conditional->body};
      while (!queue.empty()) {
        ConstraintPtr c = queue.back();
        queue.pop_back();
        switch (c->kind) {
          case Constraint::Kind::atomic: consider_atom(c->atom); break;
          case Constraint::Kind::conjunction:
            for (const auto& m : c->members) queue.push_back(m);
            break;
          case Constraint::Kind::always:
          case Constraint::Kind::exists: queue.push_back(c->body); break;
          case Constraint::Kind::conditional: {
            std::vector<Atomic> gs;
            detail::collect_guards(c, gs);
            for (const Atomic& g : gs) consider_atom(g);
            break;
          }
        }
      }
    }

    auto members_of = [&b, t0](const std::string& m) -> const ConstraintSet* {
      if (!b.q.has_module(m)) return nullptr;
      const TimedConstraintSet& tcs = b.q.of(m);
      return &tcs.piece_set(tcs.piece_index_of(t0) + 1);
    };
    CompetitorScan scan = scan_competitors(pool_.poset, element_idx, members_of, lookup,
                                           t0, out.te, b.q.skolem_context());
    if (scan.unsupported) {
      out.unsupported = true;
      out.diagnostic = scan.diagnostic;
    } else if (scan.immediate) {
      out.immediate_competitor = true;
      out.diagnostic = scan.diagnostic;
    } else if (scan.earliest) {
      out.te = *scan.earliest;
      out.cause = "module set " + scan.element + " becomes satisfiable";
    }
    return out;
  }
};

inline SimResult simulate(const ParsedProgram& program, const SimOptions& opt) {
  Simulator sim(program, opt);
  return sim.run();
}

}  // namespace hydla