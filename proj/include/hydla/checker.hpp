#pragma once

// ── Certificate checking ─────────────────────────────────────────────────────
// Verifies that a trace document denotes a valid model of the program: the
// trajectory is rebuilt from the recorded jets and polynomials, the constraint
// store is replayed from the program text (never trusted from the trace), and
// the declarative conditions are checked piece by piece:
//
//   (s1) every atomic member of Q(M) holds on its piece, for adopted M;
//   (s2) no strictly greater module set is pointwise satisfiable anywhere,
//        against left limits frozen from the recorded trajectory;
//   (s3) a guard entailed by the trajectory has its consequent in the store —
//        replay fires exactly the entailed conditionals, and the recorded
//        firings and store additions must match the replay exactly;
//   (iv) the store is least: it is rebuilt constructively, so equality with
//        the recorded additions pins the certificate to the minimal store.
//
// Runs that end in a failure status (no_solution, underdetermined,
// unsupported, phase_limit) are verified as prefixes; the terminal failure
// itself is not re-derived.  A Zeno gap is structural: the cascade inside it
// is not verified, and the extrapolated limits are taken as given.

#include <hydla/simulator.hpp>
#include <hydla/trace_io.hpp>

#include <map>
#include <set>
#include <string>
#include <vector>

namespace hydla {

struct CheckReport {
  bool accepted = false;
  std::string rejection;           // first violated condition, with location
  std::vector<std::string> notes;  // aspects taken on faith, per-branch statuses
};

class Checker {
 public:
  Checker(const ParsedProgram& program, const TraceDocument& doc)
      : program_(program), doc_(doc) {}

  [[nodiscard]] CheckReport run() {
    CheckReport rep;
    try {
      check_document();
      rep.accepted = true;
    } catch (const Reject& r) {
      rep.rejection = r.what();
    }
    rep.notes = notes_;
    return rep;
  }

 private:
  struct Reject : std::runtime_error {
    using std::runtime_error::runtime_error;
  };
  [[noreturn]] static void reject(const std::string& msg) { throw Reject(msg); }

  const ParsedProgram& program_;
  const TraceDocument& doc_;
  ProgramPool pool_;
  std::vector<std::string> notes_;

  std::string where_;  // "branch B, phase P (t = …)" for messages

  [[noreturn]] void fail(const std::string& msg) const { reject(where_ + ": " + msg); }

  void check_document() {
    if (std::string h = program_hash(program_); h != doc_.hash)
      reject("program hash mismatch: certificate was produced for " + doc_.hash +
             ", this program hashes to " + h);

    SimOptions opt;
    opt.horizon = doc_.options.until;
    opt.no_cont = std::set<std::string>(doc_.options.no_cont.begin(),
                                        doc_.options.no_cont.end());
    opt.explicit_poset = doc_.options.explicit_poset;
    pool_ = build_pool(program_, opt);

    if (doc_.branches.empty()) reject("certificate has no branches");
    for (const TraceBranch& b : doc_.branches) check_branch(b);
  }

  // ---- structure ----

  void check_structure(const TraceBranch& b) const {
    if (b.phases.empty()) reject("branch " + std::to_string(b.id) + " has no phases");
    const TracePhase& first = b.phases.front();
    if (first.kind != "point" || first.start != 0)
      reject("branch " + std::to_string(b.id) + " must begin with a point phase at t = 0");
    static const std::set<std::string> statuses{
        "horizon_reached", "zeno_detected", "no_solution",
        "underdetermined", "unsupported",   "phase_limit"};
    if (!statuses.count(b.status))
      reject("branch " + std::to_string(b.id) + " has unknown status '" + b.status + "'");

    Rational cursor = 0;
    std::string prev = "";
    for (std::size_t i = 0; i < b.phases.size(); ++i) {
      const TracePhase& p = b.phases[i];
      std::string at = "branch " + std::to_string(b.id) + ", phase " + std::to_string(i);
      if (p.kind == "point") {
        if (p.start != p.end) reject(at + ": a point phase must have a single time");
        if (i > 0 && prev == "point") reject(at + ": two adjacent point phases");
        if (i > 0 && p.start != cursor) reject(at + ": phases are not contiguous");
      } else if (p.kind == "interval") {
        if (prev != "point") reject(at + ": an interval phase must follow a point phase");
        if (p.start != cursor) reject(at + ": phases are not contiguous");
        if (!(p.end > p.start)) reject(at + ": empty interval phase");
      } else if (p.kind == "zeno_gap") {
        if (prev != "point") reject(at + ": a Zeno gap must follow a point phase");
        if (p.start != cursor) reject(at + ": phases are not contiguous");
        if (!(p.end > p.start)) reject(at + ": empty Zeno gap");
        if (!b.zeno) reject(at + ": Zeno gap without Zeno detection data");
        if (b.zeno->accumulation != p.end)
          reject(at + ": Zeno gap must end at the accumulation point");
      } else {
        reject(at + ": unknown phase kind");
      }
      cursor = p.end;
      prev = p.kind;
    }

    if (b.status == "horizon_reached") {
      const TracePhase& last = b.phases.back();
      if (last.kind != "interval" || last.end != doc_.options.until)
        reject("branch " + std::to_string(b.id) +
               ": horizon_reached requires the final interval to end at the horizon");
    }
    if (b.status == "zeno_detected" && !b.zeno)
      reject("branch " + std::to_string(b.id) + ": zeno_detected without Zeno data");
  }

  // ---- trajectory reconstruction ----

  [[nodiscard]] Trajectory build_trajectory(const TraceBranch& b) const {
    Trajectory traj;
    for (const std::string& v : pool_.program_vars) traj.declare(v, Rational(0));
    for (std::size_t i = 0; i < b.phases.size(); ++i) {
      const TracePhase& p = b.phases[i];
      std::string at = "branch " + std::to_string(b.id) + ", phase " + std::to_string(i);
      try {
        if (p.kind == "point") {
          for (const auto& [var, orders] : p.jet) {
            traj.declare(var, p.start);
            for (const auto& [o, v] : orders) traj.set_point(var, p.start, o, v);
          }
        } else if (p.kind == "interval") {
          for (const auto& [var, coeffs] : p.polys) {
            Polynomial poly(coeffs);
            if (poly.degree() > kMaxPolyDegree) reject(at + ": polynomial degree too high");
            traj.declare(var, p.start);
            traj.add_segment(var, p.start, p.end, poly);
          }
        } else {  // zeno_gap: extrapolated left limits at the accumulation point
          for (const auto& [var, orders] : p.jet) {
            if (!traj.has_variable(var)) reject(at + ": unknown variable " + var);
            for (const auto& [o, v] : orders) traj.set_left_limit(var, p.end, o, v);
          }
        }
      } catch (const std::invalid_argument& e) {
        reject(at + ": " + e.what());
      }
    }
    return traj;
  }

  // ---- branch verification ----

  void check_branch(const TraceBranch& b) {
    check_structure(b);
    Trajectory traj = build_trajectory(b);
    QStore q(pool_.defs);

    for (std::size_t i = 0; i < b.phases.size(); ++i) {
      const TracePhase& p = b.phases[i];
      where_ = "branch " + std::to_string(b.id) + ", phase " + std::to_string(i) +
               (p.kind == "point" ? " (point t = " + to_string(p.start) + ")"
                                  : " (" + p.kind + " " + to_string(p.start) + " .. " +
                                        to_string(p.end) + ")");
      if (p.kind == "point") {
        check_point_phase(p, q, traj);
      } else if (p.kind == "interval") {
        if (i > 0 && b.phases[i - 1].kind == "point")
          check_jet_segment_coherence(b.phases[i - 1], p);
        check_interval_phase(p, q, traj);
      } else {
        notes_.push_back(where_ + ": cascade inside the gap is not verified");
      }
    }

    if (b.status != "horizon_reached" && b.status != "zeno_detected")
      notes_.push_back("branch " + std::to_string(b.id) + ": status " + b.status +
                       " — the terminal failure is taken as given; the prefix verifies");
    if (b.status == "zeno_detected")
      notes_.push_back("branch " + std::to_string(b.id) +
                       ": cascade beyond the last point phase is not verified");
  }

  [[nodiscard]] std::size_t adopted_index(const TracePhase& p) const {
    ModuleSet s(p.adopted.begin(), p.adopted.end());
    int idx = pool_.poset.index_of(s);
    if (idx < 0) fail("adopted set " + to_string(s) + " is not an element of the poset");
    return static_cast<std::size_t>(idx);
  }

  struct FiredCandidate {
    std::string module;
    ConstraintPtr cond;
    std::string text;
  };

  void replay_and_compare(const TracePhase& p, QStore& q,
                          const std::function<Entail(const std::vector<Atomic>&)>& entailed,
                          bool on_interval, const Rational& t) {
    std::set<std::pair<std::string, std::string>> fired;
    std::vector<std::pair<std::string, std::string>> additions;
    for (;;) {
      std::vector<FiredCandidate> round;
      for (const auto& [mod, tcs] : q.all()) {
        std::size_t idx = tcs.piece_index_of(t) + (on_interval ? 1 : 0);
        for (const ConstraintPtr& c : tcs.piece_set(idx).items()) {
          if (c->kind != Constraint::Kind::conditional) continue;
          std::string text = to_string(c);
          if (fired.count({mod, text})) continue;
          Entail e = entailed(c->guard);
          if (e == Entail::unknown)
            fail("the guard of " + text + " in Q(" + mod +
                 ") cannot be decided from the trajectory");
          if (e == Entail::yes) round.push_back({mod, c, text});
        }
      }
      if (round.empty()) break;
      std::sort(round.begin(), round.end(), [](const FiredCandidate& a, const FiredCandidate& b) {
        return std::tie(a.module, a.text) < std::tie(b.module, b.text);
      });
      for (const FiredCandidate& f : round) {
        fired.insert({f.module, f.text});
        auto added = on_interval ? q.expand_on_interval(f.module, f.cond->body, t)
                                 : q.expand_consequent(f.module, f.cond->body, t);
        for (const ConstraintPtr& c : added) additions.emplace_back(f.module, to_string(c));
      }
    }

    std::set<std::pair<std::string, std::string>> cert_fired;
    for (const QAddRecord& r : p.fired) cert_fired.insert({r.module, r.constraint});
    if (cert_fired != fired) {
      for (const auto& [m, c] : fired)
        if (!cert_fired.count({m, c}))
          fail("(s3): the trajectory entails the guard of " + c + " in Q(" + m +
               ") but the certificate does not record it as fired");
      for (const auto& [m, c] : cert_fired)
        if (!fired.count({m, c}))
          fail("(s3): the certificate records " + c + " fired in Q(" + m +
               ") but its guard is not entailed by the trajectory");
    }

    std::vector<std::pair<std::string, std::string>> cert_adds;
    for (const QAddRecord& r : p.q_additions) cert_adds.emplace_back(r.module, r.constraint);
    std::sort(cert_adds.begin(), cert_adds.end());
    std::sort(additions.begin(), additions.end());
    if (cert_adds != additions)
      fail("(iv): recorded store additions do not match the replayed least store");
  }

  void compare_active(const TracePhase& p, const QStore& q, bool on_interval,
                      const Rational& t) const {
    std::set<std::string> active;
    for (const std::string& m : p.adopted) {
      const TimedConstraintSet& tcs = q.of(m);
      std::size_t idx = tcs.piece_index_of(t) + (on_interval ? 1 : 0);
      for (const ConstraintPtr& c : tcs.piece_set(idx).items()) active.insert(to_string(c));
    }
    std::vector<std::string> rebuilt(active.begin(), active.end());
    if (rebuilt != p.q_active)
      fail("the recorded active store does not match the replayed one");
  }

  // ---- point phases ----

  void check_point_phase(const TracePhase& p, QStore& q, const Trajectory& traj) {
    const Rational t = p.start;
    q.add_breakpoint_everywhere(t);
    std::size_t elem = adopted_index(p);

    LinEnv env;
    env.value = [&traj, t](const std::string& n, int o) -> std::optional<Polynomial> {
      if (auto v = traj.try_value(n, o, t)) return Polynomial::constant(*v);
      return std::nullopt;
    };
    env.limit = [&traj, t](const std::string& n, int o) -> std::optional<Polynomial> {
      if (auto v = traj.try_left_limit(n, o, t)) return Polynomial::constant(*v);
      return std::nullopt;
    };

    replay_and_compare(
        p, q,
        [&](const std::vector<Atomic>& guard) {
          return guard_entailed(guard, env, ValueDomain::point);
        },
        false, t);
    compare_active(p, q, false, t);

    // (s1): every atomic member of an adopted module holds at the instant.
    for (const std::string& m : p.adopted)
      for (const ConstraintPtr& c : q.of(m).at(t).items()) {
        if (c->kind == Constraint::Kind::exists)
          fail("unexpanded quantifier in the store");
        if (c->kind != Constraint::Kind::atomic) continue;
        LinForm lf = lin_of_atomic(c->atom, env);
        if (lf.vacuous) continue;  // undefined left limit: vacuously satisfied
        if (lf.nonlinear) fail("(s1): member " + to_string(c->atom) + " is nonlinear");
        if (!lf.coeff.empty())
          fail("(s1): member " + to_string(c->atom) +
               " mentions a value the certificate does not determine");
        if (!residual_true(ValueDomain::point, lf.constant, rel_kind(c->atom.op)))
          fail("(s1): member " + to_string(c->atom) + " of Q(" + m + ") is violated");
      }

    // (s2): no strictly greater element is satisfiable at the instant.
    for (int j : pool_.poset.strictly_above(static_cast<int>(elem))) {
      auto ej = static_cast<std::size_t>(j);
      InstantQuery in;
      in.members_of = [&q, t](const std::string& m) -> const ConstraintSet* {
        if (!q.has_module(m)) return nullptr;
        return &q.of(m).at(t);
      };
      in.ongoing = [&q, t](const std::string& m, const ConstraintPtr& c) {
        const TimedConstraintSet& tcs = q.of(m);
        std::size_t idx = tcs.piece_index_of(t);
        if (!tcs.piece_is_point(idx)) return true;
        return idx > 0 && tcs.piece_set(idx - 1).contains(c);
      };
      in.limit = env.limit;
      in.mode = SolveMode::existence;
      in.domain = ValueDomain::point;
      SkolemContext scratch = q.skolem_context();
      in.skolems = &scratch;
      in.skolem_time = t;
      SolveOutcome oc = solve_instant(pool_.poset.elements[ej], in);
      if (oc.status == Feasibility::consistent)
        fail("(s2): the strictly greater module set " + to_string(pool_.poset.elements[ej]) +
             " is satisfiable here");
      if (oc.status == Feasibility::unsupported)
        fail("(s2): satisfiability of " + to_string(pool_.poset.elements[ej]) +
             " cannot be decided: " + oc.diagnostic);
    }
  }

  // ---- interval phases ----

  // A jet at a phase-start point states the right jets of the trajectory:
  // where the variable continues into the following segment, the recorded
  // derivatives must be the segment's, or the two records describe different
  // functions.  A pulse (point value that jumps off immediately) carries no
  // derivative claim forward.
  void check_jet_segment_coherence(const TracePhase& pt, const TracePhase& iv) {
    for (const auto& [var, coeffs] : iv.polys) {
      auto jt = pt.jet.find(var);
      if (jt == pt.jet.end()) continue;
      const auto& orders = jt->second;
      auto v0 = orders.find(0);
      if (v0 == orders.end()) continue;
      Polynomial poly(coeffs);
      int maxo = 0;
      for (const auto& [o, v] : orders) maxo = std::max(maxo, o);
      if (v0->second != poly.eval(Rational(0))) {
        if (maxo >= 1)
          fail("(s1): " + var + " is recorded with derivatives at t = " +
               to_string(pt.start) +
               " but jumps entering this interval, so those derivatives name no "
               "value of the trajectory");
        continue;
      }
      Polynomial d = poly;
      for (int k = 1; k <= maxo; ++k) {
        d = d.derivative();
        auto vk = orders.find(k);
        if (vk == orders.end()) continue;
        if (vk->second != d.eval(Rational(0)))
          fail("(s1): the recorded " + var + std::string(static_cast<std::size_t>(k), '\'') +
               " = " + to_string(vk->second) + " at t = " + to_string(pt.start) +
               " does not continue into this interval, which starts with " + var +
               std::string(static_cast<std::size_t>(k), '\'') + " = " +
               to_string(d.eval(Rational(0))));
      }
    }
  }

  void check_interval_phase(const TracePhase& p, QStore& q, const Trajectory&) {
    const Rational t0 = p.start;
    const Rational te = p.end;
    const Rational len = te - t0;
    q.add_breakpoint_everywhere(t0);
    q.add_breakpoint_everywhere(te);
    std::size_t elem = adopted_index(p);

    ValueFn lookup = [&p](const std::string& n, int o) -> std::optional<Polynomial> {
      auto it = p.polys.find(n);
      if (it == p.polys.end()) return std::nullopt;
      Polynomial poly(it->second);
      for (int k = 0; k < o; ++k) poly = poly.derivative();
      return poly;
    };
    LinEnv env;
    env.value = lookup;
    env.limit = lookup;  // inside the open interval the left limit is the value

    // Truth of (atom) throughout (t0, te): the residual's truth must be
    // constant on the whole open interval.  `within` flags a change strictly
    // inside; an isolating interval that straddles the end cannot be decided.
    enum class Throughout { yes, no, unknown, changes };
    auto atom_throughout = [&](const Atomic& raw) {
      Atomic a = strip_limits(raw);
      LinForm lf = lin_of_atomic(a, env);
      if (lf.nonlinear) return Throughout::unknown;
      if (!lf.coeff.empty()) return Throughout::unknown;
      bool at_start = rel_truth(rel_kind(a.op), sign_just_after(lf.constant, Rational(0)));
      auto ev = earliest_sign_change(lf.constant, rel_kind(a.op), Rational(0));
      if (ev) {
        if (ev->exact ? ev->time < len : ev->lo < len) return Throughout::changes;
      }
      return at_start ? Throughout::yes : Throughout::no;
    };

    replay_and_compare(
        p, q,
        [&](const std::vector<Atomic>& guard) {
          bool all_yes = true;
          for (const Atomic& g : guard) {
            switch (atom_throughout(g)) {
              case Throughout::yes: break;
              case Throughout::no: return Entail::no;
              case Throughout::unknown: return Entail::unknown;
              case Throughout::changes:
                fail("the guard atom " + to_string(g) +
                     " changes truth inside the phase; the phase must split there");
            }
            (void)all_yes;
          }
          return Entail::yes;
        },
        true, t0);
    compare_active(p, q, true, t0);

    // (s1) throughout the open interval.
    for (const std::string& m : p.adopted) {
      const TimedConstraintSet& tcs = q.of(m);
      for (const ConstraintPtr& c : tcs.piece_set(tcs.piece_index_of(t0) + 1).items()) {
        if (c->kind == Constraint::Kind::exists) fail("unexpanded quantifier in the store");
        if (c->kind != Constraint::Kind::atomic) continue;
        switch (atom_throughout(c->atom)) {
          case Throughout::yes: break;
          case Throughout::no:
            fail("(s1): member " + to_string(c->atom) + " of Q(" + m +
                 ") is violated on the interval");
          case Throughout::unknown:
            fail("(s1): member " + to_string(c->atom) +
                 " cannot be decided from the recorded polynomials");
          case Throughout::changes:
            fail("(s1): member " + to_string(c->atom) +
                 " changes truth inside the phase; the phase must split there");
        }
      }
    }

    // (s2) throughout: no strictly greater element wakes up strictly inside.
    auto members_of = [&q, t0](const std::string& m) -> const ConstraintSet* {
      if (!q.has_module(m)) return nullptr;
      const TimedConstraintSet& tcs = q.of(m);
      return &tcs.piece_set(tcs.piece_index_of(t0) + 1);
    };
    CompetitorScan scan = scan_competitors(pool_.poset, elem, members_of, lookup, t0, te,
                                           q.skolem_context());
    if (scan.unsupported) fail("(s2): " + scan.diagnostic);
    if (scan.immediate) fail("(s2): " + scan.diagnostic);
    if (scan.earliest)
      fail("(s2): the strictly greater module set " + scan.element +
           " becomes satisfiable at t = " + to_string(*scan.earliest) +
           ", inside this phase");
  }
};

inline CheckReport check_certificate(const ParsedProgram& program, const TraceDocument& doc) {
  return Checker(program, doc).run();
}

}  // namespace hydla