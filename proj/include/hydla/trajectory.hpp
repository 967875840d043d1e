#pragma once

// ── Piecewise-polynomial trajectories ────────────────────────────────────────
// A variable's track alternates stored jets at instants with polynomial
// segments on the open intervals between them.  Values at an instant are
// exactly the stored jet (structural right-continuity is the simulator's
// job, not assumed here); left limits come from the closing segment, or from
// explicit overrides recorded when an unmodeled gap precedes the instant.

#include <hydla/polynomial.hpp>
#include <hydla/rational.hpp>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hydla {

struct EvalException : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Jet = std::map<int, Rational>;  // differential order → value

struct Segment {
  Rational start;
  Rational end;      // start < end; open interval (start, end)
  Polynomial poly;   // in local time τ = t − start

  [[nodiscard]] Rational value_at(const Rational& t, int order) const {
    Polynomial p = poly;
    for (int k = 0; k < order; ++k) p = p.derivative();
    return p.eval(t - start);
  }
};

struct VarTrack {
  Rational birth;                       // earliest instant the variable exists
  std::map<Rational, Jet> points;       // jets at instants
  std::vector<Segment> segments;        // sorted, disjoint open intervals
  std::map<Rational, Jet> left_limits;  // overrides where no segment closes at t
};

class Trajectory {
 public:
  void declare(const std::string& name, const Rational& birth) {
    auto [it, inserted] = vars_.try_emplace(name);
    if (inserted || birth < it->second.birth) it->second.birth = birth;
  }

  void set_point(const std::string& name, const Rational& t, int order, const Rational& v) {
    vars_[name].points[t][order] = v;
  }

  void set_left_limit(const std::string& name, const Rational& t, int order,
                      const Rational& v) {
    vars_[name].left_limits[t][order] = v;
  }

  void add_segment(const std::string& name, const Rational& start, const Rational& end,
                   Polynomial poly) {
    auto& tr = vars_[name];
    if (!(start < end)) throw std::invalid_argument("empty trajectory segment");
    if (!tr.segments.empty() && start < tr.segments.back().end)
      throw std::invalid_argument("overlapping trajectory segments");
    tr.segments.push_back({start, end, std::move(poly)});
  }

  [[nodiscard]] bool has_variable(const std::string& name) const {
    return vars_.count(name) != 0;
  }
  [[nodiscard]] const std::map<std::string, VarTrack>& tracks() const { return vars_; }

  /// Segment whose open interval contains t, if any.
  [[nodiscard]] const Segment* segment_containing(const std::string& name,
                                                  const Rational& t) const {
    const VarTrack* tr = find(name);
    if (!tr) return nullptr;
    for (const auto& s : tr->segments)
      if (s.start < t && t < s.end) return &s;
    return nullptr;
  }

  /// Segment closing exactly at t (end == t), if any.
  [[nodiscard]] const Segment* segment_ending_at(const std::string& name,
                                                 const Rational& t) const {
    const VarTrack* tr = find(name);
    if (!tr) return nullptr;
    for (const auto& s : tr->segments)
      if (s.end == t) return &s;
    return nullptr;
  }

  /// x^(order)(t), or nullopt when the trajectory defines no such value.
  [[nodiscard]] std::optional<Rational> try_value(const std::string& name, int order,
                                                  const Rational& t) const {
    const VarTrack* tr = find(name);
    if (!tr || t < tr->birth) return std::nullopt;
    if (auto it = tr->points.find(t); it != tr->points.end()) {
      if (auto jt = it->second.find(order); jt != it->second.end()) return jt->second;
      return std::nullopt;
    }
    if (const Segment* s = segment_containing(name, t)) return s->value_at(t, order);
    return std::nullopt;
  }

  /// lim_{s→t⁻} x^(order)(s), or nullopt when t ≤ birth or no data closes at t.
  [[nodiscard]] std::optional<Rational> try_left_limit(const std::string& name, int order,
                                                       const Rational& t) const {
    const VarTrack* tr = find(name);
    if (!tr || !(t > tr->birth)) return std::nullopt;
    if (auto it = tr->left_limits.find(t); it != tr->left_limits.end()) {
      if (auto jt = it->second.find(order); jt != it->second.end()) return jt->second;
      return std::nullopt;
    }
    if (const Segment* s = segment_containing(name, t)) return s->value_at(t, order);
    if (const Segment* s = segment_ending_at(name, t)) return s->value_at(t, order);
    return std::nullopt;
  }

  [[nodiscard]] Rational eval(const std::string& name, int order, const Rational& t) const {
    if (auto v = try_value(name, order, t)) return *v;
    const VarTrack* tr = find(name);
    if (!tr || t < tr->birth)
      throw EvalException("variable " + name + " is undefined at t = " + to_string(t));
    throw EvalException(name + deriv_suffix(order) + " is not differentiable here (t = " +
                        to_string(t) + "): no stored value at a discontinuity");
  }

  [[nodiscard]] Rational left_limit(const std::string& name, int order,
                                    const Rational& t) const {
    const VarTrack* tr = find(name);
    if (tr && !(t > tr->birth))
      throw EvalException("left limit of " + name + " does not exist at t = " + to_string(t) +
                          ": nothing precedes this instant");
    if (auto v = try_left_limit(name, order, t)) return *v;
    throw EvalException("left limit of " + name + deriv_suffix(order) + " at t = " +
                        to_string(t) + " is not defined");
  }

 private:
  std::map<std::string, VarTrack> vars_;

  [[nodiscard]] const VarTrack* find(const std::string& name) const {
    auto it = vars_.find(name);
    return it == vars_.end() ? nullptr : &it->second;
  }

  static std::string deriv_suffix(int order) {
    return order > 0 ? "'(order " + std::to_string(order) + ")" : "";
  }
};

}  // namespace hydla
