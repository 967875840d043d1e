#pragma once

// ── Trace serialization ──────────────────────────────────────────────────────
// A run serializes to a canonical JSON document: rationals as {"n","d"} decimal
// strings with positive denominator, object keys sorted, arrays in fixed
// orders.  Serializing a parsed document reproduces the input byte for byte,
// which lets certificates be hashed and diffed reliably.  CSV output is a
// lossy decimal view for plotting.

#include <hydla/parser.hpp>
#include <hydla/poset.hpp>
#include <hydla/simulator.hpp>

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hydla {

using Json = nlohmann::json;

// ── Document model ───────────────────────────────────────────────────────────

struct TraceOptions {
  Rational until = Rational(10);
  int max_phases = 64;
  int branch_limit = 8;
  int zeno_window = 3;
  Rational zeno_ratio_tol = Rational(0);
  bool post_zeno = false;
  std::vector<std::string> no_cont;            // sorted
  std::optional<ModuleSetPoset> explicit_poset;
};

struct TraceZeno {
  Rational accumulation;
  Rational ratio;
  std::vector<Rational> window_points;
};

struct TracePhase {
  std::string kind;                            // "point" | "interval" | "zeno_gap"
  Rational start, end;                         // point: start == end == time
  std::vector<std::string> adopted;
  std::map<std::string, std::map<int, Rational>> jet;       // point
  std::map<std::string, std::vector<Rational>> polys;       // interval, ascending
  std::vector<QAddRecord> fired;
  std::vector<QAddRecord> q_additions;
  std::vector<std::string> q_active;
  std::string note;                            // zeno_gap
};

struct TraceBranch {
  int id = 0;
  std::string status;
  std::string diagnostic;
  std::optional<TraceZeno> zeno;
  std::vector<TracePhase> phases;
};

struct TraceDocument {
  int format_version = 1;
  std::string hash;                            // program hash, 16 hex digits
  TraceOptions options;
  bool branch_limit_hit = false;
  std::vector<TraceBranch> branches;
};

// ── Building a document from a run ───────────────────────────────────────────

inline TraceOptions trace_options(const SimOptions& o) {
  TraceOptions t;
  t.until = o.horizon;
  t.max_phases = o.max_phases;
  t.branch_limit = o.branch_limit;
  t.zeno_window = o.zeno_window;
  t.zeno_ratio_tol = o.zeno_ratio_tol;
  t.post_zeno = o.post_zeno;
  t.no_cont.assign(o.no_cont.begin(), o.no_cont.end());
  t.explicit_poset = o.explicit_poset;
  return t;
}

inline TraceDocument trace_from_result(const ParsedProgram& program, const SimOptions& opt,
                                       const SimResult& result) {
  TraceDocument doc;
  doc.hash = program_hash(program);
  doc.options = trace_options(opt);
  doc.branch_limit_hit = result.branch_limit_hit;
  for (std::size_t bi = 0; bi < result.branches.size(); ++bi) {
    const SimBranch& b = result.branches[bi];
    TraceBranch tb;
    tb.id = static_cast<int>(bi);
    tb.status = to_string(b.status);
    tb.diagnostic = b.diagnostic;
    if (b.zeno) tb.zeno = TraceZeno{b.zeno->accumulation, b.zeno->ratio, b.zeno->window_points};
    for (const Phase& ph : b.phases) {
      TracePhase tp;
      tp.start = ph.start;
      tp.end = ph.end;
      tp.adopted.assign(ph.adopted.begin(), ph.adopted.end());
      tp.fired = ph.fired;
      tp.q_additions = ph.q_additions;
      tp.q_active = ph.q_active;
      switch (ph.kind) {
        case Phase::Kind::point:
          tp.kind = "point";
          for (const auto& [var, jet] : ph.jet)
            for (const auto& [o, v] : jet) tp.jet[var][o] = v;
          break;
        case Phase::Kind::interval:
          tp.kind = "interval";
          for (const auto& [var, p] : ph.polys) tp.polys[var] = p.coeffs();
          break;
        case Phase::Kind::zeno_gap:
          tp.kind = "zeno_gap";
          tp.note = "infinitely many phases accumulate here; not simulated";
          for (const auto& [var, jet] : ph.jet)
            for (const auto& [o, v] : jet) tp.jet[var][o] = v;
          break;
      }
      tb.phases.push_back(std::move(tp));
    }
    doc.branches.push_back(std::move(tb));
  }
  return doc;
}

// ── JSON ─────────────────────────────────────────────────────────────────────

class TraceError : public std::runtime_error {
 public:
  explicit TraceError(const std::string& what) : std::runtime_error(what) {}
};

inline Json rat_to_json(const Rational& q) {
  return Json{{"d", den(q).str()}, {"n", num(q).str()}};
}

inline Rational rat_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("d") || !j["n"].is_string() ||
      !j["d"].is_string())
    throw TraceError("expected a rational {\"n\",\"d\"} object");
  Int n, d;
  try {
    n = Int(j["n"].get<std::string>());
    d = Int(j["d"].get<std::string>());
  } catch (const std::exception&) {
    throw TraceError("malformed rational digits");
  }
  if (d <= 0) throw TraceError("rational denominator must be positive");
  return Rational(n, d);
}

inline Json poset_to_json(const ModuleSetPoset& p) {
  Json elements = Json::array();
  for (const ModuleSet& s : p.elements) elements.push_back(std::vector<std::string>(s.begin(), s.end()));
  Json order = Json::array();
  for (std::size_t i = 0; i < p.elements.size(); ++i)
    for (std::size_t j = 0; j < p.elements.size(); ++j)
      if (p.less[i][j]) order.push_back(Json::array({i, j}));
  return Json{{"elements", elements}, {"order", order}};
}

inline ModuleSetPoset poset_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("elements") || !j["elements"].is_array())
    throw TraceError("poset: expected {\"elements\", \"order\"}");
  std::vector<ModuleSet> elements;
  for (const Json& e : j["elements"]) {
    if (!e.is_array()) throw TraceError("poset: element must be an array of module names");
    ModuleSet s;
    for (const Json& m : e) {
      if (!m.is_string()) throw TraceError("poset: module names must be strings");
      s.insert(m.get<std::string>());
    }
    elements.push_back(std::move(s));
  }
  std::vector<std::pair<int, int>> order;
  if (j.contains("order")) {
    if (!j["order"].is_array()) throw TraceError("poset: order must be an array of pairs");
    for (const Json& p : j["order"]) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number_unsigned() ||
          !p[1].is_number_unsigned())
        throw TraceError("poset: order entries must be index pairs");
      order.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
  }
  return make_explicit_poset(std::move(elements), order);
}

inline Json to_json(const TraceDocument& doc) {
  Json options{{"branch_limit", doc.options.branch_limit},
               {"explicit_poset",
                doc.options.explicit_poset ? poset_to_json(*doc.options.explicit_poset)
                                           : Json(nullptr)},
               {"max_phases", doc.options.max_phases},
               {"no_cont", doc.options.no_cont},
               {"post_zeno", doc.options.post_zeno},
               {"until", rat_to_json(doc.options.until)},
               {"zeno_ratio_tol", rat_to_json(doc.options.zeno_ratio_tol)},
               {"zeno_window", doc.options.zeno_window}};

  Json branches = Json::array();
  for (const TraceBranch& b : doc.branches) {
    Json phases = Json::array();
    for (const TracePhase& p : b.phases) {
      Json jp{{"kind", p.kind}};
      auto records = [](const std::vector<QAddRecord>& rs) {
        Json a = Json::array();
        for (const QAddRecord& r : rs)
          a.push_back(Json{{"constraint", r.constraint}, {"module", r.module}});
        return a;
      };
      if (p.kind == "point") {
        jp["time"] = rat_to_json(p.start);
        Json jet = Json::object();
        for (const auto& [var, orders] : p.jet) {
          Json jo = Json::object();
          for (const auto& [o, v] : orders) jo[std::to_string(o)] = rat_to_json(v);
          jet[var] = std::move(jo);
        }
        jp["jet"] = std::move(jet);
      } else {
        jp["start"] = rat_to_json(p.start);
        jp["end"] = rat_to_json(p.end);
      }
      if (p.kind == "interval") {
        Json polys = Json::object();
        for (const auto& [var, cs] : p.polys) {
          Json arr = Json::array();
          for (const Rational& c : cs) arr.push_back(rat_to_json(c));
          polys[var] = std::move(arr);
        }
        jp["polys"] = std::move(polys);
      }
      if (p.kind == "zeno_gap") {
        jp["note"] = p.note;
        Json limits = Json::object();
        for (const auto& [var, orders] : p.jet) {
          Json jo = Json::object();
          for (const auto& [o, v] : orders) jo[std::to_string(o)] = rat_to_json(v);
          limits[var] = std::move(jo);
        }
        jp["limits"] = std::move(limits);
      } else {
        jp["adopted"] = p.adopted;
        jp["fired"] = records(p.fired);
        jp["q_additions"] = records(p.q_additions);
        jp["q_active"] = p.q_active;
      }
      phases.push_back(std::move(jp));
    }
    Json jz(nullptr);
    if (b.zeno) {
      Json pts = Json::array();
      for (const Rational& t : b.zeno->window_points) pts.push_back(rat_to_json(t));
      jz = Json{{"accumulation", rat_to_json(b.zeno->accumulation)},
                {"ratio", rat_to_json(b.zeno->ratio)},
                {"window_points", std::move(pts)}};
    }
    branches.push_back(Json{{"diagnostic", b.diagnostic},
                            {"id", b.id},
                            {"phases", std::move(phases)},
                            {"status", b.status},
                            {"zeno", std::move(jz)}});
  }

  return Json{{"branch_limit_hit", doc.branch_limit_hit},
              {"branches", std::move(branches)},
              {"format_version", doc.format_version},
              {"options", std::move(options)},
              {"program_hash", doc.hash}};
}

inline TraceDocument from_json(const Json& j) {
  if (!j.is_object()) throw TraceError("trace: expected a JSON object");
  auto need = [&](const Json& o, const char* key) -> const Json& {
    if (!o.is_object() || !o.contains(key))
      throw TraceError(std::string("trace: missing field '") + key + "'");
    return o[key];
  };
  TraceDocument doc;
  const Json& fv = need(j, "format_version");
  if (!fv.is_number_integer() || fv.get<int>() != 1)
    throw TraceError("trace: unsupported format_version");
  doc.format_version = 1;
  const Json& h = need(j, "program_hash");
  if (!h.is_string()) throw TraceError("trace: program_hash must be a string");
  doc.hash = h.get<std::string>();
  doc.branch_limit_hit = need(j, "branch_limit_hit").get<bool>();

  const Json& jo = need(j, "options");
  doc.options.until = rat_from_json(need(jo, "until"));
  doc.options.max_phases = need(jo, "max_phases").get<int>();
  doc.options.branch_limit = need(jo, "branch_limit").get<int>();
  doc.options.zeno_window = need(jo, "zeno_window").get<int>();
  doc.options.zeno_ratio_tol = rat_from_json(need(jo, "zeno_ratio_tol"));
  doc.options.post_zeno = need(jo, "post_zeno").get<bool>();
  for (const Json& s : need(jo, "no_cont")) {
    if (!s.is_string()) throw TraceError("trace: no_cont entries must be strings");
    doc.options.no_cont.push_back(s.get<std::string>());
  }
  const Json& ep = need(jo, "explicit_poset");
  if (!ep.is_null()) doc.options.explicit_poset = poset_from_json(ep);

  for (const Json& jb : need(j, "branches")) {
    TraceBranch b;
    b.id = need(jb, "id").get<int>();
    b.status = need(jb, "status").get<std::string>();
    b.diagnostic = need(jb, "diagnostic").get<std::string>();
    const Json& jz = need(jb, "zeno");
    if (!jz.is_null()) {
      TraceZeno z;
      z.accumulation = rat_from_json(need(jz, "accumulation"));
      z.ratio = rat_from_json(need(jz, "ratio"));
      for (const Json& t : need(jz, "window_points")) z.window_points.push_back(rat_from_json(t));
      b.zeno = std::move(z);
    }
    for (const Json& jp : need(jb, "phases")) {
      TracePhase p;
      p.kind = need(jp, "kind").get<std::string>();
      auto records = [&](const Json& a) {
        std::vector<QAddRecord> rs;
        if (!a.is_array()) throw TraceError("trace: expected a record array");
        for (const Json& r : a)
          rs.push_back({need(r, "module").get<std::string>(),
                        need(r, "constraint").get<std::string>()});
        return rs;
      };
      if (p.kind == "point") {
        p.start = p.end = rat_from_json(need(jp, "time"));
        for (const auto& [var, orders] : need(jp, "jet").items())
          for (const auto& [os, v] : orders.items()) {
            std::size_t pos = 0;
            int o = std::stoi(os, &pos);
            if (pos != os.size() || o < 0) throw TraceError("trace: bad jet order");
            p.jet[var][o] = rat_from_json(v);
          }
      } else if (p.kind == "interval" || p.kind == "zeno_gap") {
        p.start = rat_from_json(need(jp, "start"));
        p.end = rat_from_json(need(jp, "end"));
      } else {
        throw TraceError("trace: unknown phase kind '" + p.kind + "'");
      }
      if (p.kind == "interval")
        for (const auto& [var, arr] : need(jp, "polys").items()) {
          std::vector<Rational> cs;
          for (const Json& c : arr) cs.push_back(rat_from_json(c));
          p.polys[var] = std::move(cs);
        }
      if (p.kind == "zeno_gap") {
        p.note = need(jp, "note").get<std::string>();
        for (const auto& [var, orders] : need(jp, "limits").items())
          for (const auto& [os, v] : orders.items()) {
            std::size_t pos = 0;
            int o = std::stoi(os, &pos);
            if (pos != os.size() || o < 0) throw TraceError("trace: bad limit order");
            p.jet[var][o] = rat_from_json(v);
          }
      } else {
        for (const Json& a : need(jp, "adopted")) p.adopted.push_back(a.get<std::string>());
        p.fired = records(need(jp, "fired"));
        p.q_additions = records(need(jp, "q_additions"));
        for (const Json& s : need(jp, "q_active")) p.q_active.push_back(s.get<std::string>());
      }
      b.phases.push_back(std::move(p));
    }
    doc.branches.push_back(std::move(b));
  }
  return doc;
}

inline std::string trace_to_string(const TraceDocument& doc) {
  return to_json(doc).dump(2) + "\n";
}

inline TraceDocument trace_from_string(const std::string& text) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw TraceError("trace: invalid JSON");
  return from_json(j);
}

// ── CSV ──────────────────────────────────────────────────────────────────────

/// Fixed-point decimal rendering (round half away from zero).
inline std::string decimal_string(const Rational& q, int precision) {
  Int scale = 1;
  for (int i = 0; i < precision; ++i) scale *= 10;
  Rational scaled = q * Rational(scale);
  Int rounded = q >= 0 ? rat_floor(scaled + Rational(1, 2)) : -rat_floor(-scaled + Rational(1, 2));
  bool neg = rounded < 0;
  Int mag = neg ? Int(-rounded) : rounded;
  std::string digits = mag.str();
  if (static_cast<int>(digits.size()) <= precision)
    digits.insert(0, static_cast<std::size_t>(precision + 1) - digits.size(), '0');
  std::string out = neg ? "-" : "";
  if (precision == 0) return out + digits;
  out += digits.substr(0, digits.size() - static_cast<std::size_t>(precision));
  out += ".";
  out += digits.substr(digits.size() - static_cast<std::size_t>(precision));
  return out;
}

/// Decimal view of the trace: one row per point phase, plus rows at every
/// csv-step multiple strictly inside each interval, plus the final interval
/// end when no point phase follows it.
inline std::string trace_to_csv(const TraceDocument& doc, const Rational& step,
                                int precision) {
  std::set<std::string> var_set;
  for (const TraceBranch& b : doc.branches)
    for (const TracePhase& p : b.phases) {
      for (const auto& [v, _] : p.jet) var_set.insert(v);
      for (const auto& [v, _] : p.polys) var_set.insert(v);
    }
  std::vector<std::string> vars(var_set.begin(), var_set.end());

  std::string out = "branch,t";
  for (const std::string& v : vars) out += "," + v;
  out += "\n";

  auto poly_eval = [](const std::vector<Rational>& cs, const Rational& x) {
    Rational acc = 0;
    for (std::size_t i = cs.size(); i-- > 0;) acc = acc * x + cs[i];
    return acc;
  };

  for (const TraceBranch& b : doc.branches) {
    for (std::size_t pi = 0; pi < b.phases.size(); ++pi) {
      const TracePhase& p = b.phases[pi];
      auto row = [&](const Rational& t, bool from_poly) {
        out += std::to_string(b.id) + "," + decimal_string(t, precision);
        for (const std::string& v : vars) {
          out += ",";
          if (from_poly) {
            auto it = p.polys.find(v);
            if (it != p.polys.end()) out += decimal_string(poly_eval(it->second, t - p.start), precision);
          } else {
            auto it = p.jet.find(v);
            if (it != p.jet.end())
              if (auto jt = it->second.find(0); jt != it->second.end())
                out += decimal_string(jt->second, precision);
          }
        }
        out += "\n";
      };
      if (p.kind == "point") {
        row(p.start, false);
      } else if (p.kind == "interval") {
        if (step > 0)
          for (Rational t = Rational(rat_floor(p.start / step)) * step + step; t < p.end;
               t += step)
            if (t > p.start) row(t, true);
        bool closing_point = pi + 1 < b.phases.size() &&
                             b.phases[pi + 1].kind == "point" &&
                             b.phases[pi + 1].start == p.end;
        if (!closing_point) row(p.end, true);
      }
    }
  }
  return out;
}

}  // namespace hydla