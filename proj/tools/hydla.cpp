// hydla — simulate Basic HydLa programs, check trace certificates, and
// inspect module-set posets.
//
// Exit codes
//   run:    0 at least one branch reached the horizon (or detected a Zeno
//             cascade / hit the phase limit); 2 every branch died (no model,
//             or the run is underdetermined); 3 parse error; 4 the program
//             or the run needs machinery outside the supported class.
//   check:  0 certificate accepted; 1 rejected; 3 parse / format error.
//   poset:  0 on success; 3 parse error.

#include <hydla/hydla.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

hydla::Rational require_rational(const std::string& text, const std::string& flag) {
  auto v = hydla::parse_rational(text);
  if (!v) throw CLI::ValidationError(flag, "expected a rational like 10, 5/2, or 0.25");
  return *v;
}

struct RunArgs {
  std::string file;
  std::string until = "10";
  int max_phases = 64;
  int branch_limit = 8;
  int zeno_window = 3;
  std::string zeno_ratio_tol = "0";
  bool post_zeno = false;
  std::vector<std::string> no_cont;
  std::string explicit_poset;
  std::string format = "json";
  std::string csv_step = "1/10";
  int csv_precision = 6;
  std::string out;
};

hydla::SimOptions sim_options(const RunArgs& a) {
  hydla::SimOptions opt;
  opt.horizon = require_rational(a.until, "--until");
  opt.max_phases = a.max_phases;
  opt.branch_limit = a.branch_limit;
  opt.zeno_window = a.zeno_window;
  opt.zeno_ratio_tol = require_rational(a.zeno_ratio_tol, "--zeno-ratio-tol");
  opt.post_zeno = a.post_zeno;
  opt.no_cont.insert(a.no_cont.begin(), a.no_cont.end());
  if (!a.explicit_poset.empty()) {
    hydla::Json j = hydla::Json::parse(read_file(a.explicit_poset), nullptr, false);
    if (j.is_discarded()) throw hydla::TraceError("poset file: invalid JSON");
    opt.explicit_poset = hydla::poset_from_json(j);
  }
  return opt;
}

int cmd_run(const RunArgs& a) {
  hydla::ParsedProgram program = hydla::parse_program(read_file(a.file));
  hydla::SimOptions opt = sim_options(a);
  hydla::SimResult result = hydla::simulate(program, opt);
  hydla::TraceDocument doc = hydla::trace_from_result(program, opt, result);

  if (a.format == "csv")
    write_output(a.out, hydla::trace_to_csv(doc, require_rational(a.csv_step, "--csv-step"),
                                            a.csv_precision));
  else
    write_output(a.out, hydla::trace_to_string(doc));

  bool completed = false, unsupported = false;
  for (const hydla::SimBranch& b : result.branches) {
    std::cerr << "branch " << &b - result.branches.data() << ": " << to_string(b.status);
    if (!b.diagnostic.empty()) std::cerr << " — " << b.diagnostic;
    std::cerr << "\n";
    switch (b.status) {
      case hydla::RunStatus::horizon_reached:
      case hydla::RunStatus::zeno_detected:
      case hydla::RunStatus::phase_limit:
        completed = true;
        break;
      case hydla::RunStatus::unsupported:
        unsupported = true;
        break;
      default:
        break;
    }
  }
  if (result.branch_limit_hit) std::cerr << "note: branch limit reached\n";
  if (completed) return 0;
  return unsupported ? 4 : 2;
}

int cmd_check(const std::string& file, const std::string& cert) {
  hydla::ParsedProgram program = hydla::parse_program(read_file(file));
  hydla::TraceDocument doc = hydla::trace_from_string(read_file(cert));
  hydla::CheckReport rep = hydla::check_certificate(program, doc);
  for (const std::string& n : rep.notes) std::cerr << "note: " << n << "\n";
  if (rep.accepted) {
    std::cout << "accepted\n";
    return 0;
  }
  std::cout << "rejected: " << rep.rejection << "\n";
  return 1;
}

int cmd_poset(const RunArgs& a) {
  hydla::ParsedProgram program = hydla::parse_program(read_file(a.file));
  hydla::ModuleSetPoset poset;
  if (!a.explicit_poset.empty()) {
    hydla::Json j = hydla::Json::parse(read_file(a.explicit_poset), nullptr, false);
    if (j.is_discarded()) throw hydla::TraceError("poset file: invalid JSON");
    poset = hydla::poset_from_json(j);
  } else if (program.declaration) {
    poset = hydla::derive_module_poset(*program.declaration);
  } else {
    hydla::ModuleSet all;
    for (const auto& [name, _] : program.definitions) all.insert(name);
    poset = hydla::detail::poset_from_subset_order({std::move(all)});
  }
  for (const hydla::ModuleSet& e : poset.elements)
    for (const std::string& m : e)
      if (!program.find(m))
        throw std::runtime_error("poset references undefined module '" + m + "'");
  for (const hydla::ModuleSet& e : poset.elements)
    std::cout << "element " << hydla::to_string(e) << "\n";
  for (const auto& [i, j] : poset.hasse_edges())
    std::cout << "order " << hydla::to_string(poset.elements[static_cast<std::size_t>(i)])
              << " < " << hydla::to_string(poset.elements[static_cast<std::size_t>(j)]) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Basic HydLa interpreter, simulator, and semantics checker"};
  app.require_subcommand(1);

  RunArgs ra;
  CLI::App* run = app.add_subcommand("run", "simulate a program and emit its trace");
  run->add_option("file", ra.file, "program file")->required();
  run->add_option("--until", ra.until, "simulation horizon (rational)");
  run->add_option("--max-phases", ra.max_phases, "phase budget per branch");
  run->add_option("--branch-limit", ra.branch_limit, "maximum number of branches");
  run->add_option("--zeno-window", ra.zeno_window, "gaps examined by the Zeno test");
  run->add_option("--zeno-ratio-tol", ra.zeno_ratio_tol, "ratio tolerance in the Zeno test");
  run->add_flag("--post-zeno", ra.post_zeno, "extrapolate limits and resume past a cascade");
  run->add_option("--no-cont", ra.no_cont, "disable the continuity default for a variable");
  run->add_option("--explicit-poset", ra.explicit_poset, "module-set poset JSON file");
  run->add_option("--format", ra.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  run->add_option("--csv-step", ra.csv_step, "sampling step for csv output");
  run->add_option("--csv-precision", ra.csv_precision, "decimal places for csv output");
  run->add_option("--out", ra.out, "write the trace here instead of stdout");

  std::string check_file, check_cert;
  CLI::App* check = app.add_subcommand("check", "verify a trace certificate against a program");
  check->add_option("file", check_file, "program file")->required();
  check->add_option("--certificate", check_cert, "trace JSON to verify")->required();

  RunArgs pa;
  CLI::App* poset = app.add_subcommand("poset", "print the module-set poset");
  poset->add_option("file", pa.file, "program file")->required();
  poset->add_option("--explicit-poset", pa.explicit_poset, "module-set poset JSON file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(ra);
    if (check->parsed()) return cmd_check(check_file, check_cert);
    return cmd_poset(pa);
  } catch (const hydla::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return e.unsupported ? 4 : 3;
  } catch (const hydla::TraceError& e) {
    std::cerr << "trace error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
