// Command-line surface: compile, run, back-translate, check traces, and
// fuzz the secure-compilation properties. All I/O is file-based text; exit
// code 0 means success/PASS, 1 a property FAIL or a stuck run, 2 a usage or
// parse error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "secomp/backtrans.hpp"
#include "secomp/compile.hpp"
#include "secomp/harness.hpp"
#include "secomp/sem_source.hpp"
#include "secomp/sem_target.hpp"

using namespace secomp;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("IoError", "cannot read '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void spit(const std::string& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail("IoError", "cannot write '" + path + "'");
  f << contents;
}

IoScript load_io(const std::string& path) {
  if (path.empty()) return {};
  return parse_io(slurp(path));
}

// Interface files, source programs and target programs all carry an
// interface; accept any of them where an interface is expected.
Interface load_interface(const std::string& path) {
  std::string text = slurp(path);
  size_t i = text.find_first_not_of(" \t\r\n");
  if (i != std::string::npos && text.compare(i, 10, "(interface") == 0)
    return parse_interface(text);
  if (i != std::string::npos && text.compare(i, 14, "(tcompartment ") == 0)
    return interface_of(parse_target(text));
  return interface_of(parse_program(text));
}

std::pair<std::string, std::string> entry_of(const Interface& iface, const ITrace& it) {
  for (const auto& [name, c] : iface.compartments)
    if (c.exports.count("main")) return {name, "main"};
  if (!it.empty()) return {it[0].f_comp, it[0].f_proc};
  fail("NoMain", "interface exports no main and the trace is empty");
}

int outcome_exit(const RunOutcome& o) { return o.is_stuck() ? 1 : 0; }

int jobs_from_env() {
  const char* env = std::getenv("SECOMP_KIT_JOBS");
  if (!env) return 1;
  int j = std::atoi(env);
  return j > 0 ? j : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compartmentalized compilation workbench"};
  app.require_subcommand(1);

  std::string c_in, c_out;
  auto* c = app.add_subcommand("compile", "compile a source program to target assembly");
  c->add_option("input", c_in, "source program (.sexp)")->required();
  c->add_option("-o,--output", c_out, "output target file")->required();

  std::string rs_in, rs_io, rs_trace;
  int64_t rs_fuel = 1000000;
  auto* rs = app.add_subcommand("run-source", "interpret a source program");
  rs->add_option("input", rs_in)->required();
  rs->add_option("--io", rs_io, "io script file");
  rs->add_option("--fuel", rs_fuel, "step budget");
  rs->add_option("--trace", rs_trace, "write the trace here (default stdout)");

  std::string rt_in, rt_io, rt_trace, rt_itrace;
  int64_t rt_fuel = 1000000;
  auto* rt = app.add_subcommand("run-target", "run a target program");
  rt->add_option("input", rt_in)->required();
  rt->add_option("--io", rt_io, "io script file");
  rt->add_option("--fuel", rt_fuel, "step budget");
  rt->add_option("--trace", rt_trace, "write the trace here (default stdout)");
  rt->add_option("--itrace", rt_itrace, "write the annotated trace here");

  std::string bt_iface, bt_itrace, bt_comp, bt_out;
  auto* bt = app.add_subcommand("backtranslate",
                                "turn an annotated trace into a source program");
  bt->add_option("--interface", bt_iface, "interface (or program/target) file")
      ->required();
  bt->add_option("--itrace", bt_itrace, "annotated trace file")->required();
  bt->add_option("--comp", bt_comp, "emit only this compartment");
  bt->add_option("-o,--output", bt_out, "output file")->required();

  std::string ct_in, ct_iface;
  auto* ct = app.add_subcommand("check-trace", "well-formedness of an annotated trace");
  ct->add_option("input", ct_in)->required();
  ct->add_option("--interface", ct_iface, "interface (or program/target) file")
      ->required();

  std::vector<std::string> lk_in;
  std::string lk_out;
  auto* lk = app.add_subcommand("link", "link partial source programs");
  lk->add_option("inputs", lk_in, "source files")->required()->expected(-2);
  lk->add_option("-o,--output", lk_out)->required();

  std::string fz_prop, fz_out;
  uint64_t fz_seed = 0;
  int fz_trials = 100;
  auto* fz = app.add_subcommand("fuzz", "property-based testing campaigns");
  fz->add_option("property", fz_prop,
                 "fcc|bcc|backtranslation|bt-compiles|recomposition|blame|adversarial")
      ->required();
  fz->add_option("--seed", fz_seed, "base seed");
  fz->add_option("--trials", fz_trials, "number of trials");
  fz->add_option("--out", fz_out, "corpus directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c) {
      Program p = parse_program(slurp(c_in));
      check_interfaces(p);
      spit(c_out, serialize_target(compile_program(p)));
      return 0;
    }
    if (*rs) {
      Program p = parse_program(slurp(rs_in));
      check_interfaces(p);
      IoScript io = load_io(rs_io);
      SourceRun r = run_source(p, io, rs_fuel);
      std::string trace = serialize_trace(r.trace);
      if (rs_trace.empty())
        std::cout << trace;
      else
        spit(rs_trace, trace);
      std::cerr << to_string(r.outcome) << "\n";
      return outcome_exit(r.outcome);
    }
    if (*rt) {
      TargetProgram tp = parse_target(slurp(rt_in));
      IoScript io = load_io(rt_io);
      TargetRun r = run_target(tp, io, rt_fuel);
      std::string trace = serialize_trace(r.trace);
      if (rt_trace.empty())
        std::cout << trace;
      else
        spit(rt_trace, trace);
      if (!rt_itrace.empty()) spit(rt_itrace, serialize_itrace(r.itrace));
      std::cerr << to_string(r.outcome) << "\n";
      return outcome_exit(r.outcome);
    }
    if (*bt) {
      Interface iface = load_interface(bt_iface);
      ITrace it = parse_itrace(slurp(bt_itrace));
      if (bt_comp.empty()) {
        Program p = back_translate_all(iface, it);
        check_interfaces(p);
        spit(bt_out, serialize_program(p));
      } else {
        CompartmentDecl decl = back_translate(iface, it, bt_comp);
        Program one;
        one.compartments[bt_comp] = std::move(decl);
        spit(bt_out, serialize_program(one));
      }
      return 0;
    }
    if (*ct) {
      Interface iface = load_interface(ct_iface);
      ITrace it = parse_itrace(slurp(ct_in));
      GlobalsLayout layout = infer_globals(it, iface);
      WfOutcome wf =
          check_wf(it, WfState::initial(iface, layout, entry_of(iface, it)), iface);
      if (wf.ok) {
        std::cout << "PASS " << it.size() << " events well-formed\n";
        return 0;
      }
      std::cout << "FAIL event " << wf.at << ": " << wf.error << "\n";
      return 1;
    }
    if (*lk) {
      Program acc = parse_program(slurp(lk_in[0]));
      for (size_t i = 1; i < lk_in.size(); i++)
        acc = link(acc, parse_program(slurp(lk_in[i])));
      check_interfaces(acc);
      spit(lk_out, serialize_program(acc));
      return 0;
    }
    if (*fz) {
      if (!known_property(fz_prop)) {
        std::cerr << "unknown property '" << fz_prop << "'\n";
        return 2;
      }
      FuzzReport report = run_fuzz(fz_prop, fz_seed, fz_trials, fz_out, jobs_from_env());
      for (const TrialResult& tr : report.results)
        std::cout << verdict_line(report.property, tr.seed, tr.verdict) << "\n";
      std::cout << report.property << ": " << report.passed << "/" << report.trials
                << " passed\n";
      return report.failed == 0 ? 0 : 1;
    }
  } catch (const Diag& d) {
    std::cerr << "error: " << d.str() << "\n";
    return 2;
  }
  return 2;
}
