#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "secomp/compile.hpp"
#include "secomp/harness.hpp"
#include "secomp/sem_source.hpp"
#include "secomp/sem_target.hpp"

using namespace secomp;

namespace {

Program parsed(const char* text) {
  Program p = parse_program(text);
  check_interfaces(p);
  return p;
}

}  // namespace

TEST_CASE("compiled minimal program runs to Final(0)") {
  Program p = parsed("(compartment C0 (exports (main 0 ret)) (proc main () (return 0)))");
  TargetProgram tp = compile_program(p);
  TargetRun r = run_target(tp, {}, 10000);
  CHECK(r.trace.empty());
  CHECK(r.itrace.empty());
  REQUIRE(r.outcome.is_final());
  CHECK(r.outcome.value == 0);
}

TEST_CASE("cross call compiles to the identical event sequence") {
  Program p = parsed(R"((compartment C0 (exports (main 0 ret)) (imports (C1 f 2 ret))
      (proc main () (locals x) (call x C1.f 1 2) (return x)))
    (compartment C1 (exports (f 2 ret)) (proc f (a b) (return (op + a b)))))");
  SourceRun s = run_source(p, {}, 10000);
  TargetRun t = run_target(compile_program(p), {}, 1000000);
  CHECK(serialize_trace(s.trace) == serialize_trace(t.trace));
  CHECK(serialize_trace(t.trace) == "CALL C0 C1.f (1,2)\nRET C1 C0 3\n");
  REQUIRE(t.outcome.is_final());
  CHECK(t.outcome.value == s.outcome.value);
}

TEST_CASE("nine-argument calls spill through the caller frame") {
  Program p = parsed(R"((compartment C0 (exports (main 0 ret)) (imports (C1 g 9 ret))
      (proc main () (locals x) (call x C1.g 1 2 3 4 5 6 7 8 9) (return x)))
    (compartment C1 (exports (g 9 ret))
      (proc g (a b c d e f gg h i) (return (op + (op * a 100) i)))))");
  SourceRun s = run_source(p, {}, 10000);
  REQUIRE(s.outcome.is_final());
  CHECK(s.outcome.value == 109);
  TargetRun t = run_target(compile_program(p), {}, 1000000);
  REQUIRE(t.outcome.is_final());
  CHECK(t.outcome.value == 109);
  CHECK(serialize_trace(s.trace) == serialize_trace(t.trace));
  REQUIRE(t.itrace.size() == 2);
  CHECK(t.itrace[0].sig.param_count == 9);
}

TEST_CASE("interface is preserved verbatim by compilation") {
  Program p = parsed(R"((compartment C0 (exports (main 0 ret)) (imports (C1 f 1 void))
      (syscalls read) (global b 2 public)
      (proc main () (call _ C1.f 4) (return 0)))
    (compartment C1 (exports (f 1 void)) (proc f (a) (return))))");
  TargetProgram tp = compile_program(p);
  CHECK(interface_of(tp) == interface_of(p));
}

TEST_CASE("a compartment using an undeclared syscall still compiles") {
  // The allowance check is dynamic: strip the declaration from the AST,
  // compile anyway, and watch the run get stuck.
  Program p = parsed(R"((compartment C0 (exports (main 0 ret)) (syscalls read)
      (global buf 2 public)
      (proc main () (locals x) (call x sys.read buf 1) (return x))))");
  p.compartments.at("C0").syscalls.clear();
  TargetProgram tp = compile_program(p);
  TargetRun r = run_target(tp, {}, 10000);
  CHECK(r.outcome.is_stuck());
  CHECK(r.outcome.offender == "C0");
}

TEST_CASE("separate compilation agrees with whole-program compilation") {
  for (uint64_t seed = 0; seed < 100; seed++) {
    GenConfig cfg;
    cfg.seed = seed;
    cfg.n_compartments = 2 + static_cast<int>(seed % 3);
    Environment env = gen_environment(cfg);
    GenProgram gp = gen_program(env, cfg);
    check_interfaces(gp.p);

    TargetProgram whole = compile_program(gp.p);
    TargetProgram assembled;
    for (const auto& [name, c] : gp.p.compartments)
      assembled.compartments[name] = compile_compartment(c);
    assembled.entry = gp.p.main;

    CHECK(target_equal(whole, assembled));
    IoScript io1 = gp.io, io2 = gp.io;
    TargetRun a = run_target(whole, io1, 2000000);
    TargetRun b = run_target(assembled, io2, 2000000);
    CHECK(serialize_trace(a.trace) == serialize_trace(b.trace));
  }
}

TEST_CASE("target text format round trips") {
  Program p = parsed(R"((compartment C0 (exports (main 0 ret)) (imports (C1 f 1 ret))
      (syscalls write) (global b 3 private)
      (proc main () (locals x i)
        (while (op < i 2) (seq (set x (op + x 1)) (set i (op + i 1))))
        (if x (call x C1.f x) (set x 9))
        (return x)))
    (compartment C1 (exports (f 1 ret)) (proc f (a) (return (op * a a)))))");
  TargetProgram tp = compile_program(p);
  std::string s1 = serialize_target(tp);
  TargetProgram tp2 = parse_target(s1);
  CHECK(target_equal(tp, tp2));
  CHECK(serialize_target(tp2) == s1);
}

TEST_CASE("arity above the structural cap is rejected") {
  Program p = parse_program(
      "(compartment C0 (exports (main 0 ret)) (proc main () (return 0)))");
  Signature big{65, true};
  p.compartments.at("C0").proc_sigs["wide"] = big;
  ProcDef def;
  for (int i = 0; i < 65; i++) def.params.push_back("p" + std::to_string(i));
  def.body = Stmt::ret(Expr::constant(0));
  p.compartments.at("C0").procs["wide"] = def;
  bool threw = false;
  try {
    compile_program(p);
  } catch (const Diag& d) {
    threw = d.code == "TooManyParams";
  }
  CHECK(threw);
}
