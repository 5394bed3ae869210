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

TargetProgram minimal_handwritten() {
  return parse_target(R"((tcompartment C0
    (interface (exports (main 0 ret)) (imports) (syscalls))
    (globals)
    (tproc main 0 ret
      (li a0 7)
      (halt a0))))");
}

}  // namespace

TEST_CASE("tinit mirrors source global allocation block for block") {
  Program p = parsed(R"((compartment A (exports (main 0 ret)) (global x 2 public)
      (global y 3 private) (proc main () (return 0)))
    (compartment B (exports (f 0 ret)) (global x 1 public) (proc f () (return 0))))");
  SourceInterp si(p);
  Machine m(compile_program(p));
  for (const auto& [cn, c] : p.compartments)
    for (const auto& g : c.globals) {
      BlockId sb = si.global_block(cn, g.name);
      BlockId tb = m.global_block(cn, g.name);
      CHECK(sb == tb);  // same allocation order, same ids
      CHECK(m.memory().block(tb).slots.size() == static_cast<size_t>(g.size));
      CHECK(m.memory().block(tb).slots[0] == Value::intv(0));
    }
}

TEST_CASE("hand-written target runs and halts") {
  TargetRun r = run_target(minimal_handwritten(), {}, 100);
  REQUIRE(r.outcome.is_final());
  CHECK(r.outcome.value == 7);
}

TEST_CASE("an empty code body is stuck on the first step") {
  TargetProgram tp = parse_target(R"((tcompartment C0
    (interface (exports (main 0 ret)) (imports) (syscalls))
    (globals)
    (tproc main 0 ret)))");
  TargetRun r = run_target(tp, {}, 100);
  CHECK(r.outcome.is_stuck());
  CHECK(r.outcome.offender == "C0");
  CHECK(serialize_trace(r.trace) == "UB C0\n");
}

TEST_CASE("fuel zero leaves the machine running") {
  TargetRun r = run_target(minimal_handwritten(), {}, 0);
  CHECK(r.outcome.kind == RunOutcome::Kind::OutOfFuel);
  CHECK(r.trace.empty());
}

TEST_CASE("projection of the recorded annotated trace is the plain trace") {
  for (uint64_t seed = 100; seed < 150; seed++) {
    GenConfig cfg;
    cfg.seed = seed;
    cfg.n_compartments = 2 + static_cast<int>(seed % 4);
    Environment env = gen_environment(cfg);
    GenProgram gp = gen_program(env, cfg);
    TargetRun t = run_target(compile_program(gp.p), gp.io, 4000000);
    Trace plain = t.trace;
    if (!plain.empty() && plain.back().kind == Event::Kind::Undef) plain.pop_back();
    CHECK(serialize_trace(project(t.itrace)) == serialize_trace(plain));
    CHECK(well_bracketed(t.trace));
  }
}

TEST_CASE("register invalidation makes stale temporaries unusable") {
  // B.f moves a stale temporary into the return register after a cross
  // return invalidated it.
  TargetProgram tp = parse_target(R"((tcompartment A
    (interface (exports (main 0 ret)) (imports (B f 0 ret)) (syscalls))
    (globals)
    (tproc main 0 ret
      (li t5 99)
      (jal x B.f)
      (mov a0 t5)
      (halt a0)))
(tcompartment B
    (interface (exports (f 0 ret)) (imports) (syscalls))
    (globals)
    (tproc f 0 ret
      (li a0 1)
      (loadf ra 1)
      (loadf sp 0)
      (jr x ra))))");
  TargetRun r = run_target(tp, {}, 1000);
  // t5 held Undef after the return; halting on it is non-scalar.
  CHECK(r.outcome.is_stuck());
  CHECK(r.outcome.offender == "A");
}

TEST_CASE("internal tail calls are allowed and the return reports the tail callee") {
  TargetProgram tp = parse_target(R"((tcompartment A
    (interface (exports (main 0 ret)) (imports (B f 0 ret)) (syscalls))
    (globals)
    (tproc main 0 ret
      (jal x B.f)
      (halt a0)))
(tcompartment B
    (interface (exports (f 0 ret)) (imports) (syscalls))
    (globals)
    (tproc f 0 ret
      (jmpp g 0))
    (tproc g 0 ret
      (li a0 5)
      (loadf ra 1)
      (loadf sp 0)
      (jr x ra))))");
  TargetRun r = run_target(tp, {}, 1000);
  REQUIRE(r.outcome.is_final());
  CHECK(r.outcome.value == 5);
  REQUIRE(r.itrace.size() == 2);
  CHECK(r.itrace[1].f_proc == "g");  // the tail callee, not f
}

TEST_CASE("read-only syscall buffer semantics match the source level") {
  Program p = parsed(R"((compartment C0 (exports (main 0 ret)) (syscalls read write)
      (global buf 4 public)
      (proc main () (locals x y)
        (call x sys.read buf 3)
        (call y sys.write buf 2)
        (return (op + x y)))))");
  IoScript io;
  io.read_chunks.push_back({7, 8});
  io.write_acks.push_back(2);
  IoScript io2 = io;
  SourceRun s = run_source(p, io, 100000);
  TargetRun t = run_target(compile_program(p), io2, 1000000);
  CHECK(serialize_trace(s.trace) == serialize_trace(t.trace));
  REQUIRE(t.outcome.is_final());
  CHECK(t.outcome.value == s.outcome.value);
  REQUIRE(t.itrace.size() == 2);
  CHECK(t.itrace[0].buffer == "buf");
  // The read's refill shows up as the next event's delta.
  REQUIRE(t.itrace[1].deltas.size() == 1);
  CHECK(t.itrace[1].deltas[0].kind == MemDelta::Kind::Bytes);
}

TEST_CASE("machine runs are deterministic under a shared script") {
  GenConfig cfg;
  cfg.seed = 4242;
  Environment env = gen_environment(cfg);
  GenProgram gp = gen_program(env, cfg);
  TargetProgram tp = compile_program(gp.p);
  IoScript io1 = gp.io, io2 = gp.io;
  TargetRun a = run_target(tp, io1, 4000000);
  TargetRun b = run_target(tp, io2, 4000000);
  CHECK(serialize_trace(a.trace) == serialize_trace(b.trace));
  CHECK(serialize_itrace(a.itrace) == serialize_itrace(b.itrace));
}

TEST_CASE("memory audit stays clean across random compiled runs") {
  for (uint64_t seed = 7000; seed < 7020; seed++) {
    GenConfig cfg;
    cfg.seed = seed;
    Environment env = gen_environment(cfg);
    GenProgram gp = gen_program(env, cfg);
    Machine m(compile_program(gp.p));
    IoScript io = gp.io;
    int64_t fuel = 4000000;
    while (fuel-- > 0 && m.status() == Machine::Status::Running) m.step(io);
    CHECK(m.memory().audit().cross_violations == 0);
    CHECK(m.memory().audit().owner_changes == 0);
  }
}
