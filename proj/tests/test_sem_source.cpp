#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "secomp/sem_source.hpp"

using namespace secomp;

namespace {

Program parsed(const char* text) {
  Program p = parse_program(text);
  check_interfaces(p);
  return p;
}

}  // namespace

TEST_CASE("minimal program runs to Final(0) with an empty trace") {
  Program p = parsed("(compartment C0 (exports (main 0 ret)) (proc main () (return 0)))");
  SourceRun r = run_source(p, {}, 100);
  CHECK(r.trace.empty());
  CHECK(r.outcome.is_final());
  CHECK(r.outcome.value == 0);
}

TEST_CASE("fuel zero gives OutOfFuel") {
  Program p = parsed("(compartment C0 (exports (main 0 ret)) (proc main () (return 0)))");
  SourceRun r = run_source(p, {}, 0);
  CHECK(r.trace.empty());
  CHECK(r.outcome.kind == RunOutcome::Kind::OutOfFuel);
}

TEST_CASE("globals become zero-initialized per-compartment blocks") {
  Program p = parsed(R"((compartment C0 (exports (main 0 ret)) (global buf 4 public)
      (proc main () (return 0)))
    (compartment C1 (exports (f 0 ret)) (global buf 2 public)
      (proc f () (return 1))))");
  SourceInterp si(p);
  BlockId b0 = si.global_block("C0", "buf");
  BlockId b1 = si.global_block("C1", "buf");
  REQUIRE(b0 >= 0);
  REQUIRE(b1 >= 0);
  CHECK(b0 != b1);  // same-named globals in different compartments stay distinct
  CHECK(si.memory().block(b0).slots.size() == 4);
  CHECK(si.memory().block(b1).slots.size() == 2);
  CHECK(si.memory().block(b0).slots[0] == Value::intv(0));
  CHECK(si.memory().block(b0).owner != si.memory().block(b1).owner);
}

TEST_CASE("internal calls are silent, cross calls produce events") {
  Program p = parsed(R"((compartment C0
      (exports (main 0 ret))
      (imports (C1 g 2 ret))
      (proc main () (locals x y)
        (call x helper 3)
        (call y C1.g x 2)
        (return y))
      (proc helper (a) (return (op * a 2))))
    (compartment C1 (exports (g 2 ret))
      (proc g (a b) (return (op + a b)))))");
  SourceRun r = run_source(p, {}, 1000);
  REQUIRE(r.outcome.is_final());
  CHECK(r.outcome.value == 8);
  REQUIRE(r.trace.size() == 2);  // internal call/return emit nothing
  CHECK(to_line(r.trace[0]) == "CALL C0 C1.g (6,2)");
  CHECK(to_line(r.trace[1]) == "RET C1 C0 8");
  CHECK(well_bracketed(r.trace));
}

TEST_CASE("calling a proc whose import was removed gets the caller stuck") {
  Program p = parsed(R"((compartment C0 (exports (main 0 ret)) (imports (C1 g 1 ret))
      (proc main () (locals x) (call x C1.g 5) (return x)))
    (compartment C1 (exports (g 1 ret)) (proc g (a) (return a))))");
  p.compartments.at("C0").imports.clear();  // bypass the static check
  SourceRun r = run_source(p, {}, 1000);
  CHECK(r.outcome.is_stuck());
  CHECK(r.outcome.offender == "C0");
  REQUIRE(r.trace.size() == 1);
  CHECK(to_line(r.trace.back()) == "UB C0");
}

TEST_CASE("read syscall fills the buffer and returns the count") {
  Program p = parsed(R"((compartment C0 (exports (main 0 ret)) (syscalls read)
      (global buf 4 public)
      (proc main () (locals x) (call x sys.read buf 3) (return x))))");
  IoScript io;
  io.read_chunks.push_back({7, 8});
  SourceRun r = run_source(p, io, 1000);
  REQUIRE(r.outcome.is_final());
  CHECK(r.outcome.value == 2);
  REQUIRE(r.trace.size() == 1);
  CHECK(to_line(r.trace[0]) == "SYS C0 read (3) [7,8] -> 2 []");

  SourceInterp si(p);
  IoScript io2;
  io2.read_chunks.push_back({7, 8});
  while (si.status() == SourceInterp::Status::Running) si.step(io2);
  BlockId b = si.global_block("C0", "buf");
  CHECK(si.memory().block(b).slots[0] == Value::intv(7));
  CHECK(si.memory().block(b).slots[1] == Value::intv(8));
  CHECK(si.memory().block(b).slots[2] == Value::intv(0));
}

TEST_CASE("write syscall sends masked bytes and consumes an ack") {
  Program p = parsed(R"((compartment C0 (exports (main 0 ret)) (syscalls write)
      (global buf 2 public)
      (proc main () (locals x)
        (gstore buf 0 300)
        (gstore buf 1 (op neg 1))
        (call x sys.write buf 2)
        (return x))))");
  IoScript io;
  io.write_acks.push_back(9);  // clamped to the requested count
  SourceRun r = run_source(p, io, 1000);
  REQUIRE(r.outcome.is_final());
  CHECK(r.outcome.value == 2);
  REQUIRE(r.trace.size() == 1);
  CHECK(to_line(r.trace[0]) == "SYS C0 write (2) [] -> 2 [44,255]");
}

TEST_CASE("read beyond the buffer is undefined behavior") {
  Program p = parsed(R"((compartment C0 (exports (main 0 ret)) (syscalls read)
      (global buf 2 public)
      (proc main () (locals x n) (set n 3) (call x sys.read buf n) (return x))))");
  SourceRun r = run_source(p, {}, 1000);
  CHECK(r.outcome.is_stuck());
  CHECK(r.outcome.offender == "C0");
  CHECK(to_line(r.trace.back()) == "UB C0");
}

TEST_CASE("division by zero and dynamic out-of-bounds get the compartment stuck") {
  Program p1 = parsed(R"((compartment C0 (exports (main 0 ret))
      (proc main () (locals x z) (set x (op / 1 z)) (return x))))");
  SourceRun r1 = run_source(p1, {}, 100);
  CHECK(r1.outcome.is_stuck());
  CHECK(to_line(r1.trace.back()) == "UB C0");

  Program p2 = parsed(R"((compartment C0 (exports (main 0 ret)) (global buf 2 public)
      (proc main () (locals i) (set i 5) (gstore buf i 1) (return 0))))");
  SourceRun r2 = run_source(p2, {}, 100);
  CHECK(r2.outcome.is_stuck());
  CHECK(r2.outcome.offender == "C0");
}

TEST_CASE("locals are caller-saved across calls") {
  Program p = parsed(R"((compartment C0 (exports (main 0 ret)) (imports (C1 g 0 ret))
      (proc main () (locals x y) (set x 41) (call y C1.g) (return (op + x 1))))
    (compartment C1 (exports (g 0 ret)) (proc g () (locals x) (set x 7) (return x))))");
  SourceRun r = run_source(p, {}, 1000);
  REQUIRE(r.outcome.is_final());
  CHECK(r.outcome.value == 42);
}

TEST_CASE("runs are deterministic under a shared io script") {
  Program p = parsed(R"((compartment C0 (exports (main 0 ret)) (syscalls read write)
      (global buf 3 public)
      (proc main () (locals x y)
        (call x sys.read buf 3)
        (call y sys.write buf 2)
        (return (op + x y)))))");
  IoScript io;
  io.read_chunks.push_back({1, 2, 3});
  io.write_acks.push_back(1);
  SourceRun a = run_source(p, io, 1000);
  SourceRun b = run_source(p, io, 1000);
  CHECK(serialize_trace(a.trace) == serialize_trace(b.trace));
  CHECK(a.outcome.kind == b.outcome.kind);
  CHECK(a.outcome.value == b.outcome.value);
}

TEST_CASE("bounded while loops terminate and compute") {
  Program p = parsed(R"((compartment C0 (exports (main 0 ret))
      (proc main () (locals i acc)
        (while (op < i 5) (seq (set acc (op + acc i)) (set i (op + i 1))))
        (return acc))))");
  SourceRun r = run_source(p, {}, 10000);
  REQUIRE(r.outcome.is_final());
  CHECK(r.outcome.value == 10);
}
