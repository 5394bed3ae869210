#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "secomp/lang.hpp"

using namespace secomp;

namespace {

const char* kMinimal = "(compartment C0 (exports (main 0 ret)) (proc main () (return 0)))";

const char* kTwoComp = R"((compartment C0
  (exports (main 0 ret))
  (imports (C1 g 1 ret))
  (proc main () (locals x) (call x C1.g 5) (return x)))
(compartment C1
  (exports (g 1 ret))
  (global buf 4 public)
  (proc g (a) (return (op + a 1)))))";

std::string diag_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Diag& d) {
    return d.code;
  }
  return "";
}

}  // namespace

TEST_CASE("parse minimal program") {
  Program p = parse_program(kMinimal);
  CHECK(p.compartments.size() == 1);
  REQUIRE(p.main.has_value());
  CHECK(p.main->first == "C0");
  CHECK(p.main->second == "main");
  check_interfaces(p);
}

TEST_CASE("duplicate compartment names are rejected") {
  std::string text = std::string(kMinimal) +
                     "(compartment C0 (exports (f 0 ret)) (proc f () (return 1)))";
  CHECK(diag_code([&] { parse_program(text); }) == "DuplicateName");
}

TEST_CASE("call without matching import is an unknown reference") {
  const char* text = R"((compartment C0 (exports (main 0 ret))
    (proc main () (seq (call _ C1.g 1) (return 0)))))";
  CHECK(diag_code([&] { parse_program(text); }) == "UnknownReference");
}

TEST_CASE("interface check accepts matching import/export") {
  Program p = parse_program(kTwoComp);
  check_interfaces(p);
}

TEST_CASE("signature mismatch between import and export") {
  const char* text = R"((compartment C0 (exports (main 0 ret)) (imports (C1 g 1 ret))
    (proc main () (seq (call _ C1.g 2) (return 0))))
(compartment C1 (exports (g 2 ret)) (proc g (a b) (return a))))";
  Program p = parse_program(text);
  CHECK(diag_code([&] { check_interfaces(p); }) == "SignatureMismatch");
}

TEST_CASE("undeclared syscall is rejected by the interface check") {
  const char* text = R"((compartment C0 (exports (main 0 ret)) (global buf 2 public)
    (proc main () (locals x) (call x sys.read buf 1) (return x))))";
  Program p = parse_program(text);
  CHECK(diag_code([&] { check_interfaces(p); }) == "SyscallNotAllowed");
}

TEST_CASE("private syscall buffers are rejected") {
  const char* text = R"((compartment C0 (exports (main 0 ret)) (syscalls read)
    (global buf 2 private)
    (proc main () (locals x) (call x sys.read buf 1) (return x))))";
  Program p = parse_program(text);
  CHECK(diag_code([&] { check_interfaces(p); }) == "SyscallNotAllowed");
}

TEST_CASE("constant out-of-bounds global index is rejected statically") {
  const char* text = R"((compartment C0 (exports (main 0 ret)) (global buf 2 public)
    (proc main () (gstore buf 2 1) (return 0))))";
  Program p = parse_program(text);
  CHECK(diag_code([&] { check_interfaces(p); }) == "OutOfBounds");
}

TEST_CASE("value procs must return on all paths") {
  const char* text = R"((compartment C0 (exports (main 0 ret))
    (proc main () (locals x) (if x (return 1) (set x 2)))))";
  Program p = parse_program(text);
  CHECK(diag_code([&] { check_interfaces(p); }) == "SignatureMismatch");
}

TEST_CASE("link joins disjoint partial programs") {
  Program a = parse_program(R"((compartment C0
    (exports (main 0 ret)) (imports (C1 g 1 ret))
    (proc main () (locals x) (call x C1.g 1) (return x))))");
  Program b = parse_program(R"((compartment C1
    (exports (g 1 ret)) (proc g (a) (return a))))");
  Program w = link(a, b);
  CHECK(w.compartments.size() == 2);
  check_interfaces(w);

  CHECK(diag_code([&] { link(a, a); }) == "NameClash");
}

TEST_CASE("split partitions and relinks to the original") {
  Program p = parse_program(kTwoComp);
  auto [first, second] = split(p, {"C0"});
  CHECK(first.compartments.size() == 1);
  CHECK(second.compartments.size() == 1);
  CHECK(first.compartments.count("C0") == 1);
  CHECK(program_equal(link(first, second), p));

  auto [none, all] = split(p, {});
  CHECK(none.compartments.empty());
  CHECK(program_equal(all, p));
  auto [all2, none2] = split(p, {"C0", "C1"});
  CHECK(none2.compartments.empty());
  CHECK(program_equal(all2, p));

  CHECK(diag_code([&] { split(p, {"Cx"}); }) == "UnknownCompartment");
}

TEST_CASE("interface projection") {
  Program p = parse_program(kTwoComp);
  Interface i = interface_of(p);

  CHECK(project_interface(i, {"C0", "C1"}) == i);
  CHECK(project_interface(i, {}).compartments.empty());

  Interface only1 = project_interface(i, {"C1"});
  REQUIRE(only1.compartments.size() == 1);
  const CompartmentIface& c1 = only1.compartments.at("C1");
  CHECK(c1.exports == i.compartments.at("C1").exports);
  CHECK(c1.imports == i.compartments.at("C1").imports);
  CHECK(c1.syscalls == i.compartments.at("C1").syscalls);

  // project(interface_of(p), ks) = interface_of(first(split(p, ks)))
  auto [first, second] = split(p, {"C0"});
  CHECK(project_interface(i, {"C0"}) == interface_of(first));

  CHECK(diag_code([&] { project_interface(i, {"Cx"}); }) == "UnknownCompartment");
}

TEST_CASE("program serialization is a parse fixpoint") {
  for (const char* text : {kMinimal, kTwoComp}) {
    Program p = parse_program(text);
    std::string s1 = serialize_program(p);
    Program p2 = parse_program(s1);
    CHECK(program_equal(p, p2));
    CHECK(serialize_program(p2) == s1);
  }
}

TEST_CASE("interface serialization round trip") {
  Program p = parse_program(kTwoComp);
  Interface i = interface_of(p);
  CHECK(parse_interface(serialize_interface(i)) == i);
}

TEST_CASE("nine-argument signatures parse and check") {
  const char* text = R"((compartment C0 (exports (main 0 ret)) (imports (C1 g 9 ret))
    (proc main () (locals x) (call x C1.g 1 2 3 4 5 6 7 8 9) (return x)))
(compartment C1 (exports (g 9 ret))
  (proc g (a b c d e f g h i) (return (op + a i)))))";
  Program p = parse_program(text);
  check_interfaces(p);
  CHECK(p.compartments.at("C1").exports.at("g").param_count == 9);
}
