#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "secomp/harness.hpp"

using namespace secomp;

TEST_CASE("environments are deterministic, connected, and well shaped") {
  GenConfig cfg;
  cfg.seed = 11;
  cfg.n_compartments = 5;
  Environment a = gen_environment(cfg);
  Environment b = gen_environment(cfg);
  CHECK(serialize_interface(a.iface) == serialize_interface(b.iface));
  CHECK(env_connected(a));
  CHECK(a.iface.compartments.size() == 5);
  for (const auto& [name, c] : a.iface.compartments) {
    CHECK_FALSE(c.exports.empty());
    // imports point at real exports with equal signatures
    for (const auto& [k, sig] : c.imports) {
      const auto& ex = a.iface.compartments.at(k.comp).exports;
      REQUIRE(ex.count(k.proc) == 1);
      CHECK(ex.at(k.proc) == sig);
    }
  }

  GenConfig one;
  one.seed = 3;
  one.n_compartments = 1;
  Environment e1 = gen_environment(one);
  CHECK(e1.iface.compartments.size() == 1);
  CHECK(e1.iface.compartments.at("C0").imports.empty());
  CHECK(env_connected(e1));
}

TEST_CASE("trace generation respects the event budget") {
  GenConfig cfg;
  cfg.seed = 5;
  cfg.max_events = 0;
  Environment env = gen_environment(cfg);
  CHECK(gen_informative_trace(env, cfg).it.empty());

  cfg.max_events = 50;
  GenTrace gt = gen_informative_trace(env, cfg);
  CHECK(gt.it.size() <= 50);
  CHECK(serialize_itrace(gen_informative_trace(env, cfg).it) ==
        serialize_itrace(gt.it));  // deterministic
}

TEST_CASE("generated traces end with a drained call stack") {
  for (uint64_t seed = 40; seed < 60; seed++) {
    GenConfig cfg;
    cfg.seed = seed;
    cfg.n_compartments = 3;
    Environment env = gen_environment(cfg);
    GenTrace gt = gen_informative_trace(env, cfg);
    CHECK(well_bracketed(project(gt.it)));
    int depth = 0;
    for (const Event& e : project(gt.it)) {
      if (e.kind == Event::Kind::Call) depth++;
      if (e.kind == Event::Kind::Return) depth--;
    }
    CHECK(depth == 0);
  }
}

TEST_CASE("generated programs pass the checks and terminate") {
  for (uint64_t seed = 0; seed < 100; seed++) {
    GenConfig cfg;
    cfg.seed = seed;
    cfg.n_compartments = 2 + static_cast<int>(seed % 4);
    Environment env = gen_environment(cfg);
    GenProgram gp = gen_program(env, cfg);
    check_interfaces(gp.p);
    SourceRun r = run_source(gp.p, gp.io, 2000000);
    CHECK(r.outcome.kind != RunOutcome::Kind::OutOfFuel);
    CHECK_FALSE(has_undef(r.trace));  // UB-free by construction
  }
}

TEST_CASE("split and link round trip on generated programs") {
  for (uint64_t seed = 0; seed < 50; seed++) {
    GenConfig cfg;
    cfg.seed = seed;
    cfg.n_compartments = 2 + static_cast<int>(seed % 4);
    Environment env = gen_environment(cfg);
    GenProgram gp = gen_program(env, cfg);
    std::set<std::string> ks;
    int i = 0;
    for (const auto& [name, c] : gp.p.compartments) {
      (void)c;
      if (i++ % 2 == 0) ks.insert(name);
    }
    auto [first, second] = split(gp.p, ks);
    CHECK(first.compartments.size() == ks.size());
    CHECK(program_equal(link(first, second), gp.p));
    CHECK(project_interface(interface_of(gp.p), ks) == interface_of(first));
  }
}

TEST_CASE("fcc holds on a minimal program and a small corpus") {
  Program p = parse_program(
      "(compartment C0 (exports (main 0 ret)) (proc main () (return 0)))");
  check_interfaces(p);
  Verdict v = prop_fcc(p, {}, 10000);
  CHECK(v.pass);
  CHECK_FALSE(v.vacuous);

  for (uint64_t seed = 200; seed < 230; seed++) {
    GenConfig cfg;
    cfg.seed = seed;
    cfg.max_args = 10;
    Environment env = gen_environment(cfg);
    GenProgram gp = gen_program(env, cfg);
    Verdict w = prop_fcc(gp.p, gp.io, 40000000);
    INFO(seed, ": ", w.detail);
    CHECK(w.pass);
  }
}

TEST_CASE("bcc holds on programs with injected UB") {
  int fired = 0;
  for (uint64_t seed = 400; seed < 430; seed++) {
    GenConfig cfg;
    cfg.seed = seed;
    Environment env = gen_environment(cfg);
    GenProgram gp = gen_program(env, cfg, /*inject_ub=*/true);
    Verdict w = prop_bcc(gp.p, gp.io, 40000000);
    INFO(seed, ": ", w.detail);
    CHECK(w.pass);
    SourceRun r = run_source(gp.p, gp.io, 40000000);
    if (has_undef(r.trace)) fired++;
  }
  CHECK(fired > 10);  // the injection is usually reachable
}

TEST_CASE("recomposition across random context splits") {
  int checked = 0;
  for (uint64_t seed = 600; seed < 612; seed++) {
    GenConfig cfg;
    cfg.seed = seed;
    cfg.n_compartments = 3 + static_cast<int>(seed % 3);
    cfg.max_events = 120;
    Environment env = gen_environment(cfg);
    GenTrace gt = gen_informative_trace(env, cfg);
    std::set<std::string> ks = {"C0"};
    if (!env.iface.compartments.count("C1")) continue;
    Verdict v = prop_recomposition(env, gt, ks, 150000000);
    INFO(seed, ": ", v.detail);
    CHECK(v.pass);
    if (!v.vacuous) checked++;
  }
  CHECK(checked > 5);
}

TEST_CASE("blame always lands on the program side") {
  int checked = 0;
  for (uint64_t seed = 700; seed < 712; seed++) {
    GenConfig cfg;
    cfg.seed = seed;
    cfg.n_compartments = 3;
    cfg.max_events = 120;
    Environment env = gen_environment(cfg);
    GenTrace gt = gen_informative_trace(env, cfg);
    std::set<std::string> context = {"C0"};
    Verdict v = prop_blame(env, gt, context, seed * 31 + 5, 40000000);
    INFO(seed, ": ", v.detail);
    CHECK(v.pass);
    if (!v.vacuous) checked++;
  }
  CHECK(checked > 5);
}

TEST_CASE("the adversarial suite covers at least ten attackers, all stuck") {
  auto cases = adversarial_cases();
  CHECK(cases.size() >= 10);
  for (const auto& c : cases) {
    Verdict v = run_adversarial(c, 100000);
    INFO(c.name, ": ", v.detail);
    CHECK(v.pass);
  }
}

TEST_CASE("fuzz verdicts are deterministic") {
  FuzzReport a = run_fuzz("fcc", 9000, 6, "", 1);
  FuzzReport b = run_fuzz("fcc", 9000, 6, "", 2);
  REQUIRE(a.results.size() == b.results.size());
  for (size_t i = 0; i < a.results.size(); i++) {
    CHECK(verdict_line("fcc", a.results[i].seed, a.results[i].verdict) ==
          verdict_line("fcc", b.results[i].seed, b.results[i].verdict));
  }
  CHECK(a.passed == 6);
}
