// Acceptance suite: one line per criterion, every threshold pinned here.
// Exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <vector>

#include "secomp/backtrans.hpp"
#include "secomp/compile.hpp"
#include "secomp/harness.hpp"
#include "secomp/sem_source.hpp"
#include "secomp/sem_target.hpp"

using namespace secomp;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int n, const std::string& name, bool pass, const std::string& detail) {
  std::printf("criterion %d (%s): %s - %s\n", n, name.c_str(), pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) failures++;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr int64_t kFuelSrc = 40'000'000;
constexpr int64_t kFuelTgt = 150'000'000;

GenConfig trace_config(uint64_t seed) {
  GenConfig cfg;
  cfg.seed = seed;
  cfg.n_compartments = 2 + static_cast<int>((seed * 7919) % 5);  // 2..6
  return cfg;
}

struct Corpus {
  std::vector<Environment> envs;
  std::vector<GenTrace> traces;
  double mean_len = 0;
  size_t max_len = 0;
};

Corpus build_corpus(uint64_t base_seed, int n) {
  Corpus c;
  size_t total = 0;
  for (int i = 0; i < n; i++) {
    GenConfig cfg = trace_config(base_seed + static_cast<uint64_t>(i));
    Environment env = gen_environment(cfg);
    GenTrace gt = gen_informative_trace(env, cfg);
    total += gt.it.size();
    c.max_len = std::max(c.max_len, gt.it.size());
    c.envs.push_back(std::move(env));
    c.traces.push_back(std::move(gt));
  }
  c.mean_len = n > 0 ? static_cast<double>(total) / n : 0;
  return c;
}

}  // namespace

// Criterion 1: 1000 generated (environment, well-formed trace) pairs with
// mean length >= 300 and max >= 880; back-translation compiles on 100% of
// them within 10 minutes.
static Corpus criterion_1(uint64_t base_seed) {
  auto t0 = Clock::now();
  Corpus corpus = build_corpus(base_seed, 1000);
  int ok = 0;
  std::string first_fail;
  for (size_t i = 0; i < corpus.traces.size(); i++) {
    Verdict v = prop_bt_compiles(corpus.envs[i], corpus.traces[i].it);
    if (v.pass)
      ok++;
    else if (first_fail.empty())
      first_fail = "seed " + std::to_string(base_seed + i) + ": " + v.detail;
  }
  double secs = seconds_since(t0);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%d/1000 compiled, mean length %.1f (>=300), max %zu (>=880), %.1fs (<=600)",
                ok, corpus.mean_len, corpus.max_len, secs);
  bool pass = ok == 1000 && corpus.mean_len >= 300.0 && corpus.max_len >= 880 &&
              secs <= 600.0;
  report(1, "back-translation compiles", pass,
         std::string(buf) + (first_fail.empty() ? "" : "; first failure: " + first_fail));
  return corpus;
}

// Criterion 2: on the same pairs, the back-translated program's source run
// reproduces the projected trace byte-identically with zero Undef.
static void criterion_2(const Corpus& corpus, uint64_t base_seed) {
  int ok = 0;
  std::string first_fail;
  for (size_t i = 0; i < corpus.traces.size(); i++) {
    Verdict v = prop_bt_replay(corpus.envs[i], corpus.traces[i], kFuelSrc);
    if (v.pass)
      ok++;
    else if (first_fail.empty())
      first_fail = "seed " + std::to_string(base_seed + i) + ": " + v.detail;
  }
  report(2, "back-translation correctness", ok == 1000,
         std::to_string(ok) + "/1000 replays byte-identical and Undef-free" +
             (first_fail.empty() ? "" : "; first failure: " + first_fail));
}

// Criterion 3: 500 UB-free programs have identical source/target traces;
// 200 programs with injected UB satisfy the prefix relation.
static void criterion_3() {
  int fcc_ok = 0, fcc_vacuous = 0;
  std::string first_fail;
  for (uint64_t seed = 0; seed < 500; seed++) {
    GenConfig cfg;
    cfg.seed = 31000 + seed;
    cfg.n_compartments = 2 + static_cast<int>(seed % 4);
    cfg.max_args = 10;
    Environment env = gen_environment(cfg);
    GenProgram gp = gen_program(env, cfg);
    Verdict v = prop_fcc(gp.p, gp.io, kFuelSrc);
    if (v.pass) fcc_ok++;
    if (v.vacuous) fcc_vacuous++;
    if (!v.pass && first_fail.empty())
      first_fail = "fcc seed " + std::to_string(cfg.seed) + ": " + v.detail;
  }
  int bcc_ok = 0;
  for (uint64_t seed = 0; seed < 200; seed++) {
    GenConfig cfg;
    cfg.seed = 41000 + seed;
    cfg.n_compartments = 2 + static_cast<int>(seed % 4);
    Environment env = gen_environment(cfg);
    GenProgram gp = gen_program(env, cfg, /*inject_ub=*/true);
    Verdict v = prop_bcc(gp.p, gp.io, kFuelSrc);
    if (v.pass) bcc_ok++;
    if (!v.pass && first_fail.empty())
      first_fail = "bcc seed " + std::to_string(cfg.seed) + ": " + v.detail;
  }
  report(3, "fcc/bcc", fcc_ok == 500 && bcc_ok == 200,
         "fcc " + std::to_string(fcc_ok) + "/500 (" + std::to_string(fcc_vacuous) +
             " vacuous), bcc " + std::to_string(bcc_ok) + "/200" +
             (first_fail.empty() ? "" : "; first failure: " + first_fail));
}

// Criteria 4 and 5: 300 recomposition and 300 blame instances over random
// context splits, each with the stated side conditions.
static void criterion_4_5() {
  std::mt19937_64 rng(0x5eedbeef);
  int rec_ok = 0, rec_total = 0;
  int blame_ok = 0, blame_total = 0;
  std::string rec_fail, blame_fail;
  uint64_t seed = 51000;
  while ((rec_total < 300 || blame_total < 300) && seed < 51000 + 5000) {
    GenConfig cfg = trace_config(seed);
    cfg.seed = seed;
    seed++;
    if (cfg.n_compartments < 2) continue;
    Environment env = gen_environment(cfg);
    GenTrace gt = gen_informative_trace(env, cfg);

    std::vector<std::string> names;
    for (const auto& [name, c] : env.iface.compartments) {
      (void)c;
      names.push_back(name);
    }
    // random proper non-empty subset as the context side
    std::set<std::string> ctx;
    for (int attempt = 0; attempt < 32 && (ctx.empty() || ctx.size() == names.size());
         attempt++) {
      ctx.clear();
      for (const auto& n : names)
        if (rng() % 2) ctx.insert(n);
    }
    if (ctx.empty() || ctx.size() == names.size()) continue;

    if (rec_total < 300 && has_side_crossing(project(gt.it), ctx)) {
      Verdict v = prop_recomposition(env, gt, ctx, kFuelTgt);
      if (!v.vacuous) {
        rec_total++;
        if (v.pass)
          rec_ok++;
        else if (rec_fail.empty())
          rec_fail = "seed " + std::to_string(cfg.seed) + ": " + v.detail;
      }
    }
    if (blame_total < 300) {
      bool program_side_has_events = false;
      for (const IEvent& e : gt.it)
        if (!ctx.count(e.f_comp)) {
          program_side_has_events = true;
          break;
        }
      if (program_side_has_events) {
        Verdict v = prop_blame(env, gt, ctx, cfg.seed * 1315423911ULL, kFuelSrc);
        if (!v.vacuous) {
          blame_total++;
          if (v.pass)
            blame_ok++;
          else if (blame_fail.empty())
            blame_fail = "seed " + std::to_string(cfg.seed) + ": " + v.detail;
        }
      }
    }
  }
  report(4, "recomposition", rec_ok == 300 && rec_total == 300,
         std::to_string(rec_ok) + "/" + std::to_string(rec_total) +
             " recomposed traces identical" + (rec_fail.empty() ? "" : "; " + rec_fail));
  report(5, "blame", blame_ok == 300 && blame_total == 300,
         std::to_string(blame_ok) + "/" + std::to_string(blame_total) +
             " runs blamed the program side" +
             (blame_fail.empty() ? "" : "; " + blame_fail));
}

// Criterion 6: every hand-written attacker ends Stuck(attacker) with the
// trace closing on Undef(attacker).
static void criterion_6() {
  auto cases = adversarial_cases();
  int ok = 0;
  std::string detail;
  for (const auto& c : cases) {
    Verdict v = run_adversarial(c, 100000);
    if (v.pass)
      ok++;
    else
      detail += (detail.empty() ? "" : "; ") + v.detail;
  }
  bool pass = cases.size() >= 10 && ok == static_cast<int>(cases.size());
  report(6, "adversarial suite", pass,
         std::to_string(ok) + "/" + std::to_string(cases.size()) +
             " attackers stuck and blamed" + (detail.empty() ? "" : "; " + detail));
}

// Criterion 7: structural invariants over corpus runs: zero cross-compartment
// accesses in the memory audit, Dyck-balanced call/return events, projection
// identity, and byte-identical reruns.
static void criterion_7() {
  int runs = 0, audit_bad = 0, dyck_bad = 0, proj_bad = 0, determinism_bad = 0;

  for (uint64_t seed = 61000; seed < 61100; seed++) {
    GenConfig cfg;
    cfg.seed = seed;
    cfg.n_compartments = 2 + static_cast<int>(seed % 4);
    Environment env = gen_environment(cfg);
    GenProgram gp = gen_program(env, cfg, seed % 3 == 0);

    // target run with the auditor on
    TargetProgram tp = compile_program(gp.p);
    Machine m(tp);
    IoScript io = gp.io;
    int64_t fuel = kFuelTgt;
    while (fuel-- > 0 && m.status() == Machine::Status::Running) m.step(io);
    runs++;
    if (m.memory().audit().cross_violations != 0 ||
        m.memory().audit().owner_changes != 0)
      audit_bad++;
    if (!well_bracketed(m.trace())) dyck_bad++;
    Trace plain = m.trace();
    if (!plain.empty() && plain.back().kind == Event::Kind::Undef) plain.pop_back();
    if (serialize_trace(project(m.itrace())) != serialize_trace(plain)) proj_bad++;

    // source run + rerun determinism
    SourceRun s1 = run_source(gp.p, gp.io, kFuelSrc);
    SourceRun s2 = run_source(gp.p, gp.io, kFuelSrc);
    if (serialize_trace(s1.trace) != serialize_trace(s2.trace)) determinism_bad++;
    if (!well_bracketed(s1.trace)) dyck_bad++;

    SourceInterp si(gp.p);
    IoScript io2 = gp.io;
    int64_t fuel2 = kFuelSrc;
    while (fuel2-- > 0 && si.status() == SourceInterp::Status::Running) si.step(io2);
    if (si.memory().audit().cross_violations != 0 ||
        si.memory().audit().owner_changes != 0)
      audit_bad++;
  }

  // replay runs from the generated-trace side
  for (uint64_t seed = 62000; seed < 62050; seed++) {
    GenConfig cfg = trace_config(seed);
    cfg.seed = seed;
    Environment env = gen_environment(cfg);
    GenTrace gt = gen_informative_trace(env, cfg);
    Program btp = back_translate_all(env.iface, gt.it);
    SourceInterp si(btp);
    IoScript io = gt.io;
    int64_t fuel = kFuelSrc;
    while (fuel-- > 0 && si.status() == SourceInterp::Status::Running) si.step(io);
    runs++;
    if (si.memory().audit().cross_violations != 0 ||
        si.memory().audit().owner_changes != 0)
      audit_bad++;
    if (!well_bracketed(si.trace())) dyck_bad++;
  }

  // command-level determinism of fuzz verdicts
  FuzzReport a = run_fuzz("fcc", 63000, 10, "", 1);
  FuzzReport b = run_fuzz("fcc", 63000, 10, "", 1);
  for (size_t i = 0; i < a.results.size(); i++)
    if (verdict_line("fcc", a.results[i].seed, a.results[i].verdict) !=
        verdict_line("fcc", b.results[i].seed, b.results[i].verdict))
      determinism_bad++;

  bool pass = audit_bad == 0 && dyck_bad == 0 && proj_bad == 0 && determinism_bad == 0;
  report(7, "structural invariants", pass,
         std::to_string(runs) + " audited runs: " + std::to_string(audit_bad) +
             " ownership violations, " + std::to_string(dyck_bad) +
             " bracket violations, " + std::to_string(proj_bad) +
             " projection mismatches, " + std::to_string(determinism_bad) +
             " nondeterministic reruns");
}

int main() {
  uint64_t base_seed = 21000;
  Corpus corpus = criterion_1(base_seed);
  criterion_2(corpus, base_seed);
  criterion_3();
  criterion_4_5();
  criterion_6();
  criterion_7();
  if (failures == 0) {
    std::printf("all acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria failed\n", failures);
  return 1;
}
