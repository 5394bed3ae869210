#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "secomp/backtrans.hpp"
#include "secomp/compile.hpp"
#include "secomp/lang.hpp"
#include "secomp/sem_source.hpp"
#include "secomp/sem_target.hpp"
#include "secomp/target.hpp"
#include "secomp/trace.hpp"

namespace secomp {

// ---------------------------------------------------------------------------
// Random generation. Everything is a pure function of its config, so runs
// are reproducible from (seed, knobs).

struct GenConfig {
  uint64_t seed = 0;
  int n_compartments = 4;
  int max_procs = 3;
  int max_events = 1200;
  int max_deltas_per_event = 3;
  int max_args = 8;
};

struct EnvGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // undirected, connected
};

struct Environment {
  Interface iface;
  EnvGraph graph;
  GlobalsLayout globals;  // public buffers per compartment
  std::string main_comp;
};

Environment gen_environment(const GenConfig& cfg);
bool env_connected(const Environment& env);

struct GenTrace {
  ITrace it;
  IoScript io;  // script that reproduces exactly these events
};

GenTrace gen_informative_trace(const Environment& env, const GenConfig& cfg);

struct GenProgram {
  Program p;
  IoScript io;
  std::string ub_comp;  // compartment carrying injected UB (may be empty)
};

GenProgram gen_program(const Environment& env, const GenConfig& cfg,
                       bool inject_ub = false);

// ---------------------------------------------------------------------------
// Executable property checks.

struct Verdict {
  bool pass = true;
  bool vacuous = false;
  std::string detail;
};

// Undef-free source runs compile to trace-identical target runs.
Verdict prop_fcc(const Program& p, const IoScript& io, int64_t fuel);

// The source run of a program explains every target trace up to Undef.
Verdict prop_bcc(const Program& p, const IoScript& io, int64_t fuel);

// Recording flavor: run a target program, back-translate its recorded
// annotated trace, and replay at source level.
Verdict prop_backtranslation(const TargetProgram& tp, const IoScript& io, int64_t fuel);

// Generated flavor: replay a well-formed generated trace (Def.-4-style check
// used by the acceptance corpus).
Verdict prop_bt_replay(const Environment& env, const GenTrace& gt, int64_t fuel);

// The whole back-translated program compiles.
Verdict prop_bt_compiles(const Environment& env, const ITrace& it);

// Two trace-equal variant buildups recompose across a context split into a
// third run with the identical trace.
Verdict prop_recomposition(const Environment& env, const GenTrace& gt,
                           const std::set<std::string>& context_ks, int64_t fuel);

// UB injected into the program side is always blamed on the program side.
Verdict prop_blame(const Environment& env, const GenTrace& gt,
                   const std::set<std::string>& context_ks, uint64_t inject_seed,
                   int64_t fuel);

struct AdversarialCase {
  std::string name;
  std::string attacker;
  TargetProgram program;
};

std::vector<AdversarialCase> adversarial_cases();
Verdict run_adversarial(const AdversarialCase& c, int64_t fuel);

// ---------------------------------------------------------------------------
// Fuzz driver.

struct TrialResult {
  uint64_t seed = 0;
  Verdict verdict;
  // artifact file name -> contents, persisted under corpus/<property>/<seed>/
  std::vector<std::pair<std::string, std::string>> artifacts;
  std::vector<std::pair<std::string, std::string>> shrink_artifacts;
};

struct FuzzReport {
  std::string property;
  int trials = 0;
  int passed = 0;
  int failed = 0;
  std::vector<TrialResult> results;
};

bool known_property(const std::string& name);

// Runs `trials` independent trials (trial i uses seed base_seed + i) with up
// to `jobs` workers; results are merged in trial order so output is
// byte-identical across runs. out_dir empty = don't write artifacts.
FuzzReport run_fuzz(const std::string& property, uint64_t base_seed, int trials,
                    const std::string& out_dir, int jobs);

std::string verdict_line(const std::string& property, uint64_t seed, const Verdict& v);

// True when some call/return event crosses between the context set and its
// complement.
bool has_side_crossing(const Trace& t, const std::set<std::string>& context);

// Splits a target program by compartment set (first = ks side).
std::pair<TargetProgram, TargetProgram> tsplit(const TargetProgram& tp,
                                               const std::set<std::string>& ks);

}  // namespace secomp
