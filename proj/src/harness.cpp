#include "secomp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <functional>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace secomp {

namespace {

constexpr int64_t kFuelSrc = 40'000'000;
constexpr int64_t kFuelTgt = 150'000'000;
constexpr int kMaxCallDepth = 64;

struct Rng {
  std::mt19937_64 g;
  explicit Rng(uint64_t seed) : g(seed) {}
  uint64_t next() { return g(); }
  int64_t range(int64_t lo, int64_t hi) {  // inclusive
    return lo + static_cast<int64_t>(g() % static_cast<uint64_t>(hi - lo + 1));
  }
  bool chance(double p) { return (g() % 10000) < static_cast<uint64_t>(p * 10000); }
  template <class T>
  const T& pick(const std::vector<T>& xs) {
    return xs[g() % xs.size()];
  }
};

std::string comp_name(int i) { return "C" + std::to_string(i); }

}  // namespace

// ---------------------------------------------------------------------------
// Environment generation: a random connected graph of compartments, mutual
// imports along each edge, per-compartment public buffers and syscall
// allowances. The first compartment exports main.

Environment gen_environment(const GenConfig& cfg) {
  Rng rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 1);
  int n = std::max(1, cfg.n_compartments);
  Environment env;
  env.graph.n = n;
  env.main_comp = comp_name(0);

  std::vector<std::vector<std::pair<std::string, Signature>>> exports(n);
  for (int i = 0; i < n; i++) {
    CompartmentIface ci;
    int nprocs = static_cast<int>(rng.range(1, std::max(1, cfg.max_procs)));
    for (int p = 0; p < nprocs; p++) {
      Signature sig;
      sig.param_count = static_cast<int>(rng.range(0, std::max(0, cfg.max_args)));
      if (sig.param_count > 4 && rng.chance(0.5))
        sig.param_count = static_cast<int>(rng.range(0, 4));
      sig.returns_value = rng.chance(0.8);
      std::string pn = "f" + std::to_string(p);
      ci.exports[pn] = sig;
      exports[i].push_back({pn, sig});
    }
    if (i == 0) {
      Signature m{0, true};
      ci.exports["main"] = m;
      exports[0].push_back({"main", m});
    }
    if (rng.chance(0.75)) ci.syscalls.insert("read");
    if (rng.chance(0.75)) ci.syscalls.insert("write");
    env.iface.compartments[comp_name(i)] = std::move(ci);

    auto& globals = env.globals[comp_name(i)];
    int ng = static_cast<int>(rng.range(1, 3));
    for (int g = 0; g < ng; g++)
      globals.push_back(GlobalDecl{"g" + std::to_string(g), rng.range(1, 8), true});
  }

  // Random spanning tree plus Bernoulli(0.3) extra edges.
  std::set<std::pair<int, int>> edges;
  for (int i = 1; i < n; i++) {
    int j = static_cast<int>(rng.range(0, i - 1));
    edges.insert({std::min(i, j), std::max(i, j)});
  }
  for (int i = 0; i < n; i++)
    for (int j = i + 1; j < n; j++)
      if (!edges.count({i, j}) && rng.chance(0.3)) edges.insert({i, j});

  auto import_some = [&](int from, int into) {
    auto& ci = env.iface.compartments[comp_name(from)];
    const auto& ex = exports[into];
    size_t count = 1 + rng.next() % ex.size();
    std::vector<size_t> order(ex.size());
    for (size_t k = 0; k < order.size(); k++) order[k] = k;
    for (size_t k = order.size(); k > 1; k--)
      std::swap(order[k - 1], order[rng.next() % k]);
    for (size_t k = 0; k < count; k++) {
      const auto& [pn, sig] = ex[order[k]];
      ci.imports[{comp_name(into), pn}] = sig;
    }
  };
  for (const auto& [a, b] : edges) {
    env.graph.edges.push_back({a, b});
    import_some(a, b);
    import_some(b, a);
  }
  return env;
}

bool env_connected(const Environment& env) {
  int n = env.graph.n;
  if (n <= 1) return true;
  std::vector<std::vector<int>> adj(n);
  for (auto [a, b] : env.graph.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<bool> seen(n, false);
  std::vector<int> work{0};
  seen[0] = true;
  int reached = 1;
  while (!work.empty()) {
    int v = work.back();
    work.pop_back();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = true;
        reached++;
        work.push_back(w);
      }
  }
  return reached == n;
}

// ---------------------------------------------------------------------------
// Trace generation: directly threads the well-formedness state, emitting
// events consistent with the interfaces and co-generating the io script
// that reproduces them. The call stack is drained before the trace ends, so
// replays finish cleanly.

GenTrace gen_informative_trace(const Environment& env, const GenConfig& cfg) {
  Rng rng(cfg.seed * 0x2545f4914f6cdd1dULL + 7);
  GenTrace out;

  int64_t target = rng.next() % 97 == 0 ? rng.range(880, 1000) : rng.range(100, 620);
  target = std::min<int64_t>(target, cfg.max_events);

  struct Ctx {
    std::string comp, proc;
    Signature sig;
  };
  std::vector<Ctx> stack;
  Ctx cur{env.main_comp, "main", Signature{0, true}};

  std::map<std::string, std::map<std::string, std::vector<int64_t>>> image;
  for (const auto& [c, decls] : env.globals)
    for (const GlobalDecl& g : decls)
      image[c][g.name].assign(static_cast<size_t>(g.size), 0);

  std::vector<MemDelta> carry;

  auto fresh_deltas = [&]() {
    std::vector<MemDelta> ds = std::move(carry);
    carry.clear();
    auto gl = env.globals.find(cur.comp);
    if (gl == env.globals.end() || gl->second.empty()) return ds;
    int n = static_cast<int>(rng.next() % (static_cast<uint64_t>(cfg.max_deltas_per_event) + 1));
    for (int i = 0; i < n; i++) {
      const GlobalDecl& g = gl->second[rng.next() % gl->second.size()];
      if (g.size == 0) continue;
      int64_t off = rng.range(0, g.size - 1);
      int64_t v = rng.range(0, 255);
      ds.push_back(MemDelta::store(cur.comp, g.name, off, Value::intv(v)));
      image[cur.comp][g.name][static_cast<size_t>(off)] = v;
    }
    return ds;
  };

  for (int64_t emitted = 0; emitted < target;) {
    int64_t remaining = target - emitted;
    int64_t depth = static_cast<int64_t>(stack.size());
    const CompartmentIface& ci = env.iface.compartments.at(cur.comp);

    bool must_return = remaining <= depth;
    std::vector<ImportKey> imports;
    for (const auto& [k, sig] : ci.imports) {
      (void)sig;
      imports.push_back(k);
    }
    auto gl = env.globals.find(cur.comp);
    bool can_sys = !must_return && !ci.syscalls.empty() && gl != env.globals.end() &&
                   !gl->second.empty();
    bool can_call =
        !must_return && !imports.empty() && remaining >= depth + 2 && depth < kMaxCallDepth;
    bool can_ret = depth > 0;

    int choice;  // 0 call, 1 sys, 2 ret
    if (must_return) {
      choice = 2;
    } else {
      std::vector<int> pool;
      if (can_call) pool.insert(pool.end(), {0, 0, 0, 0});
      if (can_sys) pool.insert(pool.end(), {1, 1, 1});
      if (can_ret) pool.insert(pool.end(), {2, 2});
      if (pool.empty()) break;  // nothing expressible from here
      choice = pool[rng.next() % pool.size()];
    }

    IEvent e;
    e.f_comp = cur.comp;
    e.f_proc = cur.proc;
    e.deltas = fresh_deltas();

    if (choice == 0) {
      const ImportKey& key = imports[rng.next() % imports.size()];
      Signature sig = ci.imports.at(key);
      std::vector<int64_t> args;
      for (int i = 0; i < sig.param_count; i++) args.push_back(rng.range(-100, 100));
      e.kind = IEvent::Kind::Call;
      e.sig = sig;
      e.t = Event::call(cur.comp, key.comp, key.proc, args);
      out.it.push_back(std::move(e));
      stack.push_back(cur);
      cur = Ctx{key.comp, key.proc, sig};
    } else if (choice == 1) {
      std::vector<std::string> names(ci.syscalls.begin(), ci.syscalls.end());
      std::string name = names[rng.next() % names.size()];
      const GlobalDecl& g = gl->second[rng.next() % gl->second.size()];
      e.kind = IEvent::Kind::Sys;
      e.buffer = g.name;
      if (name == "read") {
        int64_t n = rng.range(0, std::min<int64_t>(g.size, 16));
        int64_t len = rng.range(0, n);
        std::vector<int64_t> bytes;
        for (int64_t i = 0; i < len; i++) bytes.push_back(rng.range(0, 255));
        out.io.read_chunks.push_back(bytes);
        e.t = Event::sys(cur.comp, "read", {n}, bytes, len, {});
        auto& slots = image[cur.comp][g.name];
        std::vector<Value> vs;
        for (int64_t i = 0; i < len; i++) {
          slots[static_cast<size_t>(i)] = bytes[static_cast<size_t>(i)];
          vs.push_back(Value::intv(bytes[static_cast<size_t>(i)]));
        }
        if (len > 0) carry.push_back(MemDelta::bytes(cur.comp, g.name, 0, std::move(vs)));
      } else {
        int64_t n = rng.range(0, g.size);
        const auto& slots = image[cur.comp][g.name];
        std::vector<int64_t> bytes;
        for (int64_t i = 0; i < n; i++)
          bytes.push_back(static_cast<int64_t>(
              static_cast<uint64_t>(slots[static_cast<size_t>(i)]) & 0xFF));
        int64_t ack = rng.range(0, n);
        out.io.write_acks.push_back(ack);
        e.t = Event::sys(cur.comp, "write", {n}, {}, ack, bytes);
      }
      out.it.push_back(std::move(e));
    } else {
      Ctx back = stack.back();
      e.kind = IEvent::Kind::Return;
      if (cur.sig.returns_value)
        e.t = Event::ret(cur.comp, back.comp, rng.range(-100, 100));
      else
        e.t = Event::ret(cur.comp, back.comp, std::nullopt);
      out.it.push_back(std::move(e));
      stack.pop_back();
      cur = back;
    }
    emitted++;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Program generation: well-typed bodies over the environment's interface,
// terminating by construction (loops are bounded counters, calls only go to
// strictly higher-ranked procedures).

namespace {

struct ProgGen {
  const Environment& env;
  Rng& rng;
  std::map<std::pair<std::string, std::string>, int> rank;

  struct ProcCtx {
    CompartmentDecl* decl;
    std::vector<std::string> vars;  // params then locals, slot = index
    int my_rank;
  };

  ExprPtr gen_expr(ProcCtx& p, int depth) {
    if (depth <= 0 || rng.chance(0.45)) {
      switch (rng.next() % 3) {
        case 0: return Expr::constant(rng.range(-20, 20));
        case 1:
          if (!p.vars.empty()) {
            size_t i = rng.next() % p.vars.size();
            return Expr::local(p.vars[i], static_cast<int>(i));
          }
          return Expr::constant(rng.range(-20, 20));
        default: {
          if (!p.decl->globals.empty()) {
            const GlobalDecl& g = p.decl->globals[rng.next() % p.decl->globals.size()];
            if (g.size > 0)
              return Expr::load_global(g.name, p.decl->global_index.at(g.name),
                                       Expr::constant(rng.range(0, g.size - 1)));
          }
          return Expr::constant(rng.range(-20, 20));
        }
      }
    }
    if (rng.chance(0.15)) {
      Op op = rng.chance(0.5) ? Op::Not : Op::Neg;
      return Expr::unop(op, gen_expr(p, depth - 1));
    }
    static const Op kOps[] = {Op::Add, Op::Add, Op::Sub, Op::Mul, Op::Lt,
                              Op::Le,  Op::Eq,  Op::Ne,  Op::And, Op::Or};
    if (rng.chance(0.18)) {
      // Division and modulo keep a nonzero constant divisor, so generated
      // programs stay UB-free.
      Op op = rng.chance(0.5) ? Op::Div : Op::Mod;
      return Expr::binop(op, gen_expr(p, depth - 1), Expr::constant(rng.range(1, 9)));
    }
    Op op = kOps[rng.next() % (sizeof(kOps) / sizeof(kOps[0]))];
    return Expr::binop(op, gen_expr(p, depth - 1), gen_expr(p, depth - 1));
  }

  StmtPtr gen_simple(ProcCtx& p) {
    if (!p.decl->globals.empty() && rng.chance(0.4)) {
      const GlobalDecl& g = p.decl->globals[rng.next() % p.decl->globals.size()];
      if (g.size > 0)
        return Stmt::gstore(g.name, p.decl->global_index.at(g.name),
                            Expr::constant(rng.range(0, g.size - 1)), gen_expr(p, 2));
    }
    // The last variable is reserved as the loop counter; assignments to it
    // would break loop termination.
    if (p.vars.size() > 1) {
      size_t i = rng.next() % (p.vars.size() - 1);
      return Stmt::set(p.vars[i], static_cast<int>(i), gen_expr(p, 2));
    }
    return Stmt::skip();
  }

  StmtPtr gen_call(ProcCtx& p) {
    // Candidates strictly above our rank keep the call graph acyclic.
    struct Cand {
      bool cross;
      std::string comp, proc;
      Signature sig;
    };
    std::vector<Cand> cands;
    for (const auto& [pn, sig] : p.decl->proc_sigs) {
      auto it = rank.find({p.decl->name, pn});
      if (it != rank.end() && it->second > p.my_rank)
        cands.push_back({false, "", pn, sig});
    }
    for (const auto& [key, sig] : p.decl->imports) {
      auto it = rank.find({key.comp, key.proc});
      if (it != rank.end() && it->second > p.my_rank)
        cands.push_back({true, key.comp, key.proc, sig});
    }
    if (cands.empty()) return gen_simple(p);
    const Cand& c = cands[rng.next() % cands.size()];
    std::vector<ExprPtr> args;
    for (int i = 0; i < c.sig.param_count; i++) args.push_back(gen_expr(p, 1));
    std::optional<std::string> dest;
    int dest_slot = -1;
    if (c.sig.returns_value && !p.vars.empty() && rng.chance(0.7)) {
      size_t i = rng.next() % p.vars.size();
      dest = p.vars[i];
      dest_slot = static_cast<int>(i);
    }
    if (c.cross)
      return Stmt::call_cross(c.comp, c.proc, dest, dest_slot, std::move(args));
    return Stmt::call_internal(c.proc, dest, dest_slot, std::move(args));
  }

  StmtPtr gen_sys(ProcCtx& p, const std::set<std::string>& allowed) {
    if (allowed.empty() || p.decl->globals.empty()) return gen_simple(p);
    std::vector<std::string> names(allowed.begin(), allowed.end());
    std::string name = names[rng.next() % names.size()];
    std::vector<const GlobalDecl*> pubs;
    for (const GlobalDecl& g : p.decl->globals)
      if (g.is_public && g.size > 0) pubs.push_back(&g);
    if (pubs.empty()) return gen_simple(p);
    const GlobalDecl& g = *pubs[rng.next() % pubs.size()];
    std::optional<std::string> dest;
    int dest_slot = -1;
    if (!p.vars.empty() && rng.chance(0.6)) {
      size_t i = rng.next() % p.vars.size();
      dest = p.vars[i];
      dest_slot = static_cast<int>(i);
    }
    return Stmt::call_sys(name, g.name, p.decl->global_index.at(g.name),
                          Expr::constant(rng.range(0, g.size)), dest, dest_slot);
  }

  StmtPtr gen_loop(ProcCtx& p, int counter_slot) {
    const std::string& var = p.vars[static_cast<size_t>(counter_slot)];
    int64_t iters = rng.range(1, 4);
    std::vector<StmtPtr> interior;
    int n = static_cast<int>(rng.range(1, 2));
    for (int i = 0; i < n; i++) interior.push_back(gen_simple(p));
    interior.push_back(Stmt::set(var, counter_slot,
                                 Expr::binop(Op::Add, Expr::local(var, counter_slot),
                                             Expr::constant(1))));
    return Stmt::seq(
        {Stmt::set(var, counter_slot, Expr::constant(0)),
         Stmt::while_(Expr::binop(Op::Lt, Expr::local(var, counter_slot),
                                  Expr::constant(iters)),
                      Stmt::seq(std::move(interior)))});
  }

  StmtPtr gen_stmt(ProcCtx& p, const std::set<std::string>& sys, int depth) {
    switch (rng.next() % 8) {
      case 0:
      case 1:
        return gen_simple(p);
      case 2:
      case 3:
        return gen_call(p);
      case 4:
        return gen_sys(p, sys);
      case 5:
        if (depth > 0)
          return Stmt::if_(gen_expr(p, 2), gen_stmt(p, sys, depth - 1),
                           gen_stmt(p, sys, depth - 1));
        return gen_simple(p);
      case 6: {
        // last var is reserved as a loop counter
        int counter = static_cast<int>(p.vars.size()) - 1;
        if (counter >= 0 && depth > 0) return gen_loop(p, counter);
        return gen_simple(p);
      }
      default:
        return gen_simple(p);
    }
  }
};

}  // namespace

GenProgram gen_program(const Environment& env, const GenConfig& cfg, bool inject_ub) {
  Rng rng(cfg.seed * 0xda942042e4dd58b5ULL + 3);
  GenProgram out;

  Program& p = out.p;
  for (const auto& [name, ci] : env.iface.compartments) {
    CompartmentDecl decl;
    decl.name = name;
    decl.exports = ci.exports;
    decl.imports = ci.imports;
    decl.syscalls = ci.syscalls;
    auto gl = env.globals.find(name);
    if (gl != env.globals.end()) {
      for (const GlobalDecl& g : gl->second) {
        decl.global_index[g.name] = static_cast<int>(decl.globals.size());
        decl.globals.push_back(g);
      }
    }
    for (const auto& [pn, sig] : ci.exports) decl.proc_sigs[pn] = sig;
    p.compartments[name] = std::move(decl);
  }
  p.main = {env.main_comp, "main"};

  ProgGen gen{env, rng, {}};
  int r = 0;
  for (const auto& [name, decl] : p.compartments)
    for (const auto& [pn, sig] : decl.proc_sigs) {
      (void)sig;
      gen.rank[{name, pn}] = r++;
    }

  for (auto& [name, decl] : p.compartments) {
    for (auto& [pn, sig] : decl.proc_sigs) {
      ProcDef def;
      for (int i = 0; i < sig.param_count; i++)
        def.params.push_back("x" + std::to_string(i));
      int nlocals = static_cast<int>(rng.range(2, 4));
      for (int i = 0; i < nlocals; i++) def.locals.push_back("v" + std::to_string(i));

      ProgGen::ProcCtx ctx;
      ctx.decl = &decl;
      ctx.vars = def.params;
      ctx.vars.insert(ctx.vars.end(), def.locals.begin(), def.locals.end());
      ctx.my_rank = gen.rank.at({name, pn});

      std::vector<StmtPtr> body;
      int nstmts = static_cast<int>(rng.range(2, 6));
      for (int i = 0; i < nstmts; i++) body.push_back(gen.gen_stmt(ctx, decl.syscalls, 1));
      if (sig.returns_value)
        body.push_back(Stmt::ret(gen.gen_expr(ctx, 2)));
      else if (rng.chance(0.5))
        body.push_back(Stmt::ret(std::nullopt));
      def.body = Stmt::seq(std::move(body));
      decl.procs[pn] = std::move(def);
    }
  }

  if (inject_ub) {
    // Division by zero, dynamic so it survives the static checks, dropped
    // into a random spot of a random (usually reachable) procedure.
    std::string victim = env.main_comp;
    std::string vproc = "main";
    if (rng.chance(0.3)) {
      std::vector<std::pair<std::string, std::string>> all;
      for (const auto& [name, decl] : p.compartments)
        for (const auto& [pn, d] : decl.procs) {
          (void)d;
          all.push_back({name, pn});
        }
      auto [c, pr] = all[rng.next() % all.size()];
      victim = c;
      vproc = pr;
    }
    out.ub_comp = victim;
    CompartmentDecl& decl = p.compartments.at(victim);
    ProcDef& def = decl.procs.at(vproc);
    StmtPtr ub = Stmt::set(def.locals.empty() ? def.params[0] : def.locals[0],
                           def.locals.empty() ? 0 : static_cast<int>(def.params.size()),
                           Expr::binop(Op::Div, Expr::constant(1), Expr::constant(0)));
    std::vector<StmtPtr> body = def.body->stmts;
    size_t at = body.empty() ? 0 : rng.next() % (body.size() + 1);
    body.insert(body.begin() + static_cast<std::ptrdiff_t>(at), ub);
    def.body = Stmt::seq(std::move(body));
  }

  int chunks = static_cast<int>(rng.range(8, 24));
  for (int i = 0; i < chunks; i++) {
    std::vector<int64_t> bytes;
    for (int64_t k = rng.range(0, 8); k > 0; k--) bytes.push_back(rng.range(0, 255));
    out.io.read_chunks.push_back(std::move(bytes));
  }
  int acks = static_cast<int>(rng.range(8, 24));
  for (int i = 0; i < acks; i++) out.io.write_acks.push_back(rng.range(0, 8));
  return out;
}

// ---------------------------------------------------------------------------
// Properties.

namespace {

std::string outcome_note(const RunOutcome& o) { return to_string(o); }

bool final_match(const RunOutcome& a, const RunOutcome& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == RunOutcome::Kind::Final && a.value != b.value) return false;
  if (a.kind == RunOutcome::Kind::Stuck && a.offender != b.offender) return false;
  return true;
}

Trace strip_undef(const Trace& t) {
  Trace out = t;
  if (!out.empty() && out.back().kind == Event::Kind::Undef) out.pop_back();
  return out;
}

}  // namespace

Verdict prop_fcc(const Program& p, const IoScript& io, int64_t fuel) {
  SourceRun src = run_source(p, io, fuel);
  if (src.outcome.kind == RunOutcome::Kind::OutOfFuel)
    return {false, false, "source run out of fuel"};
  if (has_undef(src.trace)) return {true, true, "vacuous: source run has UB"};
  TargetProgram tp;
  try {
    tp = compile_program(p);
  } catch (const Diag& d) {
    return {false, false, "compile failed: " + d.str()};
  }
  TargetRun tgt = run_target(tp, io, kFuelTgt);
  if (tgt.outcome.kind == RunOutcome::Kind::OutOfFuel)
    return {false, false, "target run out of fuel"};
  if (serialize_trace(src.trace) != serialize_trace(tgt.trace))
    return {false, false, "trace mismatch: source " + outcome_note(src.outcome) +
                              " target " + outcome_note(tgt.outcome)};
  if (!final_match(src.outcome, tgt.outcome))
    return {false, false, "outcome mismatch: source " + outcome_note(src.outcome) +
                              " target " + outcome_note(tgt.outcome)};
  return {true, false,
          "trace of " + std::to_string(src.trace.size()) + " events matches"};
}

Verdict prop_bcc(const Program& p, const IoScript& io, int64_t fuel) {
  TargetProgram tp;
  try {
    tp = compile_program(p);
  } catch (const Diag& d) {
    return {false, false, "compile failed: " + d.str()};
  }
  TargetRun tgt = run_target(tp, io, kFuelTgt);
  SourceRun src = run_source(p, io, fuel);
  if (tgt.outcome.kind == RunOutcome::Kind::OutOfFuel ||
      src.outcome.kind == RunOutcome::Kind::OutOfFuel)
    return {false, false, "run out of fuel"};
  if (!prefix_rel(src.trace, tgt.trace))
    return {false, false, "source trace does not explain the target trace"};
  return {true, false,
          has_undef(src.trace) ? "source explains the prefix up to UB"
                               : "traces equal and UB-free"};
}

namespace {

Verdict check_replay(const Interface& iface, const ITrace& it, const Program& btp,
                     const IoScript& io, int64_t fuel, bool exact) {
  try {
    check_interfaces(btp);
  } catch (const Diag& d) {
    return {false, false, "back-translation fails the interface check: " + d.str()};
  }
  SourceRun src = run_source(btp, io, fuel);
  if (src.outcome.kind == RunOutcome::Kind::OutOfFuel)
    return {false, false, "replay out of fuel"};
  if (has_undef(src.trace)) return {false, false, "replay hit UB"};
  std::string expected = serialize_trace(project(it));
  std::string got = serialize_trace(src.trace);
  if (exact) {
    if (got != expected) return {false, false, "replay trace differs"};
    if (!src.outcome.is_final())
      return {false, false, "replay did not terminate: " + outcome_note(src.outcome)};
    return {true, false,
            "replayed " + std::to_string(it.size()) + " events byte-identically"};
  }
  if (got.compare(0, expected.size(), expected) != 0)
    return {false, false, "replay trace is not an extension of the projection"};
  // Anything after the replayed prefix is stack unwinding: returns only.
  for (size_t i = it.size(); i < src.trace.size(); i++)
    if (src.trace[i].kind != Event::Kind::Return)
      return {false, false, "non-return event after the replayed prefix"};
  return {true, false,
          "replayed " + std::to_string(it.size()) + " events (+" +
              std::to_string(src.trace.size() - it.size()) + " unwind returns)"};
}

}  // namespace

Verdict prop_backtranslation(const TargetProgram& tp, const IoScript& io, int64_t fuel) {
  TargetRun tgt = run_target(tp, io, kFuelTgt);
  if (tgt.outcome.kind == RunOutcome::Kind::OutOfFuel)
    return {false, false, "target run out of fuel"};
  if (serialize_trace(project(tgt.itrace)) != serialize_trace(strip_undef(tgt.trace)))
    return {false, false, "projection differs from the plain trace"};
  Interface iface = interface_of(tp);
  GlobalsLayout layout = layout_of(tp);
  WfOutcome wf = check_wf(tgt.itrace, WfState::initial(iface, layout, *tp.entry), iface);
  if (!wf.ok)
    return {false, false,
            "recorded trace not well-formed at " + std::to_string(wf.at) + ": " + wf.error};
  Program btp;
  try {
    btp = back_translate_all(iface, tgt.itrace);
  } catch (const Diag& d) {
    return {false, false, "back-translation failed: " + d.str()};
  }
  return check_replay(iface, tgt.itrace, btp, io, fuel, /*exact=*/false);
}

Verdict prop_bt_replay(const Environment& env, const GenTrace& gt, int64_t fuel) {
  WfOutcome wf = check_wf(
      gt.it, WfState::initial(env.iface, env.globals, {env.main_comp, "main"}),
      env.iface);
  if (!wf.ok)
    return {false, false,
            "generated trace not well-formed at " + std::to_string(wf.at) + ": " +
                wf.error};
  Program btp;
  try {
    btp = back_translate_all(env.iface, gt.it);
  } catch (const Diag& d) {
    return {false, false, "back-translation failed: " + d.str()};
  }
  return check_replay(env.iface, gt.it, btp, gt.io, fuel, /*exact=*/true);
}

Verdict prop_bt_compiles(const Environment& env, const ITrace& it) {
  try {
    Program btp = back_translate_all(env.iface, it);
    check_interfaces(btp);
    TargetProgram tp = compile_program(btp);
    size_t instrs = 0;
    for (const auto& [n, c] : tp.compartments)
      for (const auto& [pn, proc] : c.procs) instrs += proc.code.size();
    return {true, false,
            std::to_string(it.size()) + " events -> " + std::to_string(instrs) +
                " instructions"};
  } catch (const Diag& d) {
    return {false, false, d.str()};
  }
}

std::pair<TargetProgram, TargetProgram> tsplit(const TargetProgram& tp,
                                               const std::set<std::string>& ks) {
  TargetProgram a, b;
  for (const auto& [name, c] : tp.compartments)
    (ks.count(name) ? a : b).compartments[name] = c;
  if (tp.entry) {
    if (ks.count(tp.entry->first))
      a.entry = tp.entry;
    else
      b.entry = tp.entry;
  }
  return {a, b};
}

bool has_side_crossing(const Trace& t, const std::set<std::string>& ctx) {
  for (const Event& e : t) {
    if (e.kind == Event::Kind::Call || e.kind == Event::Kind::Return) {
      bool a = ctx.count(e.caller) > 0;
      bool b = ctx.count(e.callee) > 0;
      if (a != b) return true;
    }
  }
  return false;
}

Verdict prop_recomposition(const Environment& env, const GenTrace& gt,
                           const std::set<std::string>& context_ks, int64_t fuel) {
  Trace m = project(gt.it);
  if (!has_side_crossing(m, context_ks))
    return {true, true, "vacuous: no context/program crossing"};

  std::set<std::string> program_ks;
  for (const auto& [name, c] : env.iface.compartments) {
    (void)c;
    if (!context_ks.count(name)) program_ks.insert(name);
  }

  TargetProgram w1, w2;
  try {
    w1 = compile_program(back_translate_all(env.iface, gt.it, context_ks));
    w2 = compile_program(back_translate_all(env.iface, gt.it, program_ks));
  } catch (const Diag& d) {
    return {false, false, "variant build failed: " + d.str()};
  }
  TargetRun r1 = run_target(w1, gt.io, fuel);
  TargetRun r2 = run_target(w2, gt.io, fuel);
  if (serialize_trace(r1.trace) != serialize_trace(r2.trace) ||
      !final_match(r1.outcome, r2.outcome))
    return {false, false, "VariantTraceMismatch"};

  std::string expected = serialize_trace(project(gt.it));
  std::string full = serialize_trace(r1.trace);
  if (full.compare(0, expected.size(), expected) != 0)
    return {false, false, "variant does not reproduce the generated trace"};

  auto [ctx1, prog1] = tsplit(w1, context_ks);
  auto [ctx2, prog2] = tsplit(w2, context_ks);
  (void)prog1;
  (void)ctx2;
  TargetProgram w3 = tlink(ctx1, prog2);
  TargetRun r3 = run_target(w3, gt.io, fuel);
  if (serialize_trace(r3.trace) != serialize_trace(r1.trace) ||
      !final_match(r3.outcome, r1.outcome))
    return {false, false, "recomposed run diverged: " + outcome_note(r3.outcome)};
  return {true, false,
          "recomposed " + std::to_string(r1.trace.size()) + " events across " +
              std::to_string(context_ks.size()) + "/" +
              std::to_string(program_ks.size()) + " split"};
}

Verdict prop_blame(const Environment& env, const GenTrace& gt,
                   const std::set<std::string>& context_ks, uint64_t inject_seed,
                   int64_t fuel) {
  std::set<std::string> program_ks;
  for (const auto& [name, c] : env.iface.compartments) {
    (void)c;
    if (!context_ks.count(name)) program_ks.insert(name);
  }
  std::map<std::string, int> counts;
  for (const IEvent& e : gt.it)
    if (program_ks.count(e.f_comp)) counts[e.f_comp]++;
  if (counts.empty()) return {true, true, "vacuous: program side emits no events"};

  Rng rng(inject_seed);
  std::vector<std::string> victims;
  for (const auto& [c, n] : counts) {
    (void)n;
    victims.push_back(c);
  }
  std::string victim = victims[rng.next() % victims.size()];
  int ordinal = static_cast<int>(rng.next() % static_cast<uint64_t>(counts[victim]));
  bool div = rng.chance(0.5);

  GlobalsLayout layout = infer_globals(gt.it, env.iface);
  Program ref, mut;
  try {
    ref = back_translate_all(env.iface, gt.it);
    for (const auto& [name, c] : env.iface.compartments) {
      (void)c;
      BtOptions opts;
      opts.layout = &layout;
      opts.skip_wf_check = true;
      if (name == victim) {
        opts.inject_ub_ordinal = ordinal;
        opts.inject_div_zero = div;
      }
      mut.compartments[name] = back_translate(env.iface, gt.it, name, opts);
      if (c.exports.count("main")) mut.main = {name, "main"};
    }
  } catch (const Diag& d) {
    return {false, false, "build failed: " + d.str()};
  }

  SourceRun rref = run_source(ref, gt.io, fuel);
  if (rref.outcome.kind == RunOutcome::Kind::OutOfFuel)
    return {false, false, "reference run out of fuel"};
  SourceRun rmut = run_source(mut, gt.io, fuel);
  if (rmut.outcome.kind == RunOutcome::Kind::OutOfFuel)
    return {false, false, "mutated run out of fuel"};

  if (!prefix_rel(rmut.trace, rref.trace))
    return {false, false, "mutated trace does not prefix the reference"};
  if (!blame_rel(rmut.trace, rref.trace, program_ks))
    return {false, false,
            "blame fell on the context side: " + rmut.outcome.offender};
  if (!rmut.outcome.is_stuck())
    return {false, false, "injected UB did not fire"};
  if (rmut.outcome.offender != victim)
    return {false, false, "blamed " + rmut.outcome.offender + ", injected into " + victim};
  return {true, false, "UB at " + victim + "#" + std::to_string(ordinal) +
                           " blamed correctly (" + (div ? "div" : "oob") + ")"};
}

// ---------------------------------------------------------------------------
// Hand-written attackers. Every case must end Stuck on the attacker with the
// trace closing on Undef(attacker).

namespace {

struct CompBuilder {
  TargetCompartment c;
  explicit CompBuilder(std::string name) { c.name = std::move(name); }
  CompBuilder& exports(const std::string& p, int arity, bool ret) {
    c.iface.exports[p] = {arity, ret};
    return *this;
  }
  CompBuilder& imports(const std::string& comp, const std::string& p, int arity,
                       bool ret) {
    c.iface.imports[{comp, p}] = {arity, ret};
    return *this;
  }
  CompBuilder& sys(const std::string& s) {
    c.iface.syscalls.insert(s);
    return *this;
  }
  CompBuilder& global(const std::string& g, int64_t size) {
    c.global_index[g] = static_cast<int>(c.globals.size());
    c.globals.push_back({g, size, true});
    return *this;
  }
  CompBuilder& proc(const std::string& p, int arity, bool ret,
                    std::vector<Instr> code) {
    c.procs[p] = TargetProc{p, {arity, ret}, std::move(code)};
    return *this;
  }
};

std::vector<Instr> epilogue_ret0() {
  return {Instr::li(A0, 0), Instr::load_f(RA, 1), Instr::load_f(SP, 0),
          Instr::jr(true, RA)};
}

void append(std::vector<Instr>& v, std::vector<Instr> w) {
  for (auto& i : w) v.push_back(std::move(i));
}

TargetProgram two_comps(CompBuilder a, CompBuilder b) {
  TargetProgram tp;
  tp.compartments[a.c.name] = std::move(a.c);
  tp.compartments[b.c.name] = std::move(b.c);
  tp.entry = {"A", "main"};
  return tp;
}

}  // namespace

std::vector<AdversarialCase> adversarial_cases() {
  std::vector<AdversarialCase> out;

  {  // Returning through an integer instead of a code address.
    CompBuilder a("A");
    a.exports("main", 0, true).imports("B", "f", 0, true);
    std::vector<Instr> m{Instr::jal(true, "B", "f"), Instr::li(A0, 0),
                         Instr::halt(A0)};
    a.proc("main", 0, true, m);
    CompBuilder b("B");
    b.exports("f", 0, true);
    b.proc("f", 0, true, {Instr::li(T0, 42), Instr::jr(true, T0)});
    out.push_back({"return-address-forgery-int", "B", two_comps(a, b)});
  }
  {  // Returning through a stale code address stashed in a global.
    CompBuilder a("A");
    a.exports("main", 0, true).imports("B", "f1", 0, true).imports("B", "f2", 0, true);
    a.proc("main", 0, true,
           {Instr::jal(true, "B", "f1"), Instr::jal(true, "B", "f2"), Instr::li(A0, 0),
            Instr::halt(A0)});
    CompBuilder b("B");
    b.exports("f1", 0, true).exports("f2", 0, true).global("stash", 1);
    std::vector<Instr> f1{Instr::load_f(T0, 1), Instr::li(T1, 0),
                          Instr::store_g("stash", T1, T0)};
    append(f1, epilogue_ret0());
    b.proc("f1", 0, true, f1);
    b.proc("f2", 0, true,
           {Instr::li(T1, 0), Instr::load_g(T0, "stash", T1), Instr::li(A0, 0),
            Instr::load_f(SP, 0), Instr::jr(true, T0)});
    out.push_back({"return-address-forgery-stale", "B", two_comps(a, b)});
  }
  {  // Returning with a clobbered stack pointer.
    CompBuilder a("A");
    a.exports("main", 0, true).imports("B", "f", 0, true);
    a.proc("main", 0, true,
           {Instr::jal(true, "B", "f"), Instr::li(A0, 0), Instr::halt(A0)});
    CompBuilder b("B");
    b.exports("f", 0, true);
    b.proc("f", 0, true,
           {Instr::load_f(RA, 1), Instr::li(T0, 7), Instr::mov(SP, T0),
            Instr::li(A0, 0), Instr::jr(true, RA)});
    out.push_back({"sp-mismatch", "B", two_comps(a, b)});
  }
  {  // Unflagged jump-and-link into another compartment.
    CompBuilder a("A");
    a.exports("main", 0, true).imports("B", "f", 0, true);
    a.proc("main", 0, true,
           {Instr::jal(false, "B", "f"), Instr::li(A0, 0), Instr::halt(A0)});
    CompBuilder b("B");
    b.exports("f", 0, true);
    b.proc("f", 0, true, epilogue_ret0());
    out.push_back({"unflagged-cross-call", "A", two_comps(a, b)});
  }
  {  // Unflagged indirect jump crossing on return.
    CompBuilder a("A");
    a.exports("main", 0, true).imports("B", "f", 0, true);
    a.proc("main", 0, true,
           {Instr::jal(true, "B", "f"), Instr::li(A0, 0), Instr::halt(A0)});
    CompBuilder b("B");
    b.exports("f", 0, true);
    b.proc("f", 0, true,
           {Instr::load_f(RA, 1), Instr::load_f(SP, 0), Instr::li(A0, 0),
            Instr::jr(false, RA)});
    out.push_back({"unflagged-cross-return", "B", two_comps(a, b)});
  }
  {  // Writing the read-only spill frame during a callback.
    CompBuilder a("A");
    a.exports("main", 0, true)
        .exports("cb", 0, true)
        .imports("B", "big", 9, true)
        .global("gptr", 1);
    std::vector<Instr> m{Instr::mov(T0, SP), Instr::li(T1, 0),
                         Instr::store_g("gptr", T1, T0)};
    for (int i = 0; i < 8; i++)
      m.push_back(Instr::li(static_cast<uint8_t>(A0 + i), i + 1));
    m.push_back(Instr::li(T0, 9));
    m.push_back(Instr::store_f(2, T0));
    m.push_back(Instr::jal(true, "B", "big"));
    m.push_back(Instr::li(A0, 0));
    m.push_back(Instr::halt(A0));
    a.proc("main", 0, true, m);
    std::vector<Instr> cb{Instr::li(T1, 0), Instr::load_g(T0, "gptr", T1),
                          Instr::mov(SP, T0), Instr::li(T2, 123),
                          Instr::store_f(2, T2)};
    append(cb, epilogue_ret0());
    a.proc("cb", 0, true, cb);
    CompBuilder b("B");
    b.exports("big", 9, true).imports("A", "cb", 0, true);
    std::vector<Instr> big{Instr::jal(true, "A", "cb")};
    append(big, epilogue_ret0());
    b.proc("big", 9, true, big);
    out.push_back({"spill-frame-write-after-callback", "A", two_comps(a, b)});
  }
  {  // Calling an export without importing it.
    CompBuilder a("A");
    a.exports("main", 0, true);
    a.proc("main", 0, true,
           {Instr::jal(true, "B", "f"), Instr::li(A0, 0), Instr::halt(A0)});
    CompBuilder b("B");
    b.exports("f", 0, true);
    b.proc("f", 0, true, epilogue_ret0());
    out.push_back({"non-imported-call", "A", two_comps(a, b)});
  }
  {  // Calling a private procedure of another compartment.
    CompBuilder a("A");
    a.exports("main", 0, true).imports("B", "priv", 0, true);
    a.proc("main", 0, true,
           {Instr::jal(true, "B", "priv"), Instr::li(A0, 0), Instr::halt(A0)});
    CompBuilder b("B");
    b.proc("priv", 0, true, epilogue_ret0());
    out.push_back({"non-exported-call", "A", two_comps(a, b)});
  }
  {  // Using a syscall outside the declared allowance.
    CompBuilder a("A");
    a.exports("main", 0, true).global("buf", 2);
    a.proc("main", 0, true,
           {Instr::li(A0, 0), Instr::li(A1, 1), Instr::sys_call("read"),
            Instr::li(A0, 0), Instr::halt(A0)});
    CompBuilder b("B");
    b.proc("idle", 0, true, epilogue_ret0());
    out.push_back({"disallowed-syscall", "A", two_comps(a, b)});
  }
  {  // Passing an undefined value across a call.
    CompBuilder a("A");
    a.exports("main", 0, true).imports("B", "f", 1, true);
    a.proc("main", 0, true,
           {Instr::jal(true, "B", "f"), Instr::li(A0, 0), Instr::halt(A0)});
    CompBuilder b("B");
    b.exports("f", 1, true);
    b.proc("f", 1, true, epilogue_ret0());
    out.push_back({"undef-argument-forging", "A", two_comps(a, b)});
  }
  {  // Passing a pointer across a call.
    CompBuilder a("A");
    a.exports("main", 0, true).imports("B", "f", 1, true);
    a.proc("main", 0, true,
           {Instr::mov(A0, SP), Instr::jal(true, "B", "f"), Instr::li(A0, 0),
            Instr::halt(A0)});
    CompBuilder b("B");
    b.exports("f", 1, true);
    b.proc("f", 1, true, epilogue_ret0());
    out.push_back({"pointer-argument-forging", "A", two_comps(a, b)});
  }
  {  // Returning an undefined value.
    CompBuilder a("A");
    a.exports("main", 0, true).imports("B", "f", 0, true);
    a.proc("main", 0, true,
           {Instr::jal(true, "B", "f"), Instr::li(A0, 0), Instr::halt(A0)});
    CompBuilder b("B");
    b.exports("f", 0, true);
    b.proc("f", 0, true,
           {Instr::load_f(RA, 1), Instr::load_f(SP, 0), Instr::jr(true, RA)});
    out.push_back({"undef-return-forging", "B", two_comps(a, b)});
  }
  {  // Import whose signature disagrees with the export.
    CompBuilder a("A");
    a.exports("main", 0, true).imports("B", "f", 2, true);
    a.proc("main", 0, true,
           {Instr::li(A0, 1), Instr::li(A1, 2), Instr::jal(true, "B", "f"),
            Instr::li(A0, 0), Instr::halt(A0)});
    CompBuilder b("B");
    b.exports("f", 1, true);
    b.proc("f", 1, true, epilogue_ret0());
    out.push_back({"import-signature-mismatch", "A", two_comps(a, b)});
  }
  return out;
}

Verdict run_adversarial(const AdversarialCase& c, int64_t fuel) {
  TargetRun r = run_target(c.program, {}, fuel);
  if (!r.outcome.is_stuck())
    return {false, false, c.name + ": expected Stuck, got " + outcome_note(r.outcome)};
  if (r.outcome.offender != c.attacker)
    return {false, false,
            c.name + ": blamed " + r.outcome.offender + ", expected " + c.attacker};
  if (r.trace.empty() || r.trace.back().kind != Event::Kind::Undef ||
      r.trace.back().comp != c.attacker)
    return {false, false, c.name + ": trace does not end with Undef(" + c.attacker + ")"};
  return {true, false, c.name + ": Stuck(" + c.attacker + ")"};
}

// ---------------------------------------------------------------------------
// Fuzz driver.

namespace {

GenConfig config_for(const std::string& property, uint64_t seed) {
  GenConfig cfg;
  cfg.seed = seed;
  Rng rng(seed ^ 0xabcdef12345ULL);
  if (property == "fcc" || property == "bcc") {
    cfg.n_compartments = static_cast<int>(rng.range(2, 5));
    cfg.max_args = 10;  // exercise the spill path
  } else {
    cfg.n_compartments = static_cast<int>(rng.range(2, 6));
    cfg.max_args = 8;
  }
  return cfg;
}

std::set<std::string> random_split(const Environment& env, Rng& rng) {
  std::set<std::string> ks;
  std::vector<std::string> names;
  for (const auto& [name, c] : env.iface.compartments) {
    (void)c;
    names.push_back(name);
  }
  // non-empty proper subset
  while (true) {
    ks.clear();
    for (const auto& n : names)
      if (rng.chance(0.5)) ks.insert(n);
    if (!ks.empty() && ks.size() < names.size()) return ks;
  }
}

struct TrialInput {
  Environment env;
  GenTrace gt;
  GenProgram gp;
  std::set<std::string> split;
  bool has_split = false;
};

void put(TrialResult& r, const std::string& name, std::string contents) {
  r.artifacts.push_back({name, std::move(contents)});
}

// Greedy shrink of a failing trace-based trial: halve the event prefix while
// the failure persists, then trim single events.
ITrace shrink_trace(const ITrace& it, const std::function<bool(const ITrace&)>& fails) {
  ITrace cur = it;
  while (cur.size() > 0) {
    ITrace half(cur.begin(), cur.begin() + static_cast<std::ptrdiff_t>(cur.size() / 2));
    if (fails(half))
      cur = std::move(half);
    else
      break;
  }
  int budget = 24;
  while (cur.size() > 0 && budget-- > 0) {
    ITrace less(cur.begin(), cur.end() - 1);
    if (fails(less))
      cur = std::move(less);
    else
      break;
  }
  return cur;
}

Program shrink_program(const Program& p, const std::function<bool(const Program&)>& fails) {
  Program cur = p;
  // Drop whole compartments (never the entry's), then gut procedure bodies.
  std::vector<std::string> names;
  for (const auto& [name, c] : cur.compartments) {
    (void)c;
    names.push_back(name);
  }
  for (const auto& name : names) {
    if (cur.main && cur.main->first == name) continue;
    Program cand = cur;
    cand.compartments.erase(name);
    if (fails(cand)) cur = std::move(cand);
  }
  std::vector<std::pair<std::string, std::string>> procs;
  for (const auto& [name, c] : cur.compartments)
    for (const auto& [pn, def] : c.procs) {
      (void)def;
      procs.push_back({name, pn});
    }
  for (const auto& [name, pn] : procs) {
    auto ci = cur.compartments.find(name);
    if (ci == cur.compartments.end()) continue;
    Program cand = cur;
    ProcDef& d = cand.compartments.at(name).procs.at(pn);
    bool rv = ci->second.proc_sigs.at(pn).returns_value;
    d.body = rv ? Stmt::ret(Expr::constant(0)) : Stmt::ret(std::nullopt);
    if (fails(cand)) cur = std::move(cand);
  }
  return cur;
}

TrialResult run_trial(const std::string& property, uint64_t seed, bool artifacts) {
  TrialResult r;
  r.seed = seed;
  GenConfig cfg = config_for(property, seed);

  if (property == "adversarial") {
    auto cases = adversarial_cases();
    int failed = 0;
    std::string detail;
    for (const auto& c : cases) {
      Verdict v = run_adversarial(c, 100000);
      if (!v.pass) {
        failed++;
        detail += (detail.empty() ? "" : "; ") + v.detail;
      }
      if (artifacts) put(r, "attack-" + c.name + ".sexp", serialize_target(c.program));
    }
    r.verdict = failed == 0
                    ? Verdict{true, false,
                              std::to_string(cases.size()) + " attackers all stuck"}
                    : Verdict{false, false, detail};
    return r;
  }

  Environment env = gen_environment(cfg);

  if (property == "fcc" || property == "bcc") {
    GenProgram gp = gen_program(env, cfg, property == "bcc");
    check_interfaces(gp.p);
    Verdict v = property == "fcc" ? prop_fcc(gp.p, gp.io, kFuelSrc)
                                  : prop_bcc(gp.p, gp.io, kFuelSrc);
    r.verdict = v;
    if (artifacts) {
      put(r, "program.sexp", serialize_program(gp.p));
      try {
        put(r, "target.sexp", serialize_target(compile_program(gp.p)));
      } catch (const Diag&) {
      }
      put(r, "io.txt", serialize_io(gp.io));
      put(r, "trace.txt", serialize_trace(run_source(gp.p, gp.io, kFuelSrc).trace));
    }
    if (!v.pass) {
      auto fails = [&](const Program& cand) {
        Verdict w = property == "fcc" ? prop_fcc(cand, gp.io, kFuelSrc)
                                      : prop_bcc(cand, gp.io, kFuelSrc);
        return !w.pass;
      };
      Program small = shrink_program(gp.p, fails);
      r.shrink_artifacts.push_back({"program.sexp", serialize_program(small)});
      r.shrink_artifacts.push_back({"io.txt", serialize_io(gp.io)});
    }
    return r;
  }

  GenTrace gt = gen_informative_trace(env, cfg);

  auto write_common = [&](TrialResult& tr) {
    if (!artifacts) return;
    put(tr, "itrace.txt", serialize_itrace(gt.it));
    put(tr, "trace.txt", serialize_trace(project(gt.it)));
    put(tr, "io.txt", serialize_io(gt.io));
  };

  if (property == "backtranslation") {
    r.verdict = prop_bt_replay(env, gt, kFuelSrc);
    write_common(r);
    if (artifacts) {
      try {
        put(r, "program.sexp", serialize_program(back_translate_all(env.iface, gt.it)));
      } catch (const Diag&) {
      }
    }
    if (!r.verdict.pass) {
      auto fails = [&](const ITrace& it) {
        GenTrace g2{it, gt.io};
        return !prop_bt_replay(env, g2, kFuelSrc).pass;
      };
      ITrace small = shrink_trace(gt.it, fails);
      r.shrink_artifacts.push_back({"itrace.txt", serialize_itrace(small)});
      r.shrink_artifacts.push_back({"io.txt", serialize_io(gt.io)});
    }
    return r;
  }
  if (property == "bt-compiles") {
    r.verdict = prop_bt_compiles(env, gt.it);
    write_common(r);
    if (artifacts && r.verdict.pass) {
      try {
        put(r, "target.sexp",
            serialize_target(compile_program(back_translate_all(env.iface, gt.it))));
      } catch (const Diag&) {
      }
    }
    if (!r.verdict.pass) {
      auto fails = [&](const ITrace& it) { return !prop_bt_compiles(env, it).pass; };
      ITrace small = shrink_trace(gt.it, fails);
      r.shrink_artifacts.push_back({"itrace.txt", serialize_itrace(small)});
    }
    return r;
  }
  if (property == "recomposition" || property == "blame") {
    Rng srng(seed ^ 0x517cc1b727220a95ULL);
    std::set<std::string> split;
    bool ok = false;
    for (int attempt = 0; attempt < 24 && !ok; attempt++) {
      if (env.iface.compartments.size() < 2) break;
      split = random_split(env, srng);
      if (property == "recomposition") {
        ok = has_side_crossing(project(gt.it), split);
      } else {
        for (const auto& [name, c] : env.iface.compartments) {
          (void)c;
          if (split.count(name)) continue;
          for (const IEvent& e : gt.it)
            if (e.f_comp == name) {
              ok = true;
              break;
            }
          if (ok) break;
        }
      }
    }
    if (!ok) {
      r.verdict = {true, true, "vacuous: no usable split"};
      return r;
    }
    r.verdict = property == "recomposition"
                    ? prop_recomposition(env, gt, split, kFuelTgt)
                    : prop_blame(env, gt, split, seed ^ 0x2e5f3ad1, kFuelSrc);
    write_common(r);
    if (!r.verdict.pass) {
      auto fails = [&](const ITrace& it) {
        GenTrace g2{it, gt.io};
        Verdict w = property == "recomposition"
                        ? prop_recomposition(env, g2, split, kFuelTgt)
                        : prop_blame(env, g2, split, seed ^ 0x2e5f3ad1, kFuelSrc);
        return !w.pass;
      };
      ITrace small = shrink_trace(gt.it, fails);
      r.shrink_artifacts.push_back({"itrace.txt", serialize_itrace(small)});
      r.shrink_artifacts.push_back({"io.txt", serialize_io(gt.io)});
    }
    return r;
  }
  r.verdict = {false, false, "unknown property '" + property + "'"};
  return r;
}

}  // namespace

bool known_property(const std::string& name) {
  static const std::set<std::string> known = {
      "fcc",  "bcc",   "backtranslation", "bt-compiles",
      "recomposition", "blame", "adversarial"};
  return known.count(name) > 0;
}

std::string verdict_line(const std::string& property, uint64_t seed, const Verdict& v) {
  std::string detail = v.detail;
  for (char& c : detail)
    if (c == '\n') c = ' ';
  return property + " " + std::to_string(seed) + " " + (v.pass ? "PASS" : "FAIL") + " " +
         (v.vacuous ? "(vacuous) " : "") + detail;
}

FuzzReport run_fuzz(const std::string& property, uint64_t base_seed, int trials,
                    const std::string& out_dir, int jobs) {
  if (!known_property(property)) fail("UnknownProperty", property);
  FuzzReport report;
  report.property = property;
  report.trials = trials;
  report.results.resize(static_cast<size_t>(std::max(0, trials)));

  bool artifacts = !out_dir.empty();
  std::atomic<int> next{0};
  int workers = std::max(1, jobs);
  workers = std::min<int>(workers, std::max(1, trials));
  auto body = [&] {
    while (true) {
      int i = next.fetch_add(1);
      if (i >= trials) return;
      report.results[static_cast<size_t>(i)] =
          run_trial(property, base_seed + static_cast<uint64_t>(i), artifacts);
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; w++) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }

  for (const TrialResult& tr : report.results)
    (tr.verdict.pass ? report.passed : report.failed)++;

  if (artifacts) {
    namespace fs = std::filesystem;
    for (const TrialResult& tr : report.results) {
      fs::path dir = fs::path(out_dir) / property / std::to_string(tr.seed);
      fs::create_directories(dir);
      for (const auto& [name, contents] : tr.artifacts) {
        std::ofstream f(dir / name, std::ios::binary);
        f << contents;
      }
      std::ofstream vf(dir / "verdict.json-line", std::ios::binary);
      vf << verdict_line(property, tr.seed, tr.verdict) << "\n";
      if (!tr.shrink_artifacts.empty()) {
        fs::path sdir = fs::path(out_dir) / "shrink" / property / std::to_string(tr.seed);
        fs::create_directories(sdir);
        for (const auto& [name, contents] : tr.shrink_artifacts) {
          std::ofstream f(sdir / name, std::ios::binary);
          f << contents;
        }
      }
    }
  }
  return report;
}

}  // namespace secomp
