#include "secomp/backtrans.hpp"

#include <algorithm>

namespace secomp {

namespace {

void bump(GlobalsLayout& layout, const std::string& comp, const std::string& g,
          int64_t min_size) {
  auto& decls = layout[comp];
  for (auto& d : decls) {
    if (d.name == g) {
      d.size = std::max(d.size, min_size);
      return;
    }
  }
  decls.push_back(GlobalDecl{g, min_size, true});
}

}  // namespace

GlobalsLayout infer_globals(const ITrace& it, const Interface& iface) {
  GlobalsLayout layout;
  for (const auto& [name, c] : iface.compartments) {
    (void)c;
    layout[name];  // every compartment present, possibly bufferless
  }
  for (const IEvent& e : it) {
    for (const MemDelta& d : e.deltas) {
      switch (d.kind) {
        case MemDelta::Kind::Store:
          bump(layout, d.comp, d.global, d.off + 1);
          break;
        case MemDelta::Kind::Bytes:
          bump(layout, d.comp, d.global,
               d.off + static_cast<int64_t>(d.values.size()));
          break;
        default:
          break;
      }
    }
    if (e.kind == IEvent::Kind::Sys && !e.buffer.empty()) {
      int64_t n = e.t.args.empty() ? 0 : e.t.args[0];
      bump(layout, e.f_comp, e.buffer, std::max<int64_t>(n, 1));
    }
  }
  return layout;
}

GlobalsLayout layout_of(const TargetProgram& tp) {
  GlobalsLayout layout;
  for (const auto& [name, c] : tp.compartments) layout[name] = c.globals;
  return layout;
}

GlobalsLayout layout_of(const Program& p) {
  GlobalsLayout layout;
  for (const auto& [name, c] : p.compartments) layout[name] = c.globals;
  return layout;
}

WfState WfState::initial(const Interface& iface, const GlobalsLayout& layout,
                         const std::pair<std::string, std::string>& entry) {
  (void)iface;
  WfState s;
  s.f_comp = entry.first;
  s.f_proc = entry.second;
  for (const auto& [comp, decls] : layout) {
    auto& m = s.globals[comp];
    for (const GlobalDecl& g : decls)
      m[g.name].assign(static_cast<size_t>(g.size), Value::intv(0));
  }
  return s;
}

std::optional<std::string> wf_step(WfState& s, const IEvent& e, const Interface& iface) {
  if (e.f_comp != s.f_comp)
    return "InterfaceViolation: event attributed to " + e.f_comp + " but " + s.f_comp +
           " is executing";

  // Memory deltas: chronological changes by the current compartment to its
  // own buffers since the previous event.
  auto cg = s.globals.find(s.f_comp);
  for (const MemDelta& d : e.deltas) {
    if (d.comp != s.f_comp)
      return "DeltaMismatch: delta by " + d.comp + " inside an event of " + s.f_comp;
    switch (d.kind) {
      case MemDelta::Kind::Store: {
        if (cg == s.globals.end() || !cg->second.count(d.global))
          return "DeltaMismatch: unknown global " + d.global;
        auto& slots = cg->second[d.global];
        if (d.off < 0 || d.off >= static_cast<int64_t>(slots.size()))
          return "DeltaMismatch: store out of bounds in " + d.global;
        slots[static_cast<size_t>(d.off)] = d.value;
        break;
      }
      case MemDelta::Kind::Bytes: {
        if (cg == s.globals.end() || !cg->second.count(d.global))
          return "DeltaMismatch: unknown global " + d.global;
        auto& slots = cg->second[d.global];
        if (d.off < 0 ||
            d.off + static_cast<int64_t>(d.values.size()) >
                static_cast<int64_t>(slots.size()))
          return "DeltaMismatch: bytes out of bounds in " + d.global;
        for (size_t i = 0; i < d.values.size(); i++)
          slots[static_cast<size_t>(d.off) + i] = d.values[i];
        break;
      }
      case MemDelta::Kind::Alloc:
      case MemDelta::Kind::Free:
        break;  // not buffer content; nothing to thread
    }
  }

  auto iface_of = [&](const std::string& c) -> const CompartmentIface* {
    auto it = iface.compartments.find(c);
    return it == iface.compartments.end() ? nullptr : &it->second;
  };

  switch (e.kind) {
    case IEvent::Kind::Call: {
      if (e.t.kind != Event::Kind::Call) return "InterfaceViolation: mismatched event";
      if (e.t.caller != s.f_comp) return "InterfaceViolation: caller mismatch";
      const CompartmentIface* callee = iface_of(e.t.callee);
      const CompartmentIface* caller = iface_of(e.t.caller);
      if (!callee || !caller) return "InterfaceViolation: unknown compartment";
      auto ex = callee->exports.find(e.t.proc);
      if (ex == callee->exports.end())
        return "InterfaceViolation: " + e.t.callee + "." + e.t.proc + " not exported";
      if (!(ex->second == e.sig)) return "InterfaceViolation: signature mismatch";
      auto im = caller->imports.find({e.t.callee, e.t.proc});
      if (im == caller->imports.end() || !(im->second == ex->second))
        return "InterfaceViolation: call not covered by imports";
      if (static_cast<int>(e.t.args.size()) != e.sig.param_count)
        return "InterfaceViolation: argument count";
      s.stack.push_back({s.f_comp, s.f_proc});
      s.f_comp = e.t.callee;
      s.f_proc = e.t.proc;
      return std::nullopt;
    }
    case IEvent::Kind::Return: {
      if (e.t.kind != Event::Kind::Return) return "InterfaceViolation: mismatched event";
      if (e.t.callee != s.f_comp) return "InterfaceViolation: returning side mismatch";
      if (s.stack.empty()) return "StackUnderflow: return with no caller";
      auto [c, p] = s.stack.back();
      if (e.t.caller != c) return "InterfaceViolation: return to the wrong compartment";
      s.stack.pop_back();
      s.f_comp = c;
      s.f_proc = p;
      return std::nullopt;
    }
    case IEvent::Kind::Sys: {
      if (e.t.kind != Event::Kind::Syscall) return "InterfaceViolation: mismatched event";
      if (e.t.comp != s.f_comp) return "InterfaceViolation: syscall compartment mismatch";
      const CompartmentIface* self = iface_of(s.f_comp);
      if (!self || !self->syscalls.count(e.t.sys_name))
        return "InterfaceViolation: syscall " + e.t.sys_name + " not allowed";
      if (cg == s.globals.end() || !cg->second.count(e.buffer))
        return "InterfaceViolation: unknown syscall buffer " + e.buffer;
      // All public buffers of the calling compartment must hold scalars.
      for (const auto& [g, slots] : cg->second) {
        for (const Value& v : slots)
          if (!v.is_int()) return "NonScalarGlobal: " + s.f_comp + "." + g;
      }
      int64_t n = e.t.args.empty() ? 0 : e.t.args[0];
      if (e.t.sys_name == "read") {
        if (e.t.sys_ret != static_cast<int64_t>(e.t.read_bytes.size()) || e.t.sys_ret > n)
          return "DeltaMismatch: read result inconsistent";
      } else {
        const auto& slots = cg->second[e.buffer];
        if (n < 0 || n > static_cast<int64_t>(slots.size()))
          return "DeltaMismatch: write count out of bounds";
        if (static_cast<int64_t>(e.t.written_bytes.size()) != n)
          return "DeltaMismatch: written byte count";
        for (int64_t i = 0; i < n; i++) {
          const Value& v = slots[static_cast<size_t>(i)];
          int64_t expect =
              static_cast<int64_t>(static_cast<uint64_t>(v.num) & 0xFF);
          if (!v.is_int() || expect != e.t.written_bytes[static_cast<size_t>(i)])
            return "DeltaMismatch: written bytes do not match the buffer";
        }
      }
      return std::nullopt;
    }
  }
  return "InterfaceViolation: unknown event kind";
}

WfOutcome check_wf(const ITrace& it, WfState s, const Interface& iface) {
  for (size_t i = 0; i < it.size(); i++) {
    auto err = wf_step(s, it[i], iface);
    if (err) return {false, i, *err};
  }
  return {};
}

// ---------------------------------------------------------------------------

namespace {

bool is_public_global_of(const CompartmentDecl& decl, const std::string& g) {
  const GlobalDecl* gd = decl.find_global(g);
  return gd != nullptr && gd->is_public;
}

}  // namespace

StmtPtr bt_delta(const std::string& comp, const MemDelta& d, const CompartmentDecl& decl) {
  switch (d.kind) {
    case MemDelta::Kind::Store: {
      if (d.comp != comp || !is_public_global_of(decl, d.global) || !d.value.is_int())
        return Stmt::skip();
      int gidx = decl.global_index.at(d.global);
      return Stmt::gstore(d.global, gidx, Expr::constant(d.off),
                          Expr::constant(d.value.num));
    }
    case MemDelta::Kind::Bytes: {
      if (d.comp != comp || !is_public_global_of(decl, d.global)) return Stmt::skip();
      for (const Value& v : d.values)
        if (!v.is_int()) return Stmt::skip();
      int gidx = decl.global_index.at(d.global);
      std::vector<StmtPtr> ss;
      for (size_t i = 0; i < d.values.size(); i++)
        ss.push_back(Stmt::gstore(d.global, gidx,
                                  Expr::constant(d.off + static_cast<int64_t>(i)),
                                  Expr::constant(d.values[i].num)));
      if (ss.empty()) return Stmt::skip();
      if (ss.size() == 1) return ss[0];
      return Stmt::seq(std::move(ss));
    }
    case MemDelta::Kind::Alloc:
    case MemDelta::Kind::Free:
      return Stmt::skip();
  }
  return Stmt::skip();
}

StmtPtr bt_event(const std::string& comp, const IEvent& e, const CompartmentDecl& decl,
                 const Signature& host) {
  std::vector<StmtPtr> ss;
  for (const MemDelta& d : e.deltas) {
    StmtPtr s = bt_delta(comp, d, decl);
    if (s->kind != Stmt::Kind::Skip) ss.push_back(std::move(s));
  }
  switch (e.kind) {
    case IEvent::Kind::Call: {
      std::vector<ExprPtr> args;
      for (int64_t v : e.t.args) args.push_back(Expr::constant(v));
      ss.push_back(Stmt::call_cross(e.t.callee, e.t.proc, std::nullopt, -1,
                                    std::move(args)));
      break;
    }
    case IEvent::Kind::Return:
      // The same dispatch body lands in every exported procedure, so the
      // return arity follows the hosting signature. A mismatched case can
      // never execute: the entering call's signature fixes both the host's
      // arity and the recorded event's value shape.
      if (host.returns_value)
        ss.push_back(Stmt::ret(Expr::constant(e.t.has_val ? e.t.val : 0)));
      else
        ss.push_back(Stmt::ret(std::nullopt));
      break;
    case IEvent::Kind::Sys: {
      int gidx = decl.global_index.at(e.buffer);
      int64_t n = e.t.args.empty() ? 0 : e.t.args[0];
      ss.push_back(Stmt::call_sys(e.t.sys_name, e.buffer, gidx, Expr::constant(n),
                                  std::nullopt, -1));
      break;
    }
  }
  if (ss.size() == 1) return ss[0];
  return Stmt::seq(std::move(ss));
}

CompartmentDecl back_translate(const Interface& iface, const ITrace& it,
                               const std::string& k, const BtOptions& opts) {
  auto fi = iface.compartments.find(k);
  if (fi == iface.compartments.end())
    fail("UnknownCompartment", "back_translate: unknown compartment '" + k + "'");
  const CompartmentIface& ci = fi->second;

  GlobalsLayout inferred;
  const GlobalsLayout* layout = opts.layout;
  if (!layout) {
    inferred = infer_globals(it, iface);
    layout = &inferred;
  }

  if (!opts.skip_wf_check) {
    std::pair<std::string, std::string> entry{"", ""};
    for (const auto& [name, c] : iface.compartments)
      if (c.exports.count("main")) entry = {name, "main"};
    if (entry.first.empty() && !it.empty()) entry = {it[0].f_comp, it[0].f_proc};
    WfOutcome wf = check_wf(it, WfState::initial(iface, *layout, entry), iface);
    if (!wf.ok)
      fail("NotWellFormed",
           "event " + std::to_string(wf.at) + ": " + wf.error);
  }

  CompartmentDecl decl;
  decl.name = k;
  decl.exports = ci.exports;
  decl.imports = ci.imports;
  decl.syscalls = ci.syscalls;

  // Counter global first, then the buffers the trace touches.
  std::string ctr = "ctr";
  auto lit = layout->find(k);
  if (lit != layout->end()) {
    auto taken = [&](const std::string& n) {
      for (const GlobalDecl& g : lit->second)
        if (g.name == n) return true;
      return false;
    };
    for (int i = 0; taken(ctr); i++) ctr = "ctr" + std::to_string(i);
  }
  decl.global_index[ctr] = 0;
  decl.globals.push_back(GlobalDecl{ctr, 1, true});
  if (lit != layout->end()) {
    for (const GlobalDecl& g : lit->second) {
      decl.global_index[g.name] = static_cast<int>(decl.globals.size());
      decl.globals.push_back(g);
    }
  }

  // The padding helper is internal (not exported), so variants differ only
  // in silent steps.
  std::string pad_proc = "pad_step";
  while (ci.exports.count(pad_proc)) pad_proc += "_";

  // Events attributed to k, in order, become the dispatch cases shared by
  // every exported procedure.
  std::vector<const IEvent*> mine;
  for (const IEvent& e : it)
    if (e.f_comp == k) mine.push_back(&e);

  auto ctr_load = [&] { return Expr::load_global(ctr, 0, Expr::constant(0)); };

  auto make_body = [&](const Signature& sig) -> StmtPtr {
    StmtPtr chain = sig.returns_value ? Stmt::ret(Expr::constant(0))
                                      : Stmt::ret(std::nullopt);
    for (size_t idx = mine.size(); idx-- > 0;) {
      int n = static_cast<int>(idx);
      std::vector<StmtPtr> body;
      body.push_back(
          Stmt::gstore(ctr, 0, Expr::constant(0), Expr::constant(n + 1)));
      if (opts.pad) {
        body.push_back(Stmt::set("pad0", sig.param_count,
                                 Expr::binop(Op::Add,
                                             Expr::local("pad0", sig.param_count),
                                             Expr::constant(1))));
        body.push_back(Stmt::call_internal(pad_proc, std::nullopt, -1, {}));
      }
      if (opts.inject_ub_ordinal && *opts.inject_ub_ordinal == n) {
        if (opts.inject_div_zero)
          body.push_back(Stmt::gstore(
              ctr, 0, Expr::constant(0),
              Expr::binop(Op::Div, Expr::constant(1), Expr::constant(0))));
        else
          // Out of bounds, but not a literal index, so it survives the
          // static bounds check and fires at run time.
          body.push_back(Stmt::gstore(
              ctr, 0, Expr::binop(Op::Mul, Expr::constant(9), Expr::constant(11)),
              Expr::constant(0)));
      }
      body.push_back(bt_event(k, *mine[idx], decl, sig));
      chain = Stmt::if_(
          Expr::binop(Op::Eq, ctr_load(), Expr::constant(n)),
          body.size() == 1 ? body[0] : Stmt::seq(std::move(body)), chain);
    }
    return Stmt::while_(Expr::constant(1), std::move(chain));
  };

  for (const auto& [pn, sig] : ci.exports) {
    ProcDef def;
    for (int i = 0; i < sig.param_count; i++)
      def.params.push_back("x" + std::to_string(i));
    if (opts.pad) def.locals.push_back("pad0");
    def.body = make_body(sig);
    decl.proc_sigs[pn] = sig;
    decl.procs[pn] = std::move(def);
  }
  if (opts.pad) {
    ProcDef def;
    def.body = Stmt::ret(Expr::constant(0));
    decl.proc_sigs[pad_proc] = Signature{0, true};
    decl.procs[pad_proc] = std::move(def);
  }
  return decl;
}

Program back_translate_all(const Interface& iface, const ITrace& it,
                           const std::set<std::string>& pad_set) {
  GlobalsLayout layout = infer_globals(it, iface);
  Program p;
  bool checked = false;
  for (const auto& [name, c] : iface.compartments) {
    (void)c;
    BtOptions opts;
    opts.layout = &layout;
    opts.pad = pad_set.count(name) > 0;
    opts.skip_wf_check = checked;
    p.compartments[name] = back_translate(iface, it, name, opts);
    checked = true;
    if (c.exports.count("main")) p.main = {name, "main"};
  }
  return p;
}

}  // namespace secomp
