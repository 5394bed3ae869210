#include "secomp/compile.hpp"

#include <algorithm>

namespace secomp {

namespace {

int out_surplus(const CompartmentDecl& c, const Stmt& s) {
  int m = 0;
  if (s.kind == Stmt::Kind::Call && s.call_kind != CallKind::Sys)
    m = std::max(m, static_cast<int>(s.exprs.size()) - 8);
  for (const auto& k : s.stmts) m = std::max(m, out_surplus(c, *k));
  if (s.kind != Stmt::Kind::Call)
    for (const auto& e : s.exprs) (void)e;  // expressions contain no calls
  return m;
}

struct Emitter {
  const CompartmentDecl& c;
  const ProcDef& def;
  std::vector<Instr> code;
  int p0, l0, t0base;
  int max_temp = 0;

  Emitter(const CompartmentDecl& comp, const ProcDef& d, int spill_slots)
      : c(comp), def(d) {
    p0 = kFrameSpillBase + spill_slots;
    l0 = p0 + static_cast<int>(d.params.size());
    t0base = l0 + static_cast<int>(d.locals.size());
  }

  void emit(Instr i) { code.push_back(std::move(i)); }
  int fslot(int src_slot) const { return p0 + src_slot; }
  int temp(int d) {
    max_temp = std::max(max_temp, d + 1);
    return t0base + d;
  }

  // Leaves the value in t0; uses frame temps from depth d upward.
  void expr(const Expr& e, int d) {
    switch (e.kind) {
      case Expr::Kind::Const:
        emit(Instr::li(T0, e.num));
        return;
      case Expr::Kind::Local:
        emit(Instr::load_f(T0, fslot(e.slot)));
        return;
      case Expr::Kind::LoadGlobal:
        expr(*e.kids[0], d);
        emit(Instr::load_g(T0, e.name, T0));
        return;
      case Expr::Kind::Unop:
        expr(*e.kids[0], d);
        emit(Instr::li(T1, 0));
        if (e.op == Op::Not)
          emit(Instr::binop(Op::Eq, T0, T0, T1));
        else
          emit(Instr::binop(Op::Sub, T0, T1, T0));
        return;
      case Expr::Kind::Binop:
        expr(*e.kids[0], d);
        emit(Instr::store_f(temp(d), T0));
        expr(*e.kids[1], d + 1);
        emit(Instr::load_f(T1, temp(d)));
        emit(Instr::binop(e.op, T0, T1, T0));
        return;
    }
  }

  void epilogue() {
    emit(Instr::load_f(RA, kFrameSavedRa));
    emit(Instr::load_f(SP, kFrameSavedSp));
    emit(Instr::jr(true, RA));
  }

  void stmt(const Stmt& s) {
    switch (s.kind) {
      case Stmt::Kind::Skip:
        return;
      case Stmt::Kind::Seq:
        for (const auto& k : s.stmts) stmt(*k);
        return;
      case Stmt::Kind::Set:
        expr(*s.exprs[0], 0);
        emit(Instr::store_f(fslot(s.slot), T0));
        return;
      case Stmt::Kind::GStore:
        expr(*s.exprs[0], 0);
        emit(Instr::store_f(temp(0), T0));
        expr(*s.exprs[1], 1);
        emit(Instr::load_f(T1, temp(0)));
        emit(Instr::store_g(s.name, T1, T0));
        return;
      case Stmt::Kind::If: {
        expr(*s.exprs[0], 0);
        size_t to_then = code.size();
        emit(Instr::jcond(T0, -1));
        stmt(*s.stmts[1]);
        size_t to_end = code.size();
        emit(Instr::jmp(-1));
        code[to_then].imm = static_cast<int64_t>(code.size());
        stmt(*s.stmts[0]);
        code[to_end].imm = static_cast<int64_t>(code.size());
        return;
      }
      case Stmt::Kind::While: {
        size_t head = code.size();
        expr(*s.exprs[0], 0);
        emit(Instr::li(T1, 0));
        emit(Instr::binop(Op::Eq, T1, T0, T1));
        size_t to_end = code.size();
        emit(Instr::jcond(T1, -1));
        stmt(*s.stmts[0]);
        emit(Instr::jmp(static_cast<int64_t>(head)));
        code[to_end].imm = static_cast<int64_t>(code.size());
        return;
      }
      case Stmt::Kind::Return:
        if (s.has_expr) {
          expr(*s.exprs[0], 0);
          emit(Instr::mov(A0, T0));
        }
        epilogue();
        return;
      case Stmt::Kind::Call:
        break;
    }

    if (s.call_kind == CallKind::Sys) {
      expr(*s.exprs[0], 0);
      emit(Instr::mov(A1, T0));
      emit(Instr::li(A0, s.sys_gidx));
      emit(Instr::sys_call(s.sys_name));
      if (s.dest_slot >= 0) emit(Instr::store_f(fslot(s.dest_slot), A0));
      return;
    }

    int n = static_cast<int>(s.exprs.size());
    for (int i = 0; i < n; i++) {
      expr(*s.exprs[static_cast<size_t>(i)], i);
      emit(Instr::store_f(temp(i), T0));
    }
    int in_regs = std::min(n, 8);
    for (int i = 0; i < in_regs; i++)
      emit(Instr::load_f(static_cast<uint8_t>(A0 + i), temp(i)));
    for (int j = 8; j < n; j++) {
      emit(Instr::load_f(T0, temp(j)));
      emit(Instr::store_f(kFrameSpillBase + (j - 8), T0));
    }
    if (s.call_kind == CallKind::Cross)
      emit(Instr::jal(true, s.callee_comp, s.callee_proc));
    else
      emit(Instr::jal(false, "", s.callee_proc));
    if (s.dest_slot >= 0) emit(Instr::store_f(fslot(s.dest_slot), A0));
  }
};

TargetProc compile_proc(const CompartmentDecl& c, const std::string& name,
                        const ProcDef& def, const Signature& sig) {
  int n = sig.param_count;
  int in_surplus = std::max(0, n - 8);
  int spill = std::max(in_surplus, out_surplus(c, *def.body));

  Emitter em(c, def, spill);
  int in_regs = std::min(n, 8);
  for (int i = 0; i < in_regs; i++)
    em.emit(Instr::store_f(em.fslot(i), static_cast<uint8_t>(A0 + i)));
  for (int j = 8; j < n; j++) {
    em.emit(Instr::load_f(T0, kFrameSpillBase + (j - 8)));
    em.emit(Instr::store_f(em.fslot(j), T0));
  }
  if (!def.locals.empty()) {
    em.emit(Instr::li(T0, 0));
    for (size_t j = 0; j < def.locals.size(); j++)
      em.emit(Instr::store_f(em.l0 + static_cast<int>(j), T0));
  }
  em.stmt(*def.body);
  if (!sig.returns_value) em.epilogue();  // implicit void return at the end

  TargetProc tp;
  tp.name = name;
  tp.sig = sig;
  tp.code = std::move(em.code);
  return tp;
}

}  // namespace

TargetCompartment compile_compartment(const CompartmentDecl& c) {
  for (const auto& [pn, sig] : c.proc_sigs)
    if (sig.param_count > kMaxParams)
      fail("TooManyParams", c.name + "." + pn + " has arity " +
                                std::to_string(sig.param_count) + " > " +
                                std::to_string(kMaxParams));
  for (const auto& [key, sig] : c.imports)
    if (sig.param_count > kMaxParams)
      fail("TooManyParams", c.name + " imports " + key.comp + "." + key.proc +
                                " with arity " + std::to_string(sig.param_count));

  TargetCompartment out;
  out.name = c.name;
  out.iface = CompartmentIface{c.exports, c.imports, c.syscalls};
  out.globals = c.globals;
  out.global_index = c.global_index;
  for (const auto& [pn, def] : c.procs)
    out.procs[pn] = compile_proc(c, pn, def, c.proc_sigs.at(pn));
  return out;
}

TargetProgram compile_program(const Program& p) {
  TargetProgram out;
  for (const auto& [name, c] : p.compartments)
    out.compartments[name] = compile_compartment(c);
  out.entry = p.main;
  return out;
}

}  // namespace secomp
