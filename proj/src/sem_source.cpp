#include "secomp/sem_source.hpp"

#include <algorithm>

namespace secomp {

SourceInterp::SourceInterp(const Program& p) : prog_(&p) {
  if (!p.main) fail("NoMain", "program has no main");
  for (const auto& [name, c] : p.compartments) {
    comp_ids_[name] = static_cast<CompId>(comp_names_.size());
    comp_names_.push_back(name);
    comp_decls_.push_back(&c);
  }
  global_blocks_.resize(comp_names_.size());
  for (size_t ci = 0; ci < comp_names_.size(); ci++) {
    const CompartmentDecl& c = *comp_decls_[ci];
    for (const GlobalDecl& g : c.globals) {
      BlockId b = mem_.alloc(static_cast<CompId>(ci), static_cast<int32_t>(g.size));
      for (int64_t i = 0; i < g.size; i++)
        mem_.store(static_cast<CompId>(ci), b, i, Value::intv(0));
      global_blocks_[ci].push_back(b);
    }
  }
  auto mc = comp_ids_.find(p.main->first);
  if (mc == comp_ids_.end()) fail("NoMain", "main compartment missing");
  cur_ = mc->second;
  const CompartmentDecl& c = comp_decl(cur_);
  auto it = c.procs.find(p.main->second);
  if (it == c.procs.end()) fail("NoMain", "main proc missing");
  cur_proc_ = &it->first;
  cur_def_ = &it->second;
  locals_.assign(static_cast<size_t>(cur_def_->nslots()), Value::intv(0));
  control_.push_back(cur_def_->body.get());
}

BlockId SourceInterp::global_block(const std::string& comp, const std::string& g) const {
  auto ci = comp_ids_.find(comp);
  if (ci == comp_ids_.end()) return -1;
  const CompartmentDecl& c = comp_decl(ci->second);
  auto gi = c.global_index.find(g);
  if (gi == c.global_index.end()) return -1;
  return global_blocks_[static_cast<size_t>(ci->second)][static_cast<size_t>(gi->second)];
}

void SourceInterp::stuck(const std::string& why) {
  status_ = Status::Stuck;
  offender_ = comp_names_[static_cast<size_t>(cur_)];
  (void)why;
  trace_.push_back(Event::undef(offender_));
}

bool SourceInterp::eval(const Expr& e, Value& out) {
  switch (e.kind) {
    case Expr::Kind::Const:
      out = Value::intv(e.num);
      return true;
    case Expr::Kind::Local:
      out = locals_[static_cast<size_t>(e.slot)];
      return true;
    case Expr::Kind::LoadGlobal: {
      Value off;
      if (!eval(*e.kids[0], off)) return false;
      if (!off.is_int()) {
        stuck("non-scalar global index");
        return false;
      }
      BlockId b = global_blocks_[static_cast<size_t>(cur_)][static_cast<size_t>(e.gidx)];
      auto [v, err] = mem_.load(cur_, b, off.num);
      if (err != MemErr::None) {
        stuck(std::string("global load: ") + to_string(err));
        return false;
      }
      out = v;
      return true;
    }
    case Expr::Kind::Binop: {
      Value a, b;
      if (!eval(*e.kids[0], a) || !eval(*e.kids[1], b)) return false;
      if (!a.is_int() || !b.is_int()) {
        stuck("non-scalar operand");
        return false;
      }
      auto r = eval_binop(e.op, a.num, b.num);
      if (!r) {
        stuck("division by zero");
        return false;
      }
      out = Value::intv(*r);
      return true;
    }
    case Expr::Kind::Unop: {
      Value a;
      if (!eval(*e.kids[0], a)) return false;
      if (!a.is_int()) {
        stuck("non-scalar operand");
        return false;
      }
      out = Value::intv(eval_unop(e.op, a.num));
      return true;
    }
  }
  return false;
}

void SourceInterp::step(IoScript& io) {
  if (status_ != Status::Running) return;

  if (pending_call_.active) {
    enter_callee();
    return;
  }
  if (pending_ret_.active) {
    do_return();
    return;
  }

  if (control_.empty()) {
    // Fell off the end of the body: implicit void return.
    begin_return(nullptr, io);
    return;
  }
  const Stmt* s = control_.back();
  control_.pop_back();
  exec_stmt(*s, io);
}

void SourceInterp::exec_stmt(const Stmt& s, IoScript& io) {
  switch (s.kind) {
    case Stmt::Kind::Skip:
      return;
    case Stmt::Kind::Seq:
      for (auto it = s.stmts.rbegin(); it != s.stmts.rend(); ++it)
        control_.push_back(it->get());
      return;
    case Stmt::Kind::Set: {
      Value v;
      if (!eval(*s.exprs[0], v)) return;
      locals_[static_cast<size_t>(s.slot)] = v;
      return;
    }
    case Stmt::Kind::GStore: {
      Value off, v;
      if (!eval(*s.exprs[0], off)) return;
      if (!off.is_int()) {
        stuck("non-scalar global index");
        return;
      }
      if (!eval(*s.exprs[1], v)) return;
      BlockId b = global_blocks_[static_cast<size_t>(cur_)][static_cast<size_t>(s.gidx)];
      MemErr err = mem_.store(cur_, b, off.num, v);
      if (err != MemErr::None) stuck(std::string("global store: ") + to_string(err));
      return;
    }
    case Stmt::Kind::If: {
      Value c;
      if (!eval(*s.exprs[0], c)) return;
      if (!c.is_int()) {
        stuck("non-scalar condition");
        return;
      }
      control_.push_back(c.num != 0 ? s.stmts[0].get() : s.stmts[1].get());
      return;
    }
    case Stmt::Kind::While: {
      Value c;
      if (!eval(*s.exprs[0], c)) return;
      if (!c.is_int()) {
        stuck("non-scalar condition");
        return;
      }
      if (c.num != 0) {
        control_.push_back(&s);
        control_.push_back(s.stmts[0].get());
      }
      return;
    }
    case Stmt::Kind::Return:
      begin_return(&s, io);
      return;
    case Stmt::Kind::Call:
      break;
  }

  // Calls.
  const CompartmentDecl& c = comp_decl(cur_);
  if (s.call_kind == CallKind::Sys) {
    if (!c.syscalls.count(s.sys_name)) {
      stuck("syscall not allowed");
      return;
    }
    const GlobalDecl& g = c.globals[static_cast<size_t>(s.sys_gidx)];
    if (!g.is_public) {
      stuck("syscall buffer not public");
      return;
    }
    Value n;
    if (!eval(*s.exprs[0], n)) return;
    if (!n.is_int()) {
      stuck("non-scalar syscall count");
      return;
    }
    BlockId b = global_blocks_[static_cast<size_t>(cur_)][static_cast<size_t>(s.sys_gidx)];
    SysResult r = s.sys_name == "read" ? sys_read(mem_, cur_, b, n.num, io)
                                       : sys_write(mem_, cur_, b, n.num, io);
    if (!r.err.empty()) {
      stuck(r.err);
      return;
    }
    trace_.push_back(Event::sys(comp_names_[static_cast<size_t>(cur_)], s.sys_name,
                                {n.num}, r.read_bytes, r.ret, r.written_bytes));
    if (s.dest_slot >= 0) locals_[static_cast<size_t>(s.dest_slot)] = Value::intv(r.ret);
    return;
  }

  std::vector<Value> args;
  args.reserve(s.exprs.size());
  for (const auto& a : s.exprs) {
    Value v;
    if (!eval(*a, v)) return;
    args.push_back(v);
  }

  PendingCall pc;
  pc.active = true;
  pc.args = std::move(args);
  if (s.call_kind == CallKind::Internal) {
    pc.cross = false;
    pc.callee_comp = cur_;
    pc.callee_proc = s.callee_proc;
    auto it = c.proc_sigs.find(s.callee_proc);
    if (it == c.proc_sigs.end()) {
      stuck("unknown internal proc");
      return;
    }
    pc.sig = it->second;
    if (static_cast<int>(pc.args.size()) != pc.sig.param_count) {
      stuck("internal call arity mismatch");
      return;
    }
  } else {
    // Cross-compartment call: (1) callee exported, (2) import present with
    // the same signature, (3) all arguments scalar.
    auto tc = comp_ids_.find(s.callee_comp);
    if (tc == comp_ids_.end()) {
      stuck("call to unknown compartment");
      return;
    }
    const CompartmentDecl& callee = comp_decl(tc->second);
    auto ex = callee.exports.find(s.callee_proc);
    if (ex == callee.exports.end()) {
      stuck("callee not exported");
      return;
    }
    auto im = c.imports.find({s.callee_comp, s.callee_proc});
    if (im == c.imports.end() || !(im->second == ex->second)) {
      stuck("call not covered by imports");
      return;
    }
    pc.sig = ex->second;
    if (static_cast<int>(pc.args.size()) != pc.sig.param_count) {
      stuck("cross call arity mismatch");
      return;
    }
    for (const Value& v : pc.args) {
      if (!v.is_int()) {
        stuck("non-scalar argument");
        return;
      }
    }
    if (!callee.procs.count(s.callee_proc)) {
      stuck("callee has no body");
      return;
    }
    pc.cross = true;
    pc.callee_comp = tc->second;
    pc.callee_proc = s.callee_proc;
    std::vector<int64_t> ints;
    for (const Value& v : pc.args) ints.push_back(v.num);
    trace_.push_back(Event::call(comp_names_[static_cast<size_t>(cur_)], s.callee_comp,
                                 s.callee_proc, std::move(ints)));
  }

  // Suspend the caller; the callee starts on the next step.
  Frame f;
  f.comp = cur_;
  f.proc = cur_proc_;
  f.def = cur_def_;
  f.locals = std::move(locals_);
  f.control = std::move(control_);
  f.dest_slot = s.dest_slot;
  f.cross = pc.cross;
  f.call_sig = pc.sig;
  frames_.push_back(std::move(f));
  pending_call_ = std::move(pc);
}

void SourceInterp::enter_callee() {
  PendingCall pc = std::move(pending_call_);
  pending_call_ = PendingCall{};
  cur_ = pc.callee_comp;
  const CompartmentDecl& c = comp_decl(cur_);
  auto it = c.procs.find(pc.callee_proc);
  cur_proc_ = &it->first;
  cur_def_ = &it->second;
  locals_.assign(static_cast<size_t>(cur_def_->nslots()), Value::intv(0));
  std::copy(pc.args.begin(), pc.args.end(), locals_.begin());
  control_.clear();
  control_.push_back(cur_def_->body.get());
}

void SourceInterp::begin_return(const Stmt* ret_stmt, IoScript&) {
  PendingReturn pr;
  pr.active = true;
  if (ret_stmt && ret_stmt->has_expr) {
    Value v;
    if (!eval(*ret_stmt->exprs[0], v)) return;
    if (!v.is_int()) {
      stuck("non-scalar return value");
      return;
    }
    pr.has_val = true;
    pr.val = v.num;
  }

  if (frames_.empty()) {
    if (!pr.has_val) {
      stuck("entry proc returned no value");
      return;
    }
    status_ = Status::Final;
    final_value_ = pr.val;
    return;
  }

  const Frame& f = frames_.back();
  if (f.cross) {
    if (f.call_sig.returns_value && !pr.has_val) {
      stuck("missing return value");
      return;
    }
    std::optional<int64_t> ev =
        f.call_sig.returns_value ? std::optional<int64_t>(pr.val) : std::nullopt;
    trace_.push_back(Event::ret(comp_names_[static_cast<size_t>(cur_)],
                                comp_names_[static_cast<size_t>(f.comp)], ev));
    if (!f.call_sig.returns_value) pr.has_val = false;
  }
  pending_ret_ = pr;
}

void SourceInterp::do_return() {
  PendingReturn pr = pending_ret_;
  pending_ret_ = PendingReturn{};
  Frame f = std::move(frames_.back());
  frames_.pop_back();
  CompId callee = cur_;
  cur_ = f.comp;
  cur_proc_ = f.proc;
  cur_def_ = f.def;
  locals_ = std::move(f.locals);
  control_ = std::move(f.control);
  if (f.dest_slot >= 0) {
    if (!pr.has_val) {
      cur_ = callee;  // blame the side that failed to supply a value
      stuck("call destination without a return value");
      return;
    }
    locals_[static_cast<size_t>(f.dest_slot)] = Value::intv(pr.val);
  }
}

SourceRun run_source(const Program& p, IoScript io, int64_t fuel) {
  SourceInterp si(p);
  while (fuel > 0 && si.status() == SourceInterp::Status::Running) {
    si.step(io);
    fuel--;
  }
  SourceRun out;
  out.trace = si.trace();
  switch (si.status()) {
    case SourceInterp::Status::Final:
      out.outcome = RunOutcome::final_v(si.final_value());
      break;
    case SourceInterp::Status::Stuck:
      out.outcome = RunOutcome::stuck(si.offender());
      break;
    case SourceInterp::Status::Running:
      out.outcome = RunOutcome::out_of_fuel();
      break;
  }
  return out;
}

}  // namespace secomp
