#include "secomp/sem_target.hpp"

#include <algorithm>

#include "secomp/compile.hpp"

namespace secomp {

namespace {
constexpr int kMaxFrameSlots = 1 << 16;
}

Machine::Machine(const TargetProgram& tp) {
  if (!tp.entry) fail("NoEntry", "target program has no entry point");
  for (const auto& [name, c] : tp.compartments) {
    comp_idx_[name] = static_cast<int>(comps_.size());
    comps_.push_back(RComp{});
    RComp& rc = comps_.back();
    rc.name = name;
    rc.globals = c.globals;
    rc.exports = c.iface.exports;
    rc.imports = c.iface.imports;
    rc.syscalls = c.iface.syscalls;
    for (const auto& [pn, proc] : c.procs) {
      rc.proc_idx[pn] = static_cast<int>(rc.procs.size());
      rc.procs.push_back(RProc{pn, proc.sig, 2, {}});
    }
  }

  // Globals come first in the block space, compartments in name order,
  // globals in declaration order (mirrors source init).
  for (size_t ci = 0; ci < comps_.size(); ci++) {
    RComp& rc = comps_[ci];
    for (size_t gi = 0; gi < rc.globals.size(); gi++) {
      BlockId b = mem_.alloc(static_cast<CompId>(ci),
                             static_cast<int32_t>(rc.globals[gi].size));
      for (int64_t k = 0; k < rc.globals[gi].size; k++)
        mem_.store(static_cast<CompId>(ci), b, k, Value::intv(0));
      rc.gblocks.push_back(b);
      global_of_block_.push_back({static_cast<int>(ci), static_cast<int>(gi)});
    }
  }
  n_global_blocks_ = static_cast<int>(global_of_block_.size());

  // Resolve instruction operands; unresolved names become runtime Stuck.
  for (const auto& [name, c] : tp.compartments) {
    RComp& rc = comps_[static_cast<size_t>(comp_idx_[name])];
    for (const auto& [pn, proc] : c.procs) {
      RProc& rp = rc.procs[static_cast<size_t>(rc.proc_idx[pn])];
      int64_t max_off = -1;
      for (const Instr& i : proc.code) {
        RInstr r;
        r.k = i.k;
        r.op = i.op;
        r.rd = i.rd;
        r.rs1 = i.rs1;
        r.rs2 = i.rs2;
        r.flag = i.flag;
        r.imm = i.imm;
        switch (i.k) {
          case Instr::K::LoadF:
          case Instr::K::StoreF:
            max_off = std::max(max_off, i.imm);
            break;
          case Instr::K::LoadG:
          case Instr::K::StoreG: {
            auto it = c.global_index.find(i.global);
            r.gidx = it == c.global_index.end() ? kUnknown : it->second;
            break;
          }
          case Instr::K::Jal: {
            if (i.comp.empty()) {
              r.tcomp = kSelf;
            } else {
              auto it = comp_idx_.find(i.comp);
              r.tcomp = it == comp_idx_.end() ? kUnknown : it->second;
            }
            const RComp& tcmp =
                comps_[static_cast<size_t>(r.tcomp == kSelf ? comp_idx_[name]
                                                            : std::max(r.tcomp, 0))];
            if (r.tcomp == kUnknown) {
              r.tproc = kUnknown;
            } else {
              auto pit = tcmp.proc_idx.find(i.proc);
              r.tproc = pit == tcmp.proc_idx.end() ? kUnknown : pit->second;
            }
            break;
          }
          case Instr::K::Jmp: {
            if (i.proc.empty()) {
              r.tproc = kSelf;
            } else {
              auto pit = rc.proc_idx.find(i.proc);
              r.tproc = pit == rc.proc_idx.end() ? kUnknown : pit->second;
            }
            break;
          }
          case Instr::K::Sys:
            r.sys_read = i.sys == "read";
            break;
          default:
            break;
        }
        rp.code.push_back(r);
      }
      int fs = std::max<int64_t>(2, max_off + 1);
      fs = std::max(fs, kFrameSpillBase + std::max(0, rp.sig.param_count - 8));
      if (fs > kMaxFrameSlots)
        fail("UnsupportedConstruct", name + "." + pn + ": frame too large");
      rp.frame_size = fs;
    }
  }

  auto ei = comp_idx_.find(tp.entry->first);
  if (ei == comp_idx_.end()) fail("NoEntry", "entry compartment missing");
  cur_ = ei->second;
  RComp& ec = comps_[static_cast<size_t>(cur_)];
  auto pi = ec.proc_idx.find(tp.entry->second);
  if (pi == ec.proc_idx.end()) fail("NoEntry", "entry proc missing");
  pc_proc_ = pi->second;
  pc_idx_ = 0;

  regs_.fill(Value::undef());
  const RProc& entry = ec.procs[static_cast<size_t>(pc_proc_)];
  BlockId fb = mem_.alloc(static_cast<CompId>(cur_), entry.frame_size);
  mem_.store(static_cast<CompId>(cur_), fb, kFrameSavedSp, Value::undef());
  mem_.store(static_cast<CompId>(cur_), fb, kFrameSavedRa, Value::code(-1, -1, 0));
  regs_[SP] = Value::ptr(fb, 0);
}

BlockId Machine::global_block(const std::string& comp, const std::string& g) const {
  auto ci = comp_idx_.find(comp);
  if (ci == comp_idx_.end()) return -1;
  const RComp& rc = comps_[static_cast<size_t>(ci->second)];
  for (size_t i = 0; i < rc.globals.size(); i++)
    if (rc.globals[i].name == g) return rc.gblocks[i];
  return -1;
}

void Machine::stuck(const std::string& why) {
  status_ = Status::Stuck;
  offender_ = cur_name();
  (void)why;
  trace_.push_back(Event::undef(offender_));
}

std::vector<MemDelta> Machine::drain() {
  std::vector<MemDelta> out = std::move(pending_);
  pending_.clear();
  return out;
}

void Machine::record_global_store(BlockId b, int64_t off, const Value& v) {
  if (b < 0 || b >= n_global_blocks_) return;  // only global buffers are recorded
  auto [ci, gi] = global_of_block_[static_cast<size_t>(b)];
  pending_.push_back(MemDelta::store(comps_[(size_t)ci].name,
                                     comps_[(size_t)ci].globals[(size_t)gi].name, off,
                                     v));
}

void Machine::do_jal(const RInstr& ri) {
  int tc = ri.tcomp == kSelf ? cur_ : ri.tcomp;
  if (tc == kUnknown) {
    stuck("call to unknown compartment");
    return;
  }
  bool cross = tc != cur_;
  if (cross && !ri.flag) {
    stuck("unflagged cross-compartment call");
    return;
  }
  if (ri.tproc == kUnknown) {
    stuck("call to unknown proc");
    return;
  }
  RComp& callee_comp = comps_[static_cast<size_t>(tc)];
  RProc& callee = callee_comp.procs[static_cast<size_t>(ri.tproc)];

  Signature sig;
  if (cross) {
    auto ex = callee_comp.exports.find(callee.name);
    if (ex == callee_comp.exports.end()) {
      stuck("callee not exported");
      return;
    }
    auto im = comps_[(size_t)cur_].imports.find({callee_comp.name, callee.name});
    if (im == comps_[(size_t)cur_].imports.end() || !(im->second == ex->second)) {
      stuck("call not covered by imports");
      return;
    }
    sig = ex->second;
  } else {
    sig = callee.sig;
  }

  int n = sig.param_count;
  int k = std::min(n, 8);
  int s = n - k;
  std::vector<Value> args;
  args.reserve(static_cast<size_t>(n));
  for (int i = 0; i < k; i++) args.push_back(regs_[static_cast<size_t>(A0 + i)]);
  if (s > 0) {
    if (!regs_[SP].is_ptr()) {
      stuck("no frame for spilled arguments");
      return;
    }
    for (int j = 0; j < s; j++) {
      auto [v, err] = mem_.load(static_cast<CompId>(cur_), regs_[SP].blk,
                                regs_[SP].off + kFrameSpillBase + j);
      if (err != MemErr::None) {
        stuck(std::string("spilled argument: ") + to_string(err));
        return;
      }
      args.push_back(v);
    }
  }
  if (cross) {
    for (const Value& v : args) {
      if (!v.is_int()) {
        stuck("non-scalar argument");
        return;
      }
    }
  }

  Value ret = Value::code(cur_, pc_proc_, static_cast<int32_t>(pc_idx_ + 1));
  Value old_sp = regs_[SP];

  if (cross) {
    shadow_.push_back({cur_, pc_proc_, pc_idx_ + 1, old_sp, sig});
    if (s > 0) {
      mem_.set_perm(old_sp.blk, Perm::ReadOnly);
      spills_.push_back({old_sp.blk, cur_});
    }
    std::vector<int64_t> ints;
    ints.reserve(args.size());
    for (const Value& v : args) ints.push_back(v.num);
    Event ev = Event::call(cur_name(), callee_comp.name, callee.name, std::move(ints));
    IEvent ie;
    ie.kind = IEvent::Kind::Call;
    ie.f_comp = cur_name();
    ie.f_proc = cur_proc_name();
    ie.t = ev;
    ie.sig = sig;
    ie.deltas = drain();
    trace_.push_back(std::move(ev));
    itrace_.push_back(std::move(ie));
  }

  cur_ = tc;
  int fs = std::max(callee.frame_size, kFrameSpillBase + s);
  BlockId fb = mem_.alloc(static_cast<CompId>(cur_), fs);
  mem_.store(static_cast<CompId>(cur_), fb, kFrameSavedSp, old_sp);
  mem_.store(static_cast<CompId>(cur_), fb, kFrameSavedRa, ret);
  for (int j = 0; j < s; j++)
    mem_.store(static_cast<CompId>(cur_), fb, kFrameSpillBase + j,
               args[static_cast<size_t>(k + j)]);

  if (cross) {
    // Invalidate everything the callee is not entitled to see.
    for (int r = 0; r < kNumRegs; r++)
      if (r >= k) regs_[static_cast<size_t>(r)] = Value::undef();
  } else {
    regs_[RA] = ret;
  }
  regs_[SP] = Value::ptr(fb, 0);
  pc_proc_ = ri.tproc;
  pc_idx_ = 0;
}

void Machine::do_jr(const RInstr& ri) {
  const Value v = regs_[ri.rs1];
  if (!v.is_code()) {
    stuck("jump target is not a code address");
    return;
  }
  if (v.cp < 0) {  // entry sentinel: terminate
    if (!regs_[A0].is_int()) {
      stuck("non-scalar exit value");
      return;
    }
    status_ = Status::Final;
    final_value_ = regs_[A0].num;
    return;
  }
  if (v.cp == cur_) {
    if (v.pr < 0 || v.pr >= static_cast<int32_t>(comps_[(size_t)cur_].procs.size())) {
      stuck("jump to unknown proc");
      return;
    }
    pc_proc_ = v.pr;
    pc_idx_ = v.ix;
    return;
  }

  // Cross-compartment return.
  if (!ri.flag) {
    stuck("unflagged cross-compartment return");
    return;
  }
  if (shadow_.empty()) {
    stuck("cross return with empty shadow stack");
    return;
  }
  const ShadowFrame top = shadow_.back();
  if (top.ret_comp != v.cp || top.ret_proc != v.pr || top.ret_idx != v.ix) {
    stuck("wrong return address");
    return;
  }
  if (!(regs_[SP] == top.saved_sp)) {
    stuck("caller stack pointer not restored");
    return;
  }
  std::optional<int64_t> rv;
  if (top.sig.returns_value) {
    if (!regs_[A0].is_int()) {
      stuck("non-scalar return value");
      return;
    }
    rv = regs_[A0].num;
  }

  Event ev = Event::ret(cur_name(), comps_[static_cast<size_t>(v.cp)].name, rv);
  IEvent ie;
  ie.kind = IEvent::Kind::Return;
  ie.f_comp = cur_name();
  ie.f_proc = cur_proc_name();  // after an internal tail call this is the tail callee
  ie.t = ev;
  ie.deltas = drain();
  trace_.push_back(std::move(ev));
  itrace_.push_back(std::move(ie));

  shadow_.pop_back();
  if (top.sig.param_count > 8) {
    auto [sb, sc] = spills_.back();
    spills_.pop_back();
    (void)sc;
    mem_.set_perm(sb, Perm::ReadWrite);
  }

  cur_ = v.cp;
  pc_proc_ = v.pr;
  pc_idx_ = v.ix;
  Value sp = regs_[SP];
  Value a0 = regs_[A0];
  regs_.fill(Value::undef());
  regs_[SP] = sp;
  if (top.sig.returns_value) regs_[A0] = a0;
}

void Machine::do_sys(const RInstr& ri, IoScript& io) {
  RComp& rc = comps_[static_cast<size_t>(cur_)];
  const char* name = ri.sys_read ? "read" : "write";
  if (!rc.syscalls.count(name)) {
    stuck("syscall not allowed");
    return;
  }
  if (!regs_[A0].is_int()) {
    stuck("non-scalar buffer index");
    return;
  }
  int64_t gidx = regs_[A0].num;
  if (gidx < 0 || gidx >= static_cast<int64_t>(rc.globals.size())) {
    stuck("syscall buffer index out of range");
    return;
  }
  const GlobalDecl& g = rc.globals[static_cast<size_t>(gidx)];
  if (!g.is_public) {
    stuck("syscall buffer not public");
    return;
  }
  if (!regs_[A1].is_int()) {
    stuck("non-scalar syscall count");
    return;
  }
  int64_t n = regs_[A1].num;
  BlockId b = rc.gblocks[static_cast<size_t>(gidx)];
  SysResult r = ri.sys_read ? sys_read(mem_, static_cast<CompId>(cur_), b, n, io)
                            : sys_write(mem_, static_cast<CompId>(cur_), b, n, io);
  if (!r.err.empty()) {
    stuck(r.err);
    return;
  }
  Event ev = Event::sys(cur_name(), name, {n}, r.read_bytes, r.ret, r.written_bytes);
  IEvent ie;
  ie.kind = IEvent::Kind::Sys;
  ie.f_comp = cur_name();
  ie.f_proc = cur_proc_name();
  ie.t = ev;
  ie.buffer = g.name;
  ie.deltas = drain();
  trace_.push_back(std::move(ev));
  itrace_.push_back(std::move(ie));
  if (ri.sys_read && !r.read_bytes.empty()) {
    // The buffer refill happens at this step but belongs to the silent
    // changes seen by the next event.
    std::vector<Value> vs;
    vs.reserve(r.read_bytes.size());
    for (int64_t x : r.read_bytes) vs.push_back(Value::intv(x));
    pending_.push_back(MemDelta::bytes(cur_name(), g.name, 0, std::move(vs)));
  }
  regs_[A0] = Value::intv(r.ret);
  pc_idx_++;
}

void Machine::step(IoScript& io) {
  if (status_ != Status::Running) return;
  RComp& rc = comps_[static_cast<size_t>(cur_)];
  RProc& rp = rc.procs[static_cast<size_t>(pc_proc_)];
  if (pc_idx_ < 0 || pc_idx_ >= static_cast<int64_t>(rp.code.size())) {
    stuck("no instruction to execute");
    return;
  }
  const RInstr& ri = rp.code[static_cast<size_t>(pc_idx_)];
  switch (ri.k) {
    case Instr::K::Li:
      regs_[ri.rd] = Value::intv(ri.imm);
      pc_idx_++;
      return;
    case Instr::K::Mov:
      regs_[ri.rd] = regs_[ri.rs1];
      pc_idx_++;
      return;
    case Instr::K::Binop: {
      const Value& a = regs_[ri.rs1];
      const Value& b = regs_[ri.rs2];
      if (a.is_int() && b.is_int()) {
        auto r = eval_binop(ri.op, a.num, b.num);
        if (!r) {
          stuck("division by zero");
          return;
        }
        regs_[ri.rd] = Value::intv(*r);
      } else {
        regs_[ri.rd] = Value::undef();
      }
      pc_idx_++;
      return;
    }
    case Instr::K::LoadG: {
      if (ri.gidx < 0) {
        stuck("unknown global");
        return;
      }
      if (!regs_[ri.rs1].is_int()) {
        stuck("non-scalar global index");
        return;
      }
      auto [v, err] = mem_.load(static_cast<CompId>(cur_),
                                rc.gblocks[static_cast<size_t>(ri.gidx)],
                                regs_[ri.rs1].num);
      if (err != MemErr::None) {
        stuck(std::string("global load: ") + to_string(err));
        return;
      }
      regs_[ri.rd] = v;
      pc_idx_++;
      return;
    }
    case Instr::K::StoreG: {
      if (ri.gidx < 0) {
        stuck("unknown global");
        return;
      }
      if (!regs_[ri.rs1].is_int()) {
        stuck("non-scalar global index");
        return;
      }
      BlockId b = rc.gblocks[static_cast<size_t>(ri.gidx)];
      int64_t off = regs_[ri.rs1].num;
      MemErr err = mem_.store(static_cast<CompId>(cur_), b, off, regs_[ri.rs2]);
      if (err != MemErr::None) {
        stuck(std::string("global store: ") + to_string(err));
        return;
      }
      record_global_store(b, off, regs_[ri.rs2]);
      pc_idx_++;
      return;
    }
    case Instr::K::LoadF: {
      if (!regs_[SP].is_ptr()) {
        stuck("sp does not hold a frame");
        return;
      }
      auto [v, err] = mem_.load(static_cast<CompId>(cur_), regs_[SP].blk,
                                static_cast<int64_t>(regs_[SP].off) + ri.imm);
      if (err != MemErr::None) {
        stuck(std::string("frame load: ") + to_string(err));
        return;
      }
      regs_[ri.rd] = v;
      pc_idx_++;
      return;
    }
    case Instr::K::StoreF: {
      if (!regs_[SP].is_ptr()) {
        stuck("sp does not hold a frame");
        return;
      }
      BlockId b = regs_[SP].blk;
      int64_t off = static_cast<int64_t>(regs_[SP].off) + ri.imm;
      MemErr err = mem_.store(static_cast<CompId>(cur_), b, off, regs_[ri.rs1]);
      if (err != MemErr::None) {
        stuck(std::string("frame store: ") + to_string(err));
        return;
      }
      record_global_store(b, off, regs_[ri.rs1]);  // sp may point into a global
      pc_idx_++;
      return;
    }
    case Instr::K::Jcond:
      if (!regs_[ri.rs1].is_int()) {
        stuck("non-scalar branch condition");
        return;
      }
      pc_idx_ = regs_[ri.rs1].num != 0 ? ri.imm : pc_idx_ + 1;
      return;
    case Instr::K::Jmp:
      if (ri.tproc == kUnknown) {
        stuck("jump to unknown proc");
        return;
      }
      if (ri.tproc != kSelf) pc_proc_ = ri.tproc;  // internal tail transfer
      pc_idx_ = ri.imm;
      return;
    case Instr::K::Jal:
      do_jal(ri);
      return;
    case Instr::K::Jr:
      do_jr(ri);
      return;
    case Instr::K::Sys:
      do_sys(ri, io);
      return;
    case Instr::K::Halt:
      if (!regs_[ri.rs1].is_int()) {
        stuck("non-scalar exit value");
        return;
      }
      status_ = Status::Final;
      final_value_ = regs_[ri.rs1].num;
      return;
  }
}

TargetRun run_target(const TargetProgram& tp, IoScript io, int64_t fuel) {
  Machine m(tp);
  while (fuel > 0 && m.status() == Machine::Status::Running) {
    m.step(io);
    fuel--;
  }
  TargetRun out;
  out.trace = m.trace();
  out.itrace = m.itrace();
  switch (m.status()) {
    case Machine::Status::Final:
      out.outcome = RunOutcome::final_v(m.final_value());
      break;
    case Machine::Status::Stuck:
      out.outcome = RunOutcome::stuck(m.offender());
      break;
    case Machine::Status::Running:
      out.outcome = RunOutcome::out_of_fuel();
      break;
  }
  return out;
}

}  // namespace secomp
