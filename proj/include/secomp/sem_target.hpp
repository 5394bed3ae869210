#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "secomp/exec_common.hpp"
#include "secomp/memory.hpp"
#include "secomp/target.hpp"
#include "secomp/trace.hpp"

namespace secomp {

// Compartment-aware machine. Only flagged jal/jr may change the current
// compartment; crossings are checked against the interfaces and a shadow
// stack of (return address, saved stack pointer, signature) records. Return
// addresses are symbolic code triples, so they can be stored and moved but
// not forged by arithmetic.
//
// Frame protocol: every call allocates a fresh frame block for the callee;
// slot 0 receives the caller's sp, slot 1 the return address, and slots
// 2..2+s the surplus (9th and later) arguments. A cross call with surplus
// arguments makes the caller's frame read-only until the matching return,
// so a callback cannot covertly rewrite arguments of the outstanding call.
class Machine {
 public:
  explicit Machine(const TargetProgram& tp);  // throws Diag("NoEntry")

  enum class Status : uint8_t { Running, Final, Stuck };

  void step(IoScript& io);

  Status status() const { return status_; }
  int64_t final_value() const { return final_value_; }
  const std::string& offender() const { return offender_; }
  const Trace& trace() const { return trace_; }
  const ITrace& itrace() const { return itrace_; }
  const Memory& memory() const { return mem_; }
  size_t shadow_depth() const { return shadow_.size(); }

  BlockId global_block(const std::string& comp, const std::string& g) const;

 private:
  static constexpr int kSelf = -1;
  static constexpr int kUnknown = -2;

  struct RInstr {
    Instr::K k;
    Op op = Op::Add;
    uint8_t rd = 0, rs1 = 0, rs2 = 0;
    bool flag = false;
    bool sys_read = false;
    int64_t imm = 0;
    int tcomp = kSelf;
    int tproc = kSelf;
    int gidx = kUnknown;
  };
  struct RProc {
    std::string name;
    Signature sig;
    int frame_size = 2;
    std::vector<RInstr> code;
  };
  struct RComp {
    std::string name;
    std::vector<RProc> procs;
    std::map<std::string, int> proc_idx;
    std::vector<GlobalDecl> globals;
    std::vector<BlockId> gblocks;
    std::map<std::string, Signature> exports;
    std::map<ImportKey, Signature> imports;
    std::set<std::string> syscalls;
  };
  struct ShadowFrame {
    int ret_comp, ret_proc;
    int64_t ret_idx;
    Value saved_sp;
    Signature sig;
  };

  void stuck(const std::string& why);
  std::vector<MemDelta> drain();
  void record_global_store(BlockId b, int64_t off, const Value& v);
  void do_jal(const RInstr& ri);
  void do_jr(const RInstr& ri);
  void do_sys(const RInstr& ri, IoScript& io);
  const std::string& cur_name() const { return comps_[(size_t)cur_].name; }
  const std::string& cur_proc_name() const {
    return comps_[(size_t)cur_].procs[(size_t)pc_proc_].name;
  }

  std::vector<RComp> comps_;
  std::map<std::string, int> comp_idx_;
  int n_global_blocks_ = 0;
  std::vector<std::pair<int, int>> global_of_block_;  // block id -> (comp, gidx)

  Memory mem_;
  int cur_ = 0;
  int pc_proc_ = 0;
  int64_t pc_idx_ = 0;
  std::array<Value, kNumRegs> regs_;
  std::vector<ShadowFrame> shadow_;
  std::vector<std::pair<BlockId, int>> spills_;  // (spill frame, caller comp)

  Status status_ = Status::Running;
  int64_t final_value_ = 0;
  std::string offender_;
  Trace trace_;
  ITrace itrace_;
  std::vector<MemDelta> pending_;
};

struct TargetRun {
  Trace trace;
  ITrace itrace;
  RunOutcome outcome;
};

TargetRun run_target(const TargetProgram& tp, IoScript io, int64_t fuel);

}  // namespace secomp
