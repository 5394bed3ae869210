#pragma once

#include <map>
#include <string>
#include <vector>

#include "secomp/exec_common.hpp"
#include "secomp/lang.hpp"
#include "secomp/memory.hpp"
#include "secomp/trace.hpp"

namespace secomp {

// Small-step, trace-producing interpreter for source programs. Dynamic
// failures never throw; they leave the machine Stuck on the offending
// compartment and the recorded trace ends with Undef(k).
class SourceInterp {
 public:
  explicit SourceInterp(const Program& p);  // throws Diag("NoMain") without an entry

  enum class Status : uint8_t { Running, Final, Stuck };

  // One small step; appends any emitted event to the trace.
  void step(IoScript& io);

  Status status() const { return status_; }
  int64_t final_value() const { return final_value_; }
  const std::string& offender() const { return offender_; }
  const Trace& trace() const { return trace_; }
  const Memory& memory() const { return mem_; }

  // Zero-initialized global block for (compartment, global), as allocated
  // by init. Compartments in name order, globals in declaration order.
  BlockId global_block(const std::string& comp, const std::string& g) const;

 private:
  struct Frame {
    CompId comp;
    const std::string* proc;
    const ProcDef* def;
    std::vector<Value> locals;
    std::vector<const Stmt*> control;
    int dest_slot = -1;   // where the pending call's result lands
    bool cross = false;
    Signature call_sig;   // signature of the pending call
  };

  // Pending cross/internal procedure call (the call-state of the step
  // relation) and pending return (the return-state).
  struct PendingCall {
    bool active = false;
    bool cross = false;
    CompId callee_comp;
    std::string callee_proc;
    std::vector<Value> args;
    Signature sig;
  };
  struct PendingReturn {
    bool active = false;
    bool has_val = false;
    int64_t val = 0;
  };

  void exec_stmt(const Stmt& s, IoScript& io);
  void enter_callee();
  void do_return();
  bool eval(const Expr& e, Value& out);  // false = UB, machine already Stuck
  void stuck(const std::string& why);
  void begin_return(const Stmt* ret_stmt, IoScript& io);

  const CompartmentDecl& comp_decl(CompId c) const { return *comp_decls_[(size_t)c]; }

  const Program* prog_;
  std::vector<std::string> comp_names_;
  std::vector<const CompartmentDecl*> comp_decls_;
  std::map<std::string, CompId> comp_ids_;
  std::vector<std::vector<BlockId>> global_blocks_;  // [comp][global index]

  Memory mem_;
  Status status_ = Status::Running;
  int64_t final_value_ = 0;
  std::string offender_;
  Trace trace_;

  // Current activation.
  CompId cur_;
  const std::string* cur_proc_;
  const ProcDef* cur_def_;
  std::vector<Value> locals_;
  std::vector<const Stmt*> control_;
  std::vector<Frame> frames_;

  PendingCall pending_call_;
  PendingReturn pending_ret_;
};

struct SourceRun {
  Trace trace;
  RunOutcome outcome;
};

SourceRun run_source(const Program& p, IoScript io, int64_t fuel);

}  // namespace secomp
