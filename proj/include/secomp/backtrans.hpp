#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "secomp/lang.hpp"
#include "secomp/target.hpp"
#include "secomp/trace.hpp"

namespace secomp {

// Per-compartment global buffer shapes used to thread annotated traces and
// to declare the globals of back-translated compartments.
using GlobalsLayout = std::map<std::string, std::vector<GlobalDecl>>;

GlobalsLayout infer_globals(const ITrace& it, const Interface& iface);
GlobalsLayout layout_of(const TargetProgram& tp);
GlobalsLayout layout_of(const Program& p);

// State threaded through an annotated trace while checking it: the current
// (compartment, proc), a globals-only memory image, and the cross-compartment
// call stack.
struct WfState {
  std::string f_comp, f_proc;
  std::map<std::string, std::map<std::string, std::vector<Value>>> globals;
  std::vector<std::pair<std::string, std::string>> stack;

  static WfState initial(const Interface& iface, const GlobalsLayout& layout,
                         const std::pair<std::string, std::string>& entry);
};

// One step of the well-formedness relation: applies the event's deltas to
// the image and checks the interface/stack/scalar conditions. Returns an
// error description (code: detail) or nullopt.
std::optional<std::string> wf_step(WfState& s, const IEvent& e, const Interface& iface);

struct WfOutcome {
  bool ok = true;
  size_t at = 0;       // index of the first failing event
  std::string error;   // code: detail
};

WfOutcome check_wf(const ITrace& it, WfState init, const Interface& iface);

// ---------------------------------------------------------------------------
// Back-translation: a well-formed annotated trace becomes a compartment whose
// exported procedures all run the same counter dispatch loop; case n replays
// the n-th event attributed to the compartment (its buffer writes first).

StmtPtr bt_delta(const std::string& comp, const MemDelta& d, const CompartmentDecl& decl);
StmtPtr bt_event(const std::string& comp, const IEvent& e, const CompartmentDecl& decl,
                 const Signature& host);

struct BtOptions {
  const GlobalsLayout* layout = nullptr;  // inferred from the trace when null
  bool pad = false;                       // add internal-only padding to every case
  std::optional<int> inject_ub_ordinal;   // sabotage the case with this ordinal
  bool inject_div_zero = true;            // false: out-of-bounds store instead
  bool skip_wf_check = false;
};

CompartmentDecl back_translate(const Interface& iface, const ITrace& it,
                               const std::string& k, const BtOptions& opts = {});

// All compartments of the interface, linked; pad_set selects compartments
// built with padding.
Program back_translate_all(const Interface& iface, const ITrace& it,
                           const std::set<std::string>& pad_set = {});

}  // namespace secomp
