#pragma once

#include <cstdint>
#include <deque>
#include <exception>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "secomp/value.hpp"

namespace secomp {

// Errors raised by the static pipeline (parsing, checking, compiling,
// serialization). Semantics never throws; dynamic failures are Stuck states.
struct Diag : std::exception {
  std::string code;  // SyntaxError, DuplicateName, ...
  std::string msg;
  int line = 0;
  int col = 0;
  mutable std::string formatted;
  std::string str() const;
  const char* what() const noexcept override;
};

[[noreturn]] void fail(const std::string& code, const std::string& msg, int line = 0,
                       int col = 0);

// ---------------------------------------------------------------------------
// Events and traces

struct Event {
  enum class Kind : uint8_t { Call, Return, Syscall, Undef };
  Kind kind = Kind::Undef;

  // Call: caller -> callee.proc(args)
  std::string caller, callee, proc;
  std::vector<int64_t> args;

  // Return: callee -> caller, val (has_val=false encodes void)
  bool has_val = false;
  int64_t val = 0;

  // Syscall: comp, name in {read,write}, args, read_bytes, ret, written_bytes
  std::string comp, sys_name;
  std::vector<int64_t> read_bytes, written_bytes;
  int64_t sys_ret = 0;

  static Event call(std::string caller, std::string callee, std::string proc,
                    std::vector<int64_t> args);
  static Event ret(std::string callee, std::string caller, std::optional<int64_t> val);
  static Event sys(std::string comp, std::string name, std::vector<int64_t> args,
                   std::vector<int64_t> read_bytes, int64_t ret,
                   std::vector<int64_t> written_bytes);
  static Event undef(std::string comp);

  // Compartment the event is blamed on / emitted by.
  const std::string& subject() const;

  friend bool operator==(const Event& a, const Event& b);
  friend bool operator!=(const Event& a, const Event& b) { return !(a == b); }
};

using Trace = std::vector<Event>;

bool has_undef(const Trace& t);

// m1 <= m2: equal when m1 is Undef-free, otherwise m1 minus its trailing
// Undef must be a prefix of m2. Total on all inputs.
bool prefix_rel(const Trace& m1, const Trace& m2);

// prefix_rel, and a trailing Undef(k) additionally requires k in `good`.
bool blame_rel(const Trace& m1, const Trace& m2, const std::set<std::string>& good);

// Call/Return events form a balanced Dyck word over compartment pairs on
// every prefix that does not end in Undef.
bool well_bracketed(const Trace& t);

std::string serialize_trace(const Trace& t);
Trace parse_trace(const std::string& text);  // throws Diag("ParseError") on bad input
std::string to_line(const Event& e);

// ---------------------------------------------------------------------------
// Memory deltas and annotated (informative) events

struct MemDelta {
  enum class Kind : uint8_t { Store, Bytes, Alloc, Free };
  Kind kind = Kind::Store;
  std::string comp;
  std::string global;          // Store/Bytes/Free target
  int64_t off = 0;             // Store/Bytes
  Value value;                 // Store
  std::vector<Value> values;   // Bytes
  int64_t size = 0;            // Alloc

  static MemDelta store(std::string comp, std::string global, int64_t off, Value v);
  static MemDelta bytes(std::string comp, std::string global, int64_t off,
                        std::vector<Value> vs);
  static MemDelta alloc(std::string comp, int64_t size);
  static MemDelta free_of(std::string comp, std::string global);

  friend bool operator==(const MemDelta& a, const MemDelta& b);
};

struct Signature {
  int param_count = 0;
  bool returns_value = true;
  friend bool operator==(const Signature& a, const Signature& b) {
    return a.param_count == b.param_count && a.returns_value == b.returns_value;
  }
  friend bool operator!=(const Signature& a, const Signature& b) { return !(a == b); }
};

// Plain event annotated with its emitter (compartment.proc) and the
// chronologically ordered global-buffer changes since the previous
// annotated event.
struct IEvent {
  enum class Kind : uint8_t { Call, Return, Sys };
  Kind kind = Kind::Call;
  std::string f_comp, f_proc;  // emitter
  Event t;                     // corresponding plain event
  Signature sig;               // Call only: callee signature
  std::string buffer;          // Sys only: global buffer name
  std::vector<MemDelta> deltas;

  friend bool operator==(const IEvent& a, const IEvent& b);
};

using ITrace = std::vector<IEvent>;

Trace project(const ITrace& it);

std::string serialize_itrace(const ITrace& it);
ITrace parse_itrace(const std::string& text);

// ---------------------------------------------------------------------------
// IO scripting

// Deterministic oracle for syscall results: `read` consumes byte chunks,
// `write` consumes acknowledgement counts. Exhaustion yields empty reads and
// zero acks, so runs are total.
struct IoScript {
  std::deque<std::vector<int64_t>> read_chunks;  // entries are bytes 0..255
  std::deque<int64_t> write_acks;

  std::vector<int64_t> next_chunk();
  int64_t next_ack();
};

std::string serialize_io(const IoScript& io);
IoScript parse_io(const std::string& text);

constexpr int64_t kReadLenCap = 4096;

}  // namespace secomp
