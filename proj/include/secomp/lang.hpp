#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "secomp/trace.hpp"

namespace secomp {

// ---------------------------------------------------------------------------
// Source AST. Nodes are resolved during parsing (locals to slots, globals to
// indices, call targets to their kind) and treated as immutable afterwards,
// so compartments can share subtrees freely across link/split.

enum class Op : uint8_t { Add, Sub, Mul, Div, Mod, Lt, Le, Eq, Ne, And, Or, Not, Neg };

const char* to_string(Op op);
bool is_unop(Op op);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind : uint8_t { Const, Local, LoadGlobal, Binop, Unop };
  Kind kind = Kind::Const;
  int64_t num = 0;       // Const
  std::string name;      // Local / LoadGlobal
  int slot = -1;         // Local: frame slot
  int gidx = -1;         // LoadGlobal: index into compartment globals
  Op op = Op::Add;
  std::vector<ExprPtr> kids;

  static ExprPtr constant(int64_t v);
  static ExprPtr local(std::string name, int slot);
  static ExprPtr load_global(std::string name, int gidx, ExprPtr off);
  static ExprPtr binop(Op op, ExprPtr a, ExprPtr b);
  static ExprPtr unop(Op op, ExprPtr a);
};

enum class CallKind : uint8_t { Internal, Cross, Sys };

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;

struct Stmt {
  enum class Kind : uint8_t { Skip, Seq, Set, GStore, If, While, Call, Return };
  Kind kind = Kind::Skip;

  std::vector<StmtPtr> stmts;      // Seq; If uses stmts[0]=then stmts[1]=else;
                                   // While uses stmts[0]=body
  std::vector<ExprPtr> exprs;      // Set/GStore/If/While/Return operands; Call args
  std::string name;                // Set: local; GStore: global
  int slot = -1;                   // Set: local slot
  int gidx = -1;                   // GStore: global index

  CallKind call_kind = CallKind::Internal;
  std::string callee_comp, callee_proc;  // Cross; Internal uses callee_proc
  std::string sys_name, sys_buf;         // Sys
  int sys_gidx = -1;
  std::optional<std::string> dest;       // Call result variable
  int dest_slot = -1;

  bool has_expr = false;  // Return: value present

  static StmtPtr skip();
  static StmtPtr seq(std::vector<StmtPtr> ss);
  static StmtPtr set(std::string name, int slot, ExprPtr e);
  static StmtPtr gstore(std::string name, int gidx, ExprPtr off, ExprPtr val);
  static StmtPtr if_(ExprPtr c, StmtPtr a, StmtPtr b);
  static StmtPtr while_(ExprPtr c, StmtPtr body);
  static StmtPtr ret(std::optional<ExprPtr> e);
  static StmtPtr call_internal(std::string proc, std::optional<std::string> dest,
                               int dest_slot, std::vector<ExprPtr> args);
  static StmtPtr call_cross(std::string comp, std::string proc,
                            std::optional<std::string> dest, int dest_slot,
                            std::vector<ExprPtr> args);
  static StmtPtr call_sys(std::string name, std::string buf, int gidx, ExprPtr count,
                          std::optional<std::string> dest, int dest_slot);
};

struct GlobalDecl {
  std::string name;
  int64_t size = 0;
  bool is_public = true;
};

struct ProcDef {
  std::vector<std::string> params;
  std::vector<std::string> locals;
  StmtPtr body;
  int nslots() const { return static_cast<int>(params.size() + locals.size()); }
};

struct ImportKey {
  std::string comp, proc;
  friend bool operator<(const ImportKey& a, const ImportKey& b) {
    return a.comp != b.comp ? a.comp < b.comp : a.proc < b.proc;
  }
  friend bool operator==(const ImportKey& a, const ImportKey& b) {
    return a.comp == b.comp && a.proc == b.proc;
  }
};

struct CompartmentDecl {
  std::string name;
  std::map<std::string, Signature> exports;
  std::map<ImportKey, Signature> imports;
  std::set<std::string> syscalls;  // subset of {read, write}
  std::vector<GlobalDecl> globals;
  std::map<std::string, int> global_index;
  std::map<std::string, ProcDef> procs;
  std::map<std::string, Signature> proc_sigs;  // declared arity/ret per proc

  const GlobalDecl* find_global(const std::string& g) const;
};

struct Program {
  std::map<std::string, CompartmentDecl> compartments;
  std::optional<std::pair<std::string, std::string>> main;
};

struct CompartmentIface {
  std::map<std::string, Signature> exports;
  std::map<ImportKey, Signature> imports;
  std::set<std::string> syscalls;
  friend bool operator==(const CompartmentIface& a, const CompartmentIface& b) {
    return a.exports == b.exports && a.imports == b.imports && a.syscalls == b.syscalls;
  }
};

struct Interface {
  std::map<std::string, CompartmentIface> compartments;
  friend bool operator==(const Interface& a, const Interface& b) {
    return a.compartments == b.compartments;
  }
};

// ---------------------------------------------------------------------------
// Operations. All throw Diag on failure.

Program parse_program(const std::string& text);
std::string serialize_program(const Program& p);

void check_interfaces(const Program& p);

Program link(const Program& a, const Program& b);
std::pair<Program, Program> split(const Program& p, const std::set<std::string>& ks);

Interface interface_of(const Program& p);
Interface project_interface(const Interface& i, const std::set<std::string>& ks);

std::string serialize_interface(const Interface& i);
Interface parse_interface(const std::string& text);

bool program_equal(const Program& a, const Program& b);

constexpr int kMaxParams = 64;  // structural cap; 8 go in registers, rest spill

}  // namespace secomp
