#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "secomp/lang.hpp"

namespace secomp {

// Register file: a0..a7 carry arguments and the return value (a0), t0..t7
// are temporaries, ra the link register, sp the current frame handle.
enum Reg : uint8_t {
  A0 = 0, A1, A2, A3, A4, A5, A6, A7,
  T0 = 8, T1, T2, T3, T4, T5, T6, T7,
  RA = 16,
  SP = 17,
  kNumRegs = 18,
};

const char* reg_name(uint8_t r);
std::optional<uint8_t> reg_from_name(const std::string& s);

struct Instr {
  enum class K : uint8_t {
    Li,      // rd := imm
    Mov,     // rd := rs1
    Binop,   // rd := rs1 op rs2
    LoadG,   // rd := global[rs1]
    StoreG,  // global[rs1] := rs2
    LoadF,   // rd := frame[imm]        (frame = block sp points into)
    StoreF,  // frame[imm] := rs1
    Jal,     // call comp.proc; flag gates compartment changes
    Jr,      // indirect jump/return through rs1; flag gates crossing
    Jcond,   // if rs1 != 0 jump to instruction imm
    Jmp,     // jump to instruction imm (optionally in another proc)
    Sys,     // syscall; a0 = global index, a1 = count, result in a0
    Halt,    // terminate with exit value rs1
  };
  K k = K::Li;
  Op op = Op::Add;
  uint8_t rd = 0, rs1 = 0, rs2 = 0;
  int64_t imm = 0;
  bool flag = false;
  std::string comp;    // Jal: empty = same compartment
  std::string proc;    // Jal target; Jmp cross-proc target (optional)
  std::string global;  // LoadG/StoreG
  std::string sys;     // Sys: read | write

  static Instr li(uint8_t rd, int64_t imm);
  static Instr mov(uint8_t rd, uint8_t rs);
  static Instr binop(Op op, uint8_t rd, uint8_t rs1, uint8_t rs2);
  static Instr load_g(uint8_t rd, std::string g, uint8_t rs_off);
  static Instr store_g(std::string g, uint8_t rs_off, uint8_t rs_val);
  static Instr load_f(uint8_t rd, int64_t off);
  static Instr store_f(int64_t off, uint8_t rs);
  static Instr jal(bool flag, std::string comp, std::string proc);
  static Instr jr(bool flag, uint8_t rs);
  static Instr jcond(uint8_t rs, int64_t index);
  static Instr jmp(int64_t index, std::string proc = "");
  static Instr sys_call(std::string name);
  static Instr halt(uint8_t rs);
};

struct TargetProc {
  std::string name;
  Signature sig;
  std::vector<Instr> code;
};

struct TargetCompartment {
  std::string name;
  CompartmentIface iface;
  std::vector<GlobalDecl> globals;
  std::map<std::string, int> global_index;
  std::map<std::string, TargetProc> procs;
};

struct TargetProgram {
  std::map<std::string, TargetCompartment> compartments;
  std::optional<std::pair<std::string, std::string>> entry;
};

std::string serialize_target(const TargetProgram& tp);
TargetProgram parse_target(const std::string& text);

TargetProgram tlink(const TargetProgram& a, const TargetProgram& b);

Interface interface_of(const TargetProgram& tp);

bool target_equal(const TargetProgram& a, const TargetProgram& b);

}  // namespace secomp
