#include "secomp/target.hpp"

#include <sstream>

#include "sexp.hpp"

namespace secomp {

namespace {
const char* kRegNames[kNumRegs] = {"a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7",
                                   "t0", "t1", "t2", "t3", "t4", "t5", "t6", "t7",
                                   "ra", "sp"};
}

const char* reg_name(uint8_t r) { return r < kNumRegs ? kRegNames[r] : "?"; }

std::optional<uint8_t> reg_from_name(const std::string& s) {
  for (uint8_t i = 0; i < kNumRegs; i++)
    if (s == kRegNames[i]) return i;
  return std::nullopt;
}

Instr Instr::li(uint8_t rd, int64_t imm) {
  Instr i;
  i.k = K::Li;
  i.rd = rd;
  i.imm = imm;
  return i;
}
Instr Instr::mov(uint8_t rd, uint8_t rs) {
  Instr i;
  i.k = K::Mov;
  i.rd = rd;
  i.rs1 = rs;
  return i;
}
Instr Instr::binop(Op op, uint8_t rd, uint8_t rs1, uint8_t rs2) {
  Instr i;
  i.k = K::Binop;
  i.op = op;
  i.rd = rd;
  i.rs1 = rs1;
  i.rs2 = rs2;
  return i;
}
Instr Instr::load_g(uint8_t rd, std::string g, uint8_t rs_off) {
  Instr i;
  i.k = K::LoadG;
  i.rd = rd;
  i.rs1 = rs_off;
  i.global = std::move(g);
  return i;
}
Instr Instr::store_g(std::string g, uint8_t rs_off, uint8_t rs_val) {
  Instr i;
  i.k = K::StoreG;
  i.rs1 = rs_off;
  i.rs2 = rs_val;
  i.global = std::move(g);
  return i;
}
Instr Instr::load_f(uint8_t rd, int64_t off) {
  Instr i;
  i.k = K::LoadF;
  i.rd = rd;
  i.imm = off;
  return i;
}
Instr Instr::store_f(int64_t off, uint8_t rs) {
  Instr i;
  i.k = K::StoreF;
  i.rs1 = rs;
  i.imm = off;
  return i;
}
Instr Instr::jal(bool flag, std::string comp, std::string proc) {
  Instr i;
  i.k = K::Jal;
  i.flag = flag;
  i.comp = std::move(comp);
  i.proc = std::move(proc);
  return i;
}
Instr Instr::jr(bool flag, uint8_t rs) {
  Instr i;
  i.k = K::Jr;
  i.flag = flag;
  i.rs1 = rs;
  return i;
}
Instr Instr::jcond(uint8_t rs, int64_t index) {
  Instr i;
  i.k = K::Jcond;
  i.rs1 = rs;
  i.imm = index;
  return i;
}
Instr Instr::jmp(int64_t index, std::string proc) {
  Instr i;
  i.k = K::Jmp;
  i.imm = index;
  i.proc = std::move(proc);
  return i;
}
Instr Instr::sys_call(std::string name) {
  Instr i;
  i.k = K::Sys;
  i.sys = std::move(name);
  return i;
}
Instr Instr::halt(uint8_t rs) {
  Instr i;
  i.k = K::Halt;
  i.rs1 = rs;
  return i;
}

// ---------------------------------------------------------------------------

namespace {

using sexp::SExp;
using sexp::SLexer;
using sexp::ident;
using sexp::integer;
using sexp::need_atom;
using sexp::parse_sig;

std::optional<Op> binop_from_name(const std::string& s) {
  static const std::map<std::string, Op> m = {
      {"add", Op::Add}, {"sub", Op::Sub}, {"mul", Op::Mul}, {"div", Op::Div},
      {"mod", Op::Mod}, {"lt", Op::Lt},   {"le", Op::Le},   {"eq", Op::Eq},
      {"ne", Op::Ne},   {"and", Op::And}, {"or", Op::Or}};
  auto it = m.find(s);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

const char* binop_name(Op op) {
  switch (op) {
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Mod: return "mod";
    case Op::Lt: return "lt";
    case Op::Le: return "le";
    case Op::Eq: return "eq";
    case Op::Ne: return "ne";
    case Op::And: return "and";
    case Op::Or: return "or";
    default: return "?";
  }
}

uint8_t reg(const SExp& e) {
  need_atom(e, "register");
  auto r = reg_from_name(e.text);
  if (!r) fail("SyntaxError", "unknown register '" + e.text + "'", e.line, e.col);
  return *r;
}

Instr parse_instr(const SExp& e) {
  if (e.atom || e.kids.empty())
    fail("SyntaxError", "expected instruction", e.line, e.col);
  const std::string& h = need_atom(e.kids[0], "mnemonic").text;
  auto want = [&](size_t n) {
    if (e.kids.size() != n + 1)
      fail("SyntaxError", "'" + h + "' takes " + std::to_string(n) + " operands", e.line,
           e.col);
  };
  if (h == "li") {
    want(2);
    return Instr::li(reg(e.kids[1]), integer(e.kids[2]));
  }
  if (h == "mov") {
    want(2);
    return Instr::mov(reg(e.kids[1]), reg(e.kids[2]));
  }
  if (auto op = binop_from_name(h)) {
    want(3);
    return Instr::binop(*op, reg(e.kids[1]), reg(e.kids[2]), reg(e.kids[3]));
  }
  if (h == "loadg") {
    want(3);
    return Instr::load_g(reg(e.kids[1]), ident(e.kids[2], "global"), reg(e.kids[3]));
  }
  if (h == "storeg") {
    want(3);
    return Instr::store_g(ident(e.kids[1], "global"), reg(e.kids[2]), reg(e.kids[3]));
  }
  if (h == "loadf") {
    want(2);
    return Instr::load_f(reg(e.kids[1]), integer(e.kids[2]));
  }
  if (h == "storef") {
    want(2);
    return Instr::store_f(integer(e.kids[1]), reg(e.kids[2]));
  }
  if (h == "jal") {
    want(2);
    const std::string& f = need_atom(e.kids[1], "flag x|-").text;
    if (f != "x" && f != "-") fail("SyntaxError", "jal flag must be x or -", e.line, e.col);
    const std::string& t = need_atom(e.kids[2], "target").text;
    size_t dot = t.find('.');
    if (dot == std::string::npos) return Instr::jal(f == "x", "", t);
    return Instr::jal(f == "x", t.substr(0, dot), t.substr(dot + 1));
  }
  if (h == "jr") {
    want(2);
    const std::string& f = need_atom(e.kids[1], "flag x|-").text;
    if (f != "x" && f != "-") fail("SyntaxError", "jr flag must be x or -", e.line, e.col);
    return Instr::jr(f == "x", reg(e.kids[2]));
  }
  if (h == "jcond") {
    want(2);
    return Instr::jcond(reg(e.kids[1]), integer(e.kids[2]));
  }
  if (h == "jmp") {
    want(1);
    return Instr::jmp(integer(e.kids[1]));
  }
  if (h == "jmpp") {
    want(2);
    return Instr::jmp(integer(e.kids[2]), ident(e.kids[1], "proc"));
  }
  if (h == "sys") {
    want(1);
    const std::string& n = need_atom(e.kids[1], "syscall").text;
    if (n != "read" && n != "write")
      fail("SyntaxError", "unknown syscall '" + n + "'", e.line, e.col);
    return Instr::sys_call(n);
  }
  if (h == "halt") {
    want(1);
    return Instr::halt(reg(e.kids[1]));
  }
  fail("SyntaxError", "unknown mnemonic '" + h + "'", e.line, e.col);
}

std::string instr_to_string(const Instr& i) {
  std::ostringstream os;
  switch (i.k) {
    case Instr::K::Li: os << "(li " << reg_name(i.rd) << " " << i.imm << ")"; break;
    case Instr::K::Mov:
      os << "(mov " << reg_name(i.rd) << " " << reg_name(i.rs1) << ")";
      break;
    case Instr::K::Binop:
      os << "(" << binop_name(i.op) << " " << reg_name(i.rd) << " " << reg_name(i.rs1)
         << " " << reg_name(i.rs2) << ")";
      break;
    case Instr::K::LoadG:
      os << "(loadg " << reg_name(i.rd) << " " << i.global << " " << reg_name(i.rs1)
         << ")";
      break;
    case Instr::K::StoreG:
      os << "(storeg " << i.global << " " << reg_name(i.rs1) << " " << reg_name(i.rs2)
         << ")";
      break;
    case Instr::K::LoadF:
      os << "(loadf " << reg_name(i.rd) << " " << i.imm << ")";
      break;
    case Instr::K::StoreF:
      os << "(storef " << i.imm << " " << reg_name(i.rs1) << ")";
      break;
    case Instr::K::Jal:
      os << "(jal " << (i.flag ? "x" : "-") << " ";
      if (!i.comp.empty()) os << i.comp << ".";
      os << i.proc << ")";
      break;
    case Instr::K::Jr:
      os << "(jr " << (i.flag ? "x" : "-") << " " << reg_name(i.rs1) << ")";
      break;
    case Instr::K::Jcond:
      os << "(jcond " << reg_name(i.rs1) << " " << i.imm << ")";
      break;
    case Instr::K::Jmp:
      if (i.proc.empty())
        os << "(jmp " << i.imm << ")";
      else
        os << "(jmpp " << i.proc << " " << i.imm << ")";
      break;
    case Instr::K::Sys: os << "(sys " << i.sys << ")"; break;
    case Instr::K::Halt: os << "(halt " << reg_name(i.rs1) << ")"; break;
  }
  return os.str();
}

}  // namespace

std::string serialize_target(const TargetProgram& tp) {
  std::ostringstream os;
  for (const auto& [name, c] : tp.compartments) {
    os << "(tcompartment " << name << "\n  (interface\n";
    os << "   (exports";
    for (const auto& [n, sig] : c.iface.exports)
      os << " (" << n << " " << sig.param_count << " "
         << (sig.returns_value ? "ret" : "void") << ")";
    os << ")\n   (imports";
    for (const auto& [k, sig] : c.iface.imports)
      os << " (" << k.comp << " " << k.proc << " " << sig.param_count << " "
         << (sig.returns_value ? "ret" : "void") << ")";
    os << ")\n   (syscalls";
    for (const auto& s : c.iface.syscalls) os << " " << s;
    os << "))\n";
    os << "  (globals";
    for (const auto& g : c.globals)
      os << " (" << g.name << " " << g.size << " "
         << (g.is_public ? "public" : "private") << ")";
    os << ")\n";
    for (const auto& [pn, proc] : c.procs) {
      os << "  (tproc " << pn << " " << proc.sig.param_count << " "
         << (proc.sig.returns_value ? "ret" : "void") << "\n";
      for (const Instr& i : proc.code) os << "    " << instr_to_string(i) << "\n";
      os << "  )\n";
    }
    os << ")\n";
  }
  return os.str();
}

TargetProgram parse_target(const std::string& text) {
  SLexer lex(text);
  std::vector<SExp> top = lex.parse_all();
  TargetProgram tp;
  for (const SExp& e : top) {
    if (!e.is("tcompartment") || e.kids.size() < 2)
      fail("SyntaxError", "expected (tcompartment NAME ...)", e.line, e.col);
    TargetCompartment c;
    c.name = ident(e.kids[1], "compartment name");
    if (tp.compartments.count(c.name))
      fail("DuplicateName", "duplicate compartment '" + c.name + "'", e.line, e.col);
    for (size_t i = 2; i < e.kids.size(); i++) {
      const SExp& f = e.kids[i];
      if (f.is("interface")) {
        for (size_t k = 1; k < f.kids.size(); k++) {
          const SExp& part = f.kids[k];
          if (part.is("exports")) {
            for (size_t j = 1; j < part.kids.size(); j++) {
              const SExp& x = part.kids[j];
              if (x.atom || x.kids.size() != 3)
                fail("SyntaxError", "(PROC ARITY ret|void)", x.line, x.col);
              c.iface.exports[ident(x.kids[0], "export")] =
                  parse_sig(x.kids[1], x.kids[2]);
            }
          } else if (part.is("imports")) {
            for (size_t j = 1; j < part.kids.size(); j++) {
              const SExp& x = part.kids[j];
              if (x.atom || x.kids.size() != 4)
                fail("SyntaxError", "(COMP PROC ARITY ret|void)", x.line, x.col);
              c.iface.imports[{ident(x.kids[0], "compartment"),
                               ident(x.kids[1], "proc")}] =
                  parse_sig(x.kids[2], x.kids[3]);
            }
          } else if (part.is("syscalls")) {
            for (size_t j = 1; j < part.kids.size(); j++)
              c.iface.syscalls.insert(need_atom(part.kids[j], "syscall").text);
          } else {
            fail("SyntaxError", "unknown interface part", part.line, part.col);
          }
        }
      } else if (f.is("globals")) {
        for (size_t k = 1; k < f.kids.size(); k++) {
          const SExp& x = f.kids[k];
          if (x.atom || x.kids.size() != 3)
            fail("SyntaxError", "(NAME SIZE public|private)", x.line, x.col);
          GlobalDecl g;
          g.name = ident(x.kids[0], "global");
          g.size = integer(x.kids[1]);
          if (g.size < 0) fail("SyntaxError", "negative global size", x.line, x.col);
          const std::string& v = need_atom(x.kids[2], "public|private").text;
          if (v != "public" && v != "private")
            fail("SyntaxError", "expected public|private", x.kids[2].line,
                 x.kids[2].col);
          g.is_public = v == "public";
          if (c.global_index.count(g.name))
            fail("DuplicateName", "duplicate global '" + g.name + "'", x.line, x.col);
          c.global_index[g.name] = static_cast<int>(c.globals.size());
          c.globals.push_back(g);
        }
      } else if (f.is("tproc")) {
        if (f.kids.size() < 4)
          fail("SyntaxError", "(tproc NAME ARITY ret|void INSTR...)", f.line, f.col);
        TargetProc proc;
        proc.name = ident(f.kids[1], "proc name");
        proc.sig = parse_sig(f.kids[2], f.kids[3]);
        for (size_t k = 4; k < f.kids.size(); k++)
          proc.code.push_back(parse_instr(f.kids[k]));
        if (c.procs.count(proc.name))
          fail("DuplicateName", "duplicate proc '" + proc.name + "'", f.line, f.col);
        c.procs[proc.name] = std::move(proc);
      } else {
        fail("SyntaxError", "unknown tcompartment form", f.line, f.col);
      }
    }
    tp.compartments[c.name] = std::move(c);
  }
  for (const auto& [name, c] : tp.compartments) {
    auto it = c.iface.exports.find("main");
    if (it != c.iface.exports.end() && c.procs.count("main")) {
      if (tp.entry) fail("DuplicateName", "multiple compartments define main");
      tp.entry = {name, "main"};
    }
  }
  return tp;
}

TargetProgram tlink(const TargetProgram& a, const TargetProgram& b) {
  TargetProgram out = a;
  for (const auto& [name, c] : b.compartments) {
    if (out.compartments.count(name))
      fail("NameClash", "both sides define compartment '" + name + "'");
    out.compartments[name] = c;
  }
  if (a.entry && b.entry) fail("NameClash", "both sides define an entry point");
  out.entry = a.entry ? a.entry : b.entry;
  return out;
}

Interface interface_of(const TargetProgram& tp) {
  Interface i;
  for (const auto& [name, c] : tp.compartments) i.compartments[name] = c.iface;
  return i;
}

bool target_equal(const TargetProgram& a, const TargetProgram& b) {
  return serialize_target(a) == serialize_target(b) && a.entry == b.entry;
}

}  // namespace secomp
