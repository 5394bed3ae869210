#include "secomp/lang.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "sexp.hpp"

namespace secomp {

const char* to_string(Op op) {
  switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Mod: return "%";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Eq: return "=";
    case Op::Ne: return "!=";
    case Op::And: return "and";
    case Op::Or: return "or";
    case Op::Not: return "not";
    case Op::Neg: return "neg";
  }
  return "?";
}

bool is_unop(Op op) { return op == Op::Not || op == Op::Neg; }

ExprPtr Expr::constant(int64_t v) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Const;
  e->num = v;
  return e;
}
ExprPtr Expr::local(std::string name, int slot) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Local;
  e->name = std::move(name);
  e->slot = slot;
  return e;
}
ExprPtr Expr::load_global(std::string name, int gidx, ExprPtr off) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::LoadGlobal;
  e->name = std::move(name);
  e->gidx = gidx;
  e->kids.push_back(std::move(off));
  return e;
}
ExprPtr Expr::binop(Op op, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Binop;
  e->op = op;
  e->kids.push_back(std::move(a));
  e->kids.push_back(std::move(b));
  return e;
}
ExprPtr Expr::unop(Op op, ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Unop;
  e->op = op;
  e->kids.push_back(std::move(a));
  return e;
}

StmtPtr Stmt::skip() {
  auto s = std::make_shared<Stmt>();
  s->kind = Kind::Skip;
  return s;
}
StmtPtr Stmt::seq(std::vector<StmtPtr> ss) {
  auto s = std::make_shared<Stmt>();
  s->kind = Kind::Seq;
  s->stmts = std::move(ss);
  return s;
}
StmtPtr Stmt::set(std::string name, int slot, ExprPtr e) {
  auto s = std::make_shared<Stmt>();
  s->kind = Kind::Set;
  s->name = std::move(name);
  s->slot = slot;
  s->exprs.push_back(std::move(e));
  return s;
}
StmtPtr Stmt::gstore(std::string name, int gidx, ExprPtr off, ExprPtr val) {
  auto s = std::make_shared<Stmt>();
  s->kind = Kind::GStore;
  s->name = std::move(name);
  s->gidx = gidx;
  s->exprs.push_back(std::move(off));
  s->exprs.push_back(std::move(val));
  return s;
}
StmtPtr Stmt::if_(ExprPtr c, StmtPtr a, StmtPtr b) {
  auto s = std::make_shared<Stmt>();
  s->kind = Kind::If;
  s->exprs.push_back(std::move(c));
  s->stmts.push_back(std::move(a));
  s->stmts.push_back(std::move(b));
  return s;
}
StmtPtr Stmt::while_(ExprPtr c, StmtPtr body) {
  auto s = std::make_shared<Stmt>();
  s->kind = Kind::While;
  s->exprs.push_back(std::move(c));
  s->stmts.push_back(std::move(body));
  return s;
}
StmtPtr Stmt::ret(std::optional<ExprPtr> e) {
  auto s = std::make_shared<Stmt>();
  s->kind = Kind::Return;
  if (e) {
    s->has_expr = true;
    s->exprs.push_back(std::move(*e));
  }
  return s;
}
StmtPtr Stmt::call_internal(std::string proc, std::optional<std::string> dest,
                            int dest_slot, std::vector<ExprPtr> args) {
  auto s = std::make_shared<Stmt>();
  s->kind = Kind::Call;
  s->call_kind = CallKind::Internal;
  s->callee_proc = std::move(proc);
  s->dest = std::move(dest);
  s->dest_slot = dest_slot;
  s->exprs = std::move(args);
  return s;
}
StmtPtr Stmt::call_cross(std::string comp, std::string proc,
                         std::optional<std::string> dest, int dest_slot,
                         std::vector<ExprPtr> args) {
  auto s = std::make_shared<Stmt>();
  s->kind = Kind::Call;
  s->call_kind = CallKind::Cross;
  s->callee_comp = std::move(comp);
  s->callee_proc = std::move(proc);
  s->dest = std::move(dest);
  s->dest_slot = dest_slot;
  s->exprs = std::move(args);
  return s;
}
StmtPtr Stmt::call_sys(std::string name, std::string buf, int gidx, ExprPtr count,
                       std::optional<std::string> dest, int dest_slot) {
  auto s = std::make_shared<Stmt>();
  s->kind = Kind::Call;
  s->call_kind = CallKind::Sys;
  s->sys_name = std::move(name);
  s->sys_buf = std::move(buf);
  s->sys_gidx = gidx;
  s->dest = std::move(dest);
  s->dest_slot = dest_slot;
  s->exprs.push_back(std::move(count));
  return s;
}

const GlobalDecl* CompartmentDecl::find_global(const std::string& g) const {
  auto it = global_index.find(g);
  if (it == global_index.end()) return nullptr;
  return &globals[static_cast<size_t>(it->second)];
}

// ---------------------------------------------------------------------------
// S-expressions

namespace {

using sexp::SExp;
using sexp::SLexer;
using sexp::ident;
using sexp::integer;
using sexp::need_atom;
using sexp::parse_i64;
using sexp::parse_sig;


std::optional<Op> parse_op(const std::string& t) {
  static const std::map<std::string, Op> ops = {
      {"+", Op::Add}, {"-", Op::Sub},   {"*", Op::Mul},  {"/", Op::Div},
      {"%", Op::Mod}, {"<", Op::Lt},    {"<=", Op::Le},  {"=", Op::Eq},
      {"!=", Op::Ne}, {"and", Op::And}, {"or", Op::Or},  {"not", Op::Not},
      {"neg", Op::Neg}};
  auto it = ops.find(t);
  if (it == ops.end()) return std::nullopt;
  return it->second;
}

// Per-proc resolution context.
struct ProcCtx {
  const CompartmentDecl* comp;
  std::map<std::string, int> slots;
};

ExprPtr parse_expr(const SExp& e, const ProcCtx& ctx);

std::vector<ExprPtr> parse_exprs(const SExp& list, size_t from, const ProcCtx& ctx) {
  std::vector<ExprPtr> out;
  for (size_t i = from; i < list.kids.size(); i++)
    out.push_back(parse_expr(list.kids[i], ctx));
  return out;
}

ExprPtr parse_expr(const SExp& e, const ProcCtx& ctx) {
  if (e.atom) {
    int64_t v;
    if (parse_i64(e.text, v)) return Expr::constant(v);
    auto it = ctx.slots.find(e.text);
    if (it == ctx.slots.end())
      fail("UnknownReference", "unknown local '" + e.text + "'", e.line, e.col);
    return Expr::local(e.text, it->second);
  }
  if (e.kids.empty()) fail("SyntaxError", "empty expression", e.line, e.col);
  const SExp& head = need_atom(e.kids[0], "expression head");
  if (head.text == "gload") {
    if (e.kids.size() != 3) fail("SyntaxError", "(gload G E_off)", e.line, e.col);
    std::string g = ident(e.kids[1], "global");
    auto it = ctx.comp->global_index.find(g);
    if (it == ctx.comp->global_index.end())
      fail("UnknownReference", "unknown global '" + g + "'", e.kids[1].line,
           e.kids[1].col);
    return Expr::load_global(g, it->second, parse_expr(e.kids[2], ctx));
  }
  if (head.text == "op") {
    if (e.kids.size() < 3) fail("SyntaxError", "(op SYM E...)", e.line, e.col);
    need_atom(e.kids[1], "operator");
    auto op = parse_op(e.kids[1].text);
    if (!op)
      fail("SyntaxError", "unknown operator '" + e.kids[1].text + "'", e.kids[1].line,
           e.kids[1].col);
    if (is_unop(*op)) {
      if (e.kids.size() != 3)
        fail("SyntaxError", "unary operator takes one operand", e.line, e.col);
      return Expr::unop(*op, parse_expr(e.kids[2], ctx));
    }
    if (e.kids.size() != 4)
      fail("SyntaxError", "binary operator takes two operands", e.line, e.col);
    return Expr::binop(*op, parse_expr(e.kids[2], ctx), parse_expr(e.kids[3], ctx));
  }
  fail("SyntaxError", "unknown expression form '" + head.text + "'", e.line, e.col);
}

StmtPtr parse_stmt(const SExp& s, const ProcCtx& ctx);

StmtPtr parse_body(const SExp& list, size_t from, const ProcCtx& ctx) {
  std::vector<StmtPtr> ss;
  for (size_t i = from; i < list.kids.size(); i++)
    ss.push_back(parse_stmt(list.kids[i], ctx));
  if (ss.size() == 1) return ss[0];
  return Stmt::seq(std::move(ss));
}

int lookup_slot(const ProcCtx& ctx, const SExp& e) {
  std::string x = ident(e, "local");
  auto it = ctx.slots.find(x);
  if (it == ctx.slots.end())
    fail("UnknownReference", "unknown local '" + x + "'", e.line, e.col);
  return it->second;
}

StmtPtr parse_stmt(const SExp& s, const ProcCtx& ctx) {
  if (s.atom) fail("SyntaxError", "expected statement, got atom '" + s.text + "'",
                   s.line, s.col);
  if (s.kids.empty()) fail("SyntaxError", "empty statement", s.line, s.col);
  const SExp& head = need_atom(s.kids[0], "statement head");
  const std::string& h = head.text;

  if (h == "skip") {
    if (s.kids.size() != 1) fail("SyntaxError", "(skip)", s.line, s.col);
    return Stmt::skip();
  }
  if (h == "seq") return parse_body(s, 1, ctx);
  if (h == "set") {
    if (s.kids.size() != 3) fail("SyntaxError", "(set X E)", s.line, s.col);
    int slot = lookup_slot(ctx, s.kids[1]);
    return Stmt::set(s.kids[1].text, slot, parse_expr(s.kids[2], ctx));
  }
  if (h == "gstore") {
    if (s.kids.size() != 4) fail("SyntaxError", "(gstore G E_off E_val)", s.line, s.col);
    std::string g = ident(s.kids[1], "global");
    auto it = ctx.comp->global_index.find(g);
    if (it == ctx.comp->global_index.end())
      fail("UnknownReference", "unknown global '" + g + "'", s.kids[1].line,
           s.kids[1].col);
    return Stmt::gstore(g, it->second, parse_expr(s.kids[2], ctx),
                        parse_expr(s.kids[3], ctx));
  }
  if (h == "if") {
    if (s.kids.size() != 4) fail("SyntaxError", "(if E S S)", s.line, s.col);
    return Stmt::if_(parse_expr(s.kids[1], ctx), parse_stmt(s.kids[2], ctx),
                     parse_stmt(s.kids[3], ctx));
  }
  if (h == "while") {
    if (s.kids.size() != 3) fail("SyntaxError", "(while E S)", s.line, s.col);
    return Stmt::while_(parse_expr(s.kids[1], ctx), parse_stmt(s.kids[2], ctx));
  }
  if (h == "return") {
    if (s.kids.size() == 1) return Stmt::ret(std::nullopt);
    if (s.kids.size() != 2) fail("SyntaxError", "(return E?)", s.line, s.col);
    return Stmt::ret(parse_expr(s.kids[1], ctx));
  }
  if (h == "call") {
    if (s.kids.size() < 2) fail("SyntaxError", "(call X? TARGET E...)", s.line, s.col);
    // `_` marks "no destination"; a leading atom naming a local is the
    // destination; anything else is the target itself.
    size_t ti = 1;
    std::optional<std::string> dest;
    int dest_slot = -1;
    const SExp& first = need_atom(s.kids[1], "call target or destination");
    if (first.text == "_") {
      ti = 2;
    } else if (first.text.find('.') == std::string::npos && ctx.slots.count(first.text) &&
               s.kids.size() >= 3) {
      dest = first.text;
      dest_slot = ctx.slots.at(first.text);
      ti = 2;
    }
    if (ti >= s.kids.size()) fail("SyntaxError", "missing call target", s.line, s.col);
    const SExp& tgt = need_atom(s.kids[ti], "call target");
    std::string t = tgt.text;
    size_t dot = t.find('.');
    if (dot != std::string::npos) {
      std::string c = t.substr(0, dot), pn = t.substr(dot + 1);
      if (c == "sys") {
        if (pn != "read" && pn != "write")
          fail("UnknownReference", "unknown syscall '" + pn + "'", tgt.line, tgt.col);
        if (s.kids.size() != ti + 3)
          fail("SyntaxError", "(call X? sys." + pn + " G E_count)", s.line, s.col);
        std::string g = ident(s.kids[ti + 1], "global");
        auto git = ctx.comp->global_index.find(g);
        if (git == ctx.comp->global_index.end())
          fail("UnknownReference", "unknown global '" + g + "'", s.kids[ti + 1].line,
               s.kids[ti + 1].col);
        return Stmt::call_sys(pn, g, git->second, parse_expr(s.kids[ti + 2], ctx), dest,
                              dest_slot);
      }
      if (c == ctx.comp->name) {
        if (!ctx.comp->procs.count(pn))
          fail("UnknownReference", "unknown proc '" + pn + "'", tgt.line, tgt.col);
        return Stmt::call_internal(pn, dest, dest_slot, parse_exprs(s, ti + 1, ctx));
      }
      if (!ctx.comp->imports.count({c, pn}))
        fail("UnknownReference", "call to '" + t + "' without a matching import",
             tgt.line, tgt.col);
      return Stmt::call_cross(c, pn, dest, dest_slot, parse_exprs(s, ti + 1, ctx));
    }
    if (!ctx.comp->procs.count(t))
      fail("UnknownReference", "unknown proc '" + t + "'", tgt.line, tgt.col);
    return Stmt::call_internal(t, dest, dest_slot, parse_exprs(s, ti + 1, ctx));
  }
  fail("SyntaxError", "unknown statement form '" + h + "'", s.line, s.col);
}

CompartmentDecl parse_compartment(const SExp& top) {
  CompartmentDecl c;
  if (top.kids.size() < 2)
    fail("SyntaxError", "(compartment NAME ...)", top.line, top.col);
  c.name = ident(top.kids[1], "compartment name");

  // First pass: declarations (interface, globals, proc headers), so bodies
  // can reference procs defined later.
  struct PendingProc {
    const SExp* form;
    std::string name;
  };
  std::vector<PendingProc> pending;
  for (size_t i = 2; i < top.kids.size(); i++) {
    const SExp& e = top.kids[i];
    if (e.atom) fail("SyntaxError", "unexpected atom '" + e.text + "'", e.line, e.col);
    if (e.kids.empty()) fail("SyntaxError", "empty form", e.line, e.col);
    const std::string& h = need_atom(e.kids[0], "form head").text;
    if (h == "exports") {
      for (size_t k = 1; k < e.kids.size(); k++) {
        const SExp& x = e.kids[k];
        if (x.atom || x.kids.size() != 3)
          fail("SyntaxError", "(PROC ARITY ret|void)", x.line, x.col);
        std::string pn = ident(x.kids[0], "export name");
        if (c.exports.count(pn))
          fail("DuplicateName", "duplicate export '" + pn + "'", x.line, x.col);
        c.exports[pn] = parse_sig(x.kids[1], x.kids[2]);
      }
    } else if (h == "imports") {
      for (size_t k = 1; k < e.kids.size(); k++) {
        const SExp& x = e.kids[k];
        if (x.atom || x.kids.size() != 4)
          fail("SyntaxError", "(COMP PROC ARITY ret|void)", x.line, x.col);
        std::string cn = ident(x.kids[0], "compartment name");
        std::string pn = ident(x.kids[1], "proc name");
        if (cn == c.name)
          fail("SyntaxError", "compartment imports from itself", x.line, x.col);
        ImportKey key{cn, pn};
        if (c.imports.count(key))
          fail("DuplicateName", "duplicate import '" + cn + "." + pn + "'", x.line,
               x.col);
        c.imports[key] = parse_sig(x.kids[2], x.kids[3]);
      }
    } else if (h == "syscalls") {
      for (size_t k = 1; k < e.kids.size(); k++) {
        const std::string& sc = need_atom(e.kids[k], "syscall name").text;
        if (sc != "read" && sc != "write")
          fail("SyntaxError", "unknown syscall '" + sc + "'", e.kids[k].line,
               e.kids[k].col);
        c.syscalls.insert(sc);
      }
    } else if (h == "global") {
      if (e.kids.size() != 4)
        fail("SyntaxError", "(global NAME SIZE public|private)", e.line, e.col);
      GlobalDecl g;
      g.name = ident(e.kids[1], "global name");
      g.size = integer(e.kids[2]);
      if (g.size < 0) fail("SyntaxError", "negative global size", e.line, e.col);
      const std::string& v = need_atom(e.kids[3], "public|private").text;
      if (v == "public")
        g.is_public = true;
      else if (v == "private")
        g.is_public = false;
      else
        fail("SyntaxError", "expected public|private", e.kids[3].line, e.kids[3].col);
      if (c.global_index.count(g.name))
        fail("DuplicateName", "duplicate global '" + g.name + "'", e.line, e.col);
      c.global_index[g.name] = static_cast<int>(c.globals.size());
      c.globals.push_back(g);
    } else if (h == "proc") {
      if (e.kids.size() < 3)
        fail("SyntaxError", "(proc NAME (PARAMS...) ...)", e.line, e.col);
      std::string pn = ident(e.kids[1], "proc name");
      if (c.procs.count(pn))
        fail("DuplicateName", "duplicate proc '" + pn + "'", e.line, e.col);
      c.procs[pn] = ProcDef{};  // placeholder; body filled in second pass
      pending.push_back({&e, pn});
    } else {
      fail("SyntaxError", "unknown form '" + h + "'", e.line, e.col);
    }
  }

  // Record declared signatures before resolving bodies: arity from the
  // params list, return presence from the export entry when present
  // (non-exported procs default to returning a value; the all-paths check
  // in check_interfaces pins it down).
  for (auto& pp : pending) {
    const SExp& e = *pp.form;
    const SExp& params = e.kids[2];
    if (params.atom) fail("SyntaxError", "(PARAMS...) must be a list", params.line,
                          params.col);
    ProcDef def;
    for (const SExp& x : params.kids) def.params.push_back(ident(x, "param name"));
    size_t body_from = 3;
    if (e.kids.size() > 3 && e.kids[3].is("locals")) {
      for (size_t k = 1; k < e.kids[3].kids.size(); k++)
        def.locals.push_back(ident(e.kids[3].kids[k], "local name"));
      body_from = 4;
    }
    Signature sig;
    sig.param_count = static_cast<int>(def.params.size());
    auto ex = c.exports.find(pp.name);
    sig.returns_value = ex == c.exports.end() ? true : ex->second.returns_value;
    c.proc_sigs[pp.name] = sig;
    c.procs[pp.name] = std::move(def);
    (void)body_from;
  }

  // Second pass: bodies, with every proc of the compartment in scope.
  for (auto& pp : pending) {
    const SExp& e = *pp.form;
    ProcDef& def = c.procs[pp.name];
    ProcCtx ctx;
    ctx.comp = &c;
    int slot = 0;
    for (const auto& x : def.params) {
      if (ctx.slots.count(x))
        fail("DuplicateName", "duplicate param '" + x + "' in proc " + pp.name, e.line,
             e.col);
      ctx.slots[x] = slot++;
    }
    for (const auto& x : def.locals) {
      if (ctx.slots.count(x))
        fail("DuplicateName", "duplicate local '" + x + "' in proc " + pp.name, e.line,
             e.col);
      ctx.slots[x] = slot++;
    }
    size_t body_from = 3;
    if (e.kids.size() > 3 && e.kids[3].is("locals")) body_from = 4;
    def.body = body_from < e.kids.size() ? parse_body(e, body_from, ctx) : Stmt::skip();
  }
  return c;
}

}  // namespace

Program parse_program(const std::string& text) {
  SLexer lex(text);
  std::vector<SExp> top = lex.parse_all();
  Program p;
  for (const SExp& e : top) {
    if (!e.is("compartment"))
      fail("SyntaxError", "expected (compartment ...)", e.line, e.col);
    CompartmentDecl c = parse_compartment(e);
    if (p.compartments.count(c.name))
      fail("DuplicateName", "duplicate compartment '" + c.name + "'", e.line, e.col);
    p.compartments[c.name] = std::move(c);
  }
  for (const auto& [name, c] : p.compartments) {
    if (c.exports.count("main")) {
      if (p.main)
        fail("DuplicateName", "multiple compartments export main: " + p.main->first +
                                  " and " + name);
      p.main = {name, "main"};
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Canonical printer

namespace {

void print_expr(std::ostringstream& os, const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Const: os << e.num; return;
    case Expr::Kind::Local: os << e.name; return;
    case Expr::Kind::LoadGlobal:
      os << "(gload " << e.name << " ";
      print_expr(os, *e.kids[0]);
      os << ")";
      return;
    case Expr::Kind::Binop:
      os << "(op " << to_string(e.op) << " ";
      print_expr(os, *e.kids[0]);
      os << " ";
      print_expr(os, *e.kids[1]);
      os << ")";
      return;
    case Expr::Kind::Unop:
      os << "(op " << to_string(e.op) << " ";
      print_expr(os, *e.kids[0]);
      os << ")";
      return;
  }
}

void print_stmt(std::ostringstream& os, const Stmt& s) {
  switch (s.kind) {
    case Stmt::Kind::Skip: os << "(seq)"; return;
    case Stmt::Kind::Seq:
      os << "(seq";
      for (const auto& k : s.stmts) {
        os << " ";
        print_stmt(os, *k);
      }
      os << ")";
      return;
    case Stmt::Kind::Set:
      os << "(set " << s.name << " ";
      print_expr(os, *s.exprs[0]);
      os << ")";
      return;
    case Stmt::Kind::GStore:
      os << "(gstore " << s.name << " ";
      print_expr(os, *s.exprs[0]);
      os << " ";
      print_expr(os, *s.exprs[1]);
      os << ")";
      return;
    case Stmt::Kind::If:
      os << "(if ";
      print_expr(os, *s.exprs[0]);
      os << " ";
      print_stmt(os, *s.stmts[0]);
      os << " ";
      print_stmt(os, *s.stmts[1]);
      os << ")";
      return;
    case Stmt::Kind::While:
      os << "(while ";
      print_expr(os, *s.exprs[0]);
      os << " ";
      print_stmt(os, *s.stmts[0]);
      os << ")";
      return;
    case Stmt::Kind::Return:
      if (s.has_expr) {
        os << "(return ";
        print_expr(os, *s.exprs[0]);
        os << ")";
      } else {
        os << "(return)";
      }
      return;
    case Stmt::Kind::Call: {
      os << "(call " << (s.dest ? *s.dest : "_") << " ";
      if (s.call_kind == CallKind::Sys) {
        os << "sys." << s.sys_name << " " << s.sys_buf << " ";
        print_expr(os, *s.exprs[0]);
      } else {
        if (s.call_kind == CallKind::Cross) os << s.callee_comp << ".";
        os << s.callee_proc;
        for (const auto& a : s.exprs) {
          os << " ";
          print_expr(os, *a);
        }
      }
      os << ")";
      return;
    }
  }
}

void print_iface_parts(std::ostringstream& os, const std::map<std::string, Signature>& ex,
                       const std::map<ImportKey, Signature>& im,
                       const std::set<std::string>& sys, const char* indent) {
  os << indent << "(exports";
  for (const auto& [n, sig] : ex)
    os << " (" << n << " " << sig.param_count << " " << (sig.returns_value ? "ret" : "void")
       << ")";
  os << ")\n";
  os << indent << "(imports";
  for (const auto& [k, sig] : im)
    os << " (" << k.comp << " " << k.proc << " " << sig.param_count << " "
       << (sig.returns_value ? "ret" : "void") << ")";
  os << ")\n";
  os << indent << "(syscalls";
  for (const auto& sc : sys) os << " " << sc;
  os << ")\n";
}

}  // namespace

std::string serialize_program(const Program& p) {
  std::ostringstream os;
  for (const auto& [name, c] : p.compartments) {
    os << "(compartment " << name << "\n";
    print_iface_parts(os, c.exports, c.imports, c.syscalls, "  ");
    for (const auto& g : c.globals)
      os << "  (global " << g.name << " " << g.size << " "
         << (g.is_public ? "public" : "private") << ")\n";
    for (const auto& [pn, def] : c.procs) {
      os << "  (proc " << pn << " (";
      for (size_t i = 0; i < def.params.size(); i++)
        os << (i ? " " : "") << def.params[i];
      os << ")";
      if (!def.locals.empty()) {
        os << " (locals";
        for (const auto& l : def.locals) os << " " << l;
        os << ")";
      }
      os << "\n    ";
      std::ostringstream body;
      print_stmt(body, *def.body);
      os << body.str() << ")\n";
    }
    os << ")\n";
  }
  return os.str();
}

bool program_equal(const Program& a, const Program& b) {
  return serialize_program(a) == serialize_program(b) &&
         a.main == b.main;
}

// ---------------------------------------------------------------------------
// Static interface check

namespace {

bool returns_on_all_paths(const Stmt& s) {
  switch (s.kind) {
    case Stmt::Kind::Return: return true;
    case Stmt::Kind::Seq:
      for (const auto& k : s.stmts)
        if (returns_on_all_paths(*k)) return true;
      return false;
    case Stmt::Kind::If:
      return returns_on_all_paths(*s.stmts[0]) && returns_on_all_paths(*s.stmts[1]);
    case Stmt::Kind::While:
      // A loop with a constant-true condition never falls through; the
      // language has no break, so control only leaves via return.
      return s.exprs[0]->kind == Expr::Kind::Const && s.exprs[0]->num != 0;
    default:
      return false;
  }
}

struct BodyChecker {
  const Program& p;
  const CompartmentDecl& c;
  const std::string& proc_name;
  bool expects_value;

  void expr(const Expr& e) const {
    if (e.kind == Expr::Kind::LoadGlobal) {
      bounds_if_const(e.name, *e.kids[0]);
    }
    for (const auto& k : e.kids) expr(*k);
  }

  void bounds_if_const(const std::string& g, const Expr& off) const {
    if (off.kind != Expr::Kind::Const) return;
    const GlobalDecl* gd = c.find_global(g);
    if (gd && (off.num < 0 || off.num >= gd->size))
      fail("OutOfBounds", "constant index " + std::to_string(off.num) + " out of bounds for global '" +
                              g + "' (size " + std::to_string(gd->size) + ") in " +
                              c.name + "." + proc_name);
  }

  void stmt(const Stmt& s) const {
    for (const auto& e : s.exprs) expr(*e);
    switch (s.kind) {
      case Stmt::Kind::GStore:
        bounds_if_const(s.name, *s.exprs[0]);
        break;
      case Stmt::Kind::Return:
        if (s.has_expr != expects_value)
          fail("SignatureMismatch",
               c.name + "." + proc_name + ": return " +
                   (s.has_expr ? "with a value in a void proc" : "without a value"));
        break;
      case Stmt::Kind::Call: {
        if (s.call_kind == CallKind::Sys) {
          if (!c.syscalls.count(s.sys_name))
            fail("SyscallNotAllowed",
                 c.name + " calls sys." + s.sys_name + " without declaring it");
          const GlobalDecl* gd = c.find_global(s.sys_buf);
          if (gd && !gd->is_public)
            fail("SyscallNotAllowed", c.name + ": syscall buffer '" + s.sys_buf +
                                          "' must be a public global");
        } else {
          Signature sig;
          if (s.call_kind == CallKind::Internal) {
            auto it = c.proc_sigs.find(s.callee_proc);
            if (it == c.proc_sigs.end())
              fail("UnknownReference", "unknown proc '" + s.callee_proc + "'");
            sig = it->second;
          } else {
            auto it = c.imports.find({s.callee_comp, s.callee_proc});
            if (it == c.imports.end())
              fail("UnknownReference",
                   c.name + " calls " + s.callee_comp + "." + s.callee_proc +
                       " without a matching import");
            sig = it->second;
          }
          if (static_cast<int>(s.exprs.size()) != sig.param_count)
            fail("SignatureMismatch",
                 c.name + "." + proc_name + " passes " + std::to_string(s.exprs.size()) +
                     " args to " + s.callee_proc + " (arity " +
                     std::to_string(sig.param_count) + ")");
          if (s.dest && !sig.returns_value)
            fail("SignatureMismatch", c.name + "." + proc_name +
                                          ": destination for a void call to " +
                                          s.callee_proc);
        }
        break;
      }
      default:
        break;
    }
    for (const auto& k : s.stmts) stmt(*k);
  }
};

}  // namespace

void check_interfaces(const Program& p) {
  for (const auto& [name, c] : p.compartments) {
    for (const auto& [pn, sig] : c.exports) {
      auto it = c.procs.find(pn);
      if (it == c.procs.end())
        fail("UnknownReference", name + " exports '" + pn + "' without a body");
      if (static_cast<int>(it->second.params.size()) != sig.param_count)
        fail("SignatureMismatch", name + "." + pn + ": exported arity " +
                                      std::to_string(sig.param_count) + " but " +
                                      std::to_string(it->second.params.size()) +
                                      " params");
    }
    for (const auto& [key, sig] : c.imports) {
      auto tc = p.compartments.find(key.comp);
      if (tc == p.compartments.end())
        fail("ImportUnresolved",
             name + " imports " + key.comp + "." + key.proc + ": no such compartment");
      auto ex = tc->second.exports.find(key.proc);
      if (ex == tc->second.exports.end())
        fail("ImportUnresolved",
             name + " imports " + key.comp + "." + key.proc + ": not exported");
      if (!(ex->second == sig))
        fail("SignatureMismatch",
             name + " imports " + key.comp + "." + key.proc + " with a different signature");
    }
    for (const auto& [pn, def] : c.procs) {
      bool rv = c.proc_sigs.at(pn).returns_value;
      BodyChecker bc{p, c, pn, rv};
      bc.stmt(*def.body);
      if (rv && !returns_on_all_paths(*def.body))
        fail("SignatureMismatch",
             name + "." + pn + " does not return a value on all paths");
    }
  }
  if (p.main) {
    const auto& [mc, mp] = *p.main;
    const CompartmentDecl& c = p.compartments.at(mc);
    auto it = c.exports.find(mp);
    if (it == c.exports.end() || it->second.param_count != 0 || !it->second.returns_value)
      fail("NoMain", "main must be exported with signature () -> value");
  }
}

// ---------------------------------------------------------------------------

Program link(const Program& a, const Program& b) {
  Program out = a;
  for (const auto& [name, c] : b.compartments) {
    if (out.compartments.count(name))
      fail("NameClash", "both sides define compartment '" + name + "'");
    out.compartments[name] = c;
  }
  if (a.main && b.main) fail("NameClash", "both sides export main");
  out.main = a.main ? a.main : b.main;
  // Imports whose exporter is present must resolve; imports into absent
  // compartments stay open until the program is whole.
  for (const auto& [name, c] : out.compartments) {
    for (const auto& [key, sig] : c.imports) {
      auto tc = out.compartments.find(key.comp);
      if (tc == out.compartments.end()) continue;
      auto ex = tc->second.exports.find(key.proc);
      if (ex == tc->second.exports.end())
        fail("ImportUnresolved",
             name + " imports " + key.comp + "." + key.proc + ": not exported");
      if (!(ex->second == sig))
        fail("ImportUnresolved",
             name + " imports " + key.comp + "." + key.proc + " with a different signature");
    }
  }
  return out;
}

std::pair<Program, Program> split(const Program& p, const std::set<std::string>& ks) {
  for (const auto& k : ks)
    if (!p.compartments.count(k))
      fail("UnknownCompartment", "split: unknown compartment '" + k + "'");
  Program first, second;
  for (const auto& [name, c] : p.compartments) {
    if (ks.count(name))
      first.compartments[name] = c;
    else
      second.compartments[name] = c;
  }
  if (p.main) {
    if (ks.count(p.main->first))
      first.main = p.main;
    else
      second.main = p.main;
  }
  return {first, second};
}

Interface interface_of(const Program& p) {
  Interface i;
  for (const auto& [name, c] : p.compartments)
    i.compartments[name] = CompartmentIface{c.exports, c.imports, c.syscalls};
  return i;
}

Interface project_interface(const Interface& i, const std::set<std::string>& ks) {
  for (const auto& k : ks)
    if (!i.compartments.count(k))
      fail("UnknownCompartment", "project: unknown compartment '" + k + "'");
  Interface out;
  for (const auto& k : ks) out.compartments[k] = i.compartments.at(k);
  return out;
}

std::string serialize_interface(const Interface& i) {
  std::ostringstream os;
  os << "(interface\n";
  for (const auto& [name, c] : i.compartments) {
    os << " (compartment " << name << "\n";
    print_iface_parts(os, c.exports, c.imports, c.syscalls, "  ");
    os << " )\n";
  }
  os << ")\n";
  return os.str();
}

Interface parse_interface(const std::string& text) {
  SLexer lex(text);
  std::vector<SExp> top = lex.parse_all();
  if (top.size() != 1 || !top[0].is("interface"))
    fail("SyntaxError", "expected (interface ...)");
  Interface out;
  for (size_t i = 1; i < top[0].kids.size(); i++) {
    const SExp& e = top[0].kids[i];
    if (!e.is("compartment") || e.kids.size() < 2)
      fail("SyntaxError", "expected (compartment NAME ...)", e.line, e.col);
    std::string name = ident(e.kids[1], "compartment name");
    if (out.compartments.count(name))
      fail("DuplicateName", "duplicate compartment '" + name + "'", e.line, e.col);
    CompartmentIface c;
    for (size_t k = 2; k < e.kids.size(); k++) {
      const SExp& f = e.kids[k];
      if (f.is("exports")) {
        for (size_t j = 1; j < f.kids.size(); j++) {
          const SExp& x = f.kids[j];
          if (x.atom || x.kids.size() != 3)
            fail("SyntaxError", "(PROC ARITY ret|void)", x.line, x.col);
          c.exports[ident(x.kids[0], "export name")] = parse_sig(x.kids[1], x.kids[2]);
        }
      } else if (f.is("imports")) {
        for (size_t j = 1; j < f.kids.size(); j++) {
          const SExp& x = f.kids[j];
          if (x.atom || x.kids.size() != 4)
            fail("SyntaxError", "(COMP PROC ARITY ret|void)", x.line, x.col);
          c.imports[{ident(x.kids[0], "compartment"), ident(x.kids[1], "proc")}] =
              parse_sig(x.kids[2], x.kids[3]);
        }
      } else if (f.is("syscalls")) {
        for (size_t j = 1; j < f.kids.size(); j++)
          c.syscalls.insert(need_atom(f.kids[j], "syscall").text);
      } else {
        fail("SyntaxError", "unknown interface form", f.line, f.col);
      }
    }
    out.compartments[name] = std::move(c);
  }
  return out;
}

}  // namespace secomp
