#include "sexp.hpp"

namespace secomp::sexp {

bool valid_ident(const std::string& t) {
  if (t.empty() || t == "_") return false;
  for (char c : t)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

bool parse_i64(const std::string& t, int64_t& out) {
  if (t.empty()) return false;
  size_t i = t[0] == '-' ? 1 : 0;
  if (i == t.size()) return false;
  for (size_t k = i; k < t.size(); k++)
    if (!std::isdigit(static_cast<unsigned char>(t[k]))) return false;
  try {
    size_t used = 0;
    out = std::stoll(t, &used);
    return used == t.size();
  } catch (const std::exception&) {
    return false;
  }
}

const SExp& need_atom(const SExp& e, const char* what) {
  if (!e.atom) fail("SyntaxError", std::string("expected ") + what, e.line, e.col);
  return e;
}

std::string ident(const SExp& e, const char* what) {
  need_atom(e, what);
  if (!valid_ident(e.text))
    fail("SyntaxError", std::string("invalid ") + what + " '" + e.text + "'", e.line,
         e.col);
  if (e.text == "sys") fail("SyntaxError", "'sys' is reserved", e.line, e.col);
  return e.text;
}

int64_t integer(const SExp& e) {
  need_atom(e, "integer");
  int64_t v;
  if (!parse_i64(e.text, v))
    fail("SyntaxError", "expected integer, got '" + e.text + "'", e.line, e.col);
  return v;
}

Signature parse_sig(const SExp& arity, const SExp& rv) {
  Signature sig;
  sig.param_count = static_cast<int>(integer(arity));
  if (sig.param_count < 0) fail("SyntaxError", "negative arity", arity.line, arity.col);
  need_atom(rv, "ret|void");
  if (rv.text == "ret")
    sig.returns_value = true;
  else if (rv.text == "void")
    sig.returns_value = false;
  else
    fail("SyntaxError", "expected ret|void, got '" + rv.text + "'", rv.line, rv.col);
  return sig;
}

}  // namespace secomp::sexp
