#pragma once

// Internal s-expression reader shared by the source and target text formats.

#include <cctype>
#include <string>
#include <vector>

#include "secomp/trace.hpp"

namespace secomp::sexp {

struct SExp {
  bool atom = false;
  std::string text;
  std::vector<SExp> kids;
  int line = 0, col = 0;

  bool is(const std::string& head) const {
    return !atom && !kids.empty() && kids[0].atom && kids[0].text == head;
  }
};

struct SLexer {
  const std::string& s;
  size_t pos = 0;
  int line = 1, col = 1;

  explicit SLexer(const std::string& str) : s(str) {}

  void advance() {
    if (s[pos] == '\n') {
      line++;
      col = 1;
    } else {
      col++;
    }
    pos++;
  }
  void skip_ws() {
    while (pos < s.size()) {
      char c = s[pos];
      if (c == ';') {  // comment to end of line
        while (pos < s.size() && s[pos] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }
  bool atom_char(char c) const {
    return !std::isspace(static_cast<unsigned char>(c)) && c != '(' && c != ')' &&
           c != ';';
  }
  SExp parse(int depth = 0) {
    if (depth > 20000) fail("SyntaxError", "nesting too deep", line, col);
    skip_ws();
    if (pos >= s.size()) fail("SyntaxError", "unexpected end of input", line, col);
    SExp e;
    e.line = line;
    e.col = col;
    if (s[pos] == '(') {
      advance();
      while (true) {
        skip_ws();
        if (pos >= s.size()) fail("SyntaxError", "unclosed '('", e.line, e.col);
        if (s[pos] == ')') {
          advance();
          break;
        }
        e.kids.push_back(parse(depth + 1));
      }
      return e;
    }
    if (s[pos] == ')') fail("SyntaxError", "unexpected ')'", line, col);
    e.atom = true;
    while (pos < s.size() && atom_char(s[pos])) {
      e.text += s[pos];
      advance();
    }
    return e;
  }
  std::vector<SExp> parse_all() {
    std::vector<SExp> out;
    while (true) {
      skip_ws();
      if (pos >= s.size()) return out;
      out.push_back(parse());
    }
  }
};

bool valid_ident(const std::string& t);
bool parse_i64(const std::string& t, int64_t& out);
const SExp& need_atom(const SExp& e, const char* what);
std::string ident(const SExp& e, const char* what);
int64_t integer(const SExp& e);
Signature parse_sig(const SExp& arity, const SExp& rv);

}  // namespace secomp::sexp
