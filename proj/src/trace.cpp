#include "secomp/trace.hpp"

#include <algorithm>
#include <sstream>

namespace secomp {

std::string Diag::str() const {
  std::ostringstream os;
  os << code;
  if (line > 0) os << " at " << line << ":" << col;
  os << ": " << msg;
  return os.str();
}

const char* Diag::what() const noexcept {
  formatted = str();
  return formatted.c_str();
}

void fail(const std::string& code, const std::string& msg, int line, int col) {
  Diag d;
  d.code = code;
  d.msg = msg;
  d.line = line;
  d.col = col;
  throw d;
}

// ---------------------------------------------------------------------------

Event Event::call(std::string caller, std::string callee, std::string proc,
                  std::vector<int64_t> args) {
  Event e;
  e.kind = Kind::Call;
  e.caller = std::move(caller);
  e.callee = std::move(callee);
  e.proc = std::move(proc);
  e.args = std::move(args);
  return e;
}

Event Event::ret(std::string callee, std::string caller, std::optional<int64_t> val) {
  Event e;
  e.kind = Kind::Return;
  e.callee = std::move(callee);
  e.caller = std::move(caller);
  e.has_val = val.has_value();
  e.val = val.value_or(0);
  return e;
}

Event Event::sys(std::string comp, std::string name, std::vector<int64_t> args,
                 std::vector<int64_t> read_bytes, int64_t ret,
                 std::vector<int64_t> written_bytes) {
  Event e;
  e.kind = Kind::Syscall;
  e.comp = std::move(comp);
  e.sys_name = std::move(name);
  e.args = std::move(args);
  e.read_bytes = std::move(read_bytes);
  e.sys_ret = ret;
  e.written_bytes = std::move(written_bytes);
  return e;
}

Event Event::undef(std::string comp) {
  Event e;
  e.kind = Kind::Undef;
  e.comp = std::move(comp);
  return e;
}

const std::string& Event::subject() const {
  switch (kind) {
    case Kind::Call: return caller;
    case Kind::Return: return callee;
    case Kind::Syscall: return comp;
    case Kind::Undef: return comp;
  }
  return comp;
}

bool operator==(const Event& a, const Event& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Event::Kind::Call:
      return a.caller == b.caller && a.callee == b.callee && a.proc == b.proc &&
             a.args == b.args;
    case Event::Kind::Return:
      return a.callee == b.callee && a.caller == b.caller && a.has_val == b.has_val &&
             (!a.has_val || a.val == b.val);
    case Event::Kind::Syscall:
      return a.comp == b.comp && a.sys_name == b.sys_name && a.args == b.args &&
             a.read_bytes == b.read_bytes && a.sys_ret == b.sys_ret &&
             a.written_bytes == b.written_bytes;
    case Event::Kind::Undef:
      return a.comp == b.comp;
  }
  return false;
}

bool has_undef(const Trace& t) {
  return std::any_of(t.begin(), t.end(),
                     [](const Event& e) { return e.kind == Event::Kind::Undef; });
}

bool prefix_rel(const Trace& m1, const Trace& m2) {
  if (!has_undef(m1)) return m1 == m2;
  if (m1.empty() || m1.back().kind != Event::Kind::Undef) return false;  // Undef not last
  size_t n = m1.size() - 1;
  if (n > m2.size()) return false;
  for (size_t i = 0; i < n; i++)
    if (m1[i] != m2[i]) return false;
  return true;
}

bool blame_rel(const Trace& m1, const Trace& m2, const std::set<std::string>& good) {
  if (!prefix_rel(m1, m2)) return false;
  if (!m1.empty() && m1.back().kind == Event::Kind::Undef)
    return good.count(m1.back().comp) > 0;
  return true;
}

bool well_bracketed(const Trace& t) {
  std::vector<std::pair<std::string, std::string>> stack;  // (caller, callee)
  for (const Event& e : t) {
    switch (e.kind) {
      case Event::Kind::Call:
        stack.emplace_back(e.caller, e.callee);
        break;
      case Event::Kind::Return: {
        if (stack.empty()) return false;
        auto [caller, callee] = stack.back();
        if (callee != e.callee || caller != e.caller) return false;
        stack.pop_back();
        break;
      }
      case Event::Kind::Syscall:
        break;
      case Event::Kind::Undef:
        return true;  // everything before the cut was a balanced prefix
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Wire format

namespace {

std::string int_list(const std::vector<int64_t>& xs, char open, char close) {
  std::ostringstream os;
  os << open;
  for (size_t i = 0; i < xs.size(); i++) {
    if (i) os << ',';
    os << xs[i];
  }
  os << close;
  return os.str();
}

struct LineLexer {
  const std::string& s;
  size_t pos = 0;
  int line_no;

  explicit LineLexer(const std::string& str, int ln) : s(str), line_no(ln) {}

  void skip_ws() {
    while (pos < s.size() && s[pos] == ' ') pos++;
  }
  bool done() {
    skip_ws();
    return pos >= s.size();
  }
  std::string word() {
    skip_ws();
    size_t start = pos;
    while (pos < s.size() && s[pos] != ' ') pos++;
    if (start == pos) fail("ParseError", "expected token", line_no, (int)pos + 1);
    return s.substr(start, pos - start);
  }
  std::vector<int64_t> ints(char open, char close) {
    std::string w = word();
    if (w.size() < 2 || w.front() != open || w.back() != close)
      fail("ParseError", "expected list " + std::string(1, open) + "..." + close,
           line_no, (int)pos);
    std::vector<int64_t> out;
    std::string body = w.substr(1, w.size() - 2);
    if (body.empty()) return out;
    size_t i = 0;
    while (i <= body.size()) {
      size_t j = body.find(',', i);
      std::string tok = body.substr(i, j == std::string::npos ? j : j - i);
      try {
        size_t used = 0;
        out.push_back(std::stoll(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        fail("ParseError", "bad integer '" + tok + "'", line_no, (int)pos);
      }
      if (j == std::string::npos) break;
      i = j + 1;
    }
    return out;
  }
  int64_t integer() {
    std::string w = word();
    try {
      size_t used = 0;
      int64_t v = std::stoll(w, &used);
      if (used != w.size()) throw std::invalid_argument(w);
      return v;
    } catch (const std::exception&) {
      fail("ParseError", "bad integer '" + w + "'", line_no, (int)pos);
    }
  }
  void expect(const std::string& tok) {
    std::string w = word();
    if (w != tok) fail("ParseError", "expected '" + tok + "', got '" + w + "'", line_no, (int)pos);
  }
};

std::pair<std::string, std::string> split_dotted(const std::string& w, int line_no) {
  size_t dot = w.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 >= w.size())
    fail("ParseError", "expected COMP.PROC, got '" + w + "'", line_no, 0);
  return {w.substr(0, dot), w.substr(dot + 1)};
}

Event parse_event_line(LineLexer& lx) {
  std::string head = lx.word();
  if (head == "CALL") {
    std::string caller = lx.word();
    auto [callee, proc] = split_dotted(lx.word(), lx.line_no);
    auto args = lx.ints('(', ')');
    return Event::call(caller, callee, proc, args);
  }
  if (head == "RET") {
    std::string callee = lx.word();
    std::string caller = lx.word();
    std::string v = lx.word();
    if (v == "void") return Event::ret(callee, caller, std::nullopt);
    try {
      size_t used = 0;
      int64_t x = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return Event::ret(callee, caller, x);
    } catch (const std::exception&) {
      fail("ParseError", "bad return value '" + v + "'", lx.line_no, 0);
    }
  }
  if (head == "SYS") {
    std::string comp = lx.word();
    std::string name = lx.word();
    auto args = lx.ints('(', ')');
    auto rb = lx.ints('[', ']');
    lx.expect("->");
    int64_t ret = lx.integer();
    auto wb = lx.ints('[', ']');
    return Event::sys(comp, name, args, rb, ret, wb);
  }
  if (head == "UB") return Event::undef(lx.word());
  fail("ParseError", "unknown event '" + head + "'", lx.line_no, 0);
}

std::string value_token(const Value& v) {
  // Non-scalar values carry no meaning across a serialization boundary;
  // wf-checking and back-translation only distinguish Int from non-Int.
  if (v.is_int()) return std::to_string(v.num);
  return "undef";
}

Value parse_value_token(const std::string& w, int line_no) {
  if (w == "undef") return Value::undef();
  try {
    size_t used = 0;
    int64_t x = std::stoll(w, &used);
    if (used != w.size()) throw std::invalid_argument(w);
    return Value::intv(x);
  } catch (const std::exception&) {
    fail("ParseError", "bad delta value '" + w + "'", line_no, 0);
  }
}

}  // namespace

std::string to_line(const Event& e) {
  std::ostringstream os;
  switch (e.kind) {
    case Event::Kind::Call:
      os << "CALL " << e.caller << " " << e.callee << "." << e.proc << " "
         << int_list(e.args, '(', ')');
      break;
    case Event::Kind::Return:
      os << "RET " << e.callee << " " << e.caller << " ";
      if (e.has_val)
        os << e.val;
      else
        os << "void";
      break;
    case Event::Kind::Syscall:
      os << "SYS " << e.comp << " " << e.sys_name << " " << int_list(e.args, '(', ')')
         << " " << int_list(e.read_bytes, '[', ']') << " -> " << e.sys_ret << " "
         << int_list(e.written_bytes, '[', ']');
      break;
    case Event::Kind::Undef:
      os << "UB " << e.comp;
      break;
  }
  return os.str();
}

std::string serialize_trace(const Trace& t) {
  std::string out;
  for (const Event& e : t) {
    out += to_line(e);
    out += '\n';
  }
  return out;
}

Trace parse_trace(const std::string& text) {
  Trace out;
  int line_no = 0;
  size_t i = 0;
  while (i < text.size()) {
    size_t j = text.find('\n', i);
    std::string line = text.substr(i, j == std::string::npos ? j : j - i);
    i = j == std::string::npos ? text.size() : j + 1;
    line_no++;
    if (line.empty()) continue;
    LineLexer lx(line, line_no);
    out.push_back(parse_event_line(lx));
    if (!lx.done()) fail("ParseError", "trailing tokens", line_no, (int)lx.pos);
  }
  return out;
}

// ---------------------------------------------------------------------------

MemDelta MemDelta::store(std::string comp, std::string global, int64_t off, Value v) {
  MemDelta d;
  d.kind = Kind::Store;
  d.comp = std::move(comp);
  d.global = std::move(global);
  d.off = off;
  d.value = v;
  return d;
}

MemDelta MemDelta::bytes(std::string comp, std::string global, int64_t off,
                         std::vector<Value> vs) {
  MemDelta d;
  d.kind = Kind::Bytes;
  d.comp = std::move(comp);
  d.global = std::move(global);
  d.off = off;
  d.values = std::move(vs);
  return d;
}

MemDelta MemDelta::alloc(std::string comp, int64_t size) {
  MemDelta d;
  d.kind = Kind::Alloc;
  d.comp = std::move(comp);
  d.size = size;
  return d;
}

MemDelta MemDelta::free_of(std::string comp, std::string global) {
  MemDelta d;
  d.kind = Kind::Free;
  d.comp = std::move(comp);
  d.global = std::move(global);
  return d;
}

bool operator==(const MemDelta& a, const MemDelta& b) {
  return a.kind == b.kind && a.comp == b.comp && a.global == b.global && a.off == b.off &&
         a.value == b.value && a.values == b.values && a.size == b.size;
}

bool operator==(const IEvent& a, const IEvent& b) {
  return a.kind == b.kind && a.f_comp == b.f_comp && a.f_proc == b.f_proc && a.t == b.t &&
         a.sig == b.sig && a.buffer == b.buffer && a.deltas == b.deltas;
}

Trace project(const ITrace& it) {
  Trace out;
  out.reserve(it.size());
  for (const IEvent& e : it) out.push_back(e.t);
  return out;
}

std::string serialize_itrace(const ITrace& it) {
  std::ostringstream os;
  for (const IEvent& e : it) {
    switch (e.kind) {
      case IEvent::Kind::Call:
        os << "ICALL " << e.f_comp << "." << e.f_proc << " " << to_line(e.t) << " SIG "
           << e.sig.param_count << " " << (e.sig.returns_value ? "ret" : "void");
        break;
      case IEvent::Kind::Return:
        os << "IRET " << e.f_comp << "." << e.f_proc << " " << to_line(e.t);
        break;
      case IEvent::Kind::Sys:
        os << "ISYS " << e.f_comp << "." << e.f_proc << " " << to_line(e.t) << " BUF "
           << e.buffer;
        break;
    }
    os << '\n';
    for (const MemDelta& d : e.deltas) {
      switch (d.kind) {
        case MemDelta::Kind::Store:
          os << "DELTA store " << d.comp << " " << d.global << " " << d.off << " "
             << value_token(d.value) << '\n';
          break;
        case MemDelta::Kind::Bytes: {
          os << "DELTA bytes " << d.comp << " " << d.global << " " << d.off << " [";
          for (size_t i = 0; i < d.values.size(); i++) {
            if (i) os << ',';
            os << value_token(d.values[i]);
          }
          os << "]\n";
          break;
        }
        case MemDelta::Kind::Alloc:
          os << "DELTA alloc " << d.comp << " " << d.size << '\n';
          break;
        case MemDelta::Kind::Free:
          os << "DELTA free " << d.comp << " " << d.global << '\n';
          break;
      }
    }
  }
  return os.str();
}

ITrace parse_itrace(const std::string& text) {
  ITrace out;
  int line_no = 0;
  size_t i = 0;
  while (i < text.size()) {
    size_t j = text.find('\n', i);
    std::string line = text.substr(i, j == std::string::npos ? j : j - i);
    i = j == std::string::npos ? text.size() : j + 1;
    line_no++;
    if (line.empty()) continue;
    LineLexer lx(line, line_no);
    std::string head = lx.word();
    if (head == "DELTA") {
      if (out.empty())
        fail("ParseError", "DELTA line before any event", line_no, 0);
      std::string kind = lx.word();
      if (kind == "store") {
        std::string comp = lx.word(), g = lx.word();
        int64_t off = lx.integer();
        Value v = parse_value_token(lx.word(), line_no);
        out.back().deltas.push_back(MemDelta::store(comp, g, off, v));
      } else if (kind == "bytes") {
        std::string comp = lx.word(), g = lx.word();
        int64_t off = lx.integer();
        std::string list = lx.word();
        if (list.size() < 2 || list.front() != '[' || list.back() != ']')
          fail("ParseError", "expected [values]", line_no, 0);
        std::vector<Value> vs;
        std::string body = list.substr(1, list.size() - 2);
        size_t k = 0;
        while (!body.empty() && k <= body.size()) {
          size_t c = body.find(',', k);
          vs.push_back(parse_value_token(
              body.substr(k, c == std::string::npos ? c : c - k), line_no));
          if (c == std::string::npos) break;
          k = c + 1;
        }
        out.back().deltas.push_back(MemDelta::bytes(comp, g, off, std::move(vs)));
      } else if (kind == "alloc") {
        std::string comp = lx.word();
        out.back().deltas.push_back(MemDelta::alloc(comp, lx.integer()));
      } else if (kind == "free") {
        std::string comp = lx.word();
        out.back().deltas.push_back(MemDelta::free_of(comp, lx.word()));
      } else {
        fail("ParseError", "unknown delta kind '" + kind + "'", line_no, 0);
      }
      continue;
    }
    IEvent e;
    if (head == "ICALL")
      e.kind = IEvent::Kind::Call;
    else if (head == "IRET")
      e.kind = IEvent::Kind::Return;
    else if (head == "ISYS")
      e.kind = IEvent::Kind::Sys;
    else
      fail("ParseError", "unknown informative event '" + head + "'", line_no, 0);
    auto [fc, fp] = split_dotted(lx.word(), line_no);
    e.f_comp = fc;
    e.f_proc = fp;
    e.t = parse_event_line(lx);
    if (e.kind == IEvent::Kind::Call) {
      lx.expect("SIG");
      e.sig.param_count = static_cast<int>(lx.integer());
      std::string r = lx.word();
      if (r != "ret" && r != "void") fail("ParseError", "expected ret|void", line_no, 0);
      e.sig.returns_value = r == "ret";
    } else if (e.kind == IEvent::Kind::Sys) {
      lx.expect("BUF");
      e.buffer = lx.word();
    }
    if (!lx.done()) fail("ParseError", "trailing tokens", line_no, (int)lx.pos);
    out.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<int64_t> IoScript::next_chunk() {
  if (read_chunks.empty()) return {};
  auto c = std::move(read_chunks.front());
  read_chunks.pop_front();
  return c;
}

int64_t IoScript::next_ack() {
  if (write_acks.empty()) return 0;
  int64_t a = write_acks.front();
  write_acks.pop_front();
  return a;
}

std::string serialize_io(const IoScript& io) {
  std::ostringstream os;
  for (const auto& c : io.read_chunks) {
    os << "READ";
    for (int64_t b : c) os << ' ' << b;
    os << '\n';
  }
  for (int64_t a : io.write_acks) os << "WRITEACK " << a << '\n';
  return os.str();
}

IoScript parse_io(const std::string& text) {
  IoScript io;
  int line_no = 0;
  size_t i = 0;
  while (i < text.size()) {
    size_t j = text.find('\n', i);
    std::string line = text.substr(i, j == std::string::npos ? j : j - i);
    i = j == std::string::npos ? text.size() : j + 1;
    line_no++;
    if (line.empty()) continue;
    LineLexer lx(line, line_no);
    std::string head = lx.word();
    if (head == "READ") {
      std::vector<int64_t> bytes;
      while (!lx.done()) {
        int64_t b = lx.integer();
        if (b < 0 || b > 255) fail("ParseError", "byte out of range", line_no, 0);
        bytes.push_back(b);
      }
      io.read_chunks.push_back(std::move(bytes));
    } else if (head == "WRITEACK") {
      io.write_acks.push_back(lx.integer());
      if (!lx.done()) fail("ParseError", "trailing tokens", line_no, 0);
    } else {
      fail("ParseError", "unknown io line '" + head + "'", line_no, 0);
    }
  }
  return io;
}

}  // namespace secomp
