#pragma once

#include <cstdint>
#include <string>

namespace secomp {

// Runtime value shared by both semantics. Events and cross-compartment
// transfers carry only Int; Code is the machine's symbolic return address
// (compartment/proc/instruction indices) and never appears at source level.
struct Value {
  enum class Kind : uint8_t { Int, Ptr, Code, Undef };

  Kind kind = Kind::Undef;
  int64_t num = 0;                    // Int
  int32_t blk = -1;                   // Ptr: block id
  int32_t off = 0;                    // Ptr: slot offset
  int32_t cp = -1, pr = -1, ix = 0;   // Code: compartment, proc, instr index

  static Value intv(int64_t v) {
    Value r;
    r.kind = Kind::Int;
    r.num = v;
    return r;
  }
  static Value ptr(int32_t block, int32_t offset) {
    Value r;
    r.kind = Kind::Ptr;
    r.blk = block;
    r.off = offset;
    return r;
  }
  static Value code(int32_t comp, int32_t proc, int32_t index) {
    Value r;
    r.kind = Kind::Code;
    r.cp = comp;
    r.pr = proc;
    r.ix = index;
    return r;
  }
  static Value undef() { return Value{}; }

  bool is_int() const { return kind == Kind::Int; }
  bool is_ptr() const { return kind == Kind::Ptr; }
  bool is_code() const { return kind == Kind::Code; }
  bool is_undef() const { return kind == Kind::Undef; }

  friend bool operator==(const Value& a, const Value& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Kind::Int: return a.num == b.num;
      case Kind::Ptr: return a.blk == b.blk && a.off == b.off;
      case Kind::Code: return a.cp == b.cp && a.pr == b.pr && a.ix == b.ix;
      case Kind::Undef: return true;
    }
    return false;
  }
  friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }
};

std::string to_string(const Value& v);

}  // namespace secomp
