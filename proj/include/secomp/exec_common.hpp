#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "secomp/lang.hpp"
#include "secomp/memory.hpp"
#include "secomp/trace.hpp"

namespace secomp {

// 64-bit wrap-around arithmetic shared by both semantics. nullopt signals
// undefined behavior (division/modulo by zero).
std::optional<int64_t> eval_binop(Op op, int64_t a, int64_t b);
int64_t eval_unop(Op op, int64_t a);

// Buffer-based IO, shared by both semantics so differential runs agree
// bit-for-bit. `read` fills the buffer from offset 0 with the next script
// chunk (at most n values, n capped at kReadLenCap) and returns the count;
// `write` sends the first n slots (masked to bytes) and returns the
// acknowledged count. err is empty on success.
struct SysResult {
  std::string err;
  std::vector<int64_t> read_bytes;
  std::vector<int64_t> written_bytes;
  int64_t ret = 0;
};

SysResult sys_read(Memory& m, CompId comp, BlockId buf, int64_t n, IoScript& io);
SysResult sys_write(Memory& m, CompId comp, BlockId buf, int64_t n, IoScript& io);

struct RunOutcome {
  enum class Kind : uint8_t { Final, Stuck, OutOfFuel };
  Kind kind = Kind::OutOfFuel;
  int64_t value = 0;       // Final
  std::string offender;    // Stuck

  static RunOutcome final_v(int64_t v) { return {Kind::Final, v, ""}; }
  static RunOutcome stuck(std::string k) { return {Kind::Stuck, 0, std::move(k)}; }
  static RunOutcome out_of_fuel() { return {Kind::OutOfFuel, 0, ""}; }
  bool is_final() const { return kind == Kind::Final; }
  bool is_stuck() const { return kind == Kind::Stuck; }
};

std::string to_string(const RunOutcome& o);

}  // namespace secomp
