#include "secomp/exec_common.hpp"

#include <algorithm>

namespace secomp {

std::optional<int64_t> eval_binop(Op op, int64_t a, int64_t b) {
  uint64_t ua = static_cast<uint64_t>(a), ub = static_cast<uint64_t>(b);
  switch (op) {
    case Op::Add: return static_cast<int64_t>(ua + ub);
    case Op::Sub: return static_cast<int64_t>(ua - ub);
    case Op::Mul: return static_cast<int64_t>(ua * ub);
    case Op::Div:
      if (b == 0) return std::nullopt;
      if (a == INT64_MIN && b == -1) return INT64_MIN;  // wrap-around quotient
      return a / b;
    case Op::Mod:
      if (b == 0) return std::nullopt;
      if (a == INT64_MIN && b == -1) return 0;
      return a % b;
    case Op::Lt: return a < b ? 1 : 0;
    case Op::Le: return a <= b ? 1 : 0;
    case Op::Eq: return a == b ? 1 : 0;
    case Op::Ne: return a != b ? 1 : 0;
    case Op::And: return (a != 0 && b != 0) ? 1 : 0;
    case Op::Or: return (a != 0 || b != 0) ? 1 : 0;
    default: return std::nullopt;
  }
}

int64_t eval_unop(Op op, int64_t a) {
  switch (op) {
    case Op::Not: return a == 0 ? 1 : 0;
    case Op::Neg: return static_cast<int64_t>(0 - static_cast<uint64_t>(a));
    default: return 0;
  }
}

SysResult sys_read(Memory& m, CompId comp, BlockId buf, int64_t n, IoScript& io) {
  SysResult r;
  if (n < 0) {
    r.err = "negative read count";
    return r;
  }
  int64_t bufsize = m.valid(buf) ? static_cast<int64_t>(m.block(buf).slots.size()) : 0;
  if (n > bufsize) {
    r.err = "read count exceeds buffer size";
    return r;
  }
  int64_t n_eff = std::min(n, kReadLenCap);
  std::vector<int64_t> chunk = io.next_chunk();
  int64_t count = std::min<int64_t>(n_eff, static_cast<int64_t>(chunk.size()));
  for (int64_t i = 0; i < count; i++) {
    MemErr e = m.store(comp, buf, i, Value::intv(chunk[static_cast<size_t>(i)]));
    if (e != MemErr::None) {
      r.err = to_string(e);
      return r;
    }
    r.read_bytes.push_back(chunk[static_cast<size_t>(i)]);
  }
  r.ret = count;
  return r;
}

SysResult sys_write(Memory& m, CompId comp, BlockId buf, int64_t n, IoScript& io) {
  SysResult r;
  if (n < 0) {
    r.err = "negative write count";
    return r;
  }
  int64_t bufsize = m.valid(buf) ? static_cast<int64_t>(m.block(buf).slots.size()) : 0;
  if (n > bufsize) {
    r.err = "write count exceeds buffer size";
    return r;
  }
  for (int64_t i = 0; i < n; i++) {
    auto [v, e] = m.load(comp, buf, i);
    if (e != MemErr::None) {
      r.err = to_string(e);
      return r;
    }
    if (!v.is_int()) {
      r.err = "non-scalar value in write buffer";
      return r;
    }
    r.written_bytes.push_back(static_cast<int64_t>(static_cast<uint64_t>(v.num) & 0xFF));
  }
  int64_t ack = io.next_ack();
  r.ret = std::clamp<int64_t>(ack, 0, n);
  return r;
}

std::string to_string(const RunOutcome& o) {
  switch (o.kind) {
    case RunOutcome::Kind::Final: return "Final(" + std::to_string(o.value) + ")";
    case RunOutcome::Kind::Stuck: return "Stuck(" + o.offender + ")";
    case RunOutcome::Kind::OutOfFuel: return "OutOfFuel";
  }
  return "?";
}

}  // namespace secomp
