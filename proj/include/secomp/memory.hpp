#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "secomp/value.hpp"

namespace secomp {

using BlockId = int32_t;
using CompId = int32_t;  // index into a compartment name table owned by the caller

enum class Perm : uint8_t { ReadWrite, ReadOnly };

enum class MemErr : uint8_t { None, NotOwner, DeadBlock, OutOfBounds, ReadOnly };

const char* to_string(MemErr e);

struct Block {
  CompId owner = -1;
  Perm perm = Perm::ReadWrite;
  bool live = false;
  std::vector<Value> slots;
};

// Block-based store with per-compartment ownership. Ids are monotone and
// never reused; freed blocks stay behind as tombstones so use-after-free is
// a detectable error. The embedded auditor double-checks, on every
// successful access, that the acting compartment is the block's owner and
// that the owner recorded at allocation never changed.
class Memory {
 public:
  BlockId alloc(CompId owner, int32_t size);

  struct LoadResult {
    Value v;
    MemErr err = MemErr::None;
  };
  LoadResult load(CompId actor, BlockId b, int64_t off) const;
  MemErr store(CompId actor, BlockId b, int64_t off, const Value& v);
  MemErr free_block(CompId actor, BlockId b);

  // Semantics-privileged: used only by call/return transitions, never
  // exposed to programs.
  MemErr set_perm(BlockId b, Perm p);

  bool valid(BlockId b) const { return b >= 0 && static_cast<size_t>(b) < blocks_.size(); }
  const Block& block(BlockId b) const { return blocks_[static_cast<size_t>(b)]; }
  BlockId next_id() const { return static_cast<BlockId>(blocks_.size()); }

  struct Audit {
    uint64_t accesses = 0;
    uint64_t cross_violations = 0;   // successful access with actor != owner
    uint64_t owner_changes = 0;      // owner differs from the one at alloc
    std::vector<std::string> detail; // first few violations, for reporting
  };
  const Audit& audit() const { return audit_; }

 private:
  void note_access(CompId actor, BlockId b) const;

  std::vector<Block> blocks_;
  std::vector<CompId> owner_at_alloc_;
  mutable Audit audit_;
};

}  // namespace secomp
