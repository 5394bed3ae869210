#include "secomp/memory.hpp"

#include <sstream>

namespace secomp {

std::string to_string(const Value& v) {
  switch (v.kind) {
    case Value::Kind::Int: return std::to_string(v.num);
    case Value::Kind::Ptr: {
      std::ostringstream os;
      os << "ptr(" << v.blk << "," << v.off << ")";
      return os.str();
    }
    case Value::Kind::Code: {
      std::ostringstream os;
      os << "code(" << v.cp << "," << v.pr << "," << v.ix << ")";
      return os.str();
    }
    case Value::Kind::Undef: return "undef";
  }
  return "?";
}

const char* to_string(MemErr e) {
  switch (e) {
    case MemErr::None: return "None";
    case MemErr::NotOwner: return "NotOwner";
    case MemErr::DeadBlock: return "DeadBlock";
    case MemErr::OutOfBounds: return "OutOfBounds";
    case MemErr::ReadOnly: return "ReadOnlyViolation";
  }
  return "?";
}

BlockId Memory::alloc(CompId owner, int32_t size) {
  Block b;
  b.owner = owner;
  b.perm = Perm::ReadWrite;
  b.live = true;
  b.slots.assign(static_cast<size_t>(size < 0 ? 0 : size), Value::undef());
  blocks_.push_back(std::move(b));
  owner_at_alloc_.push_back(owner);
  return static_cast<BlockId>(blocks_.size() - 1);
}

void Memory::note_access(CompId actor, BlockId b) const {
  audit_.accesses++;
  const Block& blk = blocks_[static_cast<size_t>(b)];
  bool bad = false;
  if (blk.owner != actor) {
    audit_.cross_violations++;
    bad = true;
  }
  if (blk.owner != owner_at_alloc_[static_cast<size_t>(b)]) {
    audit_.owner_changes++;
    bad = true;
  }
  if (bad && audit_.detail.size() < 8) {
    std::ostringstream os;
    os << "block " << b << " owner " << blk.owner << " actor " << actor
       << " alloc-owner " << owner_at_alloc_[static_cast<size_t>(b)];
    audit_.detail.push_back(os.str());
  }
}

Memory::LoadResult Memory::load(CompId actor, BlockId b, int64_t off) const {
  if (!valid(b)) return {Value::undef(), MemErr::DeadBlock};
  const Block& blk = blocks_[static_cast<size_t>(b)];
  if (!blk.live) return {Value::undef(), MemErr::DeadBlock};
  if (blk.owner != actor) return {Value::undef(), MemErr::NotOwner};
  if (off < 0 || off >= static_cast<int64_t>(blk.slots.size()))
    return {Value::undef(), MemErr::OutOfBounds};
  note_access(actor, b);
  return {blk.slots[static_cast<size_t>(off)], MemErr::None};
}

MemErr Memory::store(CompId actor, BlockId b, int64_t off, const Value& v) {
  if (!valid(b)) return MemErr::DeadBlock;
  Block& blk = blocks_[static_cast<size_t>(b)];
  if (!blk.live) return MemErr::DeadBlock;
  if (blk.owner != actor) return MemErr::NotOwner;
  if (off < 0 || off >= static_cast<int64_t>(blk.slots.size())) return MemErr::OutOfBounds;
  if (blk.perm == Perm::ReadOnly) return MemErr::ReadOnly;
  note_access(actor, b);
  blk.slots[static_cast<size_t>(off)] = v;
  return MemErr::None;
}

MemErr Memory::free_block(CompId actor, BlockId b) {
  if (!valid(b)) return MemErr::DeadBlock;
  Block& blk = blocks_[static_cast<size_t>(b)];
  if (!blk.live) return MemErr::DeadBlock;
  if (blk.owner != actor) return MemErr::NotOwner;
  note_access(actor, b);
  blk.live = false;
  blk.slots.clear();
  blk.slots.shrink_to_fit();
  return MemErr::None;
}

MemErr Memory::set_perm(BlockId b, Perm p) {
  if (!valid(b)) return MemErr::DeadBlock;
  Block& blk = blocks_[static_cast<size_t>(b)];
  if (!blk.live) return MemErr::DeadBlock;
  blk.perm = p;
  return MemErr::None;
}

}  // namespace secomp
