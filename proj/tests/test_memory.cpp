#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "secomp/memory.hpp"

using namespace secomp;

TEST_CASE("alloc assigns monotone ids and undef slots") {
  Memory m;
  BlockId a = m.alloc(0, 2);
  BlockId b = m.alloc(0, 1);
  CHECK(a == 0);
  CHECK(b == 1);
  CHECK(m.block(a).slots.size() == 2);
  CHECK(m.block(a).slots[0].is_undef());
  CHECK(m.block(a).slots[1].is_undef());
  CHECK(m.next_id() == 2);
}

TEST_CASE("zero-slot block rejects every access") {
  Memory m;
  BlockId b = m.alloc(3, 0);
  CHECK(m.load(3, b, 0).err == MemErr::OutOfBounds);
  CHECK(m.store(3, b, 0, Value::intv(1)) == MemErr::OutOfBounds);
}

TEST_CASE("load and store respect ownership and bounds") {
  Memory m;
  BlockId b = m.alloc(1, 2);
  CHECK(m.store(1, b, 0, Value::intv(7)) == MemErr::None);
  auto r = m.load(1, b, 0);
  CHECK(r.err == MemErr::None);
  CHECK(r.v == Value::intv(7));

  CHECK(m.load(2, b, 0).err == MemErr::NotOwner);
  CHECK(m.store(2, b, 0, Value::intv(5)) == MemErr::NotOwner);
  CHECK(m.load(1, b, 2).err == MemErr::OutOfBounds);
  CHECK(m.store(1, b, -1, Value::intv(5)) == MemErr::OutOfBounds);
}

TEST_CASE("free marks dead; double free and foreign free fail") {
  Memory m;
  BlockId b = m.alloc(1, 1);
  CHECK(m.free_block(2, b) == MemErr::NotOwner);
  CHECK(m.free_block(1, b) == MemErr::None);
  CHECK_FALSE(m.block(b).live);
  CHECK(m.free_block(1, b) == MemErr::DeadBlock);
  CHECK(m.load(1, b, 0).err == MemErr::DeadBlock);
  // The id is not reused.
  CHECK(m.alloc(1, 1) == b + 1);
}

TEST_CASE("permission round trip restores writability") {
  Memory m;
  BlockId b = m.alloc(1, 1);
  CHECK(m.store(1, b, 0, Value::intv(1)) == MemErr::None);
  CHECK(m.set_perm(b, Perm::ReadOnly) == MemErr::None);
  CHECK(m.store(1, b, 0, Value::intv(2)) == MemErr::ReadOnly);
  CHECK(m.load(1, b, 0).err == MemErr::None);  // reads still fine
  CHECK(m.set_perm(b, Perm::ReadWrite) == MemErr::None);
  CHECK(m.store(1, b, 0, Value::intv(2)) == MemErr::None);

  CHECK(m.free_block(1, b) == MemErr::None);
  CHECK(m.set_perm(b, Perm::ReadOnly) == MemErr::DeadBlock);
}

TEST_CASE("random operation sequences never leak cross-compartment access") {
  std::mt19937_64 rng(12345);
  Memory m;
  std::vector<std::pair<BlockId, CompId>> blocks;
  for (int i = 0; i < 2000; i++) {
    int action = static_cast<int>(rng() % 5);
    CompId actor = static_cast<CompId>(rng() % 4);
    if (action == 0 || blocks.empty()) {
      blocks.emplace_back(m.alloc(actor, static_cast<int32_t>(rng() % 4)), actor);
      continue;
    }
    auto [b, owner] = blocks[rng() % blocks.size()];
    int64_t off = static_cast<int64_t>(rng() % 5) - 1;
    switch (action) {
      case 1: (void)m.load(actor, b, off); break;
      case 2: (void)m.store(actor, b, off, Value::intv(static_cast<int64_t>(rng()))); break;
      case 3: (void)m.free_block(actor, b); break;
      case 4: (void)m.set_perm(b, rng() % 2 ? Perm::ReadOnly : Perm::ReadWrite); break;
    }
    CHECK(m.block(b).owner == owner);  // owner never changes
  }
  CHECK(m.audit().cross_violations == 0);
  CHECK(m.audit().owner_changes == 0);
}
