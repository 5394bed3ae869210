#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "secomp/trace.hpp"

using namespace secomp;

namespace {

Event rand_event(std::mt19937_64& rng) {
  std::string c0 = "C" + std::to_string(rng() % 3);
  std::string c1 = "C" + std::to_string(rng() % 3);
  switch (rng() % 3) {
    case 0: {
      std::vector<int64_t> args;
      for (uint64_t i = rng() % 4; i > 0; i--)
        args.push_back(static_cast<int64_t>(rng() % 2000) - 1000);
      return Event::call(c0, c1, "p" + std::to_string(rng() % 4), args);
    }
    case 1:
      if (rng() % 4 == 0) return Event::ret(c0, c1, std::nullopt);
      return Event::ret(c0, c1, static_cast<int64_t>(rng() % 1000));
    default: {
      std::vector<int64_t> rb, wb;
      bool read = rng() % 2 == 0;
      for (uint64_t i = rng() % 3; i > 0; i--)
        (read ? rb : wb).push_back(static_cast<int64_t>(rng() % 256));
      return Event::sys(c0, read ? "read" : "write", {static_cast<int64_t>(rng() % 8)},
                        rb, static_cast<int64_t>(rng() % 8), wb);
    }
  }
}

Trace rand_trace(std::mt19937_64& rng, bool allow_undef) {
  Trace t;
  for (uint64_t i = rng() % 6; i > 0; i--) t.push_back(rand_event(rng));
  if (allow_undef && rng() % 3 == 0)
    t.push_back(Event::undef("C" + std::to_string(rng() % 3)));
  return t;
}

}  // namespace

TEST_CASE("prefix relation") {
  Trace a = {Event::call("C0", "C1", "g", {1})};
  Trace b = {Event::call("C0", "C1", "g", {2})};

  CHECK(prefix_rel({}, {}));
  CHECK(prefix_rel(a, a));
  CHECK_FALSE(prefix_rel(a, b));

  // [Call, Undef(C0)] <= [Call, Return]
  Trace m1 = {a[0], Event::undef("C0")};
  Trace m2 = {a[0], Event::ret("C1", "C0", 3)};
  CHECK(prefix_rel(m1, m2));

  // [Undef(C0)] <= anything: the empty prefix is a prefix of everything.
  CHECK(prefix_rel({Event::undef("C0")}, b));
  CHECK(prefix_rel({Event::undef("C0")}, {}));

  // Undef-free + prefix_rel => equality.
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; i++) {
    Trace x = rand_trace(rng, false);
    Trace y = rand_trace(rng, false);
    CHECK(prefix_rel(x, x));
    if (prefix_rel(x, y)) CHECK(x == y);
  }
}

TEST_CASE("blame relation") {
  Trace m = {Event::call("C0", "C1", "g", {})};
  CHECK(blame_rel(m, m, {}));
  CHECK(blame_rel(m, m, {"C2"}));

  Trace m1 = {m[0], Event::undef("C1")};
  Trace m2 = {m[0], Event::ret("C1", "C0", 0)};
  CHECK(blame_rel(m1, m2, {"C1"}));
  CHECK_FALSE(blame_rel(m1, m2, {"C2"}));

  // blame implies prefix, and is monotone in the good set.
  std::mt19937_64 rng(8);
  for (int i = 0; i < 300; i++) {
    Trace x = rand_trace(rng, true);
    Trace y = rand_trace(rng, true);
    std::set<std::string> small = {"C0"}, big = {"C0", "C1", "C2"};
    if (blame_rel(x, y, small)) {
      CHECK(prefix_rel(x, y));
      CHECK(blame_rel(x, y, big));
    }
  }
}

TEST_CASE("trace serialization") {
  CHECK(serialize_trace({}) == "");
  Trace t = {Event::call("C0", "C1", "g", {1, 2})};
  CHECK(serialize_trace(t) == "CALL C0 C1.g (1,2)\n");
  CHECK(to_line(Event::ret("C1", "C0", std::nullopt)) == "RET C1 C0 void");
  CHECK(to_line(Event::sys("C0", "read", {3}, {7, 8}, 2, {})) ==
        "SYS C0 read (3) [7,8] -> 2 []");
  CHECK(to_line(Event::undef("C2")) == "UB C2");

  std::mt19937_64 rng(99);
  for (int i = 0; i < 500; i++) {
    Trace x = rand_trace(rng, true);
    CHECK(parse_trace(serialize_trace(x)) == x);
  }

  CHECK_THROWS_AS(parse_trace("CALL C0 bad (1)"), Diag);
  CHECK_THROWS_AS(parse_trace("NOPE x"), Diag);
}

TEST_CASE("projection drops annotations") {
  CHECK(project({}).empty());
  IEvent e;
  e.kind = IEvent::Kind::Sys;
  e.f_comp = "C0";
  e.f_proc = "main";
  e.t = Event::sys("C0", "read", {1}, {8}, 1, {});
  e.buffer = "buf";
  e.deltas.push_back(MemDelta::store("C0", "buf", 0, Value::intv(8)));
  ITrace it = {e};
  Trace t = project(it);
  REQUIRE(t.size() == 1);
  CHECK(t[0] == e.t);
}

TEST_CASE("itrace serialization round trip") {
  ITrace it;
  IEvent c;
  c.kind = IEvent::Kind::Call;
  c.f_comp = "C0";
  c.f_proc = "main";
  c.t = Event::call("C0", "C1", "g", {4});
  c.sig = {1, true};
  c.deltas.push_back(MemDelta::store("C0", "buf", 2, Value::intv(9)));
  c.deltas.push_back(MemDelta::bytes("C0", "buf", 0, {Value::intv(1), Value::undef()}));
  c.deltas.push_back(MemDelta::alloc("C0", 3));
  c.deltas.push_back(MemDelta::free_of("C0", "buf"));
  it.push_back(c);
  IEvent r;
  r.kind = IEvent::Kind::Return;
  r.f_comp = "C1";
  r.f_proc = "g";
  r.t = Event::ret("C1", "C0", std::nullopt);
  it.push_back(r);
  IEvent s;
  s.kind = IEvent::Kind::Sys;
  s.f_comp = "C0";
  s.f_proc = "main";
  s.t = Event::sys("C0", "write", {2}, {}, 2, {5, 6});
  s.buffer = "buf";
  it.push_back(s);

  std::string text = serialize_itrace(it);
  CHECK(parse_itrace(text) == it);
  CHECK(text.find("ICALL C0.main CALL C0 C1.g (4) SIG 1 ret") == 0);
}

TEST_CASE("io script consumption and exhaustion") {
  IoScript io = parse_io("READ 7 8\nWRITEACK 2\nREAD\n");
  CHECK(io.read_chunks.size() == 2);
  CHECK(io.next_chunk() == std::vector<int64_t>{7, 8});
  CHECK(io.next_chunk().empty());
  CHECK(io.next_chunk().empty());  // exhausted: empty reads
  CHECK(io.next_ack() == 2);
  CHECK(io.next_ack() == 0);  // exhausted: zero acks

  IoScript io2;
  io2.read_chunks.push_back({1, 2});
  io2.write_acks.push_back(5);
  CHECK(parse_io(serialize_io(io2)).read_chunks == io2.read_chunks);
  CHECK_THROWS_AS(parse_io("READ 300"), Diag);
}

TEST_CASE("well-bracketed call/return events") {
  Trace ok = {Event::call("C0", "C1", "g", {}), Event::call("C1", "C0", "h", {}),
              Event::ret("C0", "C1", 1), Event::ret("C1", "C0", 2)};
  CHECK(well_bracketed(ok));
  Trace cut = {Event::call("C0", "C1", "g", {}), Event::undef("C1")};
  CHECK(well_bracketed(cut));
  Trace bad = {Event::ret("C1", "C0", 1)};
  CHECK_FALSE(well_bracketed(bad));
  Trace mismatched = {Event::call("C0", "C1", "g", {}), Event::ret("C2", "C0", 1)};
  CHECK_FALSE(well_bracketed(mismatched));
}
