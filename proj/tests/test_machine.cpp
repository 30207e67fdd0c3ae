#include <list>

#include "doctest.h"
#include "sparce/machine.hpp"

using namespace sparce;

namespace {
Instruction first(const std::string& text) {
  return parse_program(text + "\nHALT\n").instructions[0];
}
}  // namespace

TEST_CASE("FMLA with a zero multiplier leaves the accumulator unchanged") {
  MachineState st;
  st.fpRegs[0] = 0.0f;
  st.fpRegs[1] = 7.5f;
  st.fpRegs[2] = 3.0f;
  Effect e = exec_semantics(first("FMLA f2, f0, f1"), st);
  REQUIRE(e.regWrites.size() == 1);
  CHECK(e.regWrites[0].value.v[0] == 3.0f);
}

TEST_CASE("VFMLA broadcasts the lane-selected multiplier") {
  MachineState st;
  st.vecRegs[8] = {2.0f, 9.0f, 9.0f, 9.0f};
  st.vecRegs[0] = {1.0f, 2.0f, 3.0f, 4.0f};
  st.vecRegs[16] = {0.0f, 0.0f, 0.0f, 0.0f};
  Effect e = exec_semantics(first("VFMLA v16, v0, v8.s[0]"), st);
  REQUIRE(e.regWrites.size() == 1);
  CHECK(e.regWrites[0].value.v == std::array<float, 4>{2.0f, 4.0f, 6.0f, 8.0f});
}

TEST_CASE("load with post-increment writes the value and the base") {
  MachineState st;
  st.intRegs[4] = 100;
  Effect e = exec_semantics(first("LD f0, [r4], #4"), st);
  REQUIRE(e.regWrites.size() == 2);
  CHECK(e.regWrites[0].reg == RegRef{RegFile::Fp, 0});
  CHECK(e.regWrites[0].value.v[0] == 0.0f);  // unwritten memory reads as zero
  CHECK(e.regWrites[1].reg == RegRef{RegFile::Int, 4});
  CHECK(e.regWrites[1].value.i == 104);
}

TEST_CASE("PRFM has no architectural effect") {
  MachineState st;
  Effect e = exec_semantics(first("PRFM [r4, #64]"), st);
  CHECK(e.regWrites.empty());
  CHECK(e.memWrites.empty());
  CHECK_FALSE(e.flagWrite.has_value());
}

TEST_CASE("exec_semantics is pure") {
  MachineState st;
  st.fpRegs[0] = 1.5f;
  st.fpRegs[1] = 2.5f;
  Instruction i = first("FMUL f3, f0, f1");
  Effect a = exec_semantics(i, st);
  Effect b = exec_semantics(i, st);
  CHECK(a.regWrites[0].value.v[0] == b.regWrites[0].value.v[0]);
  CHECK(st.fpRegs[3] == 0.0f);  // state untouched
}

TEST_CASE("SUBS sets the zero flag and conditional branches follow it") {
  MachineState st = run_functional(parse_program(R"(
  MOV r0, #2
.label loop:
  SUBS r0, r0, #1
  BNE loop
  MOV r1, #7
  HALT
)"), MachineState{});
  CHECK(st.intRegs[0] == 0);
  CHECK(st.intRegs[1] == 7);
  CHECK(st.zeroFlag);
}

TEST_CASE("unaligned vector access is an error") {
  MachineState st;
  st.intRegs[4] = 8;  // not 16-aligned
  CHECK_THROWS_AS(exec_semantics(first("VLD v0, [r4]"), st), ExecError);
}

TEST_CASE("vector store and load round-trip through memory") {
  MachineState st;
  st.intRegs[4] = 0x1000;
  st.vecRegs[2] = {1.0f, -2.0f, 0.0f, 4.5f};
  apply_effect(exec_semantics(first("VST v2, [r4]"), st), st);
  st.pc = 0;
  apply_effect(exec_semantics(first("VLD v5, [r4]"), st), st);
  CHECK(st.vecRegs[5] == st.vecRegs[2]);
}

TEST_CASE("integer store and load move 8 bytes") {
  MachineState st;
  st.intRegs[4] = 0x2000;
  st.intRegs[1] = 0xDEADBEEFCAFE1234ull;
  apply_effect(exec_semantics(first("ST r1, [r4]"), st), st);
  st.pc = 0;
  apply_effect(exec_semantics(first("LD r2, [r4]"), st), st);
  CHECK(st.intRegs[2] == st.intRegs[1]);
}

TEST_CASE("memory reads of never-written addresses return zero") {
  Memory m;
  CHECK(m.read64(0xDEAD0000) == 0);
  m.write32(0x2000, 0x12345678);
  CHECK(m.read32(0x2000) == 0x12345678);
  CHECK(m.read8(0x2004) == 0);
}

TEST_CASE("dcache hit and miss behavior") {
  DCache c(32 * 1024, 64, 4, 2, 20);
  auto r1 = c.access(0x1000, 4);
  CHECK_FALSE(r1.hit);
  CHECK(r1.latency == 20);
  auto r2 = c.access(0x1010, 4);  // same line
  CHECK(r2.hit);
  CHECK(r2.latency == 2);
  CHECK(c.stats().accesses == c.stats().hits + c.stats().misses);
}

TEST_CASE("round-robin over assoc+1 lines in one set always misses") {
  // reference LRU: a list of tags, most recent first
  const uint64_t assoc = 4, line = 64;
  DCache c(32 * 1024, line, assoc, 2, 20);
  const uint64_t sets = c.num_sets();
  std::list<uint64_t> ref;
  auto ref_access = [&](uint64_t tag) {
    for (auto it = ref.begin(); it != ref.end(); ++it)
      if (*it == tag) { ref.erase(it); ref.push_front(tag); return true; }
    ref.push_front(tag);
    if (ref.size() > assoc) ref.pop_back();
    return false;
  };
  // assoc+1 distinct lines mapping to set 0, accessed round-robin
  for (int round = 0; round < 8; ++round) {
    for (uint64_t i = 0; i <= assoc; ++i) {
      uint64_t addr = i * sets * line;  // all map to set 0
      bool expect = ref_access(i);
      auto r = c.access(addr, 4);
      CHECK(r.hit == expect);
      CHECK_FALSE(r.hit);  // thrash pattern never hits
    }
  }
}

TEST_CASE("dcache agrees with a reference LRU on a scattered pattern") {
  const uint64_t assoc = 2, line = 64;
  DCache c(8 * 64 * assoc, line, assoc, 1, 9);
  const uint64_t sets = c.num_sets();
  std::vector<std::list<uint64_t>> ref(sets);
  uint64_t x = 12345;
  for (int i = 0; i < 2000; ++i) {
    x = x * 6364136223846793005ull + 1442695040888963407ull;
    uint64_t lineAddr = (x >> 20) % 64;
    uint64_t set = lineAddr % sets, tag = lineAddr / sets;
    bool expect = false;
    auto& l = ref[set];
    for (auto it = l.begin(); it != l.end(); ++it)
      if (*it == tag) { l.erase(it); l.push_front(tag); expect = true; break; }
    if (!expect) {
      l.push_front(tag);
      if (l.size() > assoc) l.pop_back();
    }
    CHECK(c.access(lineAddr * line, 4).hit == expect);
  }
}

TEST_CASE("straddling access is rejected") {
  DCache c(1024, 64, 2, 1, 5);
  CHECK_THROWS_AS(c.access(62, 4), ExecError);
}

TEST_CASE("config json round-trips and unknown files fail") {
  SimConfig c;
  c.l1_miss = 33;
  c.vfmla_lat = 2;
  SimConfig d = config_from_json_text(config_to_json(c));
  CHECK(d.l1_miss == 33);
  CHECK(d.vfmla_lat == 2);
  SimConfig partial = config_from_json_text("{\"l1_hit\": 3}");
  CHECK(partial.l1_hit == 3);
  CHECK(partial.l1_miss == SimConfig{}.l1_miss);
  CHECK_THROWS(config_from_json_file("/nonexistent/cfg.json"));
}
