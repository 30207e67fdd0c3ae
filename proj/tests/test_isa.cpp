#include "doctest.h"
#include "sparce/isa.hpp"
#include "sparce/workloads.hpp"

using namespace sparce;

TEST_CASE("FMLA parses with an implicit accumulator read") {
  Program p = parse_program("FMLA f2, f0, f1\nHALT\n");
  REQUIRE(p.instructions.size() == 2);
  const Instruction& i = p.instructions[0];
  CHECK(i.op == Opcode::FMLA);
  CHECK(*i.dst == RegRef{RegFile::Fp, 2});
  REQUIRE(i.srcs.size() == 2);
  CHECK(i.srcs[0].reg == RegRef{RegFile::Fp, 0});
  CHECK(i.srcs[1].reg == RegRef{RegFile::Fp, 1});
  // reads = f0, f1 plus the accumulator
  auto reads = i.reads();
  CHECK(reads.size() == 3);
  CHECK(std::count(reads.begin(), reads.end(), RegRef{RegFile::Fp, 2}) == 1);
}

TEST_CASE("an eight-line dot-product loop parses with the label at index 1") {
  const char* text = R"(
  LD f0, [r4], #4
.label loop:
  SUBS r7, r7, #1
  LD f1, [r5], #4
  ADD r6, r6, #0
  FMUL f3, f0, f1
  FADD f2, f2, f3
  PRFM [r4, #64]
  BNE loop
)";
  Program p = parse_program(text);
  CHECK(p.instructions.size() == 8);
  CHECK(p.labels.at("loop") == 1);
  CHECK(p.instructions[7].branchTarget == 1);
  // PC of instruction i is i: positions are the vector indices by construction
  CHECK(p.instructions[1].op == Opcode::SUBS);
}

TEST_CASE("VFMLA takes a lane-selected multiplier") {
  Program p = parse_program("VFMLA v16, v0, v8.s[0]\nHALT\n");
  const Instruction& i = p.instructions[0];
  CHECK(i.op == Opcode::VFMLA);
  CHECK(*i.dst == RegRef{RegFile::Vec, 16});
  CHECK(i.srcs[1].kind == Operand::Kind::Lane);
  CHECK(i.srcs[1].reg == RegRef{RegFile::Vec, 8});
  CHECK(i.srcs[1].lane == 0);
}

TEST_CASE("post-increment and offset addressing") {
  Program p = parse_program("LD f0, [r4], #4\nST f2, [r6, #-8]\nHALT\n");
  CHECK(p.instructions[0].has_post_increment());
  CHECK(p.instructions[0].srcs[0].postAmount == 4);
  CHECK(p.instructions[1].srcs[1].offset == -8);
  CHECK_FALSE(p.instructions[1].has_post_increment());
  // post-increment writes the base register as well
  auto w = p.instructions[0].writes();
  CHECK(w.size() == 2);
}

TEST_CASE("parse errors carry line and column") {
  CHECK_THROWS_AS(parse_program("FROB r0, r1\n"), AsmError);
  try {
    parse_program("MOV r0, #1\nFROB r0, r1\n");
  } catch (const AsmError& e) {
    CHECK(e.line == 2);
  }
  CHECK_THROWS_AS(parse_program("B nowhere\nHALT\n"), AsmError);          // unresolved label
  CHECK_THROWS_AS(parse_program(".label a:\nHALT\n.label a:\nHALT\n"), AsmError);  // duplicate
  CHECK_THROWS_AS(parse_program("ADD r0 r1 r2\nHALT\n"), AsmError);       // syntax
  CHECK_THROWS_AS(parse_program("MOV r40, #1\nHALT\n"), AsmError);        // register range
}

TEST_CASE("validate flags invariant violations") {
  Program p = parse_program("MOV r0, #1\nBNE somewhere\nHALT\n.label somewhere:\nHALT\n");
  p.instructions[1].branchTarget = 99;
  auto diags = validate(p);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].message.find("unresolved target") != std::string::npos);

  // store with post-increment is legal
  Program ok = parse_program("ST f0, [r4], #4\nHALT\n");
  CHECK(validate(ok).empty());

  // three source registers violates the operand budget
  Program bad = parse_program("ADD r0, r1, r2\nHALT\n");
  bad.instructions[0].srcs.push_back(Operand::make_reg(RegRef{RegFile::Int, 3}));
  auto d2 = validate(bad);
  REQUIRE(d2.size() == 1);
  CHECK(d2[0].message.find("operand count") != std::string::npos);

  // post-increment on a non-memory op
  Program pi = parse_program("MOV r0, #1\nHALT\n");
  pi.instructions[0].srcs[0] = Operand::make_mem_post(RegRef{RegFile::Int, 1}, 8);
  CHECK_FALSE(validate(pi).empty());
}

TEST_CASE("data and sasa directives") {
  const char* text = R"(
.data 0x100: de ad be ef
.sasa tab: {pc=3, cond=f0, len=1} {pc=5, cond=f0|f1, len=2}
  MOV r31, =tab
  SASALD [r31], #2
  MOV r0, #0
  MOV r0, #0
  MOV r0, #0
  MOV r0, #0
  MOV r0, #0
  MOV r0, #0
  HALT
)";
  Program p = parse_program(text);
  REQUIRE(p.data.size() == 1);
  CHECK(p.data[0].addr == 0x100);
  CHECK(p.data[0].bytes == std::vector<uint8_t>{0xde, 0xad, 0xbe, 0xef});
  REQUIRE(p.sasaBlocks.size() == 1);
  REQUIRE(p.sasaBlocks[0].entries.size() == 2);
  const SasaEntry& e = p.sasaBlocks[0].entries[1];
  CHECK(e.precedingPC == 5);
  CHECK(e.instsToSkip == 2);
  CHECK(e.condition.comb == Combiner::Or);
  // the symbol resolves to the block's assigned address
  CHECK(p.instructions[0].srcs[0].imm == static_cast<int64_t>(p.sasaBlocks[0].addr));
  CHECK(validate(p).empty());
}

TEST_CASE("SASA entry binary layout is bit-exact") {
  SasaEntry e{5, cond_from_string("f0|f1"), 2};
  auto bytes = encode_sasa_entries({e});
  REQUIRE(bytes.size() == kSasaEntryBytes);
  // word0 = 5, word1 = combiner|term fields, word2 = 2, all little-endian
  std::vector<uint8_t> expect(24, 0);
  expect[0] = 5;
  uint64_t w1 = 0x1050405;  // Or | fp f0 mask1 | fp f1 mask1
  for (int i = 0; i < 8; ++i) expect[8 + i] = static_cast<uint8_t>(w1 >> (8 * i));
  expect[16] = 2;
  CHECK(bytes == expect);
  auto back = decode_sasa_entries(bytes.data(), 1);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == e);
}

TEST_CASE("condition strings round-trip") {
  for (const char* s : {"f0", "r3", "v8", "v12.s[1]", "f0|f1", "v8&v12", "v2.m[5]"}) {
    SkipCondition c = cond_from_string(s);
    CHECK(cond_to_string(c) == s);
  }
  CHECK_THROWS(cond_from_string("x9"));
  CHECK_THROWS(cond_from_string("v8.s[7]"));
}

TEST_CASE("print then parse is structurally identical") {
  auto roundtrip = [](const Program& p) {
    std::string once = print_program(p);
    Program q = parse_program(once);
    CHECK(q.instructions.size() == p.instructions.size());
    CHECK(q.labels == p.labels);
    CHECK(q.sasaBlocks.size() == p.sasaBlocks.size());
    for (size_t i = 0; i < p.sasaBlocks.size(); ++i)
      CHECK(q.sasaBlocks[i].entries == p.sasaBlocks[i].entries);
    CHECK(print_program(q) == once);
    for (size_t i = 0; i < p.instructions.size(); ++i) {
      CHECK(q.instructions[i].op == p.instructions[i].op);
      CHECK(q.instructions[i].branchTarget == p.instructions[i].branchTarget);
      CHECK(q.instructions[i].srcs.size() == p.instructions[i].srcs.size());
    }
  };
  roundtrip(build_kernel(parse_kernel("dot:16")).program);
  roundtrip(build_kernel(parse_kernel("conv:6x6x3")).program);
  roundtrip(build_kernel(parse_kernel("gemm:16x16x4")).program);
  roundtrip(build_kernel(parse_kernel("gemm:16x16x4:sharedA")).program);
  roundtrip(parse_program(".sasa t: {pc=1, cond=v8.s[2], len=3}\n"
                          ".data 64: 01 02\nMOV r31, =t\nSASALD [r31], #1\n"
                          "MOV r1, #-7\nMOV f1, #2.5\nMOV v3, #0.0\n"
                          "LD f0, [r4, #8], #16\nHALT\n"));
}
