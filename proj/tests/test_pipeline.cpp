#include <algorithm>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "sparce/pipeline.hpp"

using namespace sparce;

namespace {

SimConfig traced_config() {
  SimConfig cfg;
  cfg.collect_traces = true;
  return cfg;
}

// Single pass over a dot-product step whose SASA table loads at the top; two
// filler moves give the table load time to commit before the first anchor is
// fetched. The seed value lives at address 0 (r4 = 0) and is 0.0 unless the
// test writes something there.
const char* kSingleStep = R"(
.sasa tab: {pc=5, cond=f0, len=1} {pc=7, cond=f0|f1, len=2}
  MOV r31, =tab
  SASALD [r31], #2
  MOV r9, #1
  MOV r9, #2
  LD f0, [r4], #4
  ADD r5, r5, #4
  LD f1, [r5, #-4]
  ADD r8, r8, #0
  FMUL f3, f0, f1
  FADD f2, f2, f3
  ST f2, [r6]
  HALT
)";

}  // namespace

TEST_CASE("straight-line programs execute every instruction once") {
  Program p = parse_program("MOV r0, #1\nMOV r1, #2\nADD r2, r0, r1\nHALT\n");
  SimResult r = simulate(p, MachineState{}, SimConfig{}, Mode::Baseline);
  CHECK(r.stats.executed == 4);
  CHECK(r.stats.fetched == 4);
  CHECK(r.stats.squashedInFlight == 0);
  CHECK(r.final.intRegs[2] == 3);
}

TEST_CASE("simulation is deterministic") {
  Program p = parse_program(R"(
  MOV r0, #5
  MOV r4, #4096
.label loop:
  LD f0, [r4], #4
  FADD f2, f2, f0
  SUBS r0, r0, #1
  BNE loop
  HALT
)");
  SimResult a = simulate(p, MachineState{}, SimConfig{}, Mode::Baseline);
  SimResult b = simulate(p, MachineState{}, SimConfig{}, Mode::Baseline);
  CHECK(a.stats.cycles == b.stats.cycles);
  CHECK(a.stats.executed == b.stats.executed);
  CHECK(a.final.fpRegs[2] == b.final.fpRegs[2]);
}

TEST_CASE("cycle accounting identity holds") {
  Program p = parse_program(R"(
  MOV r0, #9
  MOV r4, #4096
.label loop:
  LD f0, [r4], #4
  FMUL f1, f0, f0
  FADD f2, f2, f1
  SUBS r0, r0, #1
  BNE loop
  HALT
)");
  for (Mode m : {Mode::Baseline, Mode::Sparce}) {
    SimResult r = simulate(p, MachineState{}, SimConfig{}, m);
    CHECK(r.stats.cycles == r.stats.busyIssueCycles + r.stats.stallDataHazard +
                                r.stats.stallExecBusy + r.stats.stallMemWait +
                                r.stats.frontendBubbles);
    CHECK(r.stats.fetched == r.stats.executed + r.stats.squashedInFlight);
  }
}

TEST_CASE("each taken branch costs one squashed wrong-path fetch") {
  Program p = parse_program(R"(
  MOV r0, #3
.label loop:
  SUBS r0, r0, #1
  BNE loop
  HALT
)");
  SimResult r = simulate(p, MachineState{}, SimConfig{}, Mode::Baseline);
  // r0: 3 -> 2 -> 1 -> 0, so BNE is taken twice
  CHECK(r.stats.squashedInFlight == 2);
  CHECK(r.stats.executed == 1 + 3 * 2 + 1);

  SimConfig slow;
  slow.branch_penalty = 3;
  SimResult s = simulate(p, MachineState{}, slow, Mode::Baseline);
  CHECK(s.stats.cycles == r.stats.cycles + 2 * 2);  // 2 extra bubbles per taken branch
  CHECK(s.final.intRegs[0] == r.final.intRegs[0]);
}

TEST_CASE("commit order equals fetch order minus squashes") {
  Program p = parse_program(R"(
  MOV r0, #4
.label loop:
  SUBS r0, r0, #1
  BNE loop
  HALT
)");
  SimResult r = simulate(p, MachineState{}, traced_config(), Mode::Baseline);
  // committed is a subsequence of fetched, in order
  size_t j = 0;
  for (int pc : r.trace.committedPcs) {
    while (j < r.trace.fetchedPcs.size() && r.trace.fetchedPcs[j] != pc) ++j;
    REQUIRE(j < r.trace.fetchedPcs.size());
    ++j;
  }
  CHECK(r.trace.committedPcs.size() == r.stats.executed);
}

TEST_CASE("pipelined result matches the functional reference") {
  Program p = parse_program(R"(
  MOV r4, #4096
  MOV r5, #8192
  MOV r0, #6
  MOV f2, #0.0
.label loop:
  LD f0, [r4], #4
  LD f1, [r5], #4
  FMUL f3, f0, f1
  FADD f2, f2, f3
  SUBS r0, r0, #1
  BNE loop
  ST f2, [r5]
  HALT
)");
  MachineState init;
  for (int i = 0; i < 6; ++i) {
    init.memory.write_f32(4096 + 4 * i, 0.5f * i);
    init.memory.write_f32(8192 + 4 * i, 1.5f - i);
  }
  MachineState ref = run_functional(p, init);
  SimResult r = simulate(p, init, SimConfig{}, Mode::Baseline);
  CHECK(r.final.fpRegs[2] == ref.fpRegs[2]);
  CHECK(r.final.intRegs[4] == ref.intRegs[4]);
  CHECK(r.final.memory.read_f32(8192 + 24) == ref.memory.read_f32(8192 + 24));
}

TEST_CASE("cache latencies change timing but never values") {
  Program p = parse_program(R"(
  MOV r4, #4096
  MOV r0, #8
.label loop:
  LD f0, [r4], #4
  FADD f2, f2, f0
  SUBS r0, r0, #1
  BNE loop
  HALT
)");
  MachineState init;
  for (int i = 0; i < 8; ++i) init.memory.write_f32(4096 + 4 * i, 1.0f + i);
  SimConfig fast;
  SimConfig slow;
  slow.l1_miss = 80;
  slow.l1_hit = 5;
  SimResult a = simulate(p, init, fast, Mode::Baseline);
  SimResult b = simulate(p, init, slow, Mode::Baseline);
  CHECK(b.stats.cycles > a.stats.cycles);
  CHECK(a.final.fpRegs[2] == b.final.fpRegs[2]);
}

TEST_CASE("runaway programs hit the cycle limit") {
  Program p = parse_program(".label spin:\n  B spin\n  HALT\n");
  SimConfig cfg;
  cfg.cycle_limit = 1000;
  CHECK_THROWS_AS(simulate(p, MachineState{}, cfg, Mode::Baseline), SimError);
}

TEST_CASE("SASALD is a no-op in baseline mode and loads the table in sparce mode") {
  Program p = parse_program(kSingleStep);
  MachineState init;
  init.memory.write_f32(0, 5.0f);   // r4 = 0: seed value nonzero
  init.memory.write_f32(8, 2.0f);   // r5 starts 0, +4, load [r5,#-4] hmm -> addr 0
  SimResult base = simulate(p, init, SimConfig{}, Mode::Baseline);
  SimResult sprc = simulate(p, init, SimConfig{}, Mode::Sparce);
  CHECK(base.stats.sasaHits == 0);
  CHECK(sprc.stats.sasaHits > 0);
  // dense values: nothing skipped, cycle-for-cycle identical
  CHECK(sprc.stats.skippedAtFetch == 0);
  CHECK(sprc.stats.cycles == base.stats.cycles);
  CHECK(sprc.final.memory.read_f32(0) == base.final.memory.read_f32(0));
}

TEST_CASE("a pending region resolves by squash when the seed load is slow") {
  Program p = parse_program(kSingleStep);
  MachineState init;  // seed value at address 0 stays 0.0
  SimResult base = simulate(p, init, traced_config(), Mode::Baseline);
  SimResult sprc = simulate(p, init, traced_config(), Mode::Sparce);

  // the dependent load never executes: it is squashed in flight or never
  // fetched, and the multiply-add pair is skipped at fetch
  CHECK(sprc.stats.loadsSkipped == 1);
  CHECK(sprc.stats.squashedInFlight > 0);
  CHECK(sprc.stats.skippedAtFetch == 2);
  CHECK(sprc.stats.regionsEntered > 0);
  CHECK(sprc.stats.regionsResolvedSkip > 0);
  CHECK(sprc.stats.cycles < base.stats.cycles);
  // architectural state is unchanged by the skip
  CHECK(sprc.final.memory.read_f32(0) == base.final.memory.read_f32(0));
  CHECK(sprc.final.fpRegs[2] == base.final.fpRegs[2]);
  CHECK(sprc.final.intRegs[5] == base.final.intRegs[5]);
}

TEST_CASE("a pending region resolves to execute when the condition is false") {
  Program p = parse_program(kSingleStep);
  MachineState init;
  init.memory.write_f32(0, 5.0f);  // seed nonzero: no skipping allowed
  SimResult base = simulate(p, init, SimConfig{}, Mode::Baseline);
  SimResult sprc = simulate(p, init, SimConfig{}, Mode::Sparce);
  CHECK(sprc.stats.skippedAtFetch == 0);
  CHECK(sprc.stats.loadsSkipped == 0);
  CHECK(sprc.stats.regionsAbortedExecute > 0);
  CHECK(sprc.final.memory.read_f32(0) == base.final.memory.read_f32(0));
  CHECK(sprc.stats.cycles == base.stats.cycles);
}

TEST_CASE("skipped pcs never enter the fetch slot") {
  Program p = parse_program(kSingleStep);
  SimResult sprc = simulate(p, MachineState{}, traced_config(), Mode::Sparce);
  for (auto [first, last] : sprc.trace.skipRanges)
    for (int pc = first; pc <= last; ++pc)
      CHECK(std::count(sprc.trace.fetchedPcs.begin(), sprc.trace.fetchedPcs.end(), pc) == 0);
  CHECK(!sprc.trace.skipRanges.empty());
}

TEST_CASE("random programs: pipeline and functional reference agree") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 150; ++trial) {
    std::ostringstream prog;
    prog << "  MOV r4, #4096\n  MOV r5, #8192\n";
    prog << "  MOV r0, #" << (1 + rng() % 4) << "\n";
    prog << ".label top:\n";
    int body = 3 + static_cast<int>(rng() % 10);
    for (int i = 0; i < body; ++i) {
      int fa = 1 + static_cast<int>(rng() % 6);
      int fb = 1 + static_cast<int>(rng() % 6);
      int fd = 1 + static_cast<int>(rng() % 6);
      switch (rng() % 8) {
        case 0: prog << "  LD f" << fd << ", [r4], #4\n"; break;
        case 1: prog << "  ST f" << fa << ", [r5], #4\n"; break;
        case 2: prog << "  FMUL f" << fd << ", f" << fa << ", f" << fb << "\n"; break;
        case 3: prog << "  FADD f" << fd << ", f" << fa << ", f" << fb << "\n"; break;
        case 4: prog << "  FMLA f" << fd << ", f" << fa << ", f" << fb << "\n"; break;
        case 5: prog << "  ADD r" << 6 + rng() % 3 << ", r" << 6 + rng() % 3 << ", #"
                     << rng() % 16 << "\n"; break;
        case 6: prog << "  PRFM [r4, #" << 4 * (rng() % 32) << "]\n"; break;
        case 7: prog << "  MOV f" << fd << ", #" << (rng() % 5) << ".5\n"; break;
      }
    }
    prog << "  SUBS r0, r0, #1\n  BNE top\n  ST f1, [r5]\n  HALT\n";
    Program p = parse_program(prog.str());
    MachineState init;
    for (int i = 0; i < 64; ++i)
      init.memory.write_f32(4096 + 4 * i, (i % 7 == 0) ? 0.0f : 0.25f * i);
    MachineState ref = run_functional(p, init);
    SimConfig cfg;
    cfg.l1_miss = 5 + static_cast<int>(rng() % 30);
    SimResult sim = simulate(p, init, cfg, Mode::Baseline);
    for (int f = 0; f < 8; ++f) REQUIRE(sim.final.fpRegs[f] == ref.fpRegs[f]);
    for (int r = 0; r < 8; ++r) REQUIRE(sim.final.intRegs[r] == ref.intRegs[r]);
    for (int i = 0; i < 64; ++i)
      REQUIRE(sim.final.memory.read32(8192 + 4 * i) == ref.memory.read32(8192 + 4 * i));
    REQUIRE(sim.stats.fetched == sim.stats.executed + sim.stats.squashedInFlight);
  }
}

TEST_CASE("the sparsity register file mirrors the architectural values at halt") {
  Program p = parse_program(kSingleStep);
  MachineState init;
  init.memory.write_f32(0, 2.5f);
  SimResult r = simulate(p, init, SimConfig{}, Mode::Sparce);
  // every register this program writes must agree with a fresh zero check;
  // no writer is in flight once the pipeline drains
  for (const RegRef reg : {RegRef{RegFile::Fp, 0}, RegRef{RegFile::Fp, 1},
                           RegRef{RegFile::Fp, 2}, RegRef{RegFile::Fp, 3},
                           RegRef{RegFile::Int, 4}, RegRef{RegFile::Int, 5},
                           RegRef{RegFile::Int, 9}, RegRef{RegFile::Int, 31}}) {
    CHECK_FALSE(r.finalSprf.in_flight(reg));
    CHECK(r.finalSprf.entry(reg).isSparse == svc_check(r.final.read_reg(reg), reg.file));
  }
}

TEST_CASE("trap_nonfinite flags non-finite data under a skip") {
  Program p = parse_program(kSingleStep);
  MachineState init;
  init.fpRegs[1] = std::numeric_limits<float>::infinity();  // stale multiplier
  SimConfig cfg;
  cfg.trap_nonfinite = true;
  CHECK_THROWS_AS(simulate(p, init, cfg, Mode::Sparce), SimError);
  SimConfig lax;
  simulate(p, init, lax, Mode::Sparce);  // audit off: runs to completion
}
