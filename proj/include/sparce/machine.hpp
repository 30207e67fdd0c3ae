#pragma once

#include <array>
#include <cstdint>
#include <list>
#include <optional>
#include <unordered_map>
#include <vector>

#include "sparce/config.hpp"
#include "sparce/isa.hpp"

namespace sparce {

// Sparse byte-addressable memory. Reads of never-written addresses return 0.
class Memory {
 public:
  uint8_t read8(uint64_t addr) const;
  void write8(uint64_t addr, uint8_t v);
  void read(uint64_t addr, uint8_t* out, size_t n) const;
  void write(uint64_t addr, const uint8_t* in, size_t n);

  uint32_t read32(uint64_t addr) const;
  void write32(uint64_t addr, uint32_t v);
  uint64_t read64(uint64_t addr) const;
  void write64(uint64_t addr, uint64_t v);

  float read_f32(uint64_t addr) const;
  void write_f32(uint64_t addr, float v);

 private:
  static constexpr uint64_t kPageBits = 12;
  static constexpr uint64_t kPageSize = 1ull << kPageBits;
  std::unordered_map<uint64_t, std::array<uint8_t, kPageSize>> pages_;
};

// A register value, interpreted per the owning file: Int uses i, Fp uses
// v[0], Vec uses all four lanes.
struct Value {
  uint64_t i{0};
  std::array<float, kVecLanes> v{0.0f, 0.0f, 0.0f, 0.0f};

  static Value of_int(uint64_t x) { Value r; r.i = x; return r; }
  static Value of_f32(float x) { Value r; r.v[0] = x; return r; }
  static Value of_vec(std::array<float, kVecLanes> x) { Value r; r.v = x; return r; }
};

struct MachineState {
  std::array<uint64_t, kRegsPerFile> intRegs{};
  std::array<float, kRegsPerFile> fpRegs{};
  std::array<std::array<float, kVecLanes>, kRegsPerFile> vecRegs{};
  bool zeroFlag{false};
  Memory memory;
  int pc{0};

  Value read_reg(const RegRef& r) const;
  void write_reg(const RegRef& r, const Value& v);
};

struct RegWrite {
  RegRef reg;
  Value value;
};

struct MemWrite {
  uint64_t addr;
  std::vector<uint8_t> bytes;
};

// Complete architectural effect of one instruction, computed without
// mutating the input state.
struct Effect {
  std::vector<RegWrite> regWrites;
  std::vector<MemWrite> memWrites;
  std::optional<bool> flagWrite;
  int nextPC{0};
  bool halt{false};
  bool branchTaken{false};
  std::optional<uint64_t> memAddr;  // effective address of a memory access
  size_t memBytes{0};
};

struct ExecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Effect exec_semantics(const Instruction& instr, const MachineState& state);
void apply_effect(const Effect& e, MachineState& state);

// Untimed reference executor: runs by pure semantics until HALT commits.
// SASALD is a no-op here. Used as an independent oracle for the pipeline.
MachineState run_functional(const Program& prog, MachineState state,
                            uint64_t maxSteps = 100000000ull);

// Seed program .data / .sasa payloads into memory.
void seed_program_data(const Program& prog, MachineState& state);

// --- D-cache -------------------------------------------------------------------
// Set-associative, LRU, single level. Timing-only: contents never affect
// architectural values.

struct DCacheStats {
  uint64_t accesses{0};
  uint64_t hits{0};
  uint64_t misses{0};
};

class DCache {
 public:
  DCache(uint64_t sizeBytes, uint64_t lineBytes, uint64_t assoc, int hitLatency,
         int missLatency);
  explicit DCache(const SimConfig& cfg)
      : DCache(cfg.l1_size, cfg.l1_line, cfg.l1_assoc, cfg.l1_hit, cfg.l1_miss) {}

  struct AccessResult {
    int latency;
    bool hit;
  };
  // Throws ExecError if the access straddles a line boundary.
  AccessResult access(uint64_t addr, size_t bytes);

  const DCacheStats& stats() const { return stats_; }
  uint64_t num_sets() const { return numSets_; }
  uint64_t line_bytes() const { return lineBytes_; }

 private:
  uint64_t lineBytes_;
  uint64_t assoc_;
  uint64_t numSets_;
  int hitLatency_;
  int missLatency_;
  // per set: tags in LRU order, front = most recent
  std::vector<std::list<uint64_t>> sets_;
  DCacheStats stats_;
};

}  // namespace sparce
