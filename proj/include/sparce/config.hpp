#pragma once

#include <cstdint>
#include <string>

namespace sparce {

// All latencies in cycles. Defaults model a small embedded in-order core;
// every value is overridable from a JSON config file.
struct SimConfig {
  // D-cache
  uint64_t l1_size = 32 * 1024;
  uint64_t l1_line = 64;
  uint64_t l1_assoc = 4;
  int l1_hit = 2;
  int l1_miss = 20;

  // functional-unit latencies
  int fadd_lat = 3;
  int fmul_lat = 4;
  int fmla_lat = 4;
  int vfmla_lat = 1;   // SIMD MAC engines run at low latency
  int int_lat = 1;

  int branch_penalty = 1;          // bubbles on a taken branch
  uint64_t cycle_limit = 1000000000ull;

  int sasa_capacity = 20;
  bool trap_nonfinite = false;     // audit aid: error if a skipped region saw non-finite data
  bool collect_traces = false;     // record fetch/commit/squash traces (tests)
};

SimConfig config_from_json_file(const std::string& path);   // throws on bad file
SimConfig config_from_json_text(const std::string& text);
std::string config_to_json(const SimConfig& c);

}  // namespace sparce
