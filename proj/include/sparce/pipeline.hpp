#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sparce/config.hpp"
#include "sparce/isa.hpp"
#include "sparce/machine.hpp"
#include "sparce/skip.hpp"

namespace sparce {

enum class Mode { Baseline, Sparce };

struct RunStats {
  uint64_t cycles{0};
  uint64_t fetched{0};
  uint64_t executed{0};
  uint64_t skippedAtFetch{0};     // instructions never fetched due to a skip
  uint64_t squashedInFlight{0};   // fetched but squashed (regions + wrong path)
  uint64_t loadsSkipped{0};       // loads never fetched or squashed before issue

  uint64_t dcacheAccesses{0};
  uint64_t dcacheHits{0};
  uint64_t dcacheMisses{0};

  uint64_t sasaHits{0};
  uint64_t regionsEntered{0};
  uint64_t regionsAbortedExecute{0};
  uint64_t regionsResolvedSkip{0};
  uint64_t regionConflicts{0};    // SASA hit while another region was pending

  // Per-cycle classification; cycles == busy + the four stall buckets.
  uint64_t busyIssueCycles{0};
  uint64_t stallDataHazard{0};
  uint64_t stallExecBusy{0};
  uint64_t stallMemWait{0};
  uint64_t frontendBubbles{0};
};

struct SimTrace {
  std::vector<int> fetchedPcs;
  std::vector<int> committedPcs;
  std::vector<int> squashedPcs;
  std::vector<std::pair<int, int>> skipRanges;  // inclusive [first, last] never fetched
};

struct SimResult {
  MachineState final;
  RunStats stats;
  SimTrace trace;
  Sprf finalSprf;  // sparce mode: the sparsity register file at halt
};

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runs until HALT commits. The initial state's memory is extended with the
// program's data and SASA payloads before the first cycle.
SimResult simulate(const Program& prog, const MachineState& init, const SimConfig& cfg,
                   Mode mode);

}  // namespace sparce
