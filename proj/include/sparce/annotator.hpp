#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "sparce/isa.hpp"

namespace sparce {

// ---------------------------------------------------------------------------
// Static analysis that proves instruction sequences zero-redundant under
// conditions over programmer-marked sparse loads, forms SASA entries, and
// emits an annotated program (SASA data blocks plus SASALD load code).
//
// Rules, applied per basic block to a fixpoint:
//   R1  A multiply-accumulate whose multiplier word is provably zero under
//       condition C is a no-op under C; likewise an accumulator add whose
//       addend is provably zero. Zero facts start at marked loads (a register
//       written only by marked loads is zero exactly when its SpRF term
//       holds) and propagate through multiplies.
//   R2  An instruction with no side effects beyond its register write, whose
//       result's every use before redefinition or region exit is skippable,
//       inherits the conjunction of the uses' conditions. The inherited
//       condition must not reference the instruction's own destination (the
//       stale value could satisfy it spuriously) and none of its registers
//       may be written between the instruction and its last use.
//   R3  An entry whose condition references a register written by another
//       skippable instruction is kept only if that writer's own condition
//       implies the entry's condition; otherwise a skipped writer could
//       leave a stale zero behind and fire the entry unsoundly.
// ---------------------------------------------------------------------------

struct SparseMarker {
  std::variant<int, std::string> target;  // load PC or label naming a load
  enum class Granularity { PerLane, FullRegister } granularity{Granularity::PerLane};
};

struct Seed {
  int loadPc{0};
  RegRef destReg{};
  bool perLane{false};  // vector loads: lane conditions in addition to full
};

struct RedundancyMap {
  std::map<int, SkipCondition> cond;          // pc -> condition it is skippable under
  std::map<int, std::string> provenance;      // pc -> which rule produced it
  std::set<int> overBudget;                   // skippable but condition needs >2 terms
};

struct AnnotatorWarning {
  enum class Kind {
    TermBudget,        // condition would need more than 2 terms; entry dropped
    Spacing,           // producer closer than 3 instructions; squash-prone, kept
    UnsoundDropped,    // R3 failed; entry dropped
    NoPrecedingPC,     // region starts at pc 0; entry dropped
    BadAnchor,         // preceding pc is a control transfer; entry dropped
    CondWrittenInRegion,  // region writes one of its own condition registers
  };
  Kind kind;
  int pc;
  std::string message;
};

struct RegionResult {
  std::vector<SasaEntry> entries;
  std::vector<AnnotatorWarning> warnings;
};

struct AnnotatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CapacityError : AnnotatorError {
  using AnnotatorError::AnnotatorError;
};

std::vector<Seed> find_seeds(const Program& prog, const std::vector<SparseMarker>& markers);
RedundancyMap propagate(const Program& prog, const std::vector<Seed>& seeds);
RegionResult form_regions(const Program& prog, const RedundancyMap& rmap);

// True iff condition a implies condition b (checked by enumerating the
// per-lane atoms both reference).
bool cond_implies(const SkipCondition& a, const SkipCondition& b);

struct AnnotateOptions {
  int capacity{20};
  // Split the table by label-delimited segment and reload it (SASALD) at each
  // segment that contains entries; consecutive segments are merged while they
  // fit the capacity. Without this, a single table is loaded at program start.
  bool refreshAtLabels{false};
};

struct AnnotateResult {
  Program program;                  // rewritten; unchanged if nothing to skip
  std::vector<SasaEntry> entries;   // final (post-insertion) PCs, all groups
  std::vector<AnnotatorWarning> warnings;
  int tableLoads{0};                // SASALD instructions inserted
};

AnnotateResult annotate(const Program& prog, const std::vector<SparseMarker>& markers,
                        const AnnotateOptions& opts = {});

}  // namespace sparce
