#pragma once

#include <map>
#include <optional>
#include <vector>

#include "sparce/isa.hpp"
#include "sparce/machine.hpp"

namespace sparce {

// ---------------------------------------------------------------------------
// Zero-skipping core extensions.
//
// SpRF  — sparsity register file: per register, a lane mask of which words
//         currently hold zero (isSparse) and a count of in-flight writers
//         (regUpdInFlight). The writer count is maintained from decode entry
//         to commit; a condition over a register with any writer in flight
//         cannot be evaluated.
// SVC   — sparse value checker: at writeback, compares each committed
//         register write against zero and refreshes the SpRF entry.
// SASA  — skip-address table: maps the PC *preceding* a redundant sequence
//         to a condition over at most two SpRF terms and the sequence
//         length. Loaded from memory by the SASALD instruction.
// PSRU  — fetch-stage unit: on every fetch, looks the PC up in the SASA
//         table and either redirects fetch past the redundant sequence,
//         opens a pending skippable region (writer in flight), or does
//         nothing. PCs inside a pending region are re-evaluated; a region
//         that resolves true squashes its in-flight instructions.
// ---------------------------------------------------------------------------

struct SprfEntry {
  uint8_t isSparse{0};      // bit k <-> word k is zero; scalars use bit 0
  int regUpdInFlight{0};    // writer count, not a flag: overlapping writers nest
};

class Sprf {
 public:
  SprfEntry& entry(const RegRef& r) { return entries_[r.key()]; }
  const SprfEntry& entry(const RegRef& r) const { return entries_[r.key()]; }
  bool in_flight(const RegRef& r) const { return entries_[r.key()].regUpdInFlight > 0; }

 private:
  std::array<SprfEntry, 3 * kRegsPerFile> entries_{};
};

// Lane mask of zero words in a committed register value. FP +-0.0 both count.
uint8_t svc_check(const Value& value, RegFile file);

// Decode marks the destination in flight; commit resolves it through the SVC.
void mark_inflight(Sprf& sprf, const RegRef& reg);
void unmark_inflight(Sprf& sprf, const RegRef& reg);  // squash path
// Throws std::logic_error if no writer was marked in flight.
void svc_commit(Sprf& sprf, const RegRef& reg, const Value& value);

enum class Tri { False, True, Unknown };

// Unknown iff any referenced register has a writer in flight (strictly: even
// when one committed OR-term is already true). Otherwise a term is true iff
// all masked lanes are sparse, combined by SINGLE/OR/AND.
Tri eval_condition(const SkipCondition& cond, const Sprf& sprf);

class SasaTable {
 public:
  explicit SasaTable(int capacity = 20) : capacity_(capacity) {}

  int capacity() const { return capacity_; }
  size_t size() const { return byPc_.size(); }
  const SasaEntry* lookup(int pc) const;
  const std::map<int, SasaEntry>& entries() const { return byPc_; }

  // Replaces the whole table. Throws std::runtime_error when count exceeds
  // capacity, an entry is malformed, or (if programLength >= 0) an entry
  // range exceeds the program.
  void load(const Memory& memory, uint64_t baseAddr, int sizeEntries,
            int programLength = -1);
  void load_entries(const std::vector<SasaEntry>& entries, int programLength = -1);

 private:
  int capacity_;
  std::map<int, SasaEntry> byPc_;
};

struct SkippableRegion {
  int id{0};
  int startPC{0};
  int endPC{0};
  SkipCondition condition{};
  enum class Status { Pending, ResolvedSkip, ResolvedExecute } status{Status::Pending};
};

struct PsruDecision {
  enum class Action { Normal, Skip, EnterPending, ResolveSkip, ResolveExecute };
  Action action{Action::Normal};
  int nextFetchPC{0};
  std::optional<SkippableRegion> region;  // Skip/EnterPending: the new region;
                                          // Resolve*: the resolved one
  bool sasaHit{false};
};

// One decision per fetch, keyed by the PC of the instruction entering fetch.
// (a) pc hits the table and the condition is true: skip, next = pc+1+len.
// (b) hit, condition unknown: open a pending region, next = pc+1.
// (c) hit, condition false: normal.
// (d) miss but pc inside the pending region: re-evaluate; true resolves the
//     region to skip (next = endPC+1), false resolves it to execute.
// (e) plain miss: normal.
PsruDecision psru_decide(int pc, const SasaTable& table, const Sprf& sprf,
                         const std::optional<SkippableRegion>& pending,
                         int nextRegionId);

}  // namespace sparce
