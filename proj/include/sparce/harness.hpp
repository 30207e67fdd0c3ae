#pragma once

#include <string>
#include <vector>

#include "sparce/annotator.hpp"
#include "sparce/pipeline.hpp"
#include "sparce/workloads.hpp"

namespace sparce {

struct ExperimentResult {
  KernelSpec spec;
  SparsityPattern pattern;
  Mode mode{Mode::Baseline};
  RunStats stats;
  bool verified{false};
  double speedup{1.0};             // cycles(baseline) / cycles(this mode)
  double instrFraction{1.0};       // executed / executed(baseline)
  uint64_t realizedZeros{0};
  double realizedSparsity{0.0};
};

struct ExperimentPair {
  ExperimentResult baseline;
  ExperimentResult sparce;
  AnnotateResult annotation;   // the annotated program both modes ran
  SimTrace sparceTrace;        // populated when ExperimentOptions::collectTraces
};

struct HarnessError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentOptions {
  bool collectTraces{false};
};

// Builds the kernel, annotates it, generates one input set, runs both modes
// on identical memory images, and verifies both live-outs against the golden
// reference bit-exactly. Throws HarnessError on any mismatch.
ExperimentPair run_experiment(const KernelSpec& spec, const SparsityPattern& pattern,
                              const SimConfig& cfg, const ExperimentOptions& opts = {});

struct CsvRow {
  std::string kernel;
  std::string pattern;
  double sparsity{0.0};       // realized zero fraction of the sparse operand
  std::string seed;           // seed number or "mean"
  std::string mode;
  double cycles{0};
  double fetched{0};
  double executed{0};
  double skipped{0};
  double squashed{0};
  double dcacheAcc{0};
  double dcacheMiss{0};
  double sasaHits{0};
  double speedup{1.0};
};

constexpr const char* kCsvHeader =
    "kernel,pattern,sparsity,seed,mode,cycles,fetched,executed,skipped,squashed,"
    "dcache_acc,dcache_miss,sasa_hits,speedup";

struct SweepOptions {
  std::vector<double> sparsities;     // target zero fractions, each in [0,1)
  std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
  std::string patternKind{"uniform"};  // pattern family the sweep varies
  int threads{0};                      // 0 = hardware_concurrency
};

// One row per (sparsity, seed, mode) plus per-sparsity mean rows, merged in
// deterministic (sparsity, seed) order regardless of completion order.
std::vector<CsvRow> sweep(const KernelSpec& spec, const SweepOptions& sw,
                          const SimConfig& cfg);

std::string rows_to_csv(const std::vector<CsvRow>& rows);

std::vector<double> parse_sparsity_range(const std::string& text);  // "0:0.9:0.1" or "0.1,0.5"

}  // namespace sparce
