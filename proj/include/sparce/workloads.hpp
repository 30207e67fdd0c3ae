#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparce/annotator.hpp"
#include "sparce/isa.hpp"
#include "sparce/machine.hpp"

namespace sparce {

// ---------------------------------------------------------------------------
// Kernel generators, sparse input generators, and golden (order-matched)
// reference evaluators.
// ---------------------------------------------------------------------------

struct SparsityPattern {
  enum class Kind { Uniform, Block, ReluLike, MaxPoolBackprop };
  Kind kind{Kind::Uniform};
  double s{0.0};          // Uniform / Block target zero fraction
  int blockLen{4};        // Block: zeros come in runs of this length
  double mean{0.0};       // ReluLike: N(mean, stddev) with negatives clipped to 0
  double stddev{1.0};
  int p{2}, q{2};         // MaxPoolBackprop: one nonzero per p x q window
  uint64_t seed{0};

  std::string to_string() const;
};

// "uniform:0.5", "block:0.5:8", "relu:0.0:1.0", "maxpool:2:2"
SparsityPattern parse_pattern(const std::string& text, uint64_t seed);

struct MatrixData {
  int rows{0}, cols{0};
  std::vector<float> values;  // row-major
  uint64_t realizedZeros{0};

  float at(int r, int c) const { return values[static_cast<size_t>(r) * cols + c]; }
  double zero_fraction() const {
    return values.empty() ? 0.0 : static_cast<double>(realizedZeros) / values.size();
  }
};

// Deterministic for a fixed seed. For Uniform and Block patterns the zero
// masks nest across sparsity levels at the same seed: every element zero at
// s1 is also zero at any s2 > s1.
MatrixData gen_matrix(int rows, int cols, const SparsityPattern& pattern);
// All-nonzero values in [0.25, 2.0).
MatrixData gen_dense(int rows, int cols, uint64_t seed);

struct KernelSpec {
  enum class Kind { DotScalar, ConvDirectScalar, GemmSimd4 };
  enum class Shared { B, A };  // which operand is broadcast across SIMD lanes

  Kind kind{Kind::DotScalar};
  int n{64};            // DotScalar length
  int h{8}, w{8}, k{3};  // ConvDirectScalar: h x w input, k x k kernel
  int gm{16}, gn{16}, gk{16};  // GemmSimd4: C[gm x gn] += B[gm x gk] * A[gk x gn]
  Shared shared{Shared::B};

  std::string to_string() const;
};

// "dot:1024", "conv:8x8x3", "gemm:16x32x32"
KernelSpec parse_kernel(const std::string& text);

struct KernelBuild {
  Program program;                    // unannotated
  std::vector<SparseMarker> markers;  // loads of the sparse data structure
  uint64_t sparseBase{0};             // INP / B image
  uint64_t denseBase{0};              // KER / A image
  uint64_t outBase{0};
  size_t outCount{0};                 // live-out f32 element count
  bool outColMajor{false};            // GemmSimd4 shared=A stores C column-major
  std::string m1Label, m2Label;       // GemmSimd4: first tile's subroutine labels
};

KernelBuild build_kernel(const KernelSpec& spec);

struct KernelInputs {
  MatrixData sparse;  // INP (dot/conv) or B (gemm); the pattern applies here
  MatrixData dense;   // KER (dot/conv) or A (gemm)
};

KernelInputs gen_inputs(const KernelSpec& spec, const SparsityPattern& pattern);

// Writes both operand images into memory in the layout the kernel expects
// (GEMM packs B by register tile).
void write_memory_image(const KernelSpec& spec, const KernelBuild& build,
                        const KernelInputs& inputs, MachineState& state);

// Order-matched reference: same accumulation order and same fused/unfused
// rounding as the kernel, so live-out comparison is bit-exact.
std::vector<float> golden(const KernelSpec& spec, const KernelInputs& inputs);

std::vector<float> read_liveout(const KernelBuild& build, const MachineState& state);

}  // namespace sparce
