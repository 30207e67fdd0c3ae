#include "sparce/workloads.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace sparce {

namespace {

constexpr uint64_t kSparseBase = 0x10000;
constexpr uint64_t kDenseBase = 0x80000;
constexpr uint64_t kOutBase = 0x100000;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) { parts.push_back(cur); cur.clear(); }
    else cur += c;
  }
  parts.push_back(cur);
  return parts;
}

struct AsmEmitter {
  std::ostringstream out;
  int pc{0};

  int emit(const std::string& line) {
    out << "  " << line << "\n";
    return pc++;
  }
  void label(const std::string& name) { out << ".label " << name << ":\n"; }
};

}  // namespace

// --- patterns ----------------------------------------------------------------

std::string SparsityPattern::to_string() const {
  std::ostringstream s_;
  switch (kind) {
    case Kind::Uniform: s_ << "uniform:" << s; break;
    case Kind::Block: s_ << "block:" << s << ":" << blockLen; break;
    case Kind::ReluLike: s_ << "relu:" << mean << ":" << stddev; break;
    case Kind::MaxPoolBackprop: s_ << "maxpool:" << p << ":" << q; break;
  }
  return s_.str();
}

SparsityPattern parse_pattern(const std::string& text, uint64_t seed) {
  auto parts = split(text, ':');
  SparsityPattern pat;
  pat.seed = seed;
  const std::string& kind = parts[0];
  try {
    if (kind == "uniform") {
      pat.kind = SparsityPattern::Kind::Uniform;
      pat.s = std::stod(parts.at(1));
    } else if (kind == "block") {
      pat.kind = SparsityPattern::Kind::Block;
      pat.s = std::stod(parts.at(1));
      if (parts.size() > 2) pat.blockLen = std::stoi(parts[2]);
    } else if (kind == "relu") {
      pat.kind = SparsityPattern::Kind::ReluLike;
      if (parts.size() > 1) pat.mean = std::stod(parts[1]);
      if (parts.size() > 2) pat.stddev = std::stod(parts[2]);
    } else if (kind == "maxpool") {
      pat.kind = SparsityPattern::Kind::MaxPoolBackprop;
      if (parts.size() > 1) pat.p = std::stoi(parts[1]);
      if (parts.size() > 2) pat.q = std::stoi(parts[2]);
    } else {
      throw std::runtime_error("unknown pattern kind: " + kind);
    }
  } catch (const std::out_of_range&) {
    throw std::runtime_error("malformed pattern: " + text);
  }
  if (pat.s < 0.0 || pat.s >= 1.0)
    if (pat.kind == SparsityPattern::Kind::Uniform || pat.kind == SparsityPattern::Kind::Block)
      throw std::runtime_error("sparsity must be in [0,1): " + text);
  return pat;
}

MatrixData gen_matrix(int rows, int cols, const SparsityPattern& pattern) {
  if (rows <= 0 || cols <= 0) throw std::runtime_error("matrix dims must be positive");
  MatrixData m;
  m.rows = rows;
  m.cols = cols;
  const size_t total = static_cast<size_t>(rows) * cols;
  m.values.assign(total, 0.0f);

  // Separate mask and value streams so the nonzero values are identical
  // across sparsity levels at the same seed. Uniform and Block zero an exact
  // count of positions chosen by a seeded shuffle: the zero set at a lower
  // sparsity is a prefix of the set at a higher one (nested masks in sweeps).
  std::mt19937_64 maskRng(pattern.seed);
  std::mt19937_64 valRng(pattern.seed ^ 0x9E3779B97F4A7C15ull);
  std::uniform_real_distribution<float> val(0.25f, 2.0f);

  switch (pattern.kind) {
    case SparsityPattern::Kind::Uniform: {
      std::vector<size_t> order(total);
      for (size_t i = 0; i < total; ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), maskRng);
      size_t nZero = static_cast<size_t>(std::llround(pattern.s * total));
      for (size_t i = 0; i < total; ++i) m.values[i] = val(valRng);
      for (size_t i = 0; i < nZero; ++i) m.values[order[i]] = 0.0f;
      break;
    }
    case SparsityPattern::Kind::Block: {
      if (pattern.blockLen <= 0) throw std::runtime_error("blockLen must be positive");
      size_t nBlocks = (total + pattern.blockLen - 1) / pattern.blockLen;
      std::vector<size_t> order(nBlocks);
      for (size_t b = 0; b < nBlocks; ++b) order[b] = b;
      std::shuffle(order.begin(), order.end(), maskRng);
      size_t nZero = static_cast<size_t>(std::llround(pattern.s * nBlocks));
      for (size_t i = 0; i < total; ++i) m.values[i] = val(valRng);
      for (size_t b = 0; b < nZero; ++b) {
        size_t start = order[b] * pattern.blockLen;
        for (size_t i = start; i < std::min(start + pattern.blockLen, total); ++i)
          m.values[i] = 0.0f;
      }
      break;
    }
    case SparsityPattern::Kind::ReluLike: {
      (void)val;
      std::normal_distribution<double> norm(pattern.mean, pattern.stddev);
      for (size_t i = 0; i < total; ++i) {
        double v = norm(maskRng);
        m.values[i] = v < 0.0 ? 0.0f : static_cast<float>(v);
      }
      break;
    }
    case SparsityPattern::Kind::MaxPoolBackprop: {
      if (rows % pattern.p != 0 || cols % pattern.q != 0)
        throw std::runtime_error("matrix dims must be divisible by the pooling window");
      std::uniform_int_distribution<int> pos(0, pattern.p * pattern.q - 1);
      for (int wy = 0; wy < rows / pattern.p; ++wy) {
        for (int wx = 0; wx < cols / pattern.q; ++wx) {
          int winner = pos(maskRng);
          float v = val(valRng);
          int ry = wy * pattern.p + winner / pattern.q;
          int cx = wx * pattern.q + winner % pattern.q;
          m.values[static_cast<size_t>(ry) * cols + cx] = v;
        }
      }
      break;
    }
  }
  for (float v : m.values)
    if (v == 0.0f) ++m.realizedZeros;
  return m;
}

MatrixData gen_dense(int rows, int cols, uint64_t seed) {
  MatrixData m;
  m.rows = rows;
  m.cols = cols;
  std::mt19937_64 rng(seed ^ 0xD1B54A32D192ED03ull);
  std::uniform_real_distribution<float> val(0.25f, 2.0f);
  m.values.resize(static_cast<size_t>(rows) * cols);
  for (auto& v : m.values) v = val(rng);
  m.realizedZeros = 0;
  return m;
}

// --- kernel specs --------------------------------------------------------------

std::string KernelSpec::to_string() const {
  std::ostringstream s;
  switch (kind) {
    case Kind::DotScalar: s << "dot:" << n; break;
    case Kind::ConvDirectScalar: s << "conv:" << h << "x" << w << "x" << k; break;
    case Kind::GemmSimd4:
      s << "gemm:" << gm << "x" << gn << "x" << gk
        << (shared == Shared::A ? ":sharedA" : "");
      break;
  }
  return s.str();
}

KernelSpec parse_kernel(const std::string& text) {
  auto parts = split(text, ':');
  KernelSpec spec;
  if (parts[0] == "dot") {
    spec.kind = KernelSpec::Kind::DotScalar;
    spec.n = std::stoi(parts.at(1));
  } else if (parts[0] == "conv") {
    spec.kind = KernelSpec::Kind::ConvDirectScalar;
    auto dims = split(parts.at(1), 'x');
    spec.h = std::stoi(dims.at(0));
    spec.w = std::stoi(dims.at(1));
    spec.k = std::stoi(dims.at(2));
  } else if (parts[0] == "gemm") {
    spec.kind = KernelSpec::Kind::GemmSimd4;
    auto dims = split(parts.at(1), 'x');
    spec.gm = std::stoi(dims.at(0));
    spec.gn = std::stoi(dims.at(1));
    spec.gk = std::stoi(dims.at(2));
    if (parts.size() > 2) {
      if (parts[2] == "sharedA") spec.shared = KernelSpec::Shared::A;
      else if (parts[2] == "sharedB") spec.shared = KernelSpec::Shared::B;
      else throw std::runtime_error("unknown gemm option: " + parts[2]);
    }
  } else {
    throw std::runtime_error("unknown kernel kind: " + parts[0]);
  }
  return spec;
}

// --- kernel generators ----------------------------------------------------------

namespace {

// Two elements per iteration; the loads and multiply-add pairs of the two
// lanes are interleaved so every skippable run sits behind its own
// non-skippable anchor, at least 4 instructions after the load that feeds
// its condition.
KernelBuild build_dot(const KernelSpec& spec) {
  if (spec.n <= 0 || spec.n % 2) throw std::runtime_error("dot length must be even");
  AsmEmitter e;
  KernelBuild b;
  b.sparseBase = kSparseBase;
  b.denseBase = kDenseBase;
  b.outBase = kOutBase;
  b.outCount = 1;

  auto mark = [&](int pc) {
    b.markers.push_back({pc, SparseMarker::Granularity::FullRegister});
  };

  e.emit("MOV r4, #" + std::to_string(kSparseBase));
  e.emit("MOV r5, #" + std::to_string(kDenseBase));
  e.emit("MOV r6, #" + std::to_string(kOutBase));
  e.emit("MOV r7, #" + std::to_string(spec.n / 2));
  e.emit("MOV f2, #0.0");
  e.label("loop");
  mark(e.emit("LD f0, [r4]"));
  mark(e.emit("LD f4, [r4, #4]"));
  e.emit("SUBS r7, r7, #1");
  e.emit("ADD r4, r4, #8");
  e.emit("ADD r5, r5, #8");
  mark(e.emit("LD f1, [r5, #-8]"));
  e.emit("PRFM [r4, #56]");
  mark(e.emit("LD f5, [r5, #-4]"));
  e.emit("PRFM [r5, #56]");
  e.emit("FMUL f3, f0, f1");
  e.emit("FADD f2, f2, f3");
  e.emit("PRFM [r4, #120]");
  e.emit("FMUL f6, f4, f5");
  e.emit("FADD f2, f2, f6");
  e.emit("BNE loop");
  e.emit("ST f2, [r6]");
  e.emit("HALT");

  b.program = parse_program(e.out.str());
  return b;
}

// Direct convolution with the tap loop fully unrolled: each kernel row is a
// straight-line run of K seed loads, K kernel loads and K multiply-add
// pairs, each skippable group behind its own anchor.
KernelBuild build_conv(const KernelSpec& spec) {
  if (spec.k <= 0 || spec.h < spec.k || spec.w < spec.k)
    throw std::runtime_error("conv needs h,w >= k > 0");
  if (spec.k > 8) throw std::runtime_error("conv tap count limited to 8 per row");
  const int oh = spec.h - spec.k + 1, ow = spec.w - spec.k + 1;
  const int K = spec.k;
  AsmEmitter e;
  KernelBuild b;
  b.sparseBase = kSparseBase;
  b.denseBase = kDenseBase;
  b.outBase = kOutBase;
  b.outCount = static_cast<size_t>(oh) * ow;

  auto mark = [&](int pc) {
    b.markers.push_back({pc, SparseMarker::Granularity::FullRegister});
  };
  auto seedReg = [](int kx) { return "f" + std::to_string(10 + kx); };
  auto kerReg = [](int kx) { return "f" + std::to_string(20 + kx); };

  e.emit("MOV r12, #" + std::to_string(kSparseBase));  // window base
  e.emit("MOV r14, #" + std::to_string(kOutBase));
  e.emit("MOV r4, #" + std::to_string(oh));
  e.label("yloop");
  e.emit("MOV r5, #" + std::to_string(ow));
  e.label("xloop");
  e.emit("MOV f2, #0.0");
  e.emit("MOV r10, r12");
  e.emit("MOV r11, #" + std::to_string(kDenseBase));
  e.emit("MOV r7, #" + std::to_string(K));
  e.label("kyloop");
  for (int kx = 0; kx < K; ++kx)
    mark(e.emit("LD " + seedReg(kx) + ", [r10, #" + std::to_string(4 * kx) + "]"));
  e.emit("SUBS r7, r7, #1");
  e.emit("ADD r10, r10, #" + std::to_string(spec.w * 4));  // anchors the first load
  for (int kx = 0; kx < K; ++kx) {
    mark(e.emit("LD " + kerReg(kx) + ", [r11, #" + std::to_string(4 * kx) + "]"));
    if (kx + 1 < K)
      e.emit("PRFM [r10, #" + std::to_string(64 * (kx % 2)) + "]");
  }
  e.emit("ADD r11, r11, #" + std::to_string(K * 4));  // anchors the first pair
  for (int kx = 0; kx < K; ++kx) {
    e.emit("FMUL f3, " + seedReg(kx) + ", " + kerReg(kx));
    e.emit("FADD f2, f2, f3");
    if (kx + 1 < K)
      e.emit("PRFM [" + std::string(kx % 2 ? "r11" : "r10") + ", #" +
             std::to_string(64 + 32 * kx) + "]");
  }
  e.emit("BNE kyloop");
  e.emit("ST f2, [r14]");
  e.emit("ADD r14, r14, #4");
  e.emit("ADD r12, r12, #4");
  e.emit("SUBS r5, r5, #1");
  e.emit("BNE xloop");
  e.emit("ADD r12, r12, #" + std::to_string((spec.k - 1) * 4));
  e.emit("SUBS r4, r4, #1");
  e.emit("BNE yloop");
  e.emit("HALT");

  b.program = parse_program(e.out.str());
  return b;
}

// C[4m x 16n] register tile: broadcast operand in v8/v12 (one word per
// tile row), the 16 columns ride four 4-lane chunk registers. Two
// subroutines alternate per k so each can load the other's next operands.
KernelBuild build_gemm(const KernelSpec& spec) {
  const bool sharedB = spec.shared == KernelSpec::Shared::B;
  const int M = spec.gm, N = spec.gn, K = spec.gk;
  const int mTile = sharedB ? 4 : 16;
  const int nTile = sharedB ? 16 : 4;
  if (M % mTile || N % nTile || K % 2 || K < 2)
    throw std::runtime_error("gemm dims must tile: M%" + std::to_string(mTile) + ", N%" +
                             std::to_string(nTile) + ", K even");

  AsmEmitter e;
  KernelBuild b;
  b.sparseBase = kSparseBase;
  b.denseBase = kDenseBase;
  b.outBase = kOutBase;
  b.outCount = static_cast<size_t>(M) * N;
  b.outColMajor = !sharedB;

  auto vld_marker = [&](const std::string& line) {
    int pc = e.emit(line);
    b.markers.push_back({pc, sharedB ? SparseMarker::Granularity::PerLane
                                     : SparseMarker::Granularity::FullRegister});
  };

  // one subroutine body: current broadcast reg + current chunk regs, loads
  // the other pair for the next k
  auto subroutine = [&](bool isM1) {
    const char* curB = isM1 ? "v8" : "v12";          // broadcast register in use
    const char* nextB = isM1 ? "v12" : "v8";
    const int curChunk0 = isM1 ? 0 : 1;              // v0/v2/v4/v6 vs v1/v3/v5/v7
    const int nextChunk0 = isM1 ? 1 : 0;
    if (sharedB) {
      // broadcast = B (r10), chunks = A (r11)
      vld_marker(std::string("VLD ") + nextB + ", [r10]");
      e.emit("PRFM [r10, #64]");
      e.emit("PRFM [r11, #64]");
      for (int j = 0; j < 4; ++j) {
        int acc = 16 + 4 * j;
        auto fmla = [&](int c) {
          e.emit("VFMLA v" + std::to_string(acc + c) + ", v" +
                 std::to_string(curChunk0 + 2 * c) + ", " + curB + ".s[" +
                 std::to_string(j) + "]");
        };
        fmla(0);
        fmla(1);
        e.emit("VLD v" + std::to_string(nextChunk0 + 2 * j) + ", [r11, #" +
               std::to_string(16 * j) + "]");
        fmla(2);
        fmla(3);
      }
      e.emit("ADD r10, r10, #16");
      e.emit("ADD r11, r11, #" + std::to_string(N * 4));
    } else {
      // broadcast = A (r11), chunks = B (r10, sparse)
      e.emit(std::string("VLD ") + nextB + ", [r11]");
      e.emit("PRFM [r11, #64]");
      e.emit("PRFM [r10, #64]");
      for (int mc = 0; mc < 4; ++mc) {
        vld_marker("VLD v" + std::to_string(nextChunk0 + 2 * mc) + ", [r10, #" +
                   std::to_string(16 * mc) + "]");
        for (int j = 0; j < 4; ++j)
          e.emit("VFMLA v" + std::to_string(16 + 4 * mc + j) + ", v" +
                 std::to_string(curChunk0 + 2 * mc) + ", " + curB + ".s[" +
                 std::to_string(j) + "]");
      }
      e.emit("ADD r10, r10, #64");
      e.emit("ADD r11, r11, #" + std::to_string(N * 4));
    }
  };

  for (int mt = 0; mt < M / mTile; ++mt) {
    for (int nt = 0; nt < N / nTile; ++nt) {
      std::string tile = "t" + std::to_string(mt) + "_" + std::to_string(nt);
      for (int a = 16; a < 32; ++a) e.emit("MOV v" + std::to_string(a) + ", #0.0");
      uint64_t pB = kSparseBase + static_cast<uint64_t>(mt) * K * mTile * 4;
      uint64_t pA = kDenseBase + static_cast<uint64_t>(nt) * nTile * 4;
      e.emit("MOV r10, #" + std::to_string(sharedB ? pB : pB));
      e.emit("MOV r11, #" + std::to_string(pA));
      e.emit("MOV r9, #" + std::to_string(K / 2));
      // preload k = 0
      if (sharedB) {
        vld_marker("VLD v8, [r10]");
        for (int c = 0; c < 4; ++c)
          e.emit("VLD v" + std::to_string(2 * c) + ", [r11, #" + std::to_string(16 * c) + "]");
        e.emit("ADD r10, r10, #16");
      } else {
        e.emit("VLD v8, [r11]");
        for (int c = 0; c < 4; ++c)
          vld_marker("VLD v" + std::to_string(2 * c) + ", [r10, #" +
                     std::to_string(16 * c) + "]");
        e.emit("ADD r10, r10, #64");
      }
      e.emit("ADD r11, r11, #" + std::to_string(N * 4));

      std::string m1 = tile + "_m1", m2 = tile + "_m2";
      if (mt == 0 && nt == 0) { b.m1Label = m1; b.m2Label = m2; }
      e.label(m1);
      subroutine(true);
      e.label(m2);
      subroutine(false);
      e.emit("SUBS r9, r9, #1");
      e.emit("BNE " + m1);

      // store the C tile
      if (sharedB) {
        uint64_t c0 = kOutBase + (static_cast<uint64_t>(mt) * 4 * N + nt * 16ull) * 4;
        e.emit("MOV r12, #" + std::to_string(c0));
        for (int j = 0; j < 4; ++j) {
          for (int c = 0; c < 4; ++c)
            e.emit("VST v" + std::to_string(16 + 4 * j + c) + ", [r12, #" +
                   std::to_string(16 * c) + "]");
          e.emit("ADD r12, r12, #" + std::to_string(N * 4));
        }
      } else {
        // column-major C: each accumulator column is contiguous
        uint64_t c0 = kOutBase + (static_cast<uint64_t>(nt) * 4 * M + mt * 16ull) * 4;
        e.emit("MOV r12, #" + std::to_string(c0));
        for (int j = 0; j < 4; ++j) {
          for (int mc = 0; mc < 4; ++mc)
            e.emit("VST v" + std::to_string(16 + 4 * mc + j) + ", [r12, #" +
                   std::to_string(16 * mc) + "]");
          e.emit("ADD r12, r12, #" + std::to_string(M * 4));
        }
      }
    }
  }
  e.emit("HALT");
  b.program = parse_program(e.out.str());
  return b;
}

}  // namespace

KernelBuild build_kernel(const KernelSpec& spec) {
  switch (spec.kind) {
    case KernelSpec::Kind::DotScalar: return build_dot(spec);
    case KernelSpec::Kind::ConvDirectScalar: return build_conv(spec);
    case KernelSpec::Kind::GemmSimd4: return build_gemm(spec);
  }
  throw std::runtime_error("unknown kernel kind");
}

KernelInputs gen_inputs(const KernelSpec& spec, const SparsityPattern& pattern) {
  KernelInputs in;
  switch (spec.kind) {
    case KernelSpec::Kind::DotScalar:
      if (pattern.kind == SparsityPattern::Kind::MaxPoolBackprop) {
        // a vector has no pooling geometry; shape it as p rows so windows tile
        if (spec.n % pattern.p != 0)
          throw std::runtime_error("dot length not divisible by pooling rows");
        in.sparse = gen_matrix(pattern.p, spec.n / pattern.p, pattern);
      } else {
        in.sparse = gen_matrix(1, spec.n, pattern);
      }
      in.dense = gen_dense(1, spec.n, pattern.seed);
      break;
    case KernelSpec::Kind::ConvDirectScalar:
      in.sparse = gen_matrix(spec.h, spec.w, pattern);
      in.dense = gen_dense(spec.k, spec.k, pattern.seed);
      break;
    case KernelSpec::Kind::GemmSimd4:
      in.sparse = gen_matrix(spec.gm, spec.gk, pattern);  // B
      in.dense = gen_dense(spec.gk, spec.gn, pattern.seed);  // A
      break;
  }
  return in;
}

void write_memory_image(const KernelSpec& spec, const KernelBuild& build,
                        const KernelInputs& inputs, MachineState& state) {
  auto write_row_major = [&](uint64_t base, const MatrixData& m) {
    for (size_t i = 0; i < m.values.size(); ++i)
      state.memory.write_f32(base + 4 * i, m.values[i]);
  };
  if (spec.kind != KernelSpec::Kind::GemmSimd4) {
    write_row_major(build.sparseBase, inputs.sparse);
    write_row_major(build.denseBase, inputs.dense);
    return;
  }
  // B is packed by register tile: tile-major, then k, then the tile's rows
  const int mTile = spec.shared == KernelSpec::Shared::B ? 4 : 16;
  const MatrixData& B = inputs.sparse;
  const int K = spec.gk;
  for (int mt = 0; mt < B.rows / mTile; ++mt)
    for (int k = 0; k < K; ++k)
      for (int mm = 0; mm < mTile; ++mm) {
        uint64_t addr =
            build.sparseBase +
            ((static_cast<uint64_t>(mt) * K + k) * mTile + mm) * 4;
        state.memory.write_f32(addr, B.at(mt * mTile + mm, k));
      }
  write_row_major(build.denseBase, inputs.dense);
}

std::vector<float> golden(const KernelSpec& spec, const KernelInputs& inputs) {
  switch (spec.kind) {
    case KernelSpec::Kind::DotScalar: {
      float acc = 0.0f;
      for (int i = 0; i < spec.n; ++i) {
        float prod = inputs.sparse.values[i] * inputs.dense.values[i];
        acc = acc + prod;
      }
      return {acc};
    }
    case KernelSpec::Kind::ConvDirectScalar: {
      const int oh = spec.h - spec.k + 1, ow = spec.w - spec.k + 1;
      std::vector<float> out(static_cast<size_t>(oh) * ow);
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          float acc = 0.0f;
          for (int ky = 0; ky < spec.k; ++ky)
            for (int kx = 0; kx < spec.k; ++kx) {
              float prod = inputs.sparse.at(y + ky, x + kx) * inputs.dense.at(ky, kx);
              acc = acc + prod;
            }
          out[static_cast<size_t>(y) * ow + x] = acc;
        }
      return out;
    }
    case KernelSpec::Kind::GemmSimd4: {
      const int M = spec.gm, N = spec.gn, K = spec.gk;
      std::vector<float> out(static_cast<size_t>(M) * N);
      for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
          float acc = 0.0f;
          for (int k = 0; k < K; ++k)
            acc = std::fmaf(inputs.dense.at(k, n), inputs.sparse.at(m, k), acc);
          size_t idx = (spec.shared == KernelSpec::Shared::B)
                           ? static_cast<size_t>(m) * N + n
                           : static_cast<size_t>(n) * M + m;
          out[idx] = acc;
        }
      return out;
    }
  }
  throw std::runtime_error("unknown kernel kind");
}

std::vector<float> read_liveout(const KernelBuild& build, const MachineState& state) {
  std::vector<float> out(build.outCount);
  for (size_t i = 0; i < build.outCount; ++i)
    out[i] = state.memory.read_f32(build.outBase + 4 * i);
  return out;
}

}  // namespace sparce
