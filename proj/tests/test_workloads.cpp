#include <cmath>
#include <cstring>
#include <set>

#include "doctest.h"
#include "sparce/pipeline.hpp"
#include "sparce/workloads.hpp"

using namespace sparce;

TEST_CASE("uniform sparsity realizes the requested zero count") {
  SparsityPattern dense = parse_pattern("uniform:0.0", 1);
  MatrixData m0 = gen_matrix(10, 10, dense);
  CHECK(m0.realizedZeros == 0);

  SparsityPattern p = parse_pattern("uniform:0.9", 123);
  MatrixData m = gen_matrix(100, 100, p);
  CHECK(m.zero_fraction() >= 0.87);
  CHECK(m.zero_fraction() <= 0.93);
  uint64_t count = 0;
  for (float v : m.values)
    if (v == 0.0f) ++count;
  CHECK(count == m.realizedZeros);
}

TEST_CASE("uniform masks nest across sparsity levels") {
  for (uint64_t seed : {1ull, 7ull, 42ull}) {
    MatrixData lo = gen_matrix(20, 20, parse_pattern("uniform:0.3", seed));
    MatrixData hi = gen_matrix(20, 20, parse_pattern("uniform:0.7", seed));
    for (size_t i = 0; i < lo.values.size(); ++i) {
      if (lo.values[i] == 0.0f) CHECK(hi.values[i] == 0.0f);
      if (hi.values[i] != 0.0f) CHECK(lo.values[i] == hi.values[i]);
    }
  }
}

TEST_CASE("block sparsity zeroes whole runs") {
  SparsityPattern p = parse_pattern("block:0.5:8", 3);
  MatrixData m = gen_matrix(16, 16, p);
  CHECK(m.realizedZeros % 8 == 0);
  for (size_t b = 0; b < m.values.size() / 8; ++b) {
    bool anyZero = false, allZero = true;
    for (size_t i = b * 8; i < (b + 1) * 8; ++i) {
      if (m.values[i] == 0.0f) anyZero = true;
      else allZero = false;
    }
    if (anyZero) CHECK(allZero);
  }
}

TEST_CASE("relu-like clipping produces roughly half zeros at zero mean") {
  MatrixData m = gen_matrix(64, 64, parse_pattern("relu:0.0:1.0", 5));
  CHECK(m.zero_fraction() > 0.4);
  CHECK(m.zero_fraction() < 0.6);
  for (float v : m.values) CHECK(v >= 0.0f);
}

TEST_CASE("max-pool backprop leaves exactly one nonzero per window") {
  MatrixData m = gen_matrix(4, 4, parse_pattern("maxpool:2:2", 9));
  CHECK(m.realizedZeros == 12);  // 4 windows, one survivor each
  for (int wy = 0; wy < 2; ++wy)
    for (int wx = 0; wx < 2; ++wx) {
      int nonzero = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx)
          if (m.at(wy * 2 + dy, wx * 2 + dx) != 0.0f) ++nonzero;
      CHECK(nonzero == 1);
    }
  CHECK_THROWS(gen_matrix(3, 4, parse_pattern("maxpool:2:2", 9)));
}

TEST_CASE("golden gemm agrees with an independent triple loop") {
  KernelSpec spec = parse_kernel("gemm:16x16x4");
  KernelInputs in = gen_inputs(spec, parse_pattern("uniform:0.3", 11));
  std::vector<float> g = golden(spec, in);
  for (int m = 0; m < spec.gm; ++m)
    for (int n = 0; n < spec.gn; ++n) {
      double acc = 0.0;
      for (int k = 0; k < spec.gk; ++k)
        acc += static_cast<double>(in.sparse.at(m, k)) * in.dense.at(k, n);
      double got = g[static_cast<size_t>(m) * spec.gn + n];
      CHECK(std::abs(got - acc) <= 1e-5 * (1.0 + std::abs(acc)));
    }
}

TEST_CASE("golden dot of an all-zero input is positive zero") {
  KernelSpec spec = parse_kernel("dot:32");
  KernelInputs in = gen_inputs(spec, parse_pattern("uniform:0.0", 2));
  for (auto& v : in.sparse.values) v = 0.0f;
  std::vector<float> g = golden(spec, in);
  REQUIRE(g.size() == 1);
  CHECK(g[0] == 0.0f);
  CHECK_FALSE(std::signbit(g[0]));
}

TEST_CASE("golden conv with an identity kernel reproduces the input") {
  KernelSpec spec = parse_kernel("conv:5x5x1");
  KernelInputs in;
  in.sparse = gen_matrix(5, 5, parse_pattern("uniform:0.4", 17));
  in.dense = MatrixData{1, 1, {1.0f}, 0};
  std::vector<float> g = golden(spec, in);
  REQUIRE(g.size() == in.sparse.values.size());
  for (size_t i = 0; i < g.size(); ++i) CHECK(g[i] == in.sparse.values[i]);
}

TEST_CASE("baseline simulation reproduces the golden values bit-exactly") {
  struct Case {
    const char* kernel;
    const char* pattern;
  };
  for (const Case& c : {Case{"dot:48", "uniform:0.5"}, Case{"conv:6x6x3", "relu:0.0:1.0"},
                        Case{"gemm:16x16x4", "uniform:0.4"},
                        Case{"gemm:16x16x4:sharedA", "uniform:0.4"}}) {
    KernelSpec spec = parse_kernel(c.kernel);
    KernelBuild build = build_kernel(spec);
    REQUIRE(validate(build.program).empty());
    KernelInputs in = gen_inputs(spec, parse_pattern(c.pattern, 23));
    std::vector<float> expect = golden(spec, in);

    MachineState init;
    write_memory_image(spec, build, in, init);
    // two independent routes: the cycle-level pipeline and the pure
    // functional interpreter must both land on the golden bits
    SimResult sim = simulate(build.program, init, SimConfig{}, Mode::Baseline);
    MachineState fun = run_functional(build.program, init);
    std::vector<float> pipeOut = read_liveout(build, sim.final);
    std::vector<float> funOut = read_liveout(build, fun);
    REQUIRE(pipeOut.size() == expect.size());
    CHECK(std::memcmp(pipeOut.data(), expect.data(), expect.size() * 4) == 0);
    CHECK(std::memcmp(funOut.data(), expect.data(), expect.size() * 4) == 0);
  }
}

TEST_CASE("kernel and pattern specs round-trip through their names") {
  for (const char* k : {"dot:1024", "conv:8x8x3", "gemm:16x32x64", "gemm:16x32x64:sharedA"})
    CHECK(parse_kernel(k).to_string() == k);
  CHECK(parse_pattern("uniform:0.5", 1).to_string() == "uniform:0.5");
  CHECK(parse_pattern("maxpool:2:2", 1).to_string() == "maxpool:2:2");
  CHECK_THROWS(parse_kernel("fft:64"));
  CHECK_THROWS(parse_pattern("uniform:1.5", 1));
  CHECK_THROWS(build_kernel(parse_kernel("gemm:7x16x4")));  // tiling violation
}
