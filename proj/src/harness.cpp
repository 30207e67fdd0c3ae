#include "sparce/harness.hpp"

#include <cmath>
#include <cstring>
#include <future>
#include <sstream>

namespace sparce {

namespace {

std::vector<SasaEntry> annotate_for(const KernelSpec& spec, const KernelBuild& build,
                                    const SimConfig& cfg, AnnotateResult& out) {
  AnnotateOptions opts;
  opts.capacity = cfg.sasa_capacity;
  // multi-tile GEMM carries more regions than the table holds at once; the
  // table is reloaded per label segment as execution moves through tiles
  opts.refreshAtLabels = spec.kind == KernelSpec::Kind::GemmSimd4;
  out = annotate(build.program, build.markers, opts);
  return out.entries;
}

bool bits_equal(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

ExperimentPair run_experiment(const KernelSpec& spec, const SparsityPattern& pattern,
                              const SimConfig& cfg, const ExperimentOptions& opts) {
  KernelBuild build = build_kernel(spec);
  ExperimentPair pair;
  annotate_for(spec, build, cfg, pair.annotation);

  KernelInputs inputs = gen_inputs(spec, pattern);
  std::vector<float> expect = golden(spec, inputs);

  MachineState init;
  write_memory_image(spec, build, inputs, init);

  SimConfig runCfg = cfg;
  runCfg.collect_traces = opts.collectTraces;

  SimResult base = simulate(pair.annotation.program, init, runCfg, Mode::Baseline);
  SimResult sprc = simulate(pair.annotation.program, init, runCfg, Mode::Sparce);

  std::vector<float> baseOut = read_liveout(build, base.final);
  std::vector<float> sprcOut = read_liveout(build, sprc.final);
  auto mismatch_at = [&](const std::vector<float>& got) -> std::string {
    for (size_t i = 0; i < expect.size(); ++i)
      if (std::memcmp(&expect[i], &got[i], 4) != 0) {
        std::ostringstream msg;
        msg << "address 0x" << std::hex << (build.outBase + 4 * i) << std::dec
            << " (element " << i << "): expected " << expect[i] << ", got " << got[i];
        return msg.str();
      }
    return "size mismatch";
  };
  if (!bits_equal(baseOut, expect))
    throw HarnessError("baseline run diverges from golden at " + mismatch_at(baseOut));
  if (!bits_equal(sprcOut, expect))
    throw HarnessError("sparce run diverges from golden at " + mismatch_at(sprcOut));
  if (sprc.stats.cycles > base.stats.cycles)
    throw HarnessError("skipping slowed the pipeline: " + std::to_string(sprc.stats.cycles) +
                       " > " + std::to_string(base.stats.cycles) + " cycles");

  auto fill = [&](ExperimentResult& r, const SimResult& sim, Mode mode) {
    r.spec = spec;
    r.pattern = pattern;
    r.mode = mode;
    r.stats = sim.stats;
    r.verified = true;
    r.realizedZeros = inputs.sparse.realizedZeros;
    r.realizedSparsity = inputs.sparse.zero_fraction();
    r.speedup = static_cast<double>(base.stats.cycles) / sim.stats.cycles;
    r.instrFraction = static_cast<double>(sim.stats.executed) / base.stats.executed;
  };
  fill(pair.baseline, base, Mode::Baseline);
  fill(pair.sparce, sprc, Mode::Sparce);
  if (opts.collectTraces) pair.sparceTrace = std::move(sprc.trace);
  return pair;
}

std::vector<CsvRow> sweep(const KernelSpec& spec, const SweepOptions& sw,
                          const SimConfig& cfg) {
  struct Point {
    double sparsity;
    uint64_t seed;
  };
  std::vector<Point> points;
  for (double s : sw.sparsities)
    for (uint64_t seed : sw.seeds) points.push_back({s, seed});

  auto run_point = [&](const Point& p) {
    std::ostringstream pat;
    pat << sw.patternKind << ":" << p.sparsity;
    SparsityPattern pattern = parse_pattern(pat.str(), p.seed);
    return run_experiment(spec, pattern, cfg);
  };

  // points are independent; run them on a small pool and merge in order
  std::vector<ExperimentPair> results(points.size());
  size_t nThreads = sw.threads > 0 ? static_cast<size_t>(sw.threads)
                                   : std::max(1u, std::thread::hardware_concurrency());
  nThreads = std::min(nThreads, points.size());
  if (nThreads <= 1) {
    for (size_t i = 0; i < points.size(); ++i) results[i] = run_point(points[i]);
  } else {
    std::atomic<size_t> nextIdx{0};
    std::vector<std::future<void>> workers;
    for (size_t t = 0; t < nThreads; ++t)
      workers.push_back(std::async(std::launch::async, [&] {
        for (size_t i = nextIdx.fetch_add(1); i < points.size(); i = nextIdx.fetch_add(1))
          results[i] = run_point(points[i]);
      }));
    for (auto& w : workers) w.get();
  }

  std::vector<CsvRow> rows;
  auto to_row = [&](const ExperimentResult& r, const std::string& seedTxt) {
    CsvRow row;
    row.kernel = spec.to_string();
    row.pattern = r.pattern.to_string();
    row.sparsity = r.realizedSparsity;
    row.seed = seedTxt;
    row.mode = r.mode == Mode::Baseline ? "baseline" : "sparce";
    row.cycles = static_cast<double>(r.stats.cycles);
    row.fetched = static_cast<double>(r.stats.fetched);
    row.executed = static_cast<double>(r.stats.executed);
    row.skipped = static_cast<double>(r.stats.skippedAtFetch);
    row.squashed = static_cast<double>(r.stats.squashedInFlight);
    row.dcacheAcc = static_cast<double>(r.stats.dcacheAccesses);
    row.dcacheMiss = static_cast<double>(r.stats.dcacheMisses);
    row.sasaHits = static_cast<double>(r.stats.sasaHits);
    row.speedup = r.speedup;
    return row;
  };

  size_t idx = 0;
  for (double s : sw.sparsities) {
    CsvRow meanBase, meanSparce;
    meanBase.speedup = meanSparce.speedup = 0.0;
    for (size_t k = 0; k < sw.seeds.size(); ++k, ++idx) {
      const ExperimentPair& pair = results[idx];
      CsvRow rb = to_row(pair.baseline, std::to_string(sw.seeds[k]));
      CsvRow rs = to_row(pair.sparce, std::to_string(sw.seeds[k]));
      rows.push_back(rb);
      rows.push_back(rs);
      auto acc = [](CsvRow& m, const CsvRow& r) {
        m.sparsity += r.sparsity;
        m.cycles += r.cycles;
        m.fetched += r.fetched;
        m.executed += r.executed;
        m.skipped += r.skipped;
        m.squashed += r.squashed;
        m.dcacheAcc += r.dcacheAcc;
        m.dcacheMiss += r.dcacheMiss;
        m.sasaHits += r.sasaHits;
        m.speedup += r.speedup;
      };
      acc(meanBase, rb);
      acc(meanSparce, rs);
    }
    const double n = static_cast<double>(sw.seeds.size());
    for (auto* m : {&meanBase, &meanSparce}) {
      m->kernel = spec.to_string();
      std::ostringstream pat;
      pat << sw.patternKind << ":" << s;
      m->pattern = pat.str();
      m->seed = "mean";
      m->sparsity /= n;
      m->cycles /= n;
      m->fetched /= n;
      m->executed /= n;
      m->skipped /= n;
      m->squashed /= n;
      m->dcacheAcc /= n;
      m->dcacheMiss /= n;
      m->sasaHits /= n;
      m->speedup /= n;
    }
    meanBase.mode = "baseline";
    meanSparce.mode = "sparce";
    rows.push_back(meanBase);
    rows.push_back(meanSparce);
  }
  return rows;
}

std::string rows_to_csv(const std::vector<CsvRow>& rows) {
  std::ostringstream out;
  out << kCsvHeader << "\n";
  auto num = [](double v) {
    std::ostringstream s;
    if (v == static_cast<uint64_t>(v)) s << static_cast<uint64_t>(v);
    else s << v;
    return s.str();
  };
  for (const auto& r : rows) {
    out << r.kernel << "," << r.pattern << "," << r.sparsity << "," << r.seed << ","
        << r.mode << "," << num(r.cycles) << "," << num(r.fetched) << ","
        << num(r.executed) << "," << num(r.skipped) << "," << num(r.squashed) << ","
        << num(r.dcacheAcc) << "," << num(r.dcacheMiss) << "," << num(r.sasaHits) << ","
        << r.speedup << "\n";
  }
  return out.str();
}

std::vector<double> parse_sparsity_range(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    double lo, hi, step;
    char c1, c2;
    std::istringstream in(text);
    if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':')
      throw HarnessError("bad sparsity range, expected lo:hi:step");
    if (step <= 0) throw HarnessError("sparsity step must be positive");
    for (double s = lo; s <= hi + 1e-9; s += step) out.push_back(s);
  } else {
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) out.push_back(std::stod(part));
  }
  for (double s : out)
    if (s < 0.0 || s >= 1.0) throw HarnessError("sparsity values must be in [0,1)");
  return out;
}

}  // namespace sparce
