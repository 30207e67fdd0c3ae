#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "sparce/harness.hpp"

using namespace sparce;

namespace {

SimConfig load_config(const std::string& path) {
  if (path.empty()) return SimConfig{};
  return config_from_json_file(path);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void print_result(const ExperimentResult& r) {
  const char* mode = r.mode == Mode::Baseline ? "baseline" : "sparce";
  std::cout << mode << ": cycles=" << r.stats.cycles << " fetched=" << r.stats.fetched
            << " executed=" << r.stats.executed << " skipped=" << r.stats.skippedAtFetch
            << " squashed=" << r.stats.squashedInFlight
            << " loads_skipped=" << r.stats.loadsSkipped
            << " dcache=" << r.stats.dcacheAccesses << " (miss " << r.stats.dcacheMisses
            << ") sasa_hits=" << r.stats.sasaHits << " speedup=" << r.speedup << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"in-order pipeline simulator with sparsity-driven instruction skipping"};
  app.require_subcommand(1);

  // --- run -------------------------------------------------------------------
  auto* run = app.add_subcommand("run", "run one kernel in baseline and/or sparce mode");
  std::string kernelTxt = "dot:1024", patternTxt = "uniform:0.5", configPath, csvPath;
  std::string modeTxt = "both";
  uint64_t seed = 42;
  run->add_option("--kernel", kernelTxt, "kernel spec, e.g. dot:1024, conv:8x8x3, gemm:16x32x32");
  run->add_option("--pattern", patternTxt, "sparsity pattern, e.g. uniform:0.5, maxpool:2:2");
  run->add_option("--seed", seed, "input generator seed");
  run->add_option("--config", configPath, "JSON config file");
  run->add_option("--mode", modeTxt, "baseline | sparce | both (both always simulated)");
  run->add_option("--csv", csvPath, "write result rows as CSV");

  // --- sweep -----------------------------------------------------------------
  auto* sw = app.add_subcommand("sweep", "sweep sparsity with nested zero masks");
  std::string sweepKernel = "dot:1024", sparsityTxt = "0:0.9:0.1", sweepPattern = "uniform";
  std::string sweepConfig, sweepCsv;
  int nSeeds = 5;
  int threads = 0;
  sw->add_option("--kernel", sweepKernel, "kernel spec");
  sw->add_option("--sparsity", sparsityTxt, "lo:hi:step or comma list");
  sw->add_option("--pattern", sweepPattern, "pattern family (uniform or block)");
  sw->add_option("--seeds", nSeeds, "seeds per sparsity point");
  sw->add_option("--threads", threads, "worker threads (0 = auto)");
  sw->add_option("--config", sweepConfig, "JSON config file");
  sw->add_option("--csv", sweepCsv, "output CSV path (default stdout)");

  // --- annotate ---------------------------------------------------------------
  auto* ann = app.add_subcommand("annotate", "derive a SASA table for an assembly file");
  std::string inPath, outPath;
  std::vector<std::string> sparseMarks;
  int capacity = 20;
  bool warnAsError = false, refreshAtLabels = false;
  ann->add_option("input", inPath, "input assembly file")->required();
  ann->add_option("--sparse", sparseMarks,
                  "label of a sparse-structure load, with optional :lane or :full");
  ann->add_option("--capacity", capacity, "table capacity");
  ann->add_option("--out", outPath, "output assembly file (default stdout)");
  ann->add_flag("--warn-as-error", warnAsError, "exit nonzero on warnings");
  ann->add_flag("--refresh-at-labels", refreshAtLabels,
                "reload the table per label segment instead of once at startup");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      KernelSpec spec = parse_kernel(kernelTxt);
      SparsityPattern pattern = parse_pattern(patternTxt, seed);
      SimConfig cfg = load_config(configPath);
      ExperimentPair pair = run_experiment(spec, pattern, cfg);
      std::cout << spec.to_string() << " " << pattern.to_string()
                << " realized_sparsity=" << pair.baseline.realizedSparsity
                << " verified=" << (pair.baseline.verified && pair.sparce.verified)
                << "\n";
      if (modeTxt == "baseline" || modeTxt == "both") print_result(pair.baseline);
      if (modeTxt == "sparce" || modeTxt == "both") print_result(pair.sparce);
      if (!csvPath.empty()) {
        SweepOptions one;
        one.sparsities = {pair.baseline.realizedSparsity};
        one.seeds = {seed};
        std::vector<CsvRow> rows;
        auto emit = [&](const ExperimentResult& r) {
          CsvRow row;
          row.kernel = spec.to_string();
          row.pattern = pattern.to_string();
          row.sparsity = r.realizedSparsity;
          row.seed = std::to_string(seed);
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
          rows.push_back(row);
        };
        if (modeTxt == "baseline" || modeTxt == "both") emit(pair.baseline);
        if (modeTxt == "sparce" || modeTxt == "both") emit(pair.sparce);
        write_file(csvPath, rows_to_csv(rows));
      }
    } else if (*sw) {
      KernelSpec spec = parse_kernel(sweepKernel);
      SimConfig cfg = load_config(sweepConfig);
      SweepOptions opts;
      opts.sparsities = parse_sparsity_range(sparsityTxt);
      opts.patternKind = sweepPattern;
      opts.threads = threads;
      opts.seeds.clear();
      for (int i = 1; i <= nSeeds; ++i) opts.seeds.push_back(static_cast<uint64_t>(i));
      std::vector<CsvRow> rows = sweep(spec, opts, cfg);
      std::string csv = rows_to_csv(rows);
      if (sweepCsv.empty()) std::cout << csv;
      else write_file(sweepCsv, csv);
    } else if (*ann) {
      std::ifstream in(inPath);
      if (!in) throw std::runtime_error("cannot open " + inPath);
      std::string text((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
      Program prog = parse_program(text);
      auto diags = validate(prog);
      if (!diags.empty()) {
        for (const auto& d : diags)
          std::cerr << "error: pc " << d.pc << ": " << d.message << "\n";
        return 1;
      }
      std::vector<SparseMarker> markers;
      for (const auto& s : sparseMarks) {
        SparseMarker m;
        auto colon = s.rfind(':');
        std::string label = s;
        if (colon != std::string::npos) {
          std::string suffix = s.substr(colon + 1);
          if (suffix == "lane") {
            m.granularity = SparseMarker::Granularity::PerLane;
            label = s.substr(0, colon);
          } else if (suffix == "full") {
            m.granularity = SparseMarker::Granularity::FullRegister;
            label = s.substr(0, colon);
          }
        }
        m.target = label;
        markers.push_back(m);
      }
      AnnotateOptions opts;
      opts.capacity = capacity;
      opts.refreshAtLabels = refreshAtLabels;
      AnnotateResult res = annotate(prog, markers, opts);
      for (const auto& w : res.warnings)
        std::cerr << "warning: pc " << w.pc << ": " << w.message << "\n";
      std::string printed = print_program(res.program);
      if (outPath.empty()) std::cout << printed;
      else write_file(outPath, printed);
      if (warnAsError && !res.warnings.empty()) return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
