// Command-line front end: run one condition, the full grid, or recompute and
// compare cue maps from existing files.

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "srosync/binaural/cues.hpp"
#include "srosync/error.hpp"
#include "srosync/io/wav.hpp"
#include "srosync/pipeline/config.hpp"
#include "srosync/pipeline/manifest.hpp"
#include "srosync/pipeline/run.hpp"

namespace {

using namespace srosync;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kDomain:
    case ErrorKind::kGeometry: return 3;
    case ErrorKind::kIo: return 4;
    default: return 1;
  }
}

struct Common {
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::string sro;
};

std::pair<double, double> parse_sro_pair(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw Error(ErrorKind::kConfig, "--sro expects 'eps1,eps2' in ppm, got '" + text + "'");
  }
  try {
    return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw Error(ErrorKind::kConfig, "--sro expects two numbers, got '" + text + "'");
  }
}

pipeline::RunConfig load(const Common& c) {
  pipeline::RunConfig cfg = pipeline::load_config(c.config_path);
  if (c.seed) cfg.playback.seed = *c.seed;
  if (!c.output_dir.empty()) cfg.output_dir = c.output_dir;
  if (!c.sro.empty()) {
    const auto [a, b] = parse_sro_pair(c.sro);
    cfg = cfg.with_sro(a, b);
    cfg.sro_grid = {{a, b}};
  }
  return cfg;
}

void print_summary(const pipeline::RunManifest& m) {
  for (const auto& [k, v] : m.summary) std::printf("  %-48s %.6g\n", k.c_str(), v);
}

std::string pair_dir(double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "sro_%g_%g", a, b);
  return buf;
}

int cmd_run(const Common& c, const std::string& condition) {
  pipeline::RunConfig cfg = load(c);
  if (!condition.empty()) cfg.condition = pipeline::condition_from_string(condition);
  cfg.validate();
  pipeline::ensure_output_dir(cfg.output_dir);
  const pipeline::RunContext ctx = pipeline::prepare_run(cfg);
  std::vector<pipeline::ConditionResult> results;
  results.push_back(pipeline::run_condition(cfg, ctx, cfg.condition));
  const auto m = pipeline::emit_outputs(results, cfg, cfg.output_dir);
  std::printf("%s -> %s\n", pipeline::to_string(cfg.condition).c_str(),
              cfg.output_dir.string().c_str());
  print_summary(m);
  return 0;
}

int cmd_grid(const Common& c, unsigned jobs) {
  const pipeline::RunConfig base = load(c);
  pipeline::ensure_output_dir(base.output_dir);
  for (const auto& [a, b] : base.sro_grid) base.with_sro(a, b).validate();
  const pipeline::RunContext ctx = pipeline::prepare_run(base);

  struct Task {
    std::size_t pair;
    pipeline::Condition condition;
  };
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < base.sro_grid.size(); ++p) {
    for (auto cond : pipeline::kAllConditions) tasks.push_back({p, cond});
  }
  std::vector<std::optional<pipeline::ConditionResult>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        const auto [a, b] = base.sro_grid[tasks[i].pair];
        results[i] = pipeline::run_condition(base.with_sro(a, b), ctx, tasks[i].condition);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < std::max(1u, jobs); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  std::ofstream summary(base.output_dir / "grid_summary.csv");
  summary << "eps1_ppm,eps2_ppm,condition,key,value\n";
  for (std::size_t p = 0; p < base.sro_grid.size(); ++p) {
    const auto [a, b] = base.sro_grid[p];
    const pipeline::RunConfig cfg = base.with_sro(a, b);
    std::vector<pipeline::ConditionResult> chunk;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].pair == p) chunk.push_back(std::move(*results[i]));
    }
    const auto dir = base.output_dir / pair_dir(a, b);
    const auto m = pipeline::emit_outputs(chunk, cfg, dir);
    std::printf("(%g, %g) ppm -> %s\n", a, b, dir.string().c_str());
    print_summary(m);
    for (const auto& [k, v] : m.summary) {
      const auto dot = k.find('.');
      if (dot == std::string::npos) continue;
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      summary << a << "," << b << "," << k.substr(0, dot) << "," << k.substr(dot + 1) << ","
              << buf << "\n";
    }
  }
  if (!summary) throw Error(ErrorKind::kIo, "cannot write grid_summary.csv");
  return 0;
}

binaural::CueOptions cue_options(const std::string& config_path) {
  return config_path.empty() ? binaural::CueOptions{} : pipeline::load_config(config_path).cues;
}

int cmd_metrics(const std::string& wav, const std::string& out, const std::string& config_path) {
  const TimeSignal ears = io::read_wav(wav);
  const auto map = binaural::compute_cue_map(ears, cue_options(config_path));
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + out);
  binaural::write_cue_csv(f, map);
  std::printf("%zu bands x %zu blocks -> %s\n", map.num_bands(), map.num_blocks(), out.c_str());
  return 0;
}

binaural::CueMap read_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path);
  return binaural::read_cue_csv(in);
}

int cmd_compare(const std::string& map_path, const std::string& ref_path, const std::string& out) {
  const auto diff = binaural::cue_difference(read_map(map_path), read_map(ref_path));
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw Error(ErrorKind::kIo, "cannot write " + out);
    binaural::write_cue_csv(f, diff);
  }
  const auto s = binaural::summarize(diff);
  std::printf("mean |dIC| = %.6g over %zu cells\nmean |dITD| = %.6g s over %zu cells\n",
              s.mean_abs_ic, s.ic_cells, s.mean_abs_itd, s.itd_cells);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sample-rate-offset estimation and compensation for wireless stereo playback"};
  app.set_version_flag("--version", SROSYNC_VERSION);
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Run configuration file")->required();
    sub->add_option("--output-dir", common.output_dir, "Output directory (overrides output.dir)");
    sub->add_option("--seed", common.seed, "Playback noise seed (overrides playback.seed)");
    sub->add_option("--sro", common.sro, "Loudspeaker SROs 'eps1,eps2' in ppm");
  };

  auto* run = app.add_subcommand("run", "Run a single condition");
  add_common(run);
  std::string condition;
  run->add_option("--condition", condition,
                  "reference | uncompensated | oracle_comp | estimated_comp");

  auto* grid = app.add_subcommand("grid", "All conditions for every SRO pair in sro.grid");
  add_common(grid);
  unsigned jobs = 1;
  grid->add_option("--jobs", jobs, "Worker threads");

  auto* metrics = app.add_subcommand("metrics", "Cue maps from a stereo ear-signal WAV");
  std::string wav, out, metrics_config;
  metrics->add_option("wav", wav, "Stereo WAV (left, right)")->required();
  metrics->add_option("-o,--output", out, "Cue CSV to write")->required();
  metrics->add_option("--config", metrics_config, "Take cue options from this configuration");

  auto* compare = app.add_subcommand("compare", "Difference of two cue CSVs");
  std::string map_path, ref_path, diff_out;
  compare->add_option("map", map_path, "Cue CSV")->required();
  compare->add_option("reference", ref_path, "Reference cue CSV")->required();
  compare->add_option("-o,--output", diff_out, "Difference CSV to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(common, condition);
    if (*grid) return cmd_grid(common, jobs);
    if (*metrics) return cmd_metrics(wav, out, metrics_config);
    if (*compare) return cmd_compare(map_path, ref_path, diff_out);
  } catch (const Error& e) {
    std::fprintf(stderr, "srosync: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "srosync: %s\n", e.what());
    return 1;
  }
  return 0;
}
