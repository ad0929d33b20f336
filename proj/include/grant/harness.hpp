#pragma once

// Experiment orchestration: single runs with CSV / checkpoint output,
// multi-seed aggregation from the emitted CSVs, and band replay.

#include "grant/config.hpp"
#include "grant/trainer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace grant {

struct RunOptions {
  std::string policy = "grant";
  std::uint64_t seed = 1;
  int steps = 390;
  std::string out_dir = "out";
  bool learn = true;
  bool write_checkpoints = true;
  bool dump_traffic = false;
  std::string checkpoint_in;  // optional parameters to start from
};

struct RunSummary {
  std::string policy;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string metrics_csv;
  std::string loss_csv;
  int steps = 0;
  double converged_u = 0.0;
  double converged_u_p = 0.0;
  double converged_u_s = 0.0;
  double converged_t_avg_ms = 0.0;
  double converged_t_max_ms = 0.0;
  double wall_s_per_step = 0.0;
  std::int64_t parameter_count = 0;
  std::int64_t constraint_violations = 0;
  int involved = 0;
  std::string last_checkpoint;
};

inline constexpr int kConvergenceWindow = 50;

// Converged metrics: means over the last `window` rows of a metrics CSV.
RunSummary summarize_metrics(const std::string& metrics_csv, int window = kConvergenceWindow);

// One policy on one seed; writes metrics.csv, loss.csv, summary.json,
// checkpoints/ and optionally traffic.csv under opt.out_dir.
RunSummary run_single(const ExperimentConfig& cfg, const RunOptions& opt);

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;
};

struct ExperimentResult {
  std::vector<RunSummary> runs;
  Aggregate converged_u;
  Aggregate converged_t_avg_ms;
  Aggregate converged_t_max_ms;
  Aggregate wall_s_per_step;
};

// One run per seed under <out_dir>/seed_<n>; aggregates read back the CSVs.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                const RunOptions& base);

struct BandRow {
  std::string band;
  double t_avg_s = 0.0;
  double t_max_s = 0.0;
  int infinite_slots = 0;
};

// Records the allocations a policy emits (no exploration, no learning) on
// the configured band, then re-simulates the identical decisions under each
// band's link model. Learning policies need a checkpoint.
std::vector<BandRow> compare_bands(const ExperimentConfig& cfg, const std::vector<std::string>& bands,
                                   const std::string& policy, const std::string& checkpoint, std::uint64_t seed,
                                   int steps);

std::string format_number(double v);

}  // namespace grant
