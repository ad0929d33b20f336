#pragma once

// One simulation slot of the satellite edge-computing network: action
// quantization, compute / transmission / propagation / FIFO queueing delays
// along every source path, resource-usage ratios and the reward.

#include "grant/constellation.hpp"
#include "grant/scenario.hpp"
#include "grant/thz_link.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace grant {

struct ComputeParams {
  double cycles_per_byte = 330.0;
  double cycles_per_second = 2e9;
  double outcome_ratio = 0.1;  // beta

  void validate() const;
};

struct RewardParams {
  double chi1 = 3.0;
  double latency_threshold_s = 0.1;
  double w_below = 10.0;
  double w_above = 50.0;
  double kappa = 0.5;
  // Finite stand-in for an infinite delay when computing the reward.
  double delay_cap_s = 10.0;

  void validate() const;
};

struct OffloadRow {
  int self_tasks = 0;
  std::array<int, 4> to_neighbor{};  // neighbours in ascending flat order

  int total() const { return self_tasks + to_neighbor[0] + to_neighbor[1] + to_neighbor[2] + to_neighbor[3]; }
};

// Neighbours take min(remaining, ceil(ratio * n)) in order; the source keeps
// the remainder. `ratios` = (self, n0, n1, n2, n3) on the simplex within 1e-6.
OffloadRow quantize_offload(std::span<const double> ratios, int n_tasks);

// Each active link gets 1 + floor(ratio * (s_max - active_links)).
std::vector<int> quantize_subarrays(std::span<const double> ratios, int active_links, int s_max);

double computation_delay(double bytes, const ComputeParams& p);
std::int64_t outcome_size(std::int64_t bytes, const ComputeParams& p);

// One directed link; rx == -1 is the ground station.
struct LinkAllocation {
  int tx = -1;
  int rx = -1;
  int subarrays = 1;
  Eigen::VectorXd power_w;  // per sub-band

  double used_power(double psi_eps_w) const;
};

// Post-softmax action ratios. Column order of the offloading heads follows
// the source's neighbours in ascending flat order; power columns are
// link-major (link j, sub-band k at j * K + k); slack is the last column.
struct RatioAction {
  Eigen::MatrixXd offload;      // sources x 5 (self first)
  Eigen::MatrixXd subarray_to;  // sources x 5
  Eigen::MatrixXd power_to;     // sources x (4K + 1)
  Eigen::VectorXd subarray_ot;  // transmitters, in [0, 1]
  Eigen::MatrixXd power_ot;     // transmitters x (K + 1)
};

// Integer assignment plus both phase allocations, ready for simulation.
struct SlotDecision {
  std::vector<int> tasks;              // arrivals per source
  std::vector<OffloadRow> assignment;  // per source
  std::vector<LinkAllocation> offloading;  // source i, link j at 4 * i + j
  std::vector<LinkAllocation> outcome;     // one per transmitter
};

SlotDecision quantize_action(const WindowTopology& topo, const RatioAction& action, std::span<const int> tasks,
                             int subbands_to, int subbands_ot, double max_power_w, int max_subarrays);

struct ConstraintReport {
  int task_conservation = 0;
  int power_budget = 0;
  int subarray_budget = 0;
  int negative_entries = 0;

  int total() const { return task_conservation + power_budget + subarray_budget + negative_entries; }
};

ConstraintReport check_constraints(const WindowTopology& topo, const SlotDecision& d, double max_power_w,
                                   int max_subarrays, double psi_eps_w);

struct TransmitterUsage {
  int sat = -1;
  Phase phase = Phase::offloading;
  double u_p = 0.0;
  double u_s = 0.0;
  double u = 0.0;
  double power_w = 0.0;
  int subarrays = 0;
};

struct ResourceUsage {
  std::vector<TransmitterUsage> per_transmitter;  // offloading entries first
  double u_p = 0.0;
  double u_s = 0.0;
  double u = 0.0;
  double power_w_mean = 0.0;
  double subarrays_mean = 0.0;
};

// Per-transmitter per-phase ratios and their mean over all entries.
ResourceUsage resource_usage(std::span<const LinkAllocation> alloc_to, std::span<const LinkAllocation> alloc_ot,
                             double max_power_w, int max_subarrays, double psi_eps_w = 0.0);

double reward(double usage, double t_avg_s, const RewardParams& rp);

struct SimParams {
  ArrayConfig array;
  LinkBudgetParams budget;
  Band band = band_preset("thz");
  ComputeParams compute;
  RewardParams reward;
  GroundStation ground_station;
  double task_size_bytes = 2500.0;
};

struct PathDelay {
  int source = -1;  // flat id
  int server = -1;  // flat id
  int tasks = 0;
  double offload_s = 0.0;  // transmission + propagation of the offload hop
  double compute_s = 0.0;
  double outcome_s = 0.0;  // all outcome hops including queueing and downlink
  double total_s = 0.0;
  bool infinite = false;
};

struct BufferStats {
  int tx = -1;
  int rx = -1;
  double bytes_in = 0.0;
  double bytes_out = 0.0;
  double peak_backlog_bytes = 0.0;
};

struct SlotOutcome {
  std::vector<PathDelay> paths;
  std::vector<double> source_delay_s;  // T^o per source (may be +inf)
  double t_avg_s = 0.0;
  double t_max_s = 0.0;
  bool infinite_delay = false;
  ResourceUsage usage;
  double reward = 0.0;
  std::vector<BufferStats> buffers;  // per outcome transmitter
  Eigen::VectorXd offload_rate_bps;  // 4 per source
  Eigen::VectorXd outcome_rate_bps;  // per transmitter
  Eigen::VectorXd offload_sinr_db;   // 4 per source, mean over used sub-bands (NaN if none)
  Eigen::VectorXd outcome_sinr_db;   // per transmitter
};

// Pure function of its inputs: positions are evaluated at `t`.
SlotOutcome simulate_slot(const Constellation& c, const WindowTopology& topo, const SlotDecision& d,
                          const SimParams& p, double t, double interference_w = 0.0);

// Same as simulate_slot but with externally supplied link rates (bit/s),
// used by hand-built delay checks; distances still come from geometry.
SlotOutcome simulate_slot_with_rates(const Constellation& c, const WindowTopology& topo, const SlotDecision& d,
                                     const SimParams& p, double t, const Eigen::VectorXd& offload_rate_bps,
                                     const Eigen::VectorXd& outcome_rate_bps);

}  // namespace grant
