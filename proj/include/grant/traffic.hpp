#pragma once

// Per-slot task arrivals driven by fractional Gaussian noise.

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <vector>

namespace grant {

struct TrafficConfig {
  double mean_tasks_per_slot = 122.0;
  double hurst = 0.8;
  double relative_std = 0.2;
  double slot_duration_s = 0.05;
  double task_size_bytes = 2500.0;
  std::uint64_t seed = 1;

  void validate() const;
  double mean_bytes_per_slot() const { return mean_tasks_per_slot * task_size_bytes; }
};

// Unit-variance fractional Gaussian noise of length n (Hosking's method).
std::vector<double> fractional_gaussian_noise(int n, double hurst, std::mt19937_64& rng);

// counts(i, t) = round(max(0, mean * (1 + relative_std * X_i(t)))), one
// independent fGn series per source, deterministic per seed.
Eigen::MatrixXi generate_counts(const TrafficConfig& cfg, int sources, int steps);

// Lag-k sample autocorrelation.
double autocorrelation(const std::vector<double>& x, int lag);

}  // namespace grant
