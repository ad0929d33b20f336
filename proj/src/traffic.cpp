#include "grant/traffic.hpp"

#include "grant/errors.hpp"

#include <cmath>

namespace grant {

void TrafficConfig::validate() const {
  if (!(mean_tasks_per_slot > 0.0)) throw ConfigError("traffic.mean_tasks_per_slot: must be > 0");
  if (!(hurst > 0.0 && hurst < 1.0)) throw ConfigError("traffic.hurst: must be in (0, 1)");
  if (!(relative_std >= 0.0)) throw ConfigError("traffic.relative_std: must be >= 0");
  if (!(slot_duration_s > 0.0)) throw ConfigError("traffic.slot_duration_s: must be > 0");
  if (!(task_size_bytes > 0.0)) throw ConfigError("traffic.task_size_bytes: must be > 0");
}

std::vector<double> fractional_gaussian_noise(int n, double hurst, std::mt19937_64& rng) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw ConfigError("traffic.hurst: must be in (0, 1)");
  std::vector<double> x(std::max(n, 0));
  if (n <= 0) return x;
  const double two_h = 2.0 * hurst;
  auto gamma = [two_h](int k) {
    const double kk = k;
    return 0.5 * (std::pow(kk + 1.0, two_h) - 2.0 * std::pow(kk, two_h) + std::pow(std::abs(kk - 1.0), two_h));
  };
  std::vector<double> cov(n);
  for (int k = 0; k < n; ++k) cov[k] = gamma(k);

  std::normal_distribution<double> normal(0.0, 1.0);
  // Durbin-Levinson recursion: phi holds the partial regression coefficients.
  std::vector<double> phi(n, 0.0), prev(n, 0.0);
  double v = cov[0];
  x[0] = normal(rng) * std::sqrt(v);
  for (int t = 1; t < n; ++t) {
    double num = cov[t];
    for (int j = 0; j < t - 1; ++j) num -= prev[j] * cov[t - 1 - j];
    const double kappa = num / v;
    phi[t - 1] = kappa;
    for (int j = 0; j < t - 1; ++j) phi[j] = prev[j] - kappa * prev[t - 2 - j];
    v *= (1.0 - kappa * kappa);
    double mean = 0.0;
    for (int j = 0; j < t; ++j) mean += phi[j] * x[t - 1 - j];
    x[t] = mean + normal(rng) * std::sqrt(v);
    std::copy(phi.begin(), phi.begin() + t, prev.begin());
  }
  return x;
}

Eigen::MatrixXi generate_counts(const TrafficConfig& cfg, int sources, int steps) {
  cfg.validate();
  if (steps < 1) throw ConfigError("traffic: steps must be >= 1");
  Eigen::MatrixXi counts(sources, steps);
  std::mt19937_64 rng(cfg.seed);
  for (int i = 0; i < sources; ++i) {
    const std::vector<double> x = fractional_gaussian_noise(steps, cfg.hurst, rng);
    for (int t = 0; t < steps; ++t) {
      const double level = cfg.mean_tasks_per_slot * (1.0 + cfg.relative_std * x[t]);
      counts(i, t) = static_cast<int>(std::lround(std::max(0.0, level)));
    }
  }
  return counts;
}

double autocorrelation(const std::vector<double>& x, int lag) {
  const int n = static_cast<int>(x.size());
  if (lag >= n) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) den += (x[i] - mean) * (x[i] - mean);
  for (int i = 0; i + lag < n; ++i) num += (x[i] - mean) * (x[i + lag] - mean);
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace grant
