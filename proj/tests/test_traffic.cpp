#include "doctest.h"

#include "grant/errors.hpp"
#include "grant/traffic.hpp"

#include <cmath>

using namespace grant;

namespace {

std::vector<double> row(const Eigen::MatrixXi& m, int i) {
  std::vector<double> out(m.cols());
  for (int t = 0; t < m.cols(); ++t) out[t] = m(i, t);
  return out;
}

}  // namespace

TEST_CASE("zero relative std gives the rounded mean everywhere") {
  TrafficConfig cfg;
  cfg.relative_std = 0.0;
  const Eigen::MatrixXi c = generate_counts(cfg, 3, 50);
  CHECK((c.array() == 122).all());
}

TEST_CASE("counts are nonnegative and seed-deterministic") {
  TrafficConfig cfg;
  cfg.relative_std = 2.0;  // heavy clipping at zero
  const Eigen::MatrixXi a = generate_counts(cfg, 4, 300);
  CHECK((a.array() >= 0).all());
  CHECK((a.array() == 0).any());
  CHECK(a == generate_counts(cfg, 4, 300));
  cfg.seed = 2;
  CHECK(a != generate_counts(cfg, 4, 300));
}

TEST_CASE("empirical mean of 10^4 samples is within 5%") {
  const TrafficConfig cfg;
  const Eigen::MatrixXi c = generate_counts(cfg, 1, 10000);
  CHECK(std::abs(c.cast<double>().mean() - 122.0) < 0.05 * 122.0);
}

TEST_CASE("H = 0.5 gives uncorrelated increments") {
  std::mt19937_64 rng(17);
  const auto x = fractional_gaussian_noise(10000, 0.5, rng);
  CHECK(std::abs(autocorrelation(x, 1)) < 0.05);
  TrafficConfig cfg;
  cfg.hurst = 0.5;
  CHECK(std::abs(autocorrelation(row(generate_counts(cfg, 1, 10000), 0), 1)) < 0.05);
}

TEST_CASE("H = 0.8 lag-1 correlation matches the fGn autocovariance") {
  std::mt19937_64 rng(23);
  const auto x = fractional_gaussian_noise(10000, 0.8, rng);
  const double rho1 = 0.5 * (std::pow(2.0, 1.6) - 2.0);
  // Long-range dependence biases the sample estimate downward a little.
  CHECK(autocorrelation(x, 1) == doctest::Approx(rho1).epsilon(0.15));
  CHECK(autocorrelation(x, 10) > 0.0);
  CHECK(autocorrelation(row(generate_counts(TrafficConfig{}, 1, 10000), 0), 1) > 0.0);
}

TEST_CASE("unit variance of generated noise") {
  std::mt19937_64 rng(29);
  const auto x = fractional_gaussian_noise(4000, 0.3, rng);
  double m = 0, v = 0;
  for (double a : x) m += a;
  m /= x.size();
  for (double a : x) v += (a - m) * (a - m);
  v /= x.size();
  CHECK(v == doctest::Approx(1.0).epsilon(0.1));
  CHECK(autocorrelation(x, 1) < 0.0);
}

TEST_CASE("invalid traffic config") {
  TrafficConfig cfg;
  cfg.hurst = 1.0;
  CHECK_THROWS_AS(generate_counts(cfg, 1, 10), ConfigError);
  cfg = {};
  cfg.mean_tasks_per_slot = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(generate_counts(TrafficConfig{}, 1, 0), ConfigError);
}
