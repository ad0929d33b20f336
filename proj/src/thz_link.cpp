#include "grant/thz_link.hpp"

#include "grant/errors.hpp"

#include <algorithm>

namespace grant {

void ArrayConfig::validate() const {
  if (mx < 1) throw ConfigError("link.array.mx: must be >= 1");
  if (my < 1) throw ConfigError("link.array.my: must be >= 1");
  if (!(spacing_wavelengths > 0.0)) throw ConfigError("link.array.spacing_wavelengths: must be > 0");
  if (max_tx_subarrays < 4) throw ConfigError("link.array.max_tx_subarrays: must cover the 4 ISLs");
  if (rx_subarrays_per_link < 1) throw ConfigError("link.array.rx_subarrays_per_link: must be >= 1");
}

void LinkBudgetParams::validate() const {
  if (!(max_power_w > 0.0)) throw ConfigError("link.budget.max_power_w: must be > 0");
  if (!(noise_temperature_k > 0.0)) throw ConfigError("link.budget.noise_temperature_k: must be > 0");
  if (!(interference_mean_w >= 0.0)) throw ConfigError("link.budget.interference_mean_w: must be >= 0");
  if (!(interference_std_w >= 0.0)) throw ConfigError("link.budget.interference_std_w: must be >= 0");
  if (!(psi_eps_w >= 0.0)) throw ConfigError("link.budget.psi_eps_w: must be >= 0");
}

void BandPlan::validate() const {
  if (centers_hz.empty()) throw ConfigError("band: at least one sub-band is required");
  if (!(bandwidth_hz > 0.0)) throw ConfigError("band.bandwidth_hz: must be > 0");
  std::vector<double> sorted = centers_hz;
  std::sort(sorted.begin(), sorted.end());
  for (size_t k = 1; k < sorted.size(); ++k)
    if (sorted[k] - sorted[k - 1] < bandwidth_hz * (1.0 - 1e-9)) throw ConfigError("band: sub-bands overlap");
}

namespace {

BandPlan contiguous_plan(double center_hz, double bandwidth_hz, int k, double sea_level_per_km) {
  BandPlan plan;
  plan.bandwidth_hz = bandwidth_hz;
  for (int i = 0; i < k; ++i) plan.centers_hz.push_back(center_hz + (i - (k - 1) / 2.0) * bandwidth_hz);
  plan.absorption.sea_level_per_km = sea_level_per_km;
  return plan;
}

}  // namespace

Band band_preset(const std::string& name) {
  constexpr double thz_off = 135e9, thz_out = 215e9, thz_b = 2e9;
  constexpr int k = 5;
  Band band;
  band.name = name;
  double f_off = thz_off, f_out = thz_out;
  double g_off = 0.02, g_out = 0.1;
  if (name == "thz") {
  } else if (name == "ka") {
    f_off = 30e9, f_out = 35e9, g_off = 0.004, g_out = 0.005;
  } else if (name == "ku") {
    f_off = 14e9, f_out = 16e9, g_off = 0.002, g_out = 0.002;
  } else {
    throw ConfigError("band: unknown preset '" + name + "' (expected thz, ka or ku)");
  }
  band.offloading = contiguous_plan(f_off, thz_b * f_off / thz_off, k, g_off);
  band.outcome = contiguous_plan(f_out, thz_b * f_out / thz_out, k, g_out);
  band.offloading_gain_scale = (f_off / thz_off) * (f_off / thz_off);
  band.outcome_gain_scale = (f_out / thz_out) * (f_out / thz_out);
  return band;
}

double optical_depth(const Vec3& tx_km, const Vec3& rx_km, const AbsorptionProfile& profile, double earth_radius_km,
                     int segments) {
  if (profile.sea_level_per_km == 0.0) return 0.0;
  segments = std::max(segments, 32);
  const Vec3 d = rx_km - tx_km;
  const double len = d.norm();
  // Portion of the segment inside the sphere r = R + ceiling.
  const double rc = earth_radius_km + profile.ceiling_km;
  const double a = d.squaredNorm();
  const double b = 2.0 * tx_km.dot(d);
  const double c = tx_km.squaredNorm() - rc * rc;
  const double disc = b * b - 4.0 * a * c;
  if (disc <= 0.0) return 0.0;
  const double sq = std::sqrt(disc);
  const double s0 = std::max(0.0, (-b - sq) / (2.0 * a));
  const double s1 = std::min(1.0, (-b + sq) / (2.0 * a));
  if (s1 <= s0) return 0.0;

  auto g = [&](double s) { return profile.coefficient((tx_km + s * d).norm() - earth_radius_km); };
  const double h = (s1 - s0) / segments;
  double sum = 0.5 * (g(s0) + g(s1));
  for (int i = 1; i < segments; ++i) sum += g(s0 + i * h);
  return sum * h * len;
}

double path_gain(double f_hz, const Vec3& tx_km, const Vec3& rx_km, const AbsorptionProfile& profile,
                 double earth_radius_km) {
  const double d = (rx_km - tx_km).norm();
  if (!(d > 0.0)) throw DomainError("path_gain: zero distance between transmitter and receiver");
  const double tau = optical_depth(tx_km, rx_km, profile, earth_radius_km, 256);
  const double spreading = spreading_gain(f_hz, d);
  return tau == 0.0 ? spreading : spreading * std::exp(-tau);
}

double link_gain(int subarrays_tx, int subarrays_rx, const ArrayConfig& a, double alpha2, GainInterpretation interp,
                 double element_gain_scale) {
  const double g = std::pow(10.0, a.element_gain_dbi / 10.0) * element_gain_scale;
  const double per_end = interp == GainInterpretation::amplitude ? g * g : g;
  const double m = a.elements();
  return (subarrays_tx * m) * (subarrays_rx * m) * per_end * per_end * alpha2;
}

LinkEvaluation evaluate_link(const Vec3& tx_km, const Vec3& rx_km, int subarrays_tx, int subarrays_rx,
                             const Eigen::VectorXd& power_w, const BandPlan& plan, double element_gain_scale,
                             const ArrayConfig& array, const LinkBudgetParams& budget, double interference_w,
                             double earth_radius_km) {
  const int k = plan.subbands();
  if (power_w.size() != k) throw DimensionError("evaluate_link: power vector does not match sub-band count");
  LinkEvaluation out;
  out.distance_km = (rx_km - tx_km).norm();
  out.alpha2.resize(k);
  out.gamma.resize(k);
  const double sigma2 = noise_power(budget.noise_temperature_k, plan.bandwidth_hz);
  Eigen::Array<bool, Eigen::Dynamic, 1> psi(k);
  for (int i = 0; i < k; ++i) {
    out.alpha2(i) = path_gain(plan.centers_hz[i], tx_km, rx_km, plan.absorption, earth_radius_km);
    const double h2 = link_gain(subarrays_tx, subarrays_rx, array, out.alpha2(i), budget.gain, element_gain_scale);
    out.gamma(i) = sinr(power_w(i), h2, interference_w, sigma2);
    psi(i) = power_w(i) > budget.psi_eps_w;
  }
  out.rate_bps = link_rate(psi, out.gamma, plan.bandwidth_hz);
  return out;
}

}  // namespace grant
