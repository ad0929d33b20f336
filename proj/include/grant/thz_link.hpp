#pragma once

// Link budget for ISLs and the satellite-ground link: planar-array steering
// vectors, LoS path gain with optional atmospheric absorption, aligned-beam
// array gain, SINR and multi-sub-band Shannon rate.

#include "grant/constellation.hpp"

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

namespace grant {

inline constexpr double kBoltzmann = 1.380649e-23;
inline constexpr double kSpeedOfLightMPerS = 299792458.0;

struct ArrayConfig {
  int mx = 4;
  int my = 4;
  double spacing_wavelengths = 0.5;
  double element_gain_dbi = 10.0;
  int max_tx_subarrays = 64;
  int rx_subarrays_per_link = 1;

  int elements() const { return mx * my; }
  void validate() const;
};

enum class GainInterpretation { amplitude, power };

struct LinkBudgetParams {
  double max_power_w = 10.0;
  double noise_temperature_k = 290.0;
  double interference_mean_w = 0.0;
  double interference_std_w = 0.0;
  GainInterpretation gain = GainInterpretation::amplitude;
  // Sub-band indicator threshold: psi = 1 iff allocated power > psi_eps_w.
  double psi_eps_w = 0.0;

  void validate() const;
};

// Exponential atmosphere g(h) = sea_level * exp(-h / scale_height), zero
// above the ceiling. Coefficients in 1/km.
struct AbsorptionProfile {
  double sea_level_per_km = 0.0;
  double scale_height_km = 6.0;
  double ceiling_km = 100.0;

  double coefficient(double altitude_km) const {
    if (altitude_km >= ceiling_km) return 0.0;
    return sea_level_per_km * std::exp(-std::max(altitude_km, 0.0) / scale_height_km);
  }
};

enum class Phase { offloading = 0, outcome = 1 };

struct BandPlan {
  std::vector<double> centers_hz;
  double bandwidth_hz = 2e9;
  AbsorptionProfile absorption;

  int subbands() const { return static_cast<int>(centers_hz.size()); }
  void validate() const;
};

// A carrier band: one plan per phase plus the multiplier applied to the
// linear element gain (1 for THz; (f_low / f_thz)^2 for a fixed aperture).
struct Band {
  std::string name = "thz";
  BandPlan offloading;
  BandPlan outcome;
  double offloading_gain_scale = 1.0;
  double outcome_gain_scale = 1.0;

  const BandPlan& plan(Phase p) const { return p == Phase::offloading ? offloading : outcome; }
  double gain_scale(Phase p) const { return p == Phase::offloading ? offloading_gain_scale : outcome_gain_scale; }
};

// Presets: "thz" (130-140 / 210-220 GHz), "ka" (30 / 35 GHz), "ku" (14 / 16 GHz).
// Low bands keep the THz fractional bandwidth and effective aperture.
Band band_preset(const std::string& name);

template <typename Scalar = double>
Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> steering_vector(Scalar phi, Scalar theta, int mx, int my,
                                                                       Scalar spacing_over_wavelength) {
  using std::cos;
  using std::sin;
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> a(mx * my);
  const Scalar k = Scalar(2) * std::numbers::pi_v<Scalar> * spacing_over_wavelength;
  const Scalar norm = Scalar(1) / std::sqrt(static_cast<Scalar>(mx * my));
  for (int y = 0; y < my; ++y)
    for (int x = 0; x < mx; ++x)
      a(y * mx + x) = std::polar(norm, k * (x * sin(theta) * cos(phi) + y * cos(theta)));
  return a;
}

inline Eigen::VectorXcd steering_vector(double phi, double theta, const ArrayConfig& a, double wavelength_m,
                                        double spacing_m) {
  return steering_vector<double>(phi, theta, a.mx, a.my, spacing_m / wavelength_m);
}

inline Eigen::VectorXcd steering_vector(double phi, double theta, const ArrayConfig& a) {
  return steering_vector<double>(phi, theta, a.mx, a.my, a.spacing_wavelengths);
}

// Free-space spreading (c / 4 pi f d)^2 with d in km.
template <typename Scalar>
Scalar spreading_gain(Scalar f_hz, Scalar distance_km) {
  const Scalar x = Scalar(kSpeedOfLightMPerS) / (Scalar(4) * std::numbers::pi_v<Scalar> * f_hz * distance_km * Scalar(1000));
  return x * x;
}

// Optical depth integral of the absorption coefficient along tx -> rx
// (trapezoidal, `segments` >= 32). Exactly zero when the whole segment lies
// above the atmosphere ceiling.
double optical_depth(const Vec3& tx_km, const Vec3& rx_km, const AbsorptionProfile& profile, double earth_radius_km,
                     int segments = 64);

// |alpha|^2 of the LoS path. Throws DomainError on zero distance.
double path_gain(double f_hz, const Vec3& tx_km, const Vec3& rx_km, const AbsorptionProfile& profile,
                 double earth_radius_km = 6371.0);

// Aligned-beam |h|^2 = (S_tx M)(S_rx M) g_tx g_rx |alpha|^2.
double link_gain(int subarrays_tx, int subarrays_rx, const ArrayConfig& a, double alpha2,
                 GainInterpretation interp = GainInterpretation::amplitude, double element_gain_scale = 1.0);

template <typename Scalar>
Scalar sinr(Scalar power_w, Scalar h2, Scalar interference_w, Scalar noise_w) {
  return power_w * h2 / (interference_w + noise_w);
}

template <typename Scalar>
Scalar noise_power(Scalar temperature_k, Scalar bandwidth_hz) {
  return Scalar(kBoltzmann) * temperature_k * bandwidth_hz;
}

// R = sum_k psi_k B log2(1 + gamma_k).
template <typename PsiDerived, typename GammaDerived>
typename GammaDerived::Scalar link_rate(const Eigen::DenseBase<PsiDerived>& psi,
                                        const Eigen::DenseBase<GammaDerived>& gamma,
                                        typename GammaDerived::Scalar bandwidth_hz) {
  using Scalar = typename GammaDerived::Scalar;
  return bandwidth_hz * (psi.derived().template cast<Scalar>().array() * gamma.derived().array().log1p()).sum() /
         std::log(Scalar(2));
}

// One directed link with its per-sub-band budget, evaluated at a geometry.
struct LinkEvaluation {
  double distance_km = 0.0;
  Eigen::VectorXd alpha2;  // per sub-band
  Eigen::VectorXd gamma;   // per sub-band
  double rate_bps = 0.0;
};

LinkEvaluation evaluate_link(const Vec3& tx_km, const Vec3& rx_km, int subarrays_tx, int subarrays_rx,
                             const Eigen::VectorXd& power_w, const BandPlan& plan, double element_gain_scale,
                             const ArrayConfig& array, const LinkBudgetParams& budget, double interference_w,
                             double earth_radius_km);

}  // namespace grant
