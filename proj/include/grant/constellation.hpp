#pragma once

// Walker Delta shell with circular Keplerian propagation, the 4-ISL mesh,
// ground-station access and hop/distance-weighted routing toward the
// GS-connected satellite.

#include <Eigen/Core>

#include <array>
#include <compare>
#include <optional>
#include <vector>

namespace grant {

using Vec3 = Eigen::Vector3d;

inline constexpr double kSpeedOfLightKmPerS = 299792.458;
inline constexpr double kEarthMuKm3PerS2 = 398600.4418;
inline constexpr double kEarthRotationRadPerS = 7.2921150e-5;

struct WalkerConfig {
  int planes = 72;
  int sats_per_plane = 22;
  double inclination_deg = 53.0;
  double altitude_km = 550.0;
  int phasing_factor = 0;
  double earth_radius_km = 6371.0;
  double epoch_s = 0.0;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct SatelliteId {
  int plane = 0;
  int slot = 0;
  auto operator<=>(const SatelliteId&) const = default;
};

struct GroundStation {
  double latitude_deg = 31.2;
  double longitude_deg = 121.4;
  double min_elevation_deg = 15.0;

  void validate() const;
};

struct Route {
  std::vector<SatelliteId> hops;      // src first, GS-connected satellite last
  std::vector<double> hop_distance_km;  // hops.size() - 1 entries

  int hop_count() const { return static_cast<int>(hops.size()) - 1; }
};

class Constellation {
 public:
  explicit Constellation(const WalkerConfig& cfg);

  const WalkerConfig& config() const { return cfg_; }
  int size() const { return cfg_.planes * cfg_.sats_per_plane; }
  int flat(SatelliteId id) const;
  SatelliteId id(int flat_index) const;
  bool valid(SatelliteId id) const;

  double orbital_radius_km() const { return radius_; }
  double mean_motion_rad_s() const { return mean_motion_; }
  double period_s() const;
  // Chord between consecutive satellites of one plane.
  double intra_plane_chord_km() const;

  // Argument of latitude at t = epoch (radians).
  double initial_anomaly(int flat_index) const;
  double raan(int plane) const;
  Vec3 position(int flat_index, double t) const;

  // Precomputed ISL neighbours in the order: slot+1, slot-1, plane+1, plane-1.
  const std::array<int, 4>& neighbors(int flat_index) const;
  bool has_isl_mesh() const { return !neighbors_.empty(); }

 private:
  WalkerConfig cfg_;
  double radius_ = 0.0;
  double mean_motion_ = 0.0;
  double cos_inc_ = 1.0;
  double sin_inc_ = 0.0;
  std::vector<std::array<int, 4>> neighbors_;
};

Constellation build_walker(const WalkerConfig& cfg);

Vec3 position_at(const Constellation& c, SatelliteId id, double t);

// Two intra-plane neighbours and the closest-phase satellites of both
// adjacent planes. Throws TopologyError when planes < 3.
std::array<SatelliteId, 4> isl_neighbors(const Constellation& c, SatelliteId id);

// Earth-centred inertial position of the ground station; the site rotates
// with the Earth from longitude `longitude_deg` at t = 0.
Vec3 ground_station_position(const GroundStation& gs, double earth_radius_km, double t);

double elevation_deg(const Vec3& station, const Vec3& target);

// Sticky access rule: keep `previous` while it is above the mask, otherwise
// the visible satellite with minimum slant range (ties by flat index).
SatelliteId gs_access_satellite(const Constellation& c, const GroundStation& gs, double t,
                                std::optional<SatelliteId> previous = std::nullopt);

// Seconds from `t` until the satellite drops below the elevation mask,
// scanned with `resolution_s` steps up to `horizon_s`.
double remaining_visibility_s(const Constellation& c, const GroundStation& gs, SatelliteId sat,
                              double t, double resolution_s = 0.5, double horizon_s = 3600.0);

// Shortest-path tree rooted at the GS-connected satellite under the weight
// w(i,j) = 1 + eta * d(i,j) / d_ref with d_ref the intra-plane chord. Among
// equal-cost paths the lexicographically smallest flat-index sequence wins.
class RouteTree {
 public:
  RouteTree(const Constellation& c, SatelliteId root, double eta, double t);

  int root() const { return root_; }
  // Next satellite toward the root, -1 for the root itself.
  int next_hop(int flat_index) const { return parent_[flat_index]; }
  double cost(int flat_index) const { return cost_[flat_index]; }
  Route route_from(const Constellation& c, SatelliteId src, double t) const;

 private:
  int root_;
  std::vector<int> parent_;
  std::vector<double> cost_;
};

Route route_to_gs(const Constellation& c, SatelliteId src, SatelliteId gs_sat, double eta = 0.5,
                  std::optional<double> t = std::nullopt);

}  // namespace grant
