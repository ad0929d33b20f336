#include "grant/constellation.hpp"

#include "grant/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <string>

namespace grant {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

// Wrap an angle into (-pi, pi].
double wrap_pi(double a) {
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

}  // namespace

void WalkerConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("constellation." + field + ": " + why);
  };
  if (planes < 1) fail("planes", "must be >= 1");
  if (sats_per_plane < 3) fail("sats_per_plane", "must be >= 3");
  if (!(inclination_deg >= 0.0 && inclination_deg <= 90.0)) fail("inclination_deg", "must be in [0, 90]");
  if (!(altitude_km > 0.0)) fail("altitude_km", "must be > 0");
  if (!(earth_radius_km > 0.0)) fail("earth_radius_km", "must be > 0");
  if (phasing_factor < 0 || phasing_factor >= std::max(planes, 1)) fail("phasing_factor", "must be in [0, planes)");
  if (!std::isfinite(epoch_s)) fail("epoch_s", "must be finite");
}

void GroundStation::validate() const {
  if (!(std::abs(latitude_deg) <= 90.0)) throw ConfigError("ground_station.latitude_deg: must satisfy |lat| <= 90");
  if (!(min_elevation_deg > 0.0 && min_elevation_deg < 90.0))
    throw ConfigError("ground_station.min_elevation_deg: must be in (0, 90)");
  if (!std::isfinite(longitude_deg)) throw ConfigError("ground_station.longitude_deg: must be finite");
}

Constellation::Constellation(const WalkerConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  radius_ = cfg_.earth_radius_km + cfg_.altitude_km;
  mean_motion_ = std::sqrt(kEarthMuKm3PerS2 / (radius_ * radius_ * radius_));
  cos_inc_ = std::cos(deg2rad(cfg_.inclination_deg));
  sin_inc_ = std::sin(deg2rad(cfg_.inclination_deg));

  if (cfg_.planes < 3) return;

  const int S = cfg_.sats_per_plane;
  const int P = cfg_.planes;
  neighbors_.resize(size());
  for (int p = 0; p < P; ++p) {
    for (int s = 0; s < S; ++s) {
      const int self = p * S + s;
      std::array<int, 4>& nb = neighbors_[self];
      nb[0] = p * S + (s + 1) % S;
      nb[1] = p * S + (s + S - 1) % S;
      const double u = initial_anomaly(self);
      int k = 2;
      for (int q : {(p + 1) % P, (p + P - 1) % P}) {
        int best = 0;
        double best_gap = std::numeric_limits<double>::infinity();
        for (int cand = 0; cand < S; ++cand) {
          const double gap = std::abs(wrap_pi(initial_anomaly(q * S + cand) - u));
          // Strict comparison with a small tolerance keeps the lower slot on ties.
          if (gap < best_gap - 1e-12) {
            best_gap = gap;
            best = cand;
          }
        }
        nb[k++] = q * S + best;
      }
    }
  }
}

int Constellation::flat(SatelliteId id) const {
  if (!valid(id)) throw TopologyError("satellite id out of range");
  return id.plane * cfg_.sats_per_plane + id.slot;
}

SatelliteId Constellation::id(int flat_index) const {
  if (flat_index < 0 || flat_index >= size()) throw TopologyError("flat index out of range");
  return {flat_index / cfg_.sats_per_plane, flat_index % cfg_.sats_per_plane};
}

bool Constellation::valid(SatelliteId id) const {
  return id.plane >= 0 && id.plane < cfg_.planes && id.slot >= 0 && id.slot < cfg_.sats_per_plane;
}

double Constellation::period_s() const { return kTwoPi / mean_motion_; }

double Constellation::intra_plane_chord_km() const {
  return 2.0 * radius_ * std::sin(std::numbers::pi / cfg_.sats_per_plane);
}

double Constellation::initial_anomaly(int flat_index) const {
  const int p = flat_index / cfg_.sats_per_plane;
  const int s = flat_index % cfg_.sats_per_plane;
  const double total = static_cast<double>(cfg_.planes) * cfg_.sats_per_plane;
  return kTwoPi * s / cfg_.sats_per_plane + kTwoPi * cfg_.phasing_factor * p / total;
}

double Constellation::raan(int plane) const { return kTwoPi * plane / cfg_.planes; }

Vec3 Constellation::position(int flat_index, double t) const {
  if (flat_index < 0 || flat_index >= size()) throw TopologyError("flat index out of range");
  const double u = initial_anomaly(flat_index) + mean_motion_ * (t - cfg_.epoch_s);
  const double om = raan(flat_index / cfg_.sats_per_plane);
  const double cu = std::cos(u), su = std::sin(u);
  const double co = std::cos(om), so = std::sin(om);
  return radius_ * Vec3(co * cu - so * su * cos_inc_, so * cu + co * su * cos_inc_, su * sin_inc_);
}

const std::array<int, 4>& Constellation::neighbors(int flat_index) const {
  if (neighbors_.empty()) throw TopologyError("ISL mesh requires planes >= 3");
  if (flat_index < 0 || flat_index >= size()) throw TopologyError("flat index out of range");
  return neighbors_[flat_index];
}

Constellation build_walker(const WalkerConfig& cfg) { return Constellation(cfg); }

Vec3 position_at(const Constellation& c, SatelliteId id, double t) { return c.position(c.flat(id), t); }

std::array<SatelliteId, 4> isl_neighbors(const Constellation& c, SatelliteId id) {
  const auto& nb = c.neighbors(c.flat(id));
  return {c.id(nb[0]), c.id(nb[1]), c.id(nb[2]), c.id(nb[3])};
}

Vec3 ground_station_position(const GroundStation& gs, double earth_radius_km, double t) {
  const double lat = deg2rad(gs.latitude_deg);
  const double lon = deg2rad(gs.longitude_deg) + kEarthRotationRadPerS * t;
  return earth_radius_km * Vec3(std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat));
}

double elevation_deg(const Vec3& station, const Vec3& target) {
  const Vec3 los = target - station;
  const double s = los.dot(station.normalized()) / los.norm();
  return std::asin(std::clamp(s, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

SatelliteId gs_access_satellite(const Constellation& c, const GroundStation& gs, double t,
                                std::optional<SatelliteId> previous) {
  const Vec3 site = ground_station_position(gs, c.config().earth_radius_km, t);
  if (previous) {
    if (elevation_deg(site, position_at(c, *previous, t)) >= gs.min_elevation_deg) return *previous;
  }
  int best = -1;
  double best_range = std::numeric_limits<double>::infinity();
  for (int i = 0; i < c.size(); ++i) {
    const Vec3 p = c.position(i, t);
    if (elevation_deg(site, p) < gs.min_elevation_deg) continue;
    const double range = (p - site).norm();
    if (range < best_range) {
      best_range = range;
      best = i;
    }
  }
  if (best < 0) throw VisibilityError("no satellite above the elevation mask at t=" + std::to_string(t));
  return c.id(best);
}

double remaining_visibility_s(const Constellation& c, const GroundStation& gs, SatelliteId sat, double t,
                              double resolution_s, double horizon_s) {
  double dt = 0.0;
  while (dt < horizon_s) {
    const Vec3 site = ground_station_position(gs, c.config().earth_radius_km, t + dt);
    if (elevation_deg(site, position_at(c, sat, t + dt)) < gs.min_elevation_deg) return dt;
    dt += resolution_s;
  }
  return horizon_s;
}

RouteTree::RouteTree(const Constellation& c, SatelliteId root, double eta, double t) : root_(c.flat(root)) {
  if (!c.has_isl_mesh()) throw RoutingError("routing requires the ISL mesh (planes >= 3)");
  if (!(eta >= 0.0)) throw ConfigError("routing.eta: must be >= 0");
  const int n = c.size();
  const double d_ref = c.intra_plane_chord_km();
  std::vector<Vec3> pos(n);
  for (int i = 0; i < n; ++i) pos[i] = c.position(i, t);
  auto weight = [&](int a, int b) { return 1.0 + eta * (pos[a] - pos[b]).norm() / d_ref; };

  cost_.assign(n, std::numeric_limits<double>::infinity());
  parent_.assign(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  cost_[root_] = 0.0;
  heap.emplace(0.0, root_);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > cost_[u]) continue;
    for (int v : c.neighbors(u)) {
      const double alt = d + weight(u, v);
      if (alt < cost_[v]) {
        cost_[v] = alt;
        heap.emplace(alt, v);
      }
    }
  }
  for (int u = 0; u < n; ++u) {
    if (!std::isfinite(cost_[u])) throw RoutingError("ISL graph is disconnected");
    if (u == root_) continue;
    int best = -1;
    for (int v : c.neighbors(u)) {
      const double via = cost_[v] + weight(u, v);
      if (std::abs(via - cost_[u]) <= 1e-9 * std::max(1.0, cost_[u]) && (best < 0 || v < best)) best = v;
    }
    parent_[u] = best;
  }
}

Route RouteTree::route_from(const Constellation& c, SatelliteId src, double t) const {
  Route r;
  int u = c.flat(src);
  r.hops.push_back(src);
  while (u != root_) {
    const int v = parent_[u];
    if (v < 0) throw RoutingError("route tree has no path to the root");
    r.hop_distance_km.push_back((c.position(u, t) - c.position(v, t)).norm());
    r.hops.push_back(c.id(v));
    u = v;
  }
  return r;
}

Route route_to_gs(const Constellation& c, SatelliteId src, SatelliteId gs_sat, double eta, std::optional<double> t) {
  const double at = t.value_or(c.config().epoch_s);
  return RouteTree(c, gs_sat, eta, at).route_from(c, src, at);
}

}  // namespace grant
