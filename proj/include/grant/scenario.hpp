#pragma once

// Topology frozen for one ground-station access window: sources, their ISL
// neighbours (the candidate computing servers), the outcome routing tree and
// the set of satellites that take part in computation or transmission.

#include "grant/constellation.hpp"

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace grant {

class WindowTopology {
 public:
  WindowTopology(const Constellation& c, std::vector<int> sources, int gs_sat, double eta, double t);

  double start_time_s() const { return start_time_s_; }
  int gs_sat() const { return gs_sat_; }

  // Source satellites (flat ids, ascending) and their 4 neighbours (ascending).
  const std::vector<int>& sources() const { return sources_; }
  const std::array<int, 4>& neighbors_of_source(int source_index) const { return source_neighbors_[source_index]; }
  int source_count() const { return static_cast<int>(sources_.size()); }

  // Outcome-phase transmitters: every satellite on a route from a candidate
  // server to the GS-connected satellite, the latter included (downlink).
  const std::vector<int>& transmitters() const { return transmitters_; }
  int transmitter_count() const { return static_cast<int>(transmitters_.size()); }
  // Next hop of transmitter `tx_index`; -1 denotes the ground station.
  int next_hop(int tx_index) const { return next_hop_[tx_index]; }
  int transmitter_index(int flat) const;  // -1 if not a transmitter

  // Involved satellites (ascending) and the undirected route/offload graph.
  const std::vector<int>& involved() const { return involved_; }
  int involved_count() const { return static_cast<int>(involved_.size()); }
  int involved_index(int flat) const;  // -1 if not involved
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

  // Flat ids from `server` to the GS-connected satellite inclusive.
  std::vector<int> route_from(int server) const;

 private:
  double start_time_s_;
  int gs_sat_;
  std::vector<int> sources_;
  std::vector<std::array<int, 4>> source_neighbors_;
  std::vector<int> parent_;  // route tree, whole constellation
  std::vector<int> transmitters_;
  std::vector<int> next_hop_;
  std::vector<int> tx_index_of_;
  std::vector<int> involved_;
  std::vector<int> involved_index_of_;
  std::vector<std::pair<int, int>> edges_;
};

// Uniform random draw of `n` satellites, rejecting any candidate adjacent to
// (or equal to) an already chosen one. Result sorted ascending.
std::vector<int> select_sources(const Constellation& c, int n, std::uint64_t seed);

struct AccessWindow {
  double start_s = 0.0;
  double duration_s = 0.0;
  int gs_sat = -1;
};

// First hand-over at or after `epoch_s`: the satellite nearest at `epoch_s`
// is followed until it sets; the window begins when its successor is picked.
AccessWindow find_access_window(const Constellation& c, const GroundStation& gs, double epoch_s);

}  // namespace grant
