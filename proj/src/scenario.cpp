#include "grant/scenario.hpp"

#include "grant/errors.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace grant {

WindowTopology::WindowTopology(const Constellation& c, std::vector<int> sources, int gs_sat, double eta, double t)
    : start_time_s_(t), gs_sat_(gs_sat), sources_(std::move(sources)) {
  std::sort(sources_.begin(), sources_.end());
  if (std::adjacent_find(sources_.begin(), sources_.end()) != sources_.end())
    throw ConfigError("sources: duplicate satellite");
  const RouteTree tree(c, c.id(gs_sat), eta, t);
  parent_.resize(c.size());
  for (int i = 0; i < c.size(); ++i) parent_[i] = tree.next_hop(i);

  std::set<int> servers;
  for (int s : sources_) {
    auto nb = c.neighbors(s);
    std::sort(nb.begin(), nb.end());
    source_neighbors_.push_back(nb);
    servers.insert(s);
    servers.insert(nb.begin(), nb.end());
  }

  std::set<int> tx;
  std::set<std::pair<int, int>> edges;
  auto add_edge = [&](int a, int b) { edges.emplace(std::min(a, b), std::max(a, b)); };
  for (size_t i = 0; i < sources_.size(); ++i)
    for (int nb : source_neighbors_[i]) add_edge(sources_[i], nb);
  if (!sources_.empty()) {
    for (int server : servers) {
      int u = server;
      tx.insert(u);
      while (u != gs_sat_) {
        const int v = parent_[u];
        add_edge(u, v);
        tx.insert(v);
        u = v;
      }
    }
  }
  transmitters_.assign(tx.begin(), tx.end());
  tx_index_of_.assign(c.size(), -1);
  for (size_t i = 0; i < transmitters_.size(); ++i) {
    tx_index_of_[transmitters_[i]] = static_cast<int>(i);
    next_hop_.push_back(transmitters_[i] == gs_sat_ ? -1 : parent_[transmitters_[i]]);
  }

  std::set<int> involved(tx.begin(), tx.end());
  involved.insert(sources_.begin(), sources_.end());
  if (!sources_.empty()) involved.insert(gs_sat_);
  involved_.assign(involved.begin(), involved.end());
  involved_index_of_.assign(c.size(), -1);
  for (size_t i = 0; i < involved_.size(); ++i) involved_index_of_[involved_[i]] = static_cast<int>(i);
  edges_.assign(edges.begin(), edges.end());
}

int WindowTopology::transmitter_index(int flat) const {
  return flat >= 0 && flat < static_cast<int>(tx_index_of_.size()) ? tx_index_of_[flat] : -1;
}

int WindowTopology::involved_index(int flat) const {
  return flat >= 0 && flat < static_cast<int>(involved_index_of_.size()) ? involved_index_of_[flat] : -1;
}

std::vector<int> WindowTopology::route_from(int server) const {
  std::vector<int> hops{server};
  while (hops.back() != gs_sat_) hops.push_back(parent_[hops.back()]);
  return hops;
}

std::vector<int> select_sources(const Constellation& c, int n, std::uint64_t seed) {
  if (n < 0 || n > c.size()) throw ConfigError("n_sources: out of range");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, c.size() - 1);
  std::vector<char> blocked(c.size(), 0);
  std::vector<int> chosen;
  int attempts = 0;
  while (static_cast<int>(chosen.size()) < n) {
    if (++attempts > 1000 * std::max(n, 1)) throw ConfigError("n_sources: cannot place that many non-adjacent sources");
    const int cand = pick(rng);
    if (blocked[cand]) continue;
    chosen.push_back(cand);
    blocked[cand] = 1;
    for (int nb : c.neighbors(cand)) blocked[nb] = 1;
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

AccessWindow find_access_window(const Constellation& c, const GroundStation& gs, double epoch_s) {
  const SatelliteId first = gs_access_satellite(c, gs, epoch_s);
  const double setting = remaining_visibility_s(c, gs, first, epoch_s);
  AccessWindow w;
  w.start_s = epoch_s + setting;
  const SatelliteId next = gs_access_satellite(c, gs, w.start_s);
  w.gs_sat = c.flat(next);
  w.duration_s = remaining_visibility_s(c, gs, next, w.start_s);
  return w;
}

}  // namespace grant
