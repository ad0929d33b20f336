#include "grant/sec_sim.hpp"

#include "grant/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <string>
#include <tuple>

namespace grant {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Absorbs representation error of ratio * count before ceil/floor.
constexpr double kRoundingSlack = 1e-9;

double power_sum(std::span<const LinkAllocation> links, double psi_eps_w) {
  double total = 0.0;
  for (const LinkAllocation& l : links) total += l.used_power(psi_eps_w);
  return total;
}

// Scales the transmitter's powers so that the psi-weighted sum is <= P_max
// when evaluated exactly the way the constraint checker evaluates it.
void enforce_power_budget(std::span<LinkAllocation> links, double max_power_w) {
  double total = power_sum(links, 0.0);
  if (total <= max_power_w) return;
  double scale = max_power_w / total;
  for (int guard = 0; guard < 64 && total > max_power_w; ++guard) {
    for (LinkAllocation& l : links) l.power_w *= scale;
    total = power_sum(links, 0.0);
    scale = 1.0 - 1e-15;
  }
}

void require_ratios(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what) {
  if (!m.allFinite()) throw ActionError(std::string(what) + ": non-finite ratio");
  if ((m.array() < 0.0).any()) throw ActionError(std::string(what) + ": negative ratio");
}

}  // namespace

void ComputeParams::validate() const {
  if (!(cycles_per_byte > 0.0)) throw ConfigError("compute.cycles_per_byte: must be > 0");
  if (!(cycles_per_second > 0.0)) throw ConfigError("compute.cycles_per_second: must be > 0");
  if (!(outcome_ratio >= 0.0 && outcome_ratio <= 1.0)) throw ConfigError("compute.outcome_ratio: must be in [0, 1]");
}

void RewardParams::validate() const {
  if (!(chi1 > 0.0)) throw ConfigError("reward.chi1: must be > 0");
  if (!(latency_threshold_s >= 0.0)) throw ConfigError("reward.latency_threshold_s: must be >= 0");
  if (!(w_below > 0.0)) throw ConfigError("reward.w_below: must be > 0");
  if (!(w_above >= w_below)) throw ConfigError("reward.w_above: must be >= w_below");
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("reward.kappa: must be in [0, 1]");
  if (!(delay_cap_s > 0.0)) throw ConfigError("reward.delay_cap_s: must be > 0");
}

OffloadRow quantize_offload(std::span<const double> ratios, int n_tasks) {
  if (ratios.size() != 5) throw ActionError("quantize_offload: expected 5 ratios");
  if (n_tasks < 0) throw ActionError("quantize_offload: negative task count");
  double sum = 0.0;
  for (double r : ratios) {
    if (!std::isfinite(r) || r < -1e-6) throw ActionError("quantize_offload: ratio outside the simplex");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ActionError("quantize_offload: ratios do not sum to 1");

  OffloadRow row;
  int remaining = n_tasks;
  for (int j = 0; j < 4; ++j) {
    const double want = std::ceil(std::max(0.0, ratios[j + 1]) * n_tasks - kRoundingSlack);
    const int take = std::min(remaining, static_cast<int>(std::max(0.0, want)));
    row.to_neighbor[j] = take;
    remaining -= take;
  }
  row.self_tasks = remaining;
  return row;
}

std::vector<int> quantize_subarrays(std::span<const double> ratios, int active_links, int s_max) {
  if (active_links < 0 || static_cast<int>(ratios.size()) != active_links)
    throw ActionError("quantize_subarrays: one ratio per active link is required");
  if (active_links > s_max) throw ActionError("quantize_subarrays: more active links than sub-arrays");
  double sum = 0.0;
  for (double r : ratios) {
    if (!std::isfinite(r) || r < 0.0) throw ActionError("quantize_subarrays: negative ratio");
    sum += r;
  }
  if (sum > 1.0 + 1e-6) throw ActionError("quantize_subarrays: ratios exceed the budget");

  const int spare = s_max - active_links;
  std::vector<int> out(active_links);
  int total = 0;
  for (int i = 0; i < active_links; ++i) {
    out[i] = 1 + static_cast<int>(std::floor(ratios[i] * spare + kRoundingSlack));
    total += out[i];
  }
  while (total > s_max) {
    auto it = std::max_element(out.begin(), out.end());
    --*it;
    --total;
  }
  return out;
}

double computation_delay(double bytes, const ComputeParams& p) { return bytes * p.cycles_per_byte / p.cycles_per_second; }

std::int64_t outcome_size(std::int64_t bytes, const ComputeParams& p) {
  if (bytes <= 0) return 0;
  return static_cast<std::int64_t>(std::ceil(p.outcome_ratio * static_cast<double>(bytes) - kRoundingSlack));
}

double LinkAllocation::used_power(double psi_eps_w) const {
  double total = 0.0;
  for (Eigen::Index k = 0; k < power_w.size(); ++k)
    if (power_w(k) > psi_eps_w) total += power_w(k);
  return total;
}

SlotDecision quantize_action(const WindowTopology& topo, const RatioAction& a, std::span<const int> tasks,
                             int subbands_to, int subbands_ot, double max_power_w, int max_subarrays) {
  const int ns = topo.source_count();
  const int nt = topo.transmitter_count();
  if (static_cast<int>(tasks.size()) != ns) throw DimensionError("quantize_action: one task count per source");
  if (a.offload.rows() != ns || a.offload.cols() != 5 || a.subarray_to.rows() != ns || a.subarray_to.cols() != 5 ||
      a.power_to.rows() != ns || a.power_to.cols() != 4 * subbands_to + 1 || a.subarray_ot.size() != nt ||
      a.power_ot.rows() != nt || a.power_ot.cols() != subbands_ot + 1)
    throw DimensionError("quantize_action: action shape does not match the window topology");
  require_ratios(a.offload, "offload");
  require_ratios(a.subarray_to, "subarray_to");
  require_ratios(a.power_to, "power_to");
  require_ratios(a.subarray_ot, "subarray_ot");
  require_ratios(a.power_ot, "power_ot");
  if ((a.subarray_ot.array() > 1.0 + 1e-12).any()) throw ActionError("subarray_ot: ratio above 1");

  SlotDecision d;
  d.tasks.assign(tasks.begin(), tasks.end());
  for (int i = 0; i < ns; ++i) {
    const Eigen::RowVectorXd off = a.offload.row(i);
    d.assignment.push_back(quantize_offload(std::span<const double>(off.data(), 5), tasks[i]));

    const Eigen::RowVectorXd sub = a.subarray_to.row(i).head(4);
    const std::vector<int> counts = quantize_subarrays(std::span<const double>(sub.data(), 4), 4, max_subarrays);
    if (a.power_to.row(i).head(4 * subbands_to).sum() > 1.0 + 1e-6) throw ActionError("power_to: ratios exceed 1");
    const auto& nb = topo.neighbors_of_source(i);
    const size_t first = d.offloading.size();
    for (int j = 0; j < 4; ++j) {
      LinkAllocation l;
      l.tx = topo.sources()[i];
      l.rx = nb[j];
      l.subarrays = counts[j];
      l.power_w = a.power_to.row(i).segment(j * subbands_to, subbands_to).transpose() * max_power_w;
      d.offloading.push_back(std::move(l));
    }
    enforce_power_budget(std::span<LinkAllocation>(d.offloading.data() + first, 4), max_power_w);
  }
  for (int t = 0; t < nt; ++t) {
    const double s = a.subarray_ot(t);
    if (a.power_ot.row(t).head(subbands_ot).sum() > 1.0 + 1e-6) throw ActionError("power_ot: ratios exceed 1");
    LinkAllocation l;
    l.tx = topo.transmitters()[t];
    l.rx = topo.next_hop(t);
    l.subarrays = quantize_subarrays(std::span<const double>(&s, 1), 1, max_subarrays)[0];
    l.power_w = a.power_ot.row(t).head(subbands_ot).transpose() * max_power_w;
    d.outcome.push_back(std::move(l));
    enforce_power_budget(std::span<LinkAllocation>(&d.outcome.back(), 1), max_power_w);
  }
  return d;
}

ConstraintReport check_constraints(const WindowTopology& topo, const SlotDecision& d, double max_power_w,
                                   int max_subarrays, double psi_eps_w) {
  ConstraintReport r;
  for (int i = 0; i < topo.source_count(); ++i) {
    const OffloadRow& row = d.assignment.at(i);
    if (row.total() != d.tasks.at(i)) ++r.task_conservation;
    if (row.self_tasks < 0 || std::any_of(row.to_neighbor.begin(), row.to_neighbor.end(), [](int v) { return v < 0; }))
      ++r.negative_entries;
  }
  auto check_phase = [&](std::span<const LinkAllocation> links) {
    std::map<int, std::pair<double, int>> per_tx;
    for (const LinkAllocation& l : links) {
      auto& [power, subarrays] = per_tx[l.tx];
      power += l.used_power(psi_eps_w);
      subarrays += l.subarrays;
      if (l.subarrays < 1 || (l.power_w.array() < 0.0).any()) ++r.negative_entries;
    }
    for (const auto& [tx, usage] : per_tx) {
      if (usage.first > max_power_w) ++r.power_budget;
      if (usage.second > max_subarrays) ++r.subarray_budget;
    }
  };
  // Power is summed per transmitter in allocation order, matching enforce_power_budget.
  check_phase(d.offloading);
  check_phase(d.outcome);
  return r;
}

ResourceUsage resource_usage(std::span<const LinkAllocation> alloc_to, std::span<const LinkAllocation> alloc_ot,
                             double max_power_w, int max_subarrays, double psi_eps_w) {
  ResourceUsage out;
  auto accumulate = [&](std::span<const LinkAllocation> links, Phase phase) {
    std::map<int, TransmitterUsage> per_tx;
    for (const LinkAllocation& l : links) {
      TransmitterUsage& u = per_tx[l.tx];
      u.sat = l.tx;
      u.phase = phase;
      u.power_w += l.used_power(psi_eps_w);
      u.subarrays += l.subarrays;
    }
    for (auto& [tx, u] : per_tx) {
      u.u_p = u.power_w / max_power_w;
      u.u_s = static_cast<double>(u.subarrays) / max_subarrays;
      u.u = 0.5 * (u.u_p + u.u_s);
      out.per_transmitter.push_back(u);
    }
  };
  accumulate(alloc_to, Phase::offloading);
  accumulate(alloc_ot, Phase::outcome);
  if (out.per_transmitter.empty()) return out;
  for (const TransmitterUsage& u : out.per_transmitter) {
    out.u_p += u.u_p;
    out.u_s += u.u_s;
    out.power_w_mean += u.power_w;
    out.subarrays_mean += u.subarrays;
  }
  const double n = static_cast<double>(out.per_transmitter.size());
  out.u_p /= n;
  out.u_s /= n;
  out.u = 0.5 * (out.u_p + out.u_s);
  out.power_w_mean /= n;
  out.subarrays_mean /= n;
  return out;
}

double reward(double usage, double t_avg_s, const RewardParams& rp) {
  const double below = std::min(t_avg_s, rp.latency_threshold_s);
  const double above = std::max(0.0, t_avg_s - rp.latency_threshold_s);
  return -(rp.chi1 * usage + rp.w_below * below + rp.w_above * above);
}

namespace {

SlotOutcome simulate_core(const Constellation& c, const WindowTopology& topo, const SlotDecision& d,
                          const SimParams& p, double t, const Eigen::VectorXd& off_rate,
                          const Eigen::VectorXd& out_rate) {
  const int ns = topo.source_count();
  const int nt = topo.transmitter_count();
  if (static_cast<int>(d.assignment.size()) != ns || static_cast<int>(d.tasks.size()) != ns ||
      static_cast<int>(d.offloading.size()) != 4 * ns || static_cast<int>(d.outcome.size()) != nt ||
      off_rate.size() != 4 * ns || out_rate.size() != nt)
    throw DimensionError("simulate_slot: decision does not match the window topology");

  const double re = c.config().earth_radius_km;
  const Vec3 gs_pos = ground_station_position(p.ground_station, re, t);
  auto pos = [&](int flat) { return flat < 0 ? gs_pos : c.position(flat, t); };
  auto propagation = [&](int a, int b) { return (pos(a) - pos(b)).norm() / kSpeedOfLightKmPerS; };

  std::map<int, long long> server_tasks;
  for (int i = 0; i < ns; ++i) {
    server_tasks[topo.sources()[i]] += d.assignment[i].self_tasks;
    const auto& nb = topo.neighbors_of_source(i);
    for (int j = 0; j < 4; ++j) server_tasks[nb[j]] += d.assignment[i].to_neighbor[j];
  }

  SlotOutcome out;
  out.offload_rate_bps = off_rate;
  out.outcome_rate_bps = out_rate;
  out.buffers.resize(nt);
  for (int k = 0; k < nt; ++k) {
    out.buffers[k].tx = topo.transmitters()[k];
    out.buffers[k].rx = topo.next_hop(k);
  }

  struct Chunk {
    double bytes;
  };
  std::vector<Chunk> chunks;
  // (time, source flat, server flat, path index, node)
  using Event = std::tuple<double, int, int, int, int>;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;

  for (int i = 0; i < ns; ++i) {
    const int src = topo.sources()[i];
    const auto& nb = topo.neighbors_of_source(i);
    const OffloadRow& row = d.assignment[i];
    for (int j = -1; j < 4; ++j) {
      const int tasks = j < 0 ? row.self_tasks : row.to_neighbor[j];
      if (tasks <= 0) continue;
      PathDelay path;
      path.source = src;
      path.server = j < 0 ? src : nb[j];
      path.tasks = tasks;
      const double bytes = tasks * p.task_size_bytes;
      if (j >= 0) {
        const double r = off_rate(4 * i + j);
        path.offload_s = r > 0.0 ? bytes * 8.0 / r + propagation(src, path.server) : kInf;
      }
      path.compute_s = computation_delay(server_tasks[path.server] * p.task_size_bytes, p.compute);
      const double ready = path.offload_s + path.compute_s;
      const auto result_bytes = outcome_size(static_cast<std::int64_t>(std::llround(bytes)), p.compute);
      path.total_s = ready;
      path.infinite = !std::isfinite(ready);
      const int index = static_cast<int>(out.paths.size());
      out.paths.push_back(path);
      chunks.push_back({static_cast<double>(result_bytes)});
      if (result_bytes > 0 && !path.infinite) events.emplace(ready, src, path.server, index, path.server);
      if (result_bytes > 0 && path.infinite) out.paths[index].outcome_s = kInf;
    }
  }

  std::vector<double> link_free(nt, 0.0);
  while (!events.empty()) {
    const auto [time, src, server, index, node] = events.top();
    events.pop();
    const int k = topo.transmitter_index(node);
    if (k < 0) throw RoutingError("simulate_slot: outcome reached a satellite outside the route tree");
    const double bytes = chunks[index].bytes;
    const double rate = out_rate(k);
    BufferStats& buf = out.buffers[k];
    buf.bytes_in += bytes;
    PathDelay& path = out.paths[index];
    const double start = std::max(time, link_free[k]);
    if (!(rate > 0.0) || !std::isfinite(start)) {
      link_free[k] = kInf;
      path.infinite = true;
      path.outcome_s = path.total_s = kInf;
      continue;
    }
    buf.peak_backlog_bytes = std::max(buf.peak_backlog_bytes, (start - time) * rate / 8.0 + bytes);
    const double finish = start + bytes * 8.0 / rate;
    link_free[k] = finish;
    buf.bytes_out += bytes;
    const int next = topo.next_hop(k);
    const double arrival = finish + propagation(node, next);
    if (next < 0) {
      path.total_s = arrival;
      path.outcome_s = arrival - (path.offload_s + path.compute_s);
    } else {
      events.emplace(arrival, src, server, index, next);
    }
  }

  out.source_delay_s.assign(ns, 0.0);
  for (const PathDelay& path : out.paths) {
    const int i = static_cast<int>(std::lower_bound(topo.sources().begin(), topo.sources().end(), path.source) -
                                   topo.sources().begin());
    out.source_delay_s[i] = std::max(out.source_delay_s[i], path.infinite ? kInf : path.total_s);
  }
  double capped_sum = 0.0, sum = 0.0;
  for (double v : out.source_delay_s) {
    sum += v;
    capped_sum += std::min(v, p.reward.delay_cap_s);
    out.t_max_s = std::max(out.t_max_s, v);
    if (!std::isfinite(v)) out.infinite_delay = true;
  }
  out.t_avg_s = ns > 0 ? sum / ns : 0.0;
  const double t_avg_capped = ns > 0 ? capped_sum / ns : 0.0;

  out.usage = resource_usage(d.offloading, d.outcome, p.budget.max_power_w, p.array.max_tx_subarrays,
                             p.budget.psi_eps_w);
  out.reward = reward(out.usage.u, t_avg_capped, p.reward);
  return out;
}

double mean_sinr_db(const LinkEvaluation& e, const Eigen::VectorXd& power, double eps) {
  double sum = 0.0;
  int used = 0;
  for (Eigen::Index k = 0; k < power.size(); ++k)
    if (power(k) > eps) {
      sum += e.gamma(k);
      ++used;
    }
  if (used == 0) return std::numeric_limits<double>::quiet_NaN();
  return 10.0 * std::log10(std::max(sum / used, 1e-30));
}

}  // namespace

SlotOutcome simulate_slot_with_rates(const Constellation& c, const WindowTopology& topo, const SlotDecision& d,
                                     const SimParams& p, double t, const Eigen::VectorXd& offload_rate_bps,
                                     const Eigen::VectorXd& outcome_rate_bps) {
  return simulate_core(c, topo, d, p, t, offload_rate_bps, outcome_rate_bps);
}

SlotOutcome simulate_slot(const Constellation& c, const WindowTopology& topo, const SlotDecision& d,
                          const SimParams& p, double t, double interference_w) {
  const int ns = topo.source_count();
  const int nt = topo.transmitter_count();
  if (static_cast<int>(d.offloading.size()) != 4 * ns || static_cast<int>(d.outcome.size()) != nt)
    throw DimensionError("simulate_slot: decision does not match the window topology");
  const double re = c.config().earth_radius_km;
  const Vec3 gs_pos = ground_station_position(p.ground_station, re, t);
  auto pos = [&](int flat) { return flat < 0 ? gs_pos : c.position(flat, t); };

  Eigen::VectorXd off_rate(4 * ns), out_rate(nt), off_sinr(4 * ns), out_sinr(nt);
  auto eval = [&](const LinkAllocation& l, Phase phase) {
    return evaluate_link(pos(l.tx), pos(l.rx), l.subarrays, p.array.rx_subarrays_per_link, l.power_w,
                         p.band.plan(phase), p.band.gain_scale(phase), p.array, p.budget, interference_w, re);
  };
  for (int i = 0; i < 4 * ns; ++i) {
    const LinkEvaluation e = eval(d.offloading[i], Phase::offloading);
    off_rate(i) = e.rate_bps;
    off_sinr(i) = mean_sinr_db(e, d.offloading[i].power_w, p.budget.psi_eps_w);
  }
  for (int k = 0; k < nt; ++k) {
    const LinkEvaluation e = eval(d.outcome[k], Phase::outcome);
    out_rate(k) = e.rate_bps;
    out_sinr(k) = mean_sinr_db(e, d.outcome[k].power_w, p.budget.psi_eps_w);
  }
  SlotOutcome out = simulate_core(c, topo, d, p, t, off_rate, out_rate);
  out.offload_sinr_db = off_sinr;
  out.outcome_sinr_db = out_sinr;
  return out;
}

}  // namespace grant
