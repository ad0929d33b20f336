#include "grant/trainer.hpp"

#include "grant/baselines.hpp"
#include "grant/errors.hpp"

#include <chrono>

namespace grant {

namespace {

WindowTopology frozen_topology(const Constellation& c, const AccessWindow& w, const std::vector<int>& sources,
                               double eta) {
  return WindowTopology(c, sources, w.gs_sat, eta, w.start_s);
}

}  // namespace

Scenario build_scenario(const ExperimentConfig& cfg) {
  cfg.validate();
  Constellation c(cfg.constellation);
  const AccessWindow w = find_access_window(c, cfg.ground_station, cfg.constellation.epoch_s);
  std::vector<int> sources = select_sources(c, cfg.n_sources, cfg.source_seed);
  WindowTopology topo = frozen_topology(c, w, sources, cfg.routing_eta);
  GraphContext g = prune_involved(topo);
  SimParams sim = cfg.sim_params();
  const ActionShape shape = action_shape(topo, sim);
  return Scenario{std::move(c), w, std::move(sources), std::move(topo), std::move(g), std::move(sim), shape};
}

std::unique_ptr<Policy> make_policy(const std::string& name, const Scenario& sc, const ExperimentConfig& cfg) {
  if (name == "grant") return make_grant_agent(sc.graph, sc.shape, cfg.train, cfg.grant);
  if (name == "maddpg_fc") return make_maddpg_agent(sc.graph, sc.shape, cfg.train, cfg.maddpg);
  if (name == "uniform") return make_uniform_policy(sc.shape);
  if (name == "full") return make_full_resource_policy(sc.shape);
  throw ConfigError("policy: unknown policy '" + name + "'");
}

Environment::Environment(const Scenario& sc, const TrafficConfig& traffic, Eigen::MatrixXi counts,
                         std::uint64_t seed)
    : sc_(sc), traffic_(traffic), counts_(std::move(counts)), seed_(seed), rng_(seed ^ 0xbb67ae8584caa73bULL) {
  if (counts_.rows() != sc_.topology.source_count() || counts_.cols() < 1)
    throw DimensionError("Environment: one traffic row per source is required");
  encoding_.task_size_bytes = traffic_.task_size_bytes;
  encoding_.mean_bytes_per_slot = traffic_.mean_bytes_per_slot();
  encoding_.outcome_ratio = sc_.sim.compute.outcome_ratio;
}

double Environment::slot_time(int slot) const { return sc_.window.start_s + slot * traffic_.slot_duration_s; }

std::vector<int> Environment::tasks(int slot) const {
  if (slot >= counts_.cols()) throw TrainingError("Environment: traffic exhausted at slot " + std::to_string(slot));
  std::vector<int> out(counts_.rows());
  for (Eigen::Index i = 0; i < counts_.rows(); ++i) out[i] = counts_(i, slot);
  return out;
}

double Environment::sample_interference() {
  const LinkBudgetParams& b = sc_.sim.budget;
  if (b.interference_std_w == 0.0) return b.interference_mean_w;
  std::normal_distribution<double> n(b.interference_mean_w, b.interference_std_w);
  return std::max(0.0, n(rng_));
}

Observation Environment::reset() {
  slot_ = 0;
  rng_.seed(seed_ ^ 0xbb67ae8584caa73bULL);
  const std::vector<int> t0 = tasks(0);
  const SimParams& p = sc_.sim;
  previous_ = quantize_action(sc_.topology, full_resource_ratios(sc_.shape), t0, sc_.shape.subbands_to,
                              sc_.shape.subbands_ot, p.budget.max_power_w, p.array.max_tx_subarrays);
  previous_outcome_ = simulate_slot(sc_.constellation, sc_.topology, previous_, p, slot_time(0), p.budget.interference_mean_w);
  return encode_state(sc_.constellation, sc_.topology, sc_.graph, t0, previous_, previous_outcome_, encoding_);
}

EnvStep Environment::step(const RatioAction& action) {
  const SimParams& p = sc_.sim;
  EnvStep out;
  out.time_s = slot_time(slot_);
  const std::vector<int> now = tasks(slot_);
  out.decision = quantize_action(sc_.topology, action, now, sc_.shape.subbands_to, sc_.shape.subbands_ot,
                                 p.budget.max_power_w, p.array.max_tx_subarrays);
  out.constraints = check_constraints(sc_.topology, out.decision, p.budget.max_power_w, p.array.max_tx_subarrays,
                                      p.budget.psi_eps_w);
  out.interference_w = sample_interference();
  out.outcome = simulate_slot(sc_.constellation, sc_.topology, out.decision, p, out.time_s, out.interference_w);
  ++slot_;
  previous_ = out.decision;
  previous_outcome_ = out.outcome;
  const std::vector<int> next = tasks(slot_);
  out.next = encode_state(sc_.constellation, sc_.topology, sc_.graph, next, previous_, previous_outcome_, encoding_);
  return out;
}

TrainingHistory run_training(Environment& env, Policy& policy, const TrainConfig& cfg, bool learn,
                             const TrainingHooks& hooks) {
  cfg.validate();
  const bool learning = learn && policy.learns();
  TrainingHistory h;
  const auto run_start = std::chrono::steady_clock::now();
  Observation s = env.reset();
  if (learning && hooks.on_checkpoint) hooks.on_checkpoint(0);
  for (int step = 0; step < cfg.steps; ++step) {
    const auto start = std::chrono::steady_clock::now();
    const RatioAction a = policy.act(s, learning);
    EnvStep e = env.step(a);
    StepRecord r;
    r.step = step;
    if (learning) {
      r.learn = policy.learn({&s, &a, e.outcome.reward, &e.next});
      r.learned = true;
    }
    r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const ResourceUsage& u = e.outcome.usage;
    r.u = u.u;
    r.u_p = u.u_p;
    r.u_s = u.u_s;
    r.t_avg_s = e.outcome.t_avg_s;
    r.t_max_s = e.outcome.t_max_s;
    r.reward = e.outcome.reward;
    r.power_w_mean = u.power_w_mean;
    r.subarrays_mean = u.subarrays_mean;
    r.infinite_delay = e.outcome.infinite_delay;
    r.constraint_violations = e.constraints.total();
    h.constraint_violations += r.constraint_violations;
    h.steps.push_back(r);
    if (hooks.on_step) hooks.on_step(r, e);
    s = std::move(e.next);
    const bool periodic = cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0;
    if (learning && hooks.on_checkpoint && (periodic || step + 1 == cfg.steps)) hooks.on_checkpoint(step + 1);
  }
  h.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();
  return h;
}

}  // namespace grant
