#pragma once

// Scenario assembly for one access window, the slot-stepping environment
// and the on-policy training loop shared by every policy.

#include "grant/agent.hpp"
#include "grant/config.hpp"
#include "grant/scenario.hpp"
#include "grant/sec_sim.hpp"

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <random>
#include <vector>

namespace grant {

struct Scenario {
  Constellation constellation;
  AccessWindow window;
  std::vector<int> sources;
  WindowTopology topology;
  GraphContext graph;
  SimParams sim;
  ActionShape shape;
};

// Constellation, first access window after the epoch, sources and the
// frozen topology / pruned graph for that window.
Scenario build_scenario(const ExperimentConfig& cfg);

std::unique_ptr<Policy> make_policy(const std::string& name, const Scenario& sc, const ExperimentConfig& cfg);

struct EnvStep {
  SlotDecision decision;
  SlotOutcome outcome;
  ConstraintReport constraints;
  Observation next;
  double time_s = 0.0;
  double interference_w = 0.0;
};

class Environment {
 public:
  // `counts` holds one column per slot; at least steps + 1 columns.
  Environment(const Scenario& sc, const TrafficConfig& traffic, Eigen::MatrixXi counts, std::uint64_t seed);

  // Observation of slot 0, with SINR estimates from the full-resource
  // allocation.
  Observation reset();
  EnvStep step(const RatioAction& action);

  int slot() const { return slot_; }
  double slot_time(int slot) const;
  const Eigen::MatrixXi& counts() const { return counts_; }
  const Scenario& scenario() const { return sc_; }

 private:
  std::vector<int> tasks(int slot) const;
  double sample_interference();

  const Scenario& sc_;
  TrafficConfig traffic_;
  Eigen::MatrixXi counts_;
  EncodingParams encoding_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  int slot_ = 0;
  SlotDecision previous_;
  SlotOutcome previous_outcome_;
};

struct StepRecord {
  int step = 0;
  double u = 0.0;
  double u_p = 0.0;
  double u_s = 0.0;
  double t_avg_s = 0.0;
  double t_max_s = 0.0;
  double reward = 0.0;
  double power_w_mean = 0.0;
  double subarrays_mean = 0.0;
  bool infinite_delay = false;
  int constraint_violations = 0;
  bool learned = false;
  LearnStats learn;
  double wall_s = 0.0;
};

struct TrainingHooks {
  std::function<void(const StepRecord&, const EnvStep&)> on_step;
  // Called with the number of completed steps (0 before the first).
  std::function<void(int)> on_checkpoint;
};

struct TrainingHistory {
  std::vector<StepRecord> steps;
  std::int64_t constraint_violations = 0;
  double wall_s = 0.0;
};

// Runs `steps` slots: act (with exploration when the policy learns), step
// the environment, learn from the transition. Checkpoint hooks fire at 0,
// every `checkpoint_every` steps and after the last step for learning policies.
TrainingHistory run_training(Environment& env, Policy& policy, const TrainConfig& cfg, bool learn,
                             const TrainingHooks& hooks = {});

}  // namespace grant
