#pragma once

// GRANT: pruned graph state of the involved satellites, multi-task GCN actors
// for the offloading and outcome phases, one centralized GCN critic, safe
// initialization / exploration and the on-policy actor-critic update.

#include "grant/constellation.hpp"
#include "grant/nn.hpp"
#include "grant/scenario.hpp"
#include "grant/sec_sim.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace grant {

inline constexpr int kOffloadFeatures = 9;  // n_p, n_s, L_e, 4 x SINR, is_source, is_gs
inline constexpr int kOutcomeFeatures = 8;  // n_p, n_s, L_e, 4 x SINR, is_gs
inline constexpr double kSinrScaleDb = 60.0;

// Involved satellites of one window and the graph the networks run on.
// Row indices refer to positions in `nodes`.
struct GraphContext {
  std::vector<int> nodes;  // flat ids, ascending
  std::vector<std::pair<int, int>> edges;
  nn::SparseMatrix adjacency;  // normalized, self-loops included
  std::vector<int> source_rows;
  std::vector<int> transmitter_rows;
  int gs_row = -1;
  // Rows on the outcome route from each candidate server of each source,
  // server first: slot 0 = self, 1..4 = neighbours (ascending flat id).
  std::vector<std::array<std::vector<int>, 5>> server_routes;

  int size() const { return static_cast<int>(nodes.size()); }
};

// Sources, their neighbours, every route hop and the GS satellite, linked by
// offload edges and adjacent route hops.
GraphContext prune_involved(const WindowTopology& topo);

struct Observation {
  Eigen::MatrixXd offloading;  // nodes x kOffloadFeatures
  Eigen::MatrixXd outcome;     // nodes x kOutcomeFeatures
};

struct EncodingParams {
  double task_size_bytes = 2500.0;
  double mean_bytes_per_slot = 122.0 * 2500.0;
  double outcome_ratio = 0.1;
};

// SINR in dB clipped to +-60 and scaled to [-1, 1]; NaN (unused link) -> 0.
double normalized_sinr(double sinr_db);

// Features of slot `tasks` given the decision and outcome realized in the
// previous slot (SINR estimates and offload fractions).
Observation encode_state(const Constellation& c, const WindowTopology& topo, const GraphContext& g,
                         std::span<const int> tasks, const SlotDecision& previous, const SlotOutcome& previous_outcome,
                         const EncodingParams& p);

struct ActionShape {
  int sources = 0;
  int transmitters = 0;
  int subbands_to = 5;
  int subbands_ot = 5;

  int offload_width() const { return 5 + 5 + 4 * subbands_to + 1; }
  int outcome_width() const { return 1 + subbands_ot + 1; }
};

ActionShape action_shape(const WindowTopology& topo, const SimParams& p);

struct ActionVars {
  nn::Tape::Var offload;      // sources x 5
  nn::Tape::Var subarray_to;  // sources x 5
  nn::Tape::Var power_to;     // sources x (4K + 1)
  nn::Tape::Var subarray_ot;  // transmitters x 1
  nn::Tape::Var power_ot;     // transmitters x (K + 1)
};

RatioAction to_ratios(const nn::Tape& t, const ActionVars& a);
ActionVars constant_action(nn::Tape& t, const RatioAction& a);

// Per-node critic input: both phase states plus the node's action ratios,
// zero-padded where the node does not act.
nn::Tape::Var critic_node_features(nn::Tape& t, const GraphContext& g, const Observation& s, const ActionVars& a);
int critic_feature_width(const ActionShape& shape);

class ActorCriticModel {
 public:
  virtual ~ActorCriticModel() = default;
  virtual ActionVars actor_forward(nn::Tape& t, const Observation& s) = 0;
  virtual nn::Tape::Var critic_forward(nn::Tape& t, const Observation& s, const ActionVars& a) = 0;
  virtual nn::ParameterSet& actor_params() = 0;
  virtual nn::ParameterSet& critic_params() = 0;
  virtual const nn::ParameterSet& actor_params() const = 0;
  virtual const nn::ParameterSet& critic_params() const = 0;

  std::int64_t parameter_count() const { return actor_params().scalar_count() + critic_params().scalar_count(); }
};

struct GrantDims {
  int gcn_width = 128;
  int critic_hidden = 64;
  // Head weights start this much smaller than Xavier so the safe-init
  // biases dominate the first actions.
  double head_init_scale = 0.1;
};

class GrantModel : public ActorCriticModel {
 public:
  GrantModel(GraphContext graph, ActionShape shape, GrantDims dims, std::uint64_t seed);

  ActionVars actor_forward(nn::Tape& t, const Observation& s) override;
  nn::Tape::Var critic_forward(nn::Tape& t, const Observation& s, const ActionVars& a) override;
  nn::ParameterSet& actor_params() override { return actor_; }
  nn::ParameterSet& critic_params() override { return critic_; }
  const nn::ParameterSet& actor_params() const override { return actor_; }
  const nn::ParameterSet& critic_params() const override { return critic_; }

  const GraphContext& graph() const { return graph_; }

 private:
  nn::Tape::Var gcn_stack(nn::Tape& t, nn::Tape::Var x, const std::string& prefix, nn::ParameterSet& ps);

  GraphContext graph_;
  ActionShape shape_;
  GrantDims dims_;
  nn::ParameterSet actor_;
  nn::ParameterSet critic_;
};

// Dense layer parameters "<name>.w" (in x out) and "<name>.b" (1 x out).
void add_dense(nn::ParameterSet& ps, const std::string& name, int in, int out, std::mt19937_64& rng,
               double weight_scale = 1.0);
nn::Tape::Var dense(nn::Tape& t, nn::ParameterSet& ps, const std::string& name, nn::Tape::Var x);

// Head biases by name suffix: slack columns -4, offload self +2, outcome
// sub-array +4, every other used component 0.
void safe_init(nn::ParameterSet& actor);

inline constexpr double kSlackBias = -4.0;
inline constexpr double kSelfOffloadBias = 2.0;
inline constexpr double kOutcomeSubarrayBias = 4.0;

// Zero-sum Gaussian perturbation of one simplex group with standard
// deviation noise_std * max(group); withdrawn (group untouched, returns
// false) if any component would become negative.
bool explore_group(std::span<double> group, double noise_std, std::mt19937_64& rng);

struct ExplorationStats {
  int groups = 0;
  int accepted = 0;
};

// Every head row is one group; the outcome sub-array scalar s is perturbed
// as the pair (s, 1 - s).
ExplorationStats explore(RatioAction& a, double noise_std, std::mt19937_64& rng);

double td_target(double reward, double q_next, double kappa);

struct TrainConfig {
  double kappa = 0.5;
  int steps = 390;
  // Reference rates (5e-5 actor, 1e-1 critic) leave the allocation at the
  // safe-init point within 390 steps under the 0.95-per-3-steps decay.
  double actor_lr = 1.2e-3;
  double critic_lr = 2e-2;
  double actor_lr_decay = 0.95;
  int decay_every = 3;
  double noise_std = 0.05;
  std::uint64_t seed = 1;
  int checkpoint_every = 50;

  void validate() const;
};

struct Transition {
  const Observation* state = nullptr;
  const RatioAction* applied = nullptr;
  double reward = 0.0;
  const Observation* next = nullptr;
};

struct LearnStats {
  double critic_loss = 0.0;
  double q_value = 0.0;
  double actor_lr = 0.0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual RatioAction act(const Observation& s, bool explore) = 0;
  virtual bool learns() const { return false; }
  virtual LearnStats learn(const Transition&) { return {}; }
  virtual std::int64_t parameter_count() const { return 0; }
  virtual void save(const std::string&, const std::string&) const {}
  virtual void load(const std::string&) {}
};

// Deterministic actor-critic trained on-policy, one transition per step:
// critic descent on (y - Q(s, applied))^2 with y = r + kappa Q(s', pi(s')),
// then actor ascent on Q(s, pi(s)) with the critic held fixed.
class ActorCriticAgent : public Policy {
 public:
  ActorCriticAgent(std::string name, std::unique_ptr<ActorCriticModel> model, const TrainConfig& cfg);

  std::string name() const override { return name_; }
  RatioAction act(const Observation& s, bool explore) override;
  bool learns() const override { return true; }
  LearnStats learn(const Transition& tr) override;
  std::int64_t parameter_count() const override { return model_->parameter_count(); }
  void save(const std::string& path, const std::string& header) const override;
  void load(const std::string& path) override;

  ActorCriticModel& model() { return *model_; }
  double q_value(const Observation& s, const RatioAction& a);
  double actor_lr() const { return actor_opt_.lr; }
  const ExplorationStats& exploration() const { return exploration_; }

 private:
  std::string name_;
  std::unique_ptr<ActorCriticModel> model_;
  TrainConfig cfg_;
  nn::AdamState actor_opt_;
  nn::AdamState critic_opt_;
  std::mt19937_64 rng_;
  std::int64_t updates_ = 0;
  ExplorationStats exploration_;
};

std::unique_ptr<ActorCriticAgent> make_grant_agent(const GraphContext& g, const ActionShape& shape,
                                                   const TrainConfig& cfg, const GrantDims& dims = {});

}  // namespace grant
