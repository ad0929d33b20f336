#pragma once

// Reference policies on the same environment interface as GRANT: a uniform
// splitter, the full-resource operating point, and MADDPG-FC (private dense
// actors per acting satellite, one dense centralized critic).

#include "grant/agent.hpp"

#include <memory>

namespace grant {

// Offload 1/5 to self and each neighbour; every budget split equally with
// zero slack.
RatioAction uniform_ratios(const ActionShape& shape);
// All tasks local; every budget split equally with zero slack.
RatioAction full_resource_ratios(const ActionShape& shape);

class StaticPolicy : public Policy {
 public:
  StaticPolicy(std::string name, RatioAction action) : name_(std::move(name)), action_(std::move(action)) {}
  std::string name() const override { return name_; }
  RatioAction act(const Observation&, bool) override { return action_; }

 private:
  std::string name_;
  RatioAction action_;
};

std::unique_ptr<Policy> make_uniform_policy(const ActionShape& shape);
std::unique_ptr<Policy> make_full_resource_policy(const ActionShape& shape);

struct MaddpgDims {
  int actor_width = 128;
  int critic_width = 256;
  double head_init_scale = 0.1;
};

class MaddpgModel : public ActorCriticModel {
 public:
  MaddpgModel(GraphContext graph, ActionShape shape, MaddpgDims dims, std::uint64_t seed);

  ActionVars actor_forward(nn::Tape& t, const Observation& s) override;
  nn::Tape::Var critic_forward(nn::Tape& t, const Observation& s, const ActionVars& a) override;
  nn::ParameterSet& actor_params() override { return actor_; }
  nn::ParameterSet& critic_params() override { return critic_; }
  const nn::ParameterSet& actor_params() const override { return actor_; }
  const nn::ParameterSet& critic_params() const override { return critic_; }

 private:
  void check(const Observation& s) const;

  GraphContext graph_;
  ActionShape shape_;
  MaddpgDims dims_;
  nn::ParameterSet actor_;
  nn::ParameterSet critic_;
};

std::unique_ptr<ActorCriticAgent> make_maddpg_agent(const GraphContext& g, const ActionShape& shape,
                                                    const TrainConfig& cfg, const MaddpgDims& dims = {});

}  // namespace grant
