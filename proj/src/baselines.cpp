#include "grant/baselines.hpp"

#include "grant/errors.hpp"

namespace grant {

using nn::Tape;
using Var = Tape::Var;

namespace {

RatioAction equal_split(const ActionShape& shape) {
  RatioAction a;
  a.subarray_to = Eigen::MatrixXd::Zero(shape.sources, 5);
  a.subarray_to.leftCols(4).setConstant(0.25);
  const int kt = 4 * shape.subbands_to;
  a.power_to = Eigen::MatrixXd::Zero(shape.sources, kt + 1);
  a.power_to.leftCols(kt).setConstant(1.0 / kt);
  a.subarray_ot = Eigen::VectorXd::Ones(shape.transmitters);
  a.power_ot = Eigen::MatrixXd::Zero(shape.transmitters, shape.subbands_ot + 1);
  a.power_ot.leftCols(shape.subbands_ot).setConstant(1.0 / shape.subbands_ot);
  return a;
}

}  // namespace

RatioAction uniform_ratios(const ActionShape& shape) {
  RatioAction a = equal_split(shape);
  a.offload = Eigen::MatrixXd::Constant(shape.sources, 5, 0.2);
  return a;
}

RatioAction full_resource_ratios(const ActionShape& shape) {
  RatioAction a = equal_split(shape);
  a.offload = Eigen::MatrixXd::Zero(shape.sources, 5);
  a.offload.col(0).setOnes();
  return a;
}

std::unique_ptr<Policy> make_uniform_policy(const ActionShape& shape) {
  return std::make_unique<StaticPolicy>("uniform", uniform_ratios(shape));
}

std::unique_ptr<Policy> make_full_resource_policy(const ActionShape& shape) {
  return std::make_unique<StaticPolicy>("full", full_resource_ratios(shape));
}

// ---- MADDPG-FC ----------------------------------------------------------------------

namespace {

std::string actor_prefix(int flat, const char* phase) { return "s" + std::to_string(flat) + "." + phase; }

}  // namespace

MaddpgModel::MaddpgModel(GraphContext graph, ActionShape shape, MaddpgDims dims, std::uint64_t seed)
    : graph_(std::move(graph)), shape_(shape), dims_(dims) {
  if (shape_.sources != static_cast<int>(graph_.source_rows.size()) ||
      shape_.transmitters != static_cast<int>(graph_.transmitter_rows.size()))
    throw DimensionError("MaddpgModel: action shape does not match the graph");
  std::mt19937_64 rng(seed);
  const int h = dims_.actor_width;
  for (int row : graph_.source_rows) {
    const std::string p = actor_prefix(graph_.nodes[row], "to");
    add_dense(actor_, p + ".fc1", kOffloadFeatures, h, rng);
    add_dense(actor_, p + ".fc2", h, h, rng);
    add_dense(actor_, p + ".offload", h, 5, rng, dims_.head_init_scale);
    add_dense(actor_, p + ".subarray", h, 5, rng, dims_.head_init_scale);
    add_dense(actor_, p + ".power", h, 4 * shape_.subbands_to + 1, rng, dims_.head_init_scale);
  }
  for (int row : graph_.transmitter_rows) {
    const std::string p = actor_prefix(graph_.nodes[row], "ot");
    add_dense(actor_, p + ".fc1", kOutcomeFeatures, h, rng);
    add_dense(actor_, p + ".fc2", h, h, rng);
    add_dense(actor_, p + ".subarray", h, 1, rng, dims_.head_init_scale);
    add_dense(actor_, p + ".power", h, shape_.subbands_ot + 1, rng, dims_.head_init_scale);
  }
  const int in = graph_.size() * critic_feature_width(shape_);
  add_dense(critic_, "q.fc1", in, dims_.critic_width, rng);
  add_dense(critic_, "q.fc2", dims_.critic_width, dims_.critic_width, rng);
  add_dense(critic_, "q.out", dims_.critic_width, 1, rng);
}

void MaddpgModel::check(const Observation& s) const {
  if (s.offloading.rows() != graph_.size() || s.outcome.rows() != graph_.size())
    throw ReconfigurationError("MADDPG-FC: the involved satellite set changed; per-satellite actors cannot follow");
  if (s.offloading.cols() != kOffloadFeatures || s.outcome.cols() != kOutcomeFeatures)
    throw DimensionError("MADDPG-FC: unexpected state width");
}

ActionVars MaddpgModel::actor_forward(Tape& t, const Observation& s) {
  check(s);
  std::vector<Var> off, sub_to, pow_to, sub_ot, pow_ot;
  for (int row : graph_.source_rows) {
    const std::string p = actor_prefix(graph_.nodes[row], "to");
    Var x = t.constant(s.offloading.row(row));
    x = t.relu(dense(t, actor_, p + ".fc1", x));
    x = t.relu(dense(t, actor_, p + ".fc2", x));
    off.push_back(t.softmax_rows(dense(t, actor_, p + ".offload", x)));
    sub_to.push_back(t.softmax_rows(dense(t, actor_, p + ".subarray", x)));
    pow_to.push_back(t.softmax_rows(dense(t, actor_, p + ".power", x)));
  }
  for (int row : graph_.transmitter_rows) {
    const std::string p = actor_prefix(graph_.nodes[row], "ot");
    Var x = t.constant(s.outcome.row(row));
    x = t.relu(dense(t, actor_, p + ".fc1", x));
    x = t.relu(dense(t, actor_, p + ".fc2", x));
    sub_ot.push_back(t.sigmoid(dense(t, actor_, p + ".subarray", x)));
    pow_ot.push_back(t.softmax_rows(dense(t, actor_, p + ".power", x)));
  }
  return {t.concat_rows(off), t.concat_rows(sub_to), t.concat_rows(pow_to), t.concat_rows(sub_ot),
          t.concat_rows(pow_ot)};
}

Var MaddpgModel::critic_forward(Tape& t, const Observation& s, const ActionVars& a) {
  check(s);
  Var x = t.flatten(critic_node_features(t, graph_, s, a));
  x = t.relu(dense(t, critic_, "q.fc1", x));
  x = t.relu(dense(t, critic_, "q.fc2", x));
  return dense(t, critic_, "q.out", x);
}

std::unique_ptr<ActorCriticAgent> make_maddpg_agent(const GraphContext& g, const ActionShape& shape,
                                                    const TrainConfig& cfg, const MaddpgDims& dims) {
  return std::make_unique<ActorCriticAgent>("maddpg_fc", std::make_unique<MaddpgModel>(g, shape, dims, cfg.seed), cfg);
}

}  // namespace grant
