#include "grant/agent.hpp"

#include "grant/errors.hpp"

#include <algorithm>
#include <cmath>

namespace grant {

using nn::Tape;
using Var = Tape::Var;

GraphContext prune_involved(const WindowTopology& topo) {
  GraphContext g;
  g.nodes = topo.involved();
  for (auto [a, b] : topo.edges()) g.edges.emplace_back(topo.involved_index(a), topo.involved_index(b));
  g.adjacency = nn::normalized_adjacency(g.size(), g.edges);
  for (int s : topo.sources()) g.source_rows.push_back(topo.involved_index(s));
  for (int t : topo.transmitters()) g.transmitter_rows.push_back(topo.involved_index(t));
  g.gs_row = g.nodes.empty() ? -1 : topo.involved_index(topo.gs_sat());
  auto rows_of = [&](int server) {
    std::vector<int> rows;
    for (int flat : topo.route_from(server)) rows.push_back(topo.involved_index(flat));
    return rows;
  };
  for (int i = 0; i < topo.source_count(); ++i) {
    std::array<std::vector<int>, 5> routes;
    routes[0] = rows_of(topo.sources()[i]);
    for (int j = 0; j < 4; ++j) routes[j + 1] = rows_of(topo.neighbors_of_source(i)[j]);
    g.server_routes.push_back(std::move(routes));
  }
  return g;
}

double normalized_sinr(double sinr_db) {
  if (std::isnan(sinr_db)) return 0.0;
  return std::clamp(sinr_db, -kSinrScaleDb, kSinrScaleDb) / kSinrScaleDb;
}

namespace {

int isl_slot(const Constellation& c, int from, int to) {
  const auto& nb = c.neighbors(from);
  for (int q = 0; q < 4; ++q)
    if (nb[q] == to) return q;
  return -1;
}

}  // namespace

Observation encode_state(const Constellation& c, const WindowTopology& topo, const GraphContext& g,
                         std::span<const int> tasks, const SlotDecision& previous, const SlotOutcome& previous_outcome,
                         const EncodingParams& p) {
  const int n = g.size();
  const int ns = topo.source_count();
  if (static_cast<int>(tasks.size()) != ns || static_cast<int>(previous.assignment.size()) != ns)
    throw DimensionError("encode_state: one task count and assignment per source");
  Observation s;
  s.offloading = Eigen::MatrixXd::Zero(n, kOffloadFeatures);
  s.outcome = Eigen::MatrixXd::Zero(n, kOutcomeFeatures);

  const int planes = c.config().planes, slots = c.config().sats_per_plane;
  for (int r = 0; r < n; ++r) {
    const SatelliteId id = c.id(g.nodes[r]);
    const double np = planes > 1 ? static_cast<double>(id.plane) / (planes - 1) : 0.0;
    const double nsl = slots > 1 ? static_cast<double>(id.slot) / (slots - 1) : 0.0;
    s.offloading(r, 0) = s.outcome(r, 0) = np;
    s.offloading(r, 1) = s.outcome(r, 1) = nsl;
  }
  if (g.gs_row >= 0) {
    s.offloading(g.gs_row, 8) = 1.0;
    s.outcome(g.gs_row, 7) = 1.0;
  }

  const bool have_off_sinr = previous_outcome.offload_sinr_db.size() == 4 * ns;
  const double outcome_scale = p.outcome_ratio * p.mean_bytes_per_slot * ns;
  for (int i = 0; i < ns; ++i) {
    const int row = g.source_rows[i];
    const int src = topo.sources()[i];
    const double bytes = tasks[i] * p.task_size_bytes;
    s.offloading(row, 2) = bytes / p.mean_bytes_per_slot;
    s.offloading(row, 7) = 1.0;
    for (int j = 0; j < 4 && have_off_sinr; ++j) {
      const int q = isl_slot(c, src, topo.neighbors_of_source(i)[j]);
      if (q >= 0) s.offloading(row, 3 + q) = normalized_sinr(previous_outcome.offload_sinr_db(4 * i + j));
    }
    // Outcome bytes expected on every route hop under the previous split.
    const OffloadRow& prev = previous.assignment[i];
    const int prev_total = prev.total();
    for (int m = 0; m < 5; ++m) {
      double fraction = 0.0;
      if (prev_total > 0)
        fraction = static_cast<double>(m == 0 ? prev.self_tasks : prev.to_neighbor[m - 1]) / prev_total;
      else
        fraction = m == 0 ? 1.0 : 0.0;
      if (fraction == 0.0) continue;
      const double expected = p.outcome_ratio * bytes * fraction / outcome_scale;
      for (int hop : g.server_routes[i][m]) s.outcome(hop, 2) += expected;
    }
  }

  if (previous_outcome.outcome_sinr_db.size() == topo.transmitter_count()) {
    for (int k = 0; k < topo.transmitter_count(); ++k) {
      const int next = topo.next_hop(k);
      if (next < 0) continue;  // downlink, not an ISL
      const int q = isl_slot(c, topo.transmitters()[k], next);
      if (q >= 0) s.outcome(g.transmitter_rows[k], 3 + q) = normalized_sinr(previous_outcome.outcome_sinr_db(k));
    }
  }
  return s;
}

ActionShape action_shape(const WindowTopology& topo, const SimParams& p) {
  ActionShape a;
  a.sources = topo.source_count();
  a.transmitters = topo.transmitter_count();
  a.subbands_to = p.band.offloading.subbands();
  a.subbands_ot = p.band.outcome.subbands();
  return a;
}

RatioAction to_ratios(const Tape& t, const ActionVars& a) {
  RatioAction r;
  r.offload = t.value(a.offload);
  r.subarray_to = t.value(a.subarray_to);
  r.power_to = t.value(a.power_to);
  r.subarray_ot = t.value(a.subarray_ot).col(0);
  r.power_ot = t.value(a.power_ot);
  return r;
}

ActionVars constant_action(Tape& t, const RatioAction& a) {
  ActionVars v;
  v.offload = t.constant(a.offload);
  v.subarray_to = t.constant(a.subarray_to);
  v.power_to = t.constant(a.power_to);
  v.subarray_ot = t.constant(a.subarray_ot);
  v.power_ot = t.constant(a.power_ot);
  return v;
}

Var critic_node_features(Tape& t, const GraphContext& g, const Observation& s, const ActionVars& a) {
  const Eigen::Index n = g.size();
  if (s.offloading.rows() != n || s.outcome.rows() != n) throw DimensionError("critic: state does not match the graph");
  const Var to = t.scatter_rows(t.concat_cols({a.offload, a.subarray_to, a.power_to}), g.source_rows, n);
  const Var ot = t.scatter_rows(t.concat_cols({a.subarray_ot, a.power_ot}), g.transmitter_rows, n);
  return t.concat_cols({t.constant(s.offloading), t.constant(s.outcome), to, ot});
}

int critic_feature_width(const ActionShape& shape) {
  return kOffloadFeatures + kOutcomeFeatures + shape.offload_width() + shape.outcome_width();
}

void add_dense(nn::ParameterSet& ps, const std::string& name, int in, int out, std::mt19937_64& rng,
               double weight_scale) {
  nn::Parameter& w = ps.add(name + ".w", in, out);
  nn::xavier_uniform(w, rng);
  w.value *= weight_scale;
  ps.add(name + ".b", 1, out);
}

Var dense(Tape& t, nn::ParameterSet& ps, const std::string& name, Var x) {
  return t.add_row(t.matmul(x, t.param(ps.at(name + ".w"))), t.param(ps.at(name + ".b")));
}

// ---- GRANT networks ------------------------------------------------------------

GrantModel::GrantModel(GraphContext graph, ActionShape shape, GrantDims dims, std::uint64_t seed)
    : graph_(std::move(graph)), shape_(shape), dims_(dims) {
  if (shape_.sources != static_cast<int>(graph_.source_rows.size()) ||
      shape_.transmitters != static_cast<int>(graph_.transmitter_rows.size()))
    throw DimensionError("GrantModel: action shape does not match the graph");
  std::mt19937_64 rng(seed);
  const int h = dims_.gcn_width;
  auto gcn = [&](nn::ParameterSet& ps, const std::string& prefix, int in) {
    nn::xavier_uniform(ps.add(prefix + ".gcn1.w", in, h), rng);
    nn::xavier_uniform(ps.add(prefix + ".gcn2.w", h, h), rng);
  };
  gcn(actor_, "to", kOffloadFeatures);
  add_dense(actor_, "to.offload", h, 5, rng, dims_.head_init_scale);
  add_dense(actor_, "to.subarray", h, 5, rng, dims_.head_init_scale);
  add_dense(actor_, "to.power", h, 4 * shape_.subbands_to + 1, rng, dims_.head_init_scale);
  gcn(actor_, "ot", kOutcomeFeatures);
  add_dense(actor_, "ot.subarray", h, 1, rng, dims_.head_init_scale);
  add_dense(actor_, "ot.power", h, shape_.subbands_ot + 1, rng, dims_.head_init_scale);

  gcn(critic_, "q", critic_feature_width(shape_));
  add_dense(critic_, "q.fc1", h, dims_.critic_hidden, rng);
  add_dense(critic_, "q.fc2", dims_.critic_hidden, dims_.critic_hidden, rng);
  add_dense(critic_, "q.out", dims_.critic_hidden, 1, rng);
}

Var GrantModel::gcn_stack(Tape& t, Var x, const std::string& prefix, nn::ParameterSet& ps) {
  for (const char* layer : {".gcn1.w", ".gcn2.w"})
    x = t.relu(t.spmm(graph_.adjacency, t.matmul(x, t.param(ps.at(prefix + layer)))));
  return x;
}

ActionVars GrantModel::actor_forward(Tape& t, const Observation& s) {
  if (s.offloading.rows() != graph_.size() || s.offloading.cols() != kOffloadFeatures ||
      s.outcome.rows() != graph_.size() || s.outcome.cols() != kOutcomeFeatures)
    throw DimensionError("actor: state does not match the graph");
  ActionVars a;
  const Var hs = t.gather_rows(gcn_stack(t, t.constant(s.offloading), "to", actor_), graph_.source_rows);
  a.offload = t.softmax_rows(dense(t, actor_, "to.offload", hs));
  a.subarray_to = t.softmax_rows(dense(t, actor_, "to.subarray", hs));
  a.power_to = t.softmax_rows(dense(t, actor_, "to.power", hs));
  const Var ht = t.gather_rows(gcn_stack(t, t.constant(s.outcome), "ot", actor_), graph_.transmitter_rows);
  a.subarray_ot = t.sigmoid(dense(t, actor_, "ot.subarray", ht));
  a.power_ot = t.softmax_rows(dense(t, actor_, "ot.power", ht));
  return a;
}

Var GrantModel::critic_forward(Tape& t, const Observation& s, const ActionVars& a) {
  Var x = gcn_stack(t, critic_node_features(t, graph_, s, a), "q", critic_);
  x = t.mean_rows(x);
  x = t.relu(dense(t, critic_, "q.fc1", x));
  x = t.relu(dense(t, critic_, "q.fc2", x));
  return dense(t, critic_, "q.out", x);
}

// ---- safe mechanisms -------------------------------------------------------------

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void safe_init(nn::ParameterSet& actor) {
  for (std::size_t i = 0; i < actor.size(); ++i) {
    nn::Parameter& p = actor[i];
    Eigen::MatrixXd& b = p.value;
    if (ends_with(p.name, "to.offload.b")) {
      b.setZero();
      b(0, 0) = kSelfOffloadBias;
    } else if (ends_with(p.name, "to.subarray.b") || ends_with(p.name, "to.power.b") ||
               ends_with(p.name, "ot.power.b")) {
      b.setZero();
      b(0, b.cols() - 1) = kSlackBias;
    } else if (ends_with(p.name, "ot.subarray.b")) {
      b.setConstant(kOutcomeSubarrayBias);
    }
  }
}

bool explore_group(std::span<double> group, double noise_std, std::mt19937_64& rng) {
  if (group.size() < 2 || !(noise_std > 0.0)) return false;
  const double peak = *std::max_element(group.begin(), group.end());
  if (!(peak > 0.0)) return false;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(group.size());
  double mean = 0.0;
  for (double& v : z) {
    v = normal(rng);
    mean += v;
  }
  mean /= static_cast<double>(z.size());
  const double sigma = noise_std * peak;
  for (std::size_t k = 0; k < z.size(); ++k) {
    z[k] = group[k] + (z[k] - mean) * sigma;
    if (z[k] < 0.0) return false;
  }
  std::copy(z.begin(), z.end(), group.begin());
  return true;
}

ExplorationStats explore(RatioAction& a, double noise_std, std::mt19937_64& rng) {
  ExplorationStats st;
  auto rows = [&](Eigen::MatrixXd& m) {
    // Row-major scratch copy so one group is contiguous.
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      Eigen::RowVectorXd row = m.row(i);
      ++st.groups;
      if (explore_group(std::span<double>(row.data(), row.size()), noise_std, rng)) {
        ++st.accepted;
        m.row(i) = row;
      }
    }
  };
  rows(a.offload);
  rows(a.subarray_to);
  rows(a.power_to);
  for (Eigen::Index k = 0; k < a.subarray_ot.size(); ++k) {
    double pair[2] = {a.subarray_ot(k), 1.0 - a.subarray_ot(k)};
    ++st.groups;
    if (explore_group(pair, noise_std, rng)) {
      ++st.accepted;
      a.subarray_ot(k) = pair[0];
    }
  }
  rows(a.power_ot);
  return st;
}

double td_target(double reward, double q_next, double kappa) { return reward + kappa * q_next; }

void TrainConfig::validate() const {
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("train.kappa: must be in [0, 1]");
  if (steps < 0) throw ConfigError("train.steps: must be >= 0");
  if (!(actor_lr > 0.0)) throw ConfigError("train.actor_lr: must be > 0");
  if (!(critic_lr > 0.0)) throw ConfigError("train.critic_lr: must be > 0");
  if (!(actor_lr_decay > 0.0 && actor_lr_decay <= 1.0)) throw ConfigError("train.actor_lr_decay: must be in (0, 1]");
  if (decay_every < 1) throw ConfigError("train.decay_every: must be >= 1");
  if (!(noise_std >= 0.0)) throw ConfigError("train.noise_std: must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every: must be >= 0");
}

// ---- agent --------------------------------------------------------------------------

ActorCriticAgent::ActorCriticAgent(std::string name, std::unique_ptr<ActorCriticModel> model, const TrainConfig& cfg)
    : name_(std::move(name)), model_(std::move(model)), cfg_(cfg), rng_(cfg.seed ^ 0x6a09e667f3bcc909ULL) {
  cfg_.validate();
  safe_init(model_->actor_params());
  actor_opt_ = nn::make_adam(model_->actor_params(), cfg_.actor_lr);
  critic_opt_ = nn::make_adam(model_->critic_params(), cfg_.critic_lr);
}

RatioAction ActorCriticAgent::act(const Observation& s, bool explore_action) {
  Tape t;
  RatioAction a = to_ratios(t, model_->actor_forward(t, s));
  if (explore_action) {
    const ExplorationStats st = explore(a, cfg_.noise_std, rng_);
    exploration_.groups += st.groups;
    exploration_.accepted += st.accepted;
  }
  return a;
}

double ActorCriticAgent::q_value(const Observation& s, const RatioAction& a) {
  Tape t;
  return t.value(model_->critic_forward(t, s, constant_action(t, a)))(0, 0);
}

LearnStats ActorCriticAgent::learn(const Transition& tr) {
  if (!tr.state || !tr.applied || !tr.next) throw TrainingError("learn: incomplete transition");
  if (!std::isfinite(tr.reward)) throw TrainingError("learn: non-finite reward");
  LearnStats st;
  st.actor_lr = actor_opt_.lr;

  double q_next = 0.0;
  {
    Tape t;
    q_next = t.value(model_->critic_forward(t, *tr.next, model_->actor_forward(t, *tr.next)))(0, 0);
  }
  const double y = td_target(tr.reward, q_next, cfg_.kappa);

  {
    Tape t;
    const Var q = model_->critic_forward(t, *tr.state, constant_action(t, *tr.applied));
    const Var loss = t.mse(q, Eigen::MatrixXd::Constant(1, 1, y));
    st.q_value = t.value(q)(0, 0);
    st.critic_loss = t.value(loss)(0, 0);
    model_->critic_params().zero_grad();
    t.backward(loss);
    nn::adam_step(model_->critic_params(), critic_opt_);
  }
  {
    Tape t;
    const Var q = model_->critic_forward(t, *tr.state, model_->actor_forward(t, *tr.state));
    model_->actor_params().zero_grad();
    t.backward(q, -1.0);  // ascent on Q
    nn::adam_step(model_->actor_params(), actor_opt_);
  }
  if (++updates_ % cfg_.decay_every == 0) actor_opt_.lr *= cfg_.actor_lr_decay;
  return st;
}

void ActorCriticAgent::save(const std::string& path, const std::string& header) const {
  nn::save_checkpoint(path, {&model_->actor_params(), &model_->critic_params()}, header);
}

void ActorCriticAgent::load(const std::string& path) {
  nn::load_checkpoint(path, {&model_->actor_params(), &model_->critic_params()});
}

std::unique_ptr<ActorCriticAgent> make_grant_agent(const GraphContext& g, const ActionShape& shape,
                                                   const TrainConfig& cfg, const GrantDims& dims) {
  return std::make_unique<ActorCriticAgent>("grant", std::make_unique<GrantModel>(g, shape, dims, cfg.seed), cfg);
}

}  // namespace grant
