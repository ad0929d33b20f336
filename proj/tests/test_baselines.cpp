#include "doctest.h"
#include "support.hpp"

#include "grant/baselines.hpp"
#include "grant/errors.hpp"
#include "grant/trainer.hpp"

#include <random>

using namespace grant;
using grant::testing::ToyScenario;

namespace {

constexpr double kPmax = 10.0;
constexpr int kSmax = 64;

MaddpgDims small_maddpg() {
  MaddpgDims d;
  d.actor_width = 8;
  d.critic_width = 8;
  return d;
}

}  // namespace

TEST_CASE("uniform policy splits every budget equally") {
  const ToyScenario toy;
  auto policy = make_uniform_policy(toy.shape);
  CHECK(policy->name() == "uniform");
  CHECK_FALSE(policy->learns());
  CHECK(policy->parameter_count() == 0);
  std::mt19937_64 rng(1);
  const RatioAction a = policy->act(toy.random_observation(rng), true);
  CHECK(a.power_to.col(20).isZero());
  CHECK(a.power_ot.col(5).isZero());

  const std::vector<int> tasks{122, 7};
  const SlotDecision d = quantize_action(toy.topo, a, tasks, 5, 5, kPmax, kSmax);
  CHECK(d.assignment[0].self_tasks == 22);
  for (int j = 0; j < 4; ++j) CHECK(d.assignment[0].to_neighbor[j] == 25);
  CHECK(d.assignment[1].total() == 7);
  for (int j = 0; j < 4; ++j) {
    CHECK(d.offloading[j].subarrays == 16);
    CHECK(d.offloading[j].power_w.sum() == doctest::Approx(kPmax / 4.0));
  }
  for (const LinkAllocation& l : d.outcome) {
    CHECK(l.subarrays == kSmax);
    CHECK((l.power_w.array() - kPmax / 5.0).abs().maxCoeff() < 1e-12);
  }
  CHECK(check_constraints(toy.topo, d, kPmax, kSmax, 0.0).total() == 0);
  const ResourceUsage u = resource_usage(d.offloading, d.outcome, kPmax, kSmax);
  CHECK(u.u == doctest::Approx(1.0));
}

TEST_CASE("full-resource policy keeps every task local at full budget") {
  const ToyScenario toy;
  auto policy = make_full_resource_policy(toy.shape);
  std::mt19937_64 rng(2);
  const RatioAction a = policy->act(toy.random_observation(rng), false);
  const std::vector<int> tasks{122, 0};
  const SlotDecision d = quantize_action(toy.topo, a, tasks, 5, 5, kPmax, kSmax);
  CHECK(d.assignment[0].self_tasks == 122);
  CHECK(d.assignment[0].to_neighbor == std::array<int, 4>{0, 0, 0, 0});
  CHECK(check_constraints(toy.topo, d, kPmax, kSmax, 0.0).total() == 0);
  CHECK(resource_usage(d.offloading, d.outcome, kPmax, kSmax).u == doctest::Approx(1.0));
  CHECK((policy->act(toy.random_observation(rng), true).offload - a.offload).isZero());
}

TEST_CASE("MADDPG-FC actors are private per satellite") {
  const ToyScenario toy;
  MaddpgModel m(toy.graph, toy.shape, small_maddpg(), 3);
  const int acting = toy.shape.sources + toy.shape.transmitters;
  int fc1 = 0;
  for (std::size_t i = 0; i < m.actor_params().size(); ++i)
    if (m.actor_params()[i].name.ends_with(".fc1.w")) ++fc1;
  CHECK(fc1 == acting);

  // A satellite's action depends only on its own state row.
  std::mt19937_64 rng(4);
  const Observation s = toy.random_observation(rng);
  Observation changed = s;
  const int other = toy.graph.transmitter_rows[1];
  changed.outcome.row(other).setConstant(0.9);
  nn::Tape t1, t2;
  const RatioAction a = to_ratios(t1, m.actor_forward(t1, s));
  const RatioAction b = to_ratios(t2, m.actor_forward(t2, changed));
  CHECK(a.power_ot.row(0) == b.power_ot.row(0));
  CHECK(a.power_ot.row(1) != b.power_ot.row(1));
}

TEST_CASE("MADDPG-FC gradients match central differences") {
  const ToyScenario toy;
  std::mt19937_64 rng(5);
  MaddpgModel m(toy.graph, toy.shape, small_maddpg(), 6);
  safe_init(m.actor_params());
  const Observation s = toy.random_observation(rng);
  auto loss = [&](nn::Tape& t) { return m.critic_forward(t, s, m.actor_forward(t, s)); };
  std::vector<nn::Parameter*> params = grant::testing::all_params(m.actor_params());
  for (nn::Parameter* p : grant::testing::all_params(m.critic_params())) params.push_back(p);
  const auto g = grant::testing::gradient_error(params, loss, rng, 2);
  CHECK(g.worst < 1e-4);
  CHECK(g.skipped <= g.checked / 10);
}

TEST_CASE("MADDPG-FC cannot follow a changed satellite set") {
  const ToyScenario toy;
  auto agent = make_maddpg_agent(toy.graph, toy.shape, TrainConfig{}, small_maddpg());
  std::mt19937_64 rng(7);
  Observation s = toy.random_observation(rng);
  s.offloading.conservativeResize(s.offloading.rows() + 1, Eigen::NoChange);
  s.outcome.conservativeResize(s.outcome.rows() + 1, Eigen::NoChange);
  s.offloading.bottomRows(1).setZero();
  s.outcome.bottomRows(1).setZero();
  CHECK_THROWS_AS(agent->act(s, false), ReconfigurationError);
}

TEST_CASE("MADDPG-FC is deterministic per seed") {
  const ToyScenario toy;
  TrainConfig cfg;
  cfg.seed = 9;
  auto a = make_maddpg_agent(toy.graph, toy.shape, cfg, small_maddpg());
  auto b = make_maddpg_agent(toy.graph, toy.shape, cfg, small_maddpg());
  std::mt19937_64 rng(8);
  const Observation s = toy.random_observation(rng);
  const RatioAction ra = a->act(s, true), rb = b->act(s, true);
  CHECK(ra.power_to == rb.power_to);
  CHECK(ra.subarray_ot == rb.subarray_ot);
}

TEST_CASE("default scenario: MADDPG-FC has at least ten times the GRANT parameters") {
  const ExperimentConfig cfg;
  const Scenario sc = build_scenario(cfg);
  auto grant_agent = make_policy("grant", sc, cfg);
  auto maddpg = make_policy("maddpg_fc", sc, cfg);
  CHECK(grant_agent->parameter_count() >= 50000);
  CHECK(grant_agent->parameter_count() <= 500000);
  CHECK(maddpg->parameter_count() >= 10 * grant_agent->parameter_count());
  CHECK_THROWS_AS(make_policy("dqn", sc, cfg), ConfigError);
}
