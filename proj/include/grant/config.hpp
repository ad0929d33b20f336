#pragma once

// Experiment configuration: JSON loading with per-field validation, a
// canonical serialization and its hash.

#include "grant/agent.hpp"
#include "grant/baselines.hpp"
#include "grant/constellation.hpp"
#include "grant/sec_sim.hpp"
#include "grant/thz_link.hpp"
#include "grant/traffic.hpp"

#include <cstdint>
#include <string>

namespace grant {

struct ExperimentConfig {
  WalkerConfig constellation;
  GroundStation ground_station;
  TrafficConfig traffic;
  ArrayConfig array;
  LinkBudgetParams budget;
  std::string band = "thz";
  ComputeParams compute;
  RewardParams reward;
  TrainConfig train;
  GrantDims grant;
  MaddpgDims maddpg;
  std::string policy = "grant";
  int n_sources = 10;
  std::string source_selection = "random_nonadjacent";
  std::uint64_t source_seed = 7;
  double routing_eta = 0.5;
  std::string output_dir = "out";

  // Throws ConfigError naming the section and field.
  void validate() const;
  SimParams sim_params() const;
  SimParams sim_params(const std::string& band_name) const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
// Sorted-key JSON of every field (defaults included).
std::string to_json(const ExperimentConfig& cfg);
// 16 hex digits of FNV-1a 64 over to_json(cfg) with output_dir cleared.
std::string config_hash(const ExperimentConfig& cfg);

bool is_known_policy(const std::string& name);

}  // namespace grant
