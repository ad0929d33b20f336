#include "grant/config.hpp"

#include "grant/errors.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace grant {

using nlohmann::json;

namespace {

// Reads optional keys of one section and rejects anything unknown.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + ": must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key())) throw ConfigError(name_ + "." + it.key() + ": unknown field");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(name_ + "." + key + ": wrong type");
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& at(const char* key) const { return j_.at(key); }
  std::string child(const char* key) const { return name_ + "." + key; }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

std::string gain_name(GainInterpretation g) { return g == GainInterpretation::amplitude ? "amplitude" : "power"; }

}  // namespace

bool is_known_policy(const std::string& name) {
  return name == "grant" || name == "maddpg_fc" || name == "uniform" || name == "full";
}

void ExperimentConfig::validate() const {
  constellation.validate();
  ground_station.validate();
  traffic.validate();
  array.validate();
  budget.validate();
  const Band b = band_preset(band);
  b.offloading.validate();
  b.outcome.validate();
  compute.validate();
  reward.validate();
  train.validate();
  if (grant.gcn_width < 1 || grant.critic_hidden < 1 || !(grant.head_init_scale > 0.0))
    throw ConfigError("networks.grant: widths must be >= 1 and head_init_scale > 0");
  if (maddpg.actor_width < 1 || maddpg.critic_width < 1 || !(maddpg.head_init_scale > 0.0))
    throw ConfigError("networks.maddpg_fc: widths must be >= 1 and head_init_scale > 0");
  if (!is_known_policy(policy)) throw ConfigError("policy: expected grant, maddpg_fc, uniform or full");
  if (n_sources < 1) throw ConfigError("scenario.n_sources: must be >= 1");
  if (source_selection != "random_nonadjacent") throw ConfigError("scenario.source_selection: expected random_nonadjacent");
  if (!(routing_eta >= 0.0)) throw ConfigError("scenario.routing_eta: must be >= 0");
  if (array.max_tx_subarrays < 4) throw ConfigError("link.array.max_tx_subarrays: must be >= 4");
}

SimParams ExperimentConfig::sim_params() const { return sim_params(band); }

SimParams ExperimentConfig::sim_params(const std::string& band_name) const {
  SimParams p;
  p.array = array;
  p.budget = budget;
  p.band = band_preset(band_name);
  p.compute = compute;
  p.reward = reward;
  p.ground_station = ground_station;
  p.task_size_bytes = traffic.task_size_bytes;
  return p;
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  {
    Section s(root, "config");
    if (s.has("constellation")) {
      Section k(s.at("constellation"), "constellation");
      k.get("planes", c.constellation.planes);
      k.get("sats_per_plane", c.constellation.sats_per_plane);
      k.get("inclination_deg", c.constellation.inclination_deg);
      k.get("altitude_km", c.constellation.altitude_km);
      k.get("phasing_factor", c.constellation.phasing_factor);
      k.get("earth_radius_km", c.constellation.earth_radius_km);
      k.get("epoch_s", c.constellation.epoch_s);
    }
    if (s.has("ground_station")) {
      Section k(s.at("ground_station"), "ground_station");
      k.get("latitude_deg", c.ground_station.latitude_deg);
      k.get("longitude_deg", c.ground_station.longitude_deg);
      k.get("min_elevation_deg", c.ground_station.min_elevation_deg);
    }
    if (s.has("traffic")) {
      Section k(s.at("traffic"), "traffic");
      k.get("mean_tasks_per_slot", c.traffic.mean_tasks_per_slot);
      k.get("hurst", c.traffic.hurst);
      k.get("relative_std", c.traffic.relative_std);
      k.get("slot_duration_s", c.traffic.slot_duration_s);
      k.get("task_size_bytes", c.traffic.task_size_bytes);
    }
    if (s.has("link")) {
      Section l(s.at("link"), "link");
      l.get("band", c.band);
      if (l.has("array")) {
        Section k(l.at("array"), "link.array");
        k.get("mx", c.array.mx);
        k.get("my", c.array.my);
        k.get("spacing_wavelengths", c.array.spacing_wavelengths);
        k.get("element_gain_dbi", c.array.element_gain_dbi);
        k.get("max_tx_subarrays", c.array.max_tx_subarrays);
        k.get("rx_subarrays_per_link", c.array.rx_subarrays_per_link);
      }
      if (l.has("budget")) {
        Section k(l.at("budget"), "link.budget");
        k.get("max_power_w", c.budget.max_power_w);
        k.get("noise_temperature_k", c.budget.noise_temperature_k);
        k.get("interference_mean_w", c.budget.interference_mean_w);
        k.get("interference_std_w", c.budget.interference_std_w);
        k.get("psi_eps_w", c.budget.psi_eps_w);
        std::string gain = gain_name(c.budget.gain);
        k.get("gain_interpretation", gain);
        if (gain == "amplitude")
          c.budget.gain = GainInterpretation::amplitude;
        else if (gain == "power")
          c.budget.gain = GainInterpretation::power;
        else
          throw ConfigError("link.budget.gain_interpretation: expected amplitude or power");
      }
    }
    if (s.has("compute")) {
      Section k(s.at("compute"), "compute");
      k.get("cycles_per_byte", c.compute.cycles_per_byte);
      k.get("cycles_per_second", c.compute.cycles_per_second);
      k.get("outcome_ratio", c.compute.outcome_ratio);
    }
    if (s.has("reward")) {
      Section k(s.at("reward"), "reward");
      k.get("chi1", c.reward.chi1);
      k.get("latency_threshold_s", c.reward.latency_threshold_s);
      k.get("w_below", c.reward.w_below);
      k.get("w_above", c.reward.w_above);
      k.get("kappa", c.reward.kappa);
      k.get("delay_cap_s", c.reward.delay_cap_s);
    }
    if (s.has("train")) {
      Section k(s.at("train"), "train");
      k.get("kappa", c.train.kappa);
      k.get("steps", c.train.steps);
      k.get("actor_lr", c.train.actor_lr);
      k.get("critic_lr", c.train.critic_lr);
      k.get("actor_lr_decay", c.train.actor_lr_decay);
      k.get("decay_every", c.train.decay_every);
      k.get("noise_std", c.train.noise_std);
      k.get("seed", c.train.seed);
      k.get("checkpoint_every", c.train.checkpoint_every);
    }
    if (s.has("networks")) {
      Section n(s.at("networks"), "networks");
      if (n.has("grant")) {
        Section k(n.at("grant"), "networks.grant");
        k.get("gcn_width", c.grant.gcn_width);
        k.get("critic_hidden", c.grant.critic_hidden);
        k.get("head_init_scale", c.grant.head_init_scale);
      }
      if (n.has("maddpg_fc")) {
        Section k(n.at("maddpg_fc"), "networks.maddpg_fc");
        k.get("actor_width", c.maddpg.actor_width);
        k.get("critic_width", c.maddpg.critic_width);
        k.get("head_init_scale", c.maddpg.head_init_scale);
      }
    }
    if (s.has("scenario")) {
      Section k(s.at("scenario"), "scenario");
      k.get("n_sources", c.n_sources);
      k.get("source_selection", c.source_selection);
      k.get("source_seed", c.source_seed);
      k.get("routing_eta", c.routing_eta);
    }
    s.get("policy", c.policy);
    s.get("output_dir", c.output_dir);
  }
  // The reward section's kappa and the trainer's are the same discount.
  if (root.contains("train") && root["train"].contains("kappa"))
    c.reward.kappa = c.train.kappa;
  else
    c.train.kappa = c.reward.kappa;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const ExperimentConfig& c) {
  json j;
  j["constellation"] = {{"planes", c.constellation.planes},
                        {"sats_per_plane", c.constellation.sats_per_plane},
                        {"inclination_deg", c.constellation.inclination_deg},
                        {"altitude_km", c.constellation.altitude_km},
                        {"phasing_factor", c.constellation.phasing_factor},
                        {"earth_radius_km", c.constellation.earth_radius_km},
                        {"epoch_s", c.constellation.epoch_s}};
  j["ground_station"] = {{"latitude_deg", c.ground_station.latitude_deg},
                         {"longitude_deg", c.ground_station.longitude_deg},
                         {"min_elevation_deg", c.ground_station.min_elevation_deg}};
  j["traffic"] = {{"mean_tasks_per_slot", c.traffic.mean_tasks_per_slot},
                  {"hurst", c.traffic.hurst},
                  {"relative_std", c.traffic.relative_std},
                  {"slot_duration_s", c.traffic.slot_duration_s},
                  {"task_size_bytes", c.traffic.task_size_bytes}};
  j["link"] = {{"band", c.band},
               {"array",
                {{"mx", c.array.mx},
                 {"my", c.array.my},
                 {"spacing_wavelengths", c.array.spacing_wavelengths},
                 {"element_gain_dbi", c.array.element_gain_dbi},
                 {"max_tx_subarrays", c.array.max_tx_subarrays},
                 {"rx_subarrays_per_link", c.array.rx_subarrays_per_link}}},
               {"budget",
                {{"max_power_w", c.budget.max_power_w},
                 {"noise_temperature_k", c.budget.noise_temperature_k},
                 {"interference_mean_w", c.budget.interference_mean_w},
                 {"interference_std_w", c.budget.interference_std_w},
                 {"psi_eps_w", c.budget.psi_eps_w},
                 {"gain_interpretation", gain_name(c.budget.gain)}}}};
  j["compute"] = {{"cycles_per_byte", c.compute.cycles_per_byte},
                  {"cycles_per_second", c.compute.cycles_per_second},
                  {"outcome_ratio", c.compute.outcome_ratio}};
  j["reward"] = {{"chi1", c.reward.chi1},
                 {"latency_threshold_s", c.reward.latency_threshold_s},
                 {"w_below", c.reward.w_below},
                 {"w_above", c.reward.w_above},
                 {"kappa", c.reward.kappa},
                 {"delay_cap_s", c.reward.delay_cap_s}};
  j["train"] = {{"kappa", c.train.kappa},
                {"steps", c.train.steps},
                {"actor_lr", c.train.actor_lr},
                {"critic_lr", c.train.critic_lr},
                {"actor_lr_decay", c.train.actor_lr_decay},
                {"decay_every", c.train.decay_every},
                {"noise_std", c.train.noise_std},
                {"seed", c.train.seed},
                {"checkpoint_every", c.train.checkpoint_every}};
  j["networks"] = {{"grant",
                    {{"gcn_width", c.grant.gcn_width},
                     {"critic_hidden", c.grant.critic_hidden},
                     {"head_init_scale", c.grant.head_init_scale}}},
                   {"maddpg_fc",
                    {{"actor_width", c.maddpg.actor_width},
                     {"critic_width", c.maddpg.critic_width},
                     {"head_init_scale", c.maddpg.head_init_scale}}}};
  j["scenario"] = {{"n_sources", c.n_sources},
                   {"source_selection", c.source_selection},
                   {"source_seed", c.source_seed},
                   {"routing_eta", c.routing_eta}};
  j["policy"] = c.policy;
  j["output_dir"] = c.output_dir;
  return j.dump();
}

std::string config_hash(const ExperimentConfig& cfg) {
  // Where results go does not change what they are.
  ExperimentConfig canonical = cfg;
  canonical.output_dir.clear();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(canonical)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace grant
