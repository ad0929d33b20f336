// grant_cli: train / evaluate allocation policies on the satellite edge
// computing simulator and inspect its topology and link budget.

#include "grant/config.hpp"
#include "grant/errors.hpp"
#include "grant/harness.hpp"
#include "grant/thz_link.hpp"
#include "grant/trainer.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

namespace {

constexpr int kUsageExit = 1;

grant::ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? grant::parse_config("{}") : grant::load_config(path);
}

void print_summary(const grant::RunSummary& s) {
  std::printf("policy=%s seed=%llu steps=%d params=%lld involved=%d\n", s.policy.c_str(),
              static_cast<unsigned long long>(s.seed), s.steps, static_cast<long long>(s.parameter_count), s.involved);
  std::printf("converged U=%.4f (U_P=%.4f U_S=%.4f)  T_avg=%.3f ms  T_max=%.3f ms\n", s.converged_u,
              s.converged_u_p, s.converged_u_s, s.converged_t_avg_ms, s.converged_t_max_ms);
  std::printf("wall clock %.4f s/step  constraint violations %lld  metrics %s\n", s.wall_s_per_step,
              static_cast<long long>(s.constraint_violations), s.metrics_csv.c_str());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resource allocation for satellite edge computing over THz inter-satellite links"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 1;
  int steps = -1;
  std::string out_dir;
  std::string policy;
  std::string checkpoint;
  bool dump_traffic = false;
  const std::set<std::string> policies{"grant", "maddpg_fc", "uniform", "full"};

  auto common = [&](CLI::App* cmd, bool with_policy) {
    cmd->add_option("--config", config_path, "JSON config file (defaults when omitted)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "seed for traffic, initialization and exploration");
    cmd->add_option("--steps", steps, "number of slots (default: train.steps from the config)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", out_dir, "output directory");
    if (with_policy) cmd->add_option("--policy", policy, "grant | maddpg_fc | uniform | full")->check(CLI::IsMember(policies));
  };

  CLI::App* train = app.add_subcommand("train", "train a policy and write metrics, losses and checkpoints");
  common(train, true);
  train->add_flag("--dump-traffic", dump_traffic, "also write the per-slot task counts");
  train->add_option("--checkpoint", checkpoint, "start from these parameters")->check(CLI::ExistingFile);

  CLI::App* eval = app.add_subcommand("eval", "run a policy without exploration or learning");
  common(eval, true);
  eval->add_flag("--dump-traffic", dump_traffic, "also write the per-slot task counts");
  eval->add_option("--checkpoint", checkpoint, "parameters for grant / maddpg_fc")->check(CLI::ExistingFile);

  std::string bands_arg = "thz,ka,ku";
  CLI::App* bands = app.add_subcommand("compare-bands", "replay identical allocations under THz, Ka and Ku links");
  common(bands, true);
  bands->add_option("--checkpoint", checkpoint, "parameters for grant / maddpg_fc");
  bands->add_option("--bands", bands_arg, "comma-separated band presets");

  double at_time = std::numeric_limits<double>::quiet_NaN();
  CLI::App* topo = app.add_subcommand("dump-topology", "write the ISL graph with distances as CSV");
  topo->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  topo->add_option("--out", out_dir, "output CSV (stdout when omitted)");
  topo->add_option("--time", at_time, "seconds since epoch (default: access window start)");

  std::string band_name;
  double distance_km = 0.0;
  int subarrays = 16;
  double power_w = -1.0;
  CLI::App* lb = app.add_subcommand("linkbudget", "per-sub-band path gain, SINR and rate of one ISL");
  lb->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  lb->add_option("--band", band_name, "thz | ka | ku (default: config band)");
  lb->add_option("--distance-km", distance_km, "ISL length (default: intra-plane chord)");
  lb->add_option("--subarrays", subarrays, "transmit sub-arrays")->check(CLI::PositiveNumber);
  lb->add_option("--power-w", power_w, "total transmit power spread over the sub-bands (default: P_max)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }

  try {
    grant::ExperimentConfig cfg = config_or_default(config_path);
    if (!policy.empty()) cfg.policy = policy;
    if (steps < 0) steps = cfg.train.steps;
    if (out_dir.empty()) out_dir = cfg.output_dir;

    if (*train || *eval) {
      grant::RunOptions opt;
      opt.policy = cfg.policy;
      opt.seed = seed;
      opt.steps = steps;
      opt.out_dir = out_dir;
      opt.learn = static_cast<bool>(*train);
      opt.write_checkpoints = static_cast<bool>(*train);
      opt.dump_traffic = dump_traffic;
      opt.checkpoint_in = checkpoint;
      print_summary(grant::run_single(cfg, opt));
      return 0;
    }

    if (*bands) {
      const std::vector<std::string> names = split_list(bands_arg);
      const auto rows = grant::compare_bands(cfg, names, cfg.policy, checkpoint, seed, steps);
      std::printf("band,T_avg_ms,T_max_ms,infinite_slots,T_avg_ratio\n");
      for (const auto& r : rows)
        std::printf("%s,%s,%s,%d,%s\n", r.band.c_str(), grant::format_number(r.t_avg_s * 1e3).c_str(),
                    grant::format_number(r.t_max_s * 1e3).c_str(), r.infinite_slots,
                    grant::format_number(r.t_avg_s / rows.front().t_avg_s).c_str());
      return 0;
    }

    if (*topo) {
      const grant::Constellation c(cfg.constellation);
      double t = at_time;
      if (std::isnan(t)) t = grant::find_access_window(c, cfg.ground_station, cfg.constellation.epoch_s).start_s;
      std::ofstream file;
      std::ostream* os = &std::cout;
      if (topo->count("--out") > 0) {
        file.open(out_dir, std::ios::trunc);
        if (!file) throw grant::IoError(out_dir + ": cannot open for writing");
        os = &file;
      }
      *os << "# grant topology config_hash=" << grant::config_hash(cfg) << " t_s=" << grant::format_number(t) << "\n";
      *os << "sat_a,sat_b,distance_km\n";
      for (int a = 0; a < c.size(); ++a)
        for (int b : c.neighbors(a))
          if (a < b) *os << a << ',' << b << ',' << grant::format_number((c.position(a, t) - c.position(b, t)).norm()) << '\n';
      return 0;
    }

    if (*lb) {
      const grant::Constellation c(cfg.constellation);
      const grant::SimParams p = cfg.sim_params(band_name.empty() ? cfg.band : band_name);
      const double d = distance_km > 0.0 ? distance_km : c.intra_plane_chord_km();
      const double r = c.orbital_radius_km();
      // Two satellites on the same shell separated by chord d.
      const double half = std::asin(std::min(1.0, d / (2.0 * r)));
      const grant::Vec3 tx(r * std::cos(half), r * std::sin(half), 0.0);
      const grant::Vec3 rx(r * std::cos(half), -r * std::sin(half), 0.0);
      const double total = power_w >= 0.0 ? power_w : p.budget.max_power_w;
      std::printf("# grant linkbudget config_hash=%s band=%s distance_km=%s subarrays=%d power_w=%s\n",
                  grant::config_hash(cfg).c_str(), p.band.name.c_str(), grant::format_number(d).c_str(), subarrays,
                  grant::format_number(total).c_str());
      std::printf("phase,f_GHz,alpha2,gamma_dB,rate_Gbps\n");
      for (grant::Phase ph : {grant::Phase::offloading, grant::Phase::outcome}) {
        const grant::BandPlan& plan = p.band.plan(ph);
        const Eigen::VectorXd pw = Eigen::VectorXd::Constant(plan.subbands(), total / plan.subbands());
        const grant::LinkEvaluation e = grant::evaluate_link(tx, rx, subarrays, p.array.rx_subarrays_per_link, pw, plan,
                                                             p.band.gain_scale(ph), p.array, p.budget,
                                                             p.budget.interference_mean_w, c.config().earth_radius_km);
        for (int k = 0; k < plan.subbands(); ++k) {
          const Eigen::VectorXd one = Eigen::VectorXd::Unit(plan.subbands(), k) * pw(k);
          const double rate_k = grant::evaluate_link(tx, rx, subarrays, p.array.rx_subarrays_per_link, one, plan,
                                                     p.band.gain_scale(ph), p.array, p.budget,
                                                     p.budget.interference_mean_w, c.config().earth_radius_km)
                                    .rate_bps;
          std::printf("%s,%s,%s,%s,%s\n", ph == grant::Phase::offloading ? "offloading" : "outcome",
                      grant::format_number(plan.centers_hz[k] / 1e9).c_str(), grant::format_number(e.alpha2(k)).c_str(),
                      grant::format_number(10.0 * std::log10(e.gamma(k))).c_str(),
                      grant::format_number(rate_k / 1e9).c_str());
        }
        std::printf("# %s total rate %s Gbps\n", ph == grant::Phase::offloading ? "offloading" : "outcome",
                    grant::format_number(e.rate_bps / 1e9).c_str());
      }
      return 0;
    }
  } catch (const grant::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageExit;
  }
  return kUsageExit;
}
