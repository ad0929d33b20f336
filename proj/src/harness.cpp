#include "grant/harness.hpp"

#include "grant/errors.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace grant {

namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw IoError(p.string() + ": cannot open for writing");
  return out;
}

std::string header_line(const std::string& kind, const std::string& hash, const std::string& policy,
                        std::uint64_t seed) {
  return "# grant " + kind + " config_hash=" + hash + " policy=" + policy + " seed=" + std::to_string(seed);
}

double parse_field(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw InputError("metrics CSV: cannot parse '" + s + "'");
  }
}

Aggregate aggregate(const std::vector<double>& v) {
  Aggregate a;
  if (v.empty()) return a;
  a.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - a.mean) * (x - a.mean);
  a.std = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
  return a;
}

ExperimentConfig effective_config(const ExperimentConfig& cfg, const RunOptions& opt) {
  ExperimentConfig c = cfg;
  c.policy = opt.policy;
  c.train.seed = opt.seed;
  c.traffic.seed = opt.seed;
  c.train.steps = opt.steps;
  c.output_dir = opt.out_dir;
  c.validate();
  return c;
}

}  // namespace

RunSummary summarize_metrics(const std::string& path, int window) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open metrics CSV");
  RunSummary s;
  s.metrics_csv = path;
  std::vector<std::array<double, 5>> rows;  // U, U_P, U_S, T_avg_ms, T_max_ms
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto at = line.find("config_hash=");
      if (at != std::string::npos) s.config_hash = line.substr(at + 12, 16);
      const auto pol = line.find("policy=");
      if (pol != std::string::npos) s.policy = line.substr(pol + 7, line.find(' ', pol) - pol - 7);
      if (line.rfind("# FAILED", 0) == 0) throw TrainingError(path + ": run did not complete");
      continue;
    }
    if (!header) {
      if (line.rfind("step,U,U_P,U_S,T_avg_ms,T_max_ms", 0) != 0) throw InputError(path + ": unexpected header");
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string f;
    std::vector<std::string> fields;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() < 6) throw InputError(path + ": short row");
    rows.push_back({parse_field(fields[1]), parse_field(fields[2]), parse_field(fields[3]), parse_field(fields[4]),
                    parse_field(fields[5])});
  }
  s.steps = static_cast<int>(rows.size());
  const std::size_t n = std::min<std::size_t>(rows.size(), static_cast<std::size_t>(window));
  if (n == 0) return s;
  double acc[5] = {0, 0, 0, 0, 0};
  for (std::size_t i = rows.size() - n; i < rows.size(); ++i)
    for (int k = 0; k < 5; ++k) acc[k] += rows[i][k];
  s.converged_u = acc[0] / n;
  s.converged_u_p = acc[1] / n;
  s.converged_u_s = acc[2] / n;
  s.converged_t_avg_ms = acc[3] / n;
  s.converged_t_max_ms = acc[4] / n;
  return s;
}

RunSummary run_single(const ExperimentConfig& base, const RunOptions& opt) {
  const ExperimentConfig cfg = effective_config(base, opt);
  const std::string hash = config_hash(cfg);
  const Scenario sc = build_scenario(cfg);
  std::unique_ptr<Policy> policy = make_policy(opt.policy, sc, cfg);
  if (!opt.checkpoint_in.empty()) {
    if (!policy->learns()) throw InputError("--checkpoint: policy '" + opt.policy + "' has no parameters");
    policy->load(opt.checkpoint_in);
  }
  TrafficConfig traffic = cfg.traffic;
  Environment env(sc, traffic, generate_counts(traffic, sc.topology.source_count(), opt.steps + 1), opt.seed);

  const fs::path dir(opt.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(opt.out_dir + ": cannot create output directory");

  if (opt.dump_traffic) {
    std::ofstream t = open_out(dir / "traffic.csv");
    t << header_line("traffic", hash, opt.policy, opt.seed) << "\nstep";
    for (int src : sc.topology.sources()) t << ",sat_" << src;
    t << "\n";
    for (Eigen::Index k = 0; k < env.counts().cols(); ++k) {
      t << k;
      for (Eigen::Index i = 0; i < env.counts().rows(); ++i) t << "," << env.counts()(i, k);
      t << "\n";
    }
  }

  const fs::path metrics_path = dir / "metrics.csv";
  const fs::path loss_path = dir / "loss.csv";
  std::ofstream metrics = open_out(metrics_path);
  std::ofstream loss = open_out(loss_path);
  metrics << header_line("metrics", hash, opt.policy, opt.seed) << "\n"
          << "step,U,U_P,U_S,T_avg_ms,T_max_ms,reward,power_W_mean,subarrays_mean\n";
  loss << header_line("loss", hash, opt.policy, opt.seed) << "\n"
       << "step,critic_loss,q_value,actor_lr\n";

  RunSummary out;
  TrainingHooks hooks;
  hooks.on_step = [&](const StepRecord& r, const EnvStep&) {
    metrics << r.step << ',' << format_number(r.u) << ',' << format_number(r.u_p) << ',' << format_number(r.u_s)
            << ',' << format_number(r.t_avg_s * 1e3) << ',' << format_number(r.t_max_s * 1e3) << ','
            << format_number(r.reward) << ',' << format_number(r.power_w_mean) << ','
            << format_number(r.subarrays_mean) << '\n';
    if (r.learned)
      loss << r.step << ',' << format_number(r.learn.critic_loss) << ',' << format_number(r.learn.q_value) << ','
           << format_number(r.learn.actor_lr) << '\n';
  };
  if (opt.write_checkpoints) {
    hooks.on_checkpoint = [&](int step) {
      const fs::path cdir = dir / "checkpoints";
      fs::create_directories(cdir, ec);
      if (ec) throw IoError(cdir.string() + ": cannot create checkpoint directory");
      char name[32];
      std::snprintf(name, sizeof name, "step_%06d.bin", step);
      out.last_checkpoint = (cdir / name).string();
      policy->save(out.last_checkpoint, "config_hash=" + hash + ";policy=" + opt.policy + ";step=" + std::to_string(step));
    };
  }

  TrainingHistory h;
  try {
    h = run_training(env, *policy, cfg.train, opt.learn, hooks);
  } catch (const std::exception& e) {
    metrics << "# FAILED: " << e.what() << "\n";
    loss << "# FAILED: " << e.what() << "\n";
    throw;
  }
  metrics.close();
  loss.close();
  if (!metrics || !loss) throw IoError(opt.out_dir + ": failed writing CSV output");

  const std::string last_checkpoint = out.last_checkpoint;
  out = summarize_metrics(metrics_path.string());
  out.policy = opt.policy;
  out.seed = opt.seed;
  out.loss_csv = loss_path.string();
  out.parameter_count = policy->parameter_count();
  out.constraint_violations = h.constraint_violations;
  out.involved = sc.graph.size();
  out.last_checkpoint = last_checkpoint;
  double wall = 0.0;
  for (const StepRecord& r : h.steps) wall += r.wall_s;
  out.wall_s_per_step = h.steps.empty() ? 0.0 : wall / h.steps.size();

  nlohmann::json j;
  j["config_hash"] = hash;
  j["policy"] = out.policy;
  j["seed"] = out.seed;
  j["steps"] = out.steps;
  j["converged_U"] = out.converged_u;
  j["converged_U_P"] = out.converged_u_p;
  j["converged_U_S"] = out.converged_u_s;
  j["converged_T_avg_ms"] = out.converged_t_avg_ms;
  j["converged_T_max_ms"] = out.converged_t_max_ms;
  j["wall_s_per_step"] = out.wall_s_per_step;
  j["parameter_count"] = out.parameter_count;
  j["constraint_violations"] = out.constraint_violations;
  j["involved_satellites"] = out.involved;
  j["metrics_csv"] = out.metrics_csv;
  std::ofstream summary = open_out(dir / "summary.json");
  summary << j.dump(2) << "\n";
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                const RunOptions& base) {
  ExperimentResult r;
  std::vector<double> u, ta, tm, wall;
  for (std::uint64_t seed : seeds) {
    RunOptions opt = base;
    opt.seed = seed;
    opt.out_dir = (fs::path(base.out_dir) / ("seed_" + std::to_string(seed))).string();
    RunSummary run = run_single(cfg, opt);
    // Aggregates come from the CSV, not from in-memory state.
    RunSummary from_csv = summarize_metrics(run.metrics_csv);
    u.push_back(from_csv.converged_u);
    ta.push_back(from_csv.converged_t_avg_ms);
    tm.push_back(from_csv.converged_t_max_ms);
    wall.push_back(run.wall_s_per_step);
    r.runs.push_back(std::move(run));
  }
  r.converged_u = aggregate(u);
  r.converged_t_avg_ms = aggregate(ta);
  r.converged_t_max_ms = aggregate(tm);
  r.wall_s_per_step = aggregate(wall);
  return r;
}

std::vector<BandRow> compare_bands(const ExperimentConfig& base, const std::vector<std::string>& bands,
                                   const std::string& policy_name, const std::string& checkpoint,
                                   std::uint64_t seed, int steps) {
  RunOptions opt;
  opt.policy = policy_name;
  opt.seed = seed;
  opt.steps = steps;
  const ExperimentConfig cfg = effective_config(base, opt);
  const Scenario sc = build_scenario(cfg);
  std::unique_ptr<Policy> policy = make_policy(policy_name, sc, cfg);
  if (policy->learns()) {
    if (checkpoint.empty()) throw InputError("compare-bands: policy '" + policy_name + "' needs --checkpoint");
    if (!fs::exists(checkpoint)) throw InputError(checkpoint + ": checkpoint not found");
    policy->load(checkpoint);
  }
  std::vector<SimParams> params;
  for (const std::string& b : bands) params.push_back(cfg.sim_params(b));

  Environment env(sc, cfg.traffic, generate_counts(cfg.traffic, sc.topology.source_count(), steps + 1), seed);
  std::vector<BandRow> rows(bands.size());
  for (std::size_t b = 0; b < bands.size(); ++b) rows[b].band = bands[b];
  Observation s = env.reset();
  for (int k = 0; k < steps; ++k) {
    EnvStep e = env.step(policy->act(s, false));
    for (std::size_t b = 0; b < bands.size(); ++b) {
      const SlotOutcome o = simulate_slot(sc.constellation, sc.topology, e.decision, params[b], e.time_s, e.interference_w);
      rows[b].t_avg_s += o.t_avg_s;
      rows[b].t_max_s += o.t_max_s;
      if (o.infinite_delay) ++rows[b].infinite_slots;
    }
    s = std::move(e.next);
  }
  for (BandRow& r : rows) {
    r.t_avg_s /= std::max(steps, 1);
    r.t_max_s /= std::max(steps, 1);
  }
  return rows;
}

}  // namespace grant
