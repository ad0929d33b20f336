#include "doctest.h"

#include "grant/config.hpp"
#include "grant/errors.hpp"
#include "grant/harness.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace grant;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("grant_harness_" + name);
  fs::remove_all(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GRANT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("empty config yields the defaults") {
  const ExperimentConfig cfg = parse_config("{}");
  CHECK(cfg.constellation.planes == 72);
  CHECK(cfg.constellation.sats_per_plane == 22);
  CHECK(cfg.n_sources == 10);
  CHECK(cfg.train.steps == 390);
  CHECK(cfg.train.kappa == 0.5);
  CHECK(cfg.policy == "grant");
  CHECK(config_hash(cfg) == config_hash(ExperimentConfig{}));
}

TEST_CASE("config errors name the offending field") {
  auto message = [](const std::string& json) {
    try {
      parse_config(json);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message(R"({"train":{"actor_lrr":1}})").find("train.actor_lrr") != std::string::npos);
  CHECK(message(R"({"bogus":1})").find("bogus") != std::string::npos);
  CHECK(message(R"({"train":{"kappa":"high"}})").find("train.kappa") != std::string::npos);
  CHECK(message(R"({"train":{"kappa":2}})").find("kappa") != std::string::npos);
  CHECK(message("{not json").find("JSON") != std::string::npos);
  CHECK_THROWS_AS(load_config("/nonexistent/grant.json"), InputError);
}

TEST_CASE("config hash is canonical") {
  ExperimentConfig a;
  const std::string h = config_hash(a);
  CHECK(h.size() == 16);
  CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
  a.output_dir = "elsewhere";
  CHECK(config_hash(a) == h);
  a.train.actor_lr *= 2.0;
  CHECK(config_hash(a) != h);
  // Serialization round trip preserves the hash.
  CHECK(config_hash(parse_config(to_json(a))) == config_hash(a));
  // Key order in the input does not matter.
  CHECK(config_hash(parse_config(R"({"policy":"uniform","scenario":{"n_sources":3}})")) ==
        config_hash(parse_config(R"({"scenario":{"n_sources":3},"policy":"uniform"})")));
}

TEST_CASE("single run writes hashed CSVs and is byte-deterministic") {
  ExperimentConfig cfg;
  RunOptions opt;
  opt.policy = "grant";
  opt.steps = 4;
  cfg.train.checkpoint_every = 2;
  const fs::path a = scratch("a"), b = scratch("b");
  opt.out_dir = a.string();
  const RunSummary s = run_single(cfg, opt);
  opt.out_dir = b.string();
  run_single(cfg, opt);

  // The header hash covers the config as run: policy, seed and steps included.
  ExperimentConfig effective = cfg;
  effective.policy = opt.policy;
  effective.train.seed = effective.traffic.seed = opt.seed;
  effective.train.steps = opt.steps;
  const std::string hash = config_hash(effective);
  CHECK(hash != config_hash(cfg));
  const auto m = lines(slurp(a / "metrics.csv"));
  REQUIRE(m.size() == 2 + 4);
  CHECK(m[0].find("config_hash=" + hash) != std::string::npos);
  CHECK(m[1] == "step,U,U_P,U_S,T_avg_ms,T_max_ms,reward,power_W_mean,subarrays_mean");
  const auto l = lines(slurp(a / "loss.csv"));
  REQUIRE(l.size() == 2 + 4);
  CHECK(l[0].find("config_hash=" + hash) != std::string::npos);
  CHECK(l[1] == "step,critic_loss,q_value,actor_lr");
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(slurp(a / "loss.csv") == slurp(b / "loss.csv"));
  for (const char* ck : {"step_000000.bin", "step_000002.bin", "step_000004.bin"}) CHECK(fs::exists(a / "checkpoints" / ck));
  CHECK(slurp(a / "summary.json").find(hash) != std::string::npos);
  CHECK(s.steps == 4);
  CHECK(s.parameter_count == 75751);
  CHECK(s.constraint_violations == 0);

  // A different seed gives different traffic and metrics.
  opt.seed = 2;
  opt.out_dir = b.string();
  run_single(cfg, opt);
  CHECK(slurp(a / "metrics.csv") != slurp(b / "metrics.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("the final step is always checkpointed") {
  ExperimentConfig cfg;
  cfg.train.checkpoint_every = 2;
  RunOptions opt;
  opt.steps = 5;
  const fs::path d = scratch("final");
  opt.out_dir = d.string();
  const RunSummary s = run_single(cfg, opt);
  for (const char* ck : {"step_000000.bin", "step_000002.bin", "step_000004.bin", "step_000005.bin"})
    CHECK(fs::exists(d / "checkpoints" / ck));
  CHECK(fs::path(s.last_checkpoint).filename() == "step_000005.bin");
  fs::remove_all(d);
}

TEST_CASE("zero steps writes headers only") {
  RunOptions opt;
  opt.policy = "uniform";
  opt.steps = 0;
  opt.dump_traffic = true;
  const fs::path d = scratch("zero");
  opt.out_dir = d.string();
  const RunSummary s = run_single(ExperimentConfig{}, opt);
  CHECK(s.steps == 0);
  CHECK(lines(slurp(d / "metrics.csv")).size() == 2);
  CHECK(fs::exists(d / "traffic.csv"));
  fs::remove_all(d);
}

TEST_CASE("convergence summary reads the last window of the CSV") {
  const fs::path d = scratch("summary");
  fs::create_directories(d);
  {
    std::ofstream out(d / "metrics.csv");
    out << "# grant metrics config_hash=0000000000000000 policy=x seed=1\n";
    out << "step,U,U_P,U_S,T_avg_ms,T_max_ms,reward,power_W_mean,subarrays_mean\n";
    for (int i = 0; i < 10; ++i) out << i << ',' << (i < 5 ? 1.0 : 0.5) << ",0,0," << 10 * i << ",0,0,0,0\n";
  }
  const RunSummary s = summarize_metrics((d / "metrics.csv").string(), 5);
  CHECK(s.converged_u == doctest::Approx(0.5));
  CHECK(s.converged_t_avg_ms == doctest::Approx(70.0));
  CHECK(s.steps == 10);
  CHECK_THROWS_AS(summarize_metrics((d / "missing.csv").string()), InputError);
  {
    std::ofstream out(d / "bad.csv");
    out << "step,foo\n1,2\n";
  }
  CHECK_THROWS_AS(summarize_metrics((d / "bad.csv").string()), InputError);
  fs::remove_all(d);
}

TEST_CASE("multi-seed experiment aggregates from its own CSVs") {
  RunOptions opt;
  opt.policy = "uniform";
  opt.steps = 3;
  const fs::path d = scratch("exp");
  opt.out_dir = d.string();
  const ExperimentResult r = run_experiment(ExperimentConfig{}, {1, 2}, opt);
  REQUIRE(r.runs.size() == 2);
  CHECK(fs::exists(d / "seed_1" / "metrics.csv"));
  CHECK(fs::exists(d / "seed_2" / "metrics.csv"));
  const double mean = 0.5 * (r.runs[0].converged_u + r.runs[1].converged_u);
  CHECK(r.converged_u.mean == doctest::Approx(mean));
  CHECK(r.converged_u.std >= 0.0);
  fs::remove_all(d);
}

TEST_CASE("band replay: identity row and monotone bands") {
  const auto rows = compare_bands(ExperimentConfig{}, {"thz", "ka", "ku"}, "full", "", 1, 3);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].band == "thz");
  CHECK(rows[0].t_avg_s < rows[1].t_avg_s);
  CHECK(rows[1].t_avg_s < rows[2].t_avg_s);

  // The THz replay equals a plain evaluation of the same policy.
  RunOptions opt;
  opt.policy = "full";
  opt.steps = 3;
  opt.learn = false;
  opt.write_checkpoints = false;
  const fs::path d = scratch("bands");
  opt.out_dir = d.string();
  const RunSummary s = run_single(ExperimentConfig{}, opt);
  CHECK(s.converged_t_avg_ms == doctest::Approx(rows[0].t_avg_s * 1e3).epsilon(1e-9));
  fs::remove_all(d);

  CHECK_THROWS_AS(compare_bands(ExperimentConfig{}, {"thz"}, "grant", "", 1, 2), InputError);
  CHECK_THROWS_AS(compare_bands(ExperimentConfig{}, {"thz"}, "grant", "/nonexistent.bin", 1, 2), InputError);
}

TEST_CASE("numbers are written with ten significant digits") {
  for (double v : {0.1, 1.0 / 3.0, 6921.0, 1e-12, -2.45})
    CHECK(std::stod(format_number(v)) == doctest::Approx(v).epsilon(1e-9));
  CHECK(format_number(1.0 / 3.0) == "0.3333333333");
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("cli exit codes") {
  const fs::path d = scratch("cli");
  fs::create_directories(d);
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 1);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("train --policy dqn") == 1);
  {
    std::ofstream(d / "bad.json") << R"({"train":{"nope":1}})";
  }
  CHECK(run_cli("train --config " + (d / "bad.json").string() + " --steps 1 --out " + (d / "o").string()) == 2);
  {
    std::ofstream(d / "garbage.bin") << "garbage";
  }
  CHECK(run_cli("eval --policy grant --steps 1 --checkpoint " + (d / "garbage.bin").string() + " --out " +
                (d / "o").string()) == 3);
  CHECK(run_cli("eval --policy uniform --steps 1 --out /dev/null/sub") == 3);
  CHECK(run_cli("eval --policy uniform --steps 2 --out " + (d / "ok").string()) == 0);
  CHECK(fs::exists(d / "ok" / "metrics.csv"));
  CHECK(run_cli("dump-topology --out " + (d / "topo.csv").string()) == 0);
  const auto topo = lines(slurp(d / "topo.csv"));
  REQUIRE(topo.size() == 2 + 1584 * 2);  // 4-regular: two undirected edges per satellite
  CHECK(topo[1] == "sat_a,sat_b,distance_km");
  CHECK(run_cli("linkbudget --band ka") == 0);
  CHECK(run_cli("linkbudget --band x") == 2);
  fs::remove_all(d);
}
