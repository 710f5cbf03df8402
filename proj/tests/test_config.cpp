#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dmps/config.hpp"
#include "dmps/experiment.hpp"
#include "dmps/text.hpp"

using namespace dmps;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dmps_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DMPS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, EveryEnvRoundTrips) {
  for (const auto& name : env_names()) {
    for (Dynamics d : {Dynamics::DoubleIntegrator, Dynamics::DifferentialDrive}) {
      const RunConfig cfg = default_run_config(name, d);
      const std::string text = to_text(cfg);
      const RunConfig back = parse_config(text);
      EXPECT_EQ(back, cfg) << name;
      EXPECT_EQ(to_text(back), text);
    }
  }
}

TEST(Config, PartialTextKeepsEnvDefaults) {
  const RunConfig cfg = parse_config(
      "# comment\n"
      "env.name = double-gates-plus\n"
      "env.dynamics = dd\n"
      "planner.horizon = 7\n"
      "train.gamma = 0.95   # trailing comment\n");
  RunConfig want = default_run_config("double-gates-plus", Dynamics::DifferentialDrive);
  want.planner.horizon = 7;
  want.train.gamma = 0.95;
  resolve(want);
  EXPECT_EQ(cfg, want);
  EXPECT_DOUBLE_EQ(cfg.learner.gamma, 0.95);
  EXPECT_DOUBLE_EQ(cfg.planner.gamma, 0.95);
}

TEST(Config, ErrorsAreConfigErrors) {
  EXPECT_THROW(parse_config("planner.bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("planner.horizon = 1\nplanner.horizon = 2\n"), ConfigError);
  EXPECT_THROW(parse_config("planner.horizon 3\n"), ConfigError);
  EXPECT_THROW(parse_config("planner.horizon = three\n"), ConfigError);
  EXPECT_THROW(parse_config("train.gamma = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("env.name = nowhere\n"), ConfigError);
  EXPECT_THROW(parse_config("train.shield_mode = maybe\n"), ConfigError);
  EXPECT_THROW(load_config_file("/nonexistent/dir/config.txt"), IoError);
}

TEST(Config, SetValue) {
  RunConfig cfg = default_run_config("single-gate", Dynamics::DoubleIntegrator);
  set_config_value(cfg, "train.seeds", "4,5");
  set_config_value(cfg, "learner.hidden", "32,16");
  EXPECT_EQ(cfg.train.seeds, (std::vector<std::uint64_t>{4, 5}));
  EXPECT_EQ(cfg.learner.hidden, (std::vector<int>{32, 16}));
  EXPECT_THROW(set_config_value(cfg, "nope", "1"), ConfigError);
}

TEST(Manifest, JsonRoundTrip) {
  RunManifest m;
  m.config_path = "cfg/a.txt";
  m.resolved_config = to_text(default_run_config("single-gate", Dynamics::DoubleIntegrator));
  m.seeds = {0, 1, 7};
  m.output_dir = "runs/x";
  m.version = "v1";
  const RunManifest back = RunManifest::from_json(m.to_json());
  EXPECT_EQ(back.config_path, m.config_path);
  EXPECT_EQ(back.resolved_config, m.resolved_config);
  EXPECT_EQ(back.seeds, m.seeds);
  EXPECT_EQ(back.output_dir, m.output_dir);
  EXPECT_EQ(back.version, m.version);
  EXPECT_THROW(RunManifest::from_json("{}"), ConfigError);
  EXPECT_THROW(RunManifest::from_json("not json"), ConfigError);
}

TEST(Summary, MeanAndSampleSd) {
  EXPECT_DOUBLE_EQ(mean_sd({2.0}).sd, 0.0);
  const MeanSd m = mean_sd({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.sd, std::sqrt(5.0 / 3.0), 1e-12);

  auto ep = [](double ret, int inv, int viol) {
    EpisodeMetrics e;
    e.undiscounted_return = ret;
    e.shield_invocations = inv;
    e.safety_violations = viol;
    return e;
  };
  const RunConfig cfg = default_run_config("single-gate", Dynamics::DoubleIntegrator);
  const SummaryRow one = summarize("a", cfg, {{ep(-1, 2, 0), ep(-3, 4, 0)}});
  EXPECT_EQ(one.seeds, 1);
  EXPECT_DOUBLE_EQ(one.return_mean, -2.0);
  EXPECT_DOUBLE_EQ(one.return_sd, 0.0);
  EXPECT_DOUBLE_EQ(one.invocations_mean, 3.0);
  const SummaryRow two = summarize("b", cfg, {{ep(-1, 2, 0)}, {ep(-3, 6, 1)}});
  EXPECT_DOUBLE_EQ(two.return_mean, -2.0);
  EXPECT_NEAR(two.return_sd, std::sqrt(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(two.violations_mean, 0.5);

  std::ostringstream cmp;
  write_comparison_csv(cmp, one, two);
  EXPECT_NE(cmp.str().find("invocation_ratio"), std::string::npos);
}

TEST(Series, AggregatesOverCommonEpisodes) {
  auto run = [](std::vector<double> rets) {
    std::vector<EpisodeMetrics> out;
    for (std::size_t i = 0; i < rets.size(); ++i) {
      EpisodeMetrics e;
      e.episode = static_cast<int>(i);
      e.undiscounted_return = rets[i];
      e.shield_invocations = static_cast<int>(i);
      out.push_back(e);
    }
    return out;
  };
  std::string warn;
  const auto single = aggregate_series({run({1, 2, 3})}, &warn);
  ASSERT_EQ(single.size(), 3u);
  for (const auto& r : single) EXPECT_EQ(r.sd_return, 0.0);
  EXPECT_TRUE(warn.empty());

  const auto rows = aggregate_series({run({1, 2, 3}), run({3, 4})}, &warn);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[0].mean_return, 2.0);
  EXPECT_NEAR(rows[1].sd_return, std::sqrt(2.0), 1e-12);
  EXPECT_FALSE(warn.empty());
}

TEST(Series, MetricsCsvRoundTrip) {
  const fs::path dir = scratch("metrics");
  std::vector<EpisodeMetrics> eps(3);
  for (int i = 0; i < 3; ++i) {
    eps[static_cast<std::size_t>(i)].episode = i;
    eps[static_cast<std::size_t>(i)].undiscounted_return = -0.25 * i;
    eps[static_cast<std::size_t>(i)].shield_invocations = i + 1;
    eps[static_cast<std::size_t>(i)].steps = 10 * i;
    eps[static_cast<std::size_t>(i)].goal_reached = i == 2;
  }
  std::ostringstream out;
  write_metrics_csv(out, 5, eps);
  write_metrics_csv(out, 6, eps);
  // Second header line must not reappear when concatenating by hand.
  std::string text = out.str();
  const auto second = text.find("seed,", 1);
  if (second != std::string::npos) text.erase(second, text.find('\n', second) - second + 1);
  write_file_atomic((dir / "m.csv").string(), text);
  const auto parsed = read_metrics_csv((dir / "m.csv").string());
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[0].first, 5u);
  EXPECT_EQ(parsed[1].first, 6u);
  ASSERT_EQ(parsed[0].second.size(), 3u);
  EXPECT_DOUBLE_EQ(parsed[0].second[2].undiscounted_return, -0.5);
  EXPECT_TRUE(parsed[0].second[2].goal_reached);
  EXPECT_EQ(parsed[0].second[1].steps, 10);

  write_file_atomic((dir / "bad.csv").string(), "a,b\n1,2\n");
  EXPECT_THROW(read_metrics_csv((dir / "bad.csv").string()), ConfigError);
}

TEST(Files, AtomicWriteCreatesParents) {
  const fs::path dir = scratch("atomic");
  const std::string path = (dir / "a" / "b" / "c.txt").string();
  write_file_atomic(path, "hello");
  EXPECT_EQ(read_file(path), "hello");
  write_file_atomic(path, "again");
  EXPECT_EQ(read_file(path), "again");
  EXPECT_THROW(read_file((dir / "missing").string()), IoError);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("train --bogus-flag"), 2);
  EXPECT_EQ(run_cli("train --env nowhere --out " + (dir / "r").string()), 2);
  EXPECT_EQ(run_cli("train --set planner.horizon=-3 --out " + (dir / "r").string()), 2);
  EXPECT_EQ(run_cli("eval --checkpoint " + (dir / "no_such_run").string()), 3);
  EXPECT_EQ(run_cli("train --config " + (dir / "absent.txt").string()), 4);
}

TEST(Cli, TrainEvalReport) {
  const fs::path dir = scratch("cli_run");
  const std::string run = (dir / "run").string();
  ASSERT_EQ(run_cli("train --env single-gate --shield mps --seeds 2 --timesteps 600"
                    " --set learner.warmup_steps=200 --set learner.hidden=8,8"
                    " --set learner.batch_size=16 --jobs 2 --out " + run),
            0);
  for (const char* f : {"config.txt", "manifest.json", "seed_0/metrics.csv", "seed_1/eval.csv",
                        "seed_1/checkpoint.txt"}) {
    EXPECT_TRUE(fs::exists(fs::path(run) / f)) << f;
  }
  const RunConfig cfg = load_config_file(run + "/config.txt");
  EXPECT_EQ(cfg.train.total_timesteps, 600);
  EXPECT_EQ(cfg.train.eval_every, 600);
  EXPECT_EQ(cfg.train.shield_mode, ShieldMode::Mps);

  ASSERT_EQ(run_cli("eval --episodes 2 --checkpoint " + run + " --checkpoint " + run +
                    " --out " + (dir / "eval").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "eval" / "summary.csv"));
  EXPECT_TRUE(fs::exists(dir / "eval" / "comparison.csv"));

  ASSERT_EQ(run_cli("report " + run + " --out " + (dir / "report").string()), 0);
  const std::string series = read_file((dir / "report" / "series.csv").string());
  EXPECT_EQ(series.rfind("episode,", 0), 0u) << series.substr(0, 80);
}
