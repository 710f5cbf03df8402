// dmps: train, evaluate and report shielded reinforcement-learning runs.
//
// Exit codes: 0 success, 1 internal error, 2 bad config or usage,
// 3 missing checkpoint, 4 file I/O failure.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dmps/config.hpp"
#include "dmps/experiment.hpp"
#include "dmps/text.hpp"

namespace fs = std::filesystem;
using namespace dmps;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kMissingCheckpoint = 3, kIo = 4 };

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("dmps");
  logger->set_pattern("[%H:%M:%S] [%^%l%$] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("DMPS_LOG_LEVEL")) {
    const auto parsed = spdlog::level::from_str(lvl);
    // from_str maps unknown names to "off"; only accept that when asked for.
    if (parsed != spdlog::level::off || std::string(lvl) == "off") {
      spdlog::set_level(parsed);
    } else {
      spdlog::warn("ignoring unknown DMPS_LOG_LEVEL '{}'", lvl);
    }
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  if (text.find(',') == std::string::npos) {
    const long long n = parse_int(trim(text));
    if (n <= 0) throw ConfigError("--seeds needs a positive count or a comma list");
    std::vector<std::uint64_t> out;
    for (long long i = 0; i < n; ++i) out.push_back(static_cast<std::uint64_t>(i));
    return out;
  }
  std::vector<std::uint64_t> out;
  for (const auto& tok : split(text, ',')) {
    const long long v = parse_int(trim(tok));
    if (v < 0) throw ConfigError("seeds must be non-negative");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(seeds[i]);
  }
  return out;
}

std::optional<std::string> line_key(std::string_view line) {
  const auto hash = line.find('#');
  if (hash != std::string_view::npos) line = line.substr(0, hash);
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) return std::nullopt;
  return std::string(trim(line.substr(0, eq)));
}

// Config text with every overridden key dropped and the overrides appended.
std::string merge_overrides(const std::string& base,
                            const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::set<std::string> keys;
  for (const auto& [k, v] : overrides) keys.insert(k);
  std::string out;
  for (const auto& line : split(base, '\n')) {
    const auto key = line_key(line);
    if (key && keys.count(*key)) continue;
    out += line;
    out += '\n';
  }
  for (const auto& [k, v] : overrides) out += k + " = " + v + "\n";
  return out;
}

bool has_key(const std::string& text, const std::string& key) {
  for (const auto& line : split(text, '\n')) {
    const auto k = line_key(line);
    if (k && *k == key) return true;
  }
  return false;
}

struct RunFlags {
  std::string config;
  std::string env;
  std::string dynamics;
  std::string shield;
  std::string seeds;
  long timesteps = 0;
  int horizon = -1;
  std::string out;
  std::vector<std::string> sets;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "Config file (.txt) or a run's manifest.json");
  cmd->add_option("--env", f.env, "Environment name");
  cmd->add_option("--dynamics", f.dynamics, "Agent dynamics: di or dd");
  cmd->add_option("--shield", f.shield, "Shield: none, mps or dmps");
  cmd->add_option("--seeds", f.seeds, "Seed count N (0..N-1) or comma list");
  cmd->add_option("--timesteps", f.timesteps, "Training timesteps per seed");
  cmd->add_option("--horizon", f.horizon, "Planner horizon n");
  cmd->add_option("--set", f.sets, "Extra key=value config assignment (repeatable)");
}

// Returns the resolved config and the path it was read from.
std::pair<RunConfig, std::string> build_config(const RunFlags& f) {
  std::string base;
  std::string source;
  if (!f.config.empty()) {
    source = fs::absolute(f.config).string();
    const std::string text = read_file(f.config);
    if (fs::path(f.config).extension() == ".json") {
      base = RunManifest::from_json(text).resolved_config;
    } else {
      base = text;
    }
  }
  std::vector<std::pair<std::string, std::string>> overrides;
  if (!f.env.empty()) overrides.emplace_back("env.name", f.env);
  if (!f.dynamics.empty()) overrides.emplace_back("env.dynamics", f.dynamics);
  if (!f.shield.empty()) overrides.emplace_back("train.shield_mode", f.shield);
  if (!f.seeds.empty()) overrides.emplace_back("train.seeds", join_seeds(parse_seeds(f.seeds)));
  if (f.timesteps > 0) {
    overrides.emplace_back("train.total_timesteps", std::to_string(f.timesteps));
    bool explicit_cadence = has_key(base, "train.eval_every");
    for (const auto& s : f.sets) {
      if (line_key(s) == std::optional<std::string>("train.eval_every")) explicit_cadence = true;
    }
    if (!explicit_cadence) {
      const long cadence = std::min(TrainConfig{}.eval_every, f.timesteps);
      overrides.emplace_back("train.eval_every", std::to_string(cadence));
    }
  } else if (f.timesteps < 0) {
    throw ConfigError("--timesteps must be positive");
  }
  if (f.horizon >= 0) overrides.emplace_back("planner.horizon", std::to_string(f.horizon));
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    overrides.emplace_back(std::string(trim(s.substr(0, eq))), std::string(trim(s.substr(eq + 1))));
  }
  return {parse_config(merge_overrides(base, overrides)), source};
}

std::string default_out(const RunConfig& cfg) {
  return (fs::path("runs") / (cfg.env.env_name + "-" + to_string(cfg.env.dynamics) + "-" +
                              to_string(cfg.train.shield_mode)))
      .string();
}

int cmd_train(const RunFlags& f, int jobs) {
  auto [cfg, source] = build_config(f);
  const std::string out = f.out.empty() ? default_out(cfg) : f.out;
  spdlog::info("training {} ({}, {}) seeds [{}], {} steps each -> {}", cfg.env.env_name,
               to_string(cfg.env.dynamics), to_string(cfg.train.shield_mode),
               join_seeds(cfg.train.seeds), cfg.train.total_timesteps, out);
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto outcomes = run_training(
      cfg, out, source, [](const std::string& msg) { spdlog::info("{}", msg); }, jobs);
  for (const auto& o : outcomes) {
    long inv = 0, viol = 0;
    for (const auto& m : o.result.episodes) {
      inv += m.shield_invocations;
      viol += m.safety_violations;
    }
    spdlog::info("seed {}: {} episodes, {} shield invocations, {} violations", o.seed,
                 o.result.episodes.size(), inv, viol);
  }
  return kOk;
}

int cmd_eval(const std::vector<std::string>& checkpoints, int episodes, const std::string& out) {
  if (checkpoints.empty()) throw ConfigError("eval needs at least one --checkpoint run directory");
  if (episodes <= 0) throw ConfigError("--episodes must be positive");
  std::vector<SummaryRow> rows;
  for (const auto& dir : checkpoints) {
    spdlog::info("evaluating {} ({} episodes per seed)", dir, episodes);
    const RunEvaluation ev = evaluate_run(dir, episodes);
    std::vector<std::vector<EpisodeMetrics>> per_seed;
    for (const auto& r : ev.results) per_seed.push_back(r.episodes);
    rows.push_back(summarize(fs::path(dir).lexically_normal().filename().string().empty()
                                 ? fs::path(dir).lexically_normal().parent_path().filename().string()
                                 : fs::path(dir).lexically_normal().filename().string(),
                             ev.config, per_seed));
  }
  std::ostringstream summary;
  write_summary_csv(summary, rows);
  std::cout << summary.str();
  std::ostringstream comparison;
  if (rows.size() == 2) {
    write_comparison_csv(comparison, rows[0], rows[1]);
    std::cout << comparison.str();
  }
  if (!out.empty()) {
    write_file_atomic((fs::path(out) / "summary.csv").string(), summary.str());
    if (rows.size() == 2) {
      write_file_atomic((fs::path(out) / "comparison.csv").string(), comparison.str());
    }
  }
  return kOk;
}

bool header_is(const std::string& path, const std::string& header) {
  const std::string text = read_file(path);
  return trim(split(text, '\n').front()) == header;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
  if (inputs.empty()) throw ConfigError("report needs at least one --input");
  std::vector<std::string> metrics_files, regret_files, scaling_files;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::recursive_directory_iterator(p)) {
        if (entry.is_regular_file()) found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      for (const auto& f : found) {
        const auto name = f.filename().string();
        if (name == "metrics.csv") metrics_files.push_back(f.string());
        if (name == "regret.csv") regret_files.push_back(f.string());
        if (name == "scaling.csv") scaling_files.push_back(f.string());
      }
    } else if (fs::is_regular_file(p)) {
      const auto name = p.filename().string();
      if (name.find("regret") != std::string::npos) {
        regret_files.push_back(in);
      } else if (name.find("scaling") != std::string::npos) {
        scaling_files.push_back(in);
      } else {
        metrics_files.push_back(in);
      }
    } else {
      throw IoError("no such input: " + in);
    }
  }

  if (!metrics_files.empty()) {
    std::map<std::uint64_t, std::vector<EpisodeMetrics>> by_seed;
    for (const auto& f : metrics_files) {
      for (auto& [seed, eps] : read_metrics_csv(f)) {
        if (!by_seed.emplace(seed, std::move(eps)).second) {
          spdlog::warn("seed {} appears more than once; keeping the first ({} ignored)", seed, f);
        }
      }
    }
    std::vector<std::vector<EpisodeMetrics>> per_seed;
    for (auto& [seed, eps] : by_seed) per_seed.push_back(std::move(eps));
    std::string warning;
    const auto rows = aggregate_series(per_seed, &warning);
    if (!warning.empty()) spdlog::warn("{}", warning);
    std::ostringstream ss;
    write_series_csv(ss, rows);
    write_file_atomic((fs::path(out) / "series.csv").string(), ss.str());
    spdlog::info("series.csv: {} seeds, {} episodes", per_seed.size(), rows.size());
  }

  auto concat = [&](const std::vector<std::string>& files, const std::string& header,
                    const std::string& name) {
    if (files.empty()) return;
    std::string body = header + "\n";
    for (const auto& f : files) {
      if (!header_is(f, header)) throw ConfigError(f + ": unexpected header");
      const auto lines = split(read_file(f), '\n');
      for (std::size_t i = 1; i < lines.size(); ++i) {
        if (!trim(lines[i]).empty()) body += std::string(trim(lines[i])) + "\n";
      }
    }
    write_file_atomic((fs::path(out) / name).string(), body);
    spdlog::info("{} from {} file(s)", name, files.size());
  };
  concat(regret_files, "setting,horizon,rr_mean,rr_stderr,fitted_c,gamma_power,triggers,planner_gap",
         "regret_series.csv");
  concat(scaling_files, "horizon,mean_expansions,sd_expansions,roots,censored,unexpandable",
         "scaling_series.csv");
  if (metrics_files.empty() && regret_files.empty() && scaling_files.empty()) {
    throw ConfigError("no metrics, regret or scaling files among the inputs");
  }
  return kOk;
}

struct OracleFlags {
  std::string suite = "all";
  int trials = 100;
  int iterations = 10000;
  int episodes = 300;
  std::uint64_t seed = 2024;
  std::string out = "oracle";
};

int cmd_oracle(const OracleFlags& f) {
  OracleSettings s;
  s.mcts_trials = f.trials;
  s.mcts_iterations = f.iterations;
  s.regret_iterations = f.iterations;
  s.regret_episodes = f.episodes;
  s.seed = f.seed;
  if (f.suite != "all" && f.suite != "mcts" && f.suite != "regret") {
    throw ConfigError("--suite must be all, mcts or regret");
  }
  if (f.suite != "regret") {
    spdlog::info("tree search vs exhaustive enumeration, {} trials", s.mcts_trials);
    const auto r = mcts_oracle_check(s);
    std::ostringstream ss;
    ss << "trials,matches,dominance_failures,bottoms,worst_miss\n"
       << r.trials << ',' << r.matches << ',' << r.dominance_failures << ',' << r.bottoms << ','
       << format_double(r.worst_miss) << '\n';
    write_file_atomic((fs::path(f.out) / "mcts_oracle.csv").string(), ss.str());
    std::cout << ss.str();
  }
  if (f.suite != "mcts") {
    spdlog::info("recovery-regret decay, {} episodes per horizon", s.regret_episodes);
    const auto r = regret_suite(s);
    std::ostringstream ss;
    write_regret_csv(ss, r.exact, "exact");
    write_regret_csv(ss, r.perturbed, "eps", false);
    write_regret_csv(ss, r.perturbed_double, "2eps", false);
    write_file_atomic((fs::path(f.out) / "regret.csv").string(), ss.str());
    std::cout << ss.str();
  }
  return kOk;
}

struct ScalingFlags {
  int horizon_min = 2;
  int horizon_max = 9;
  int roots = 20;
  int target = 10;
  int cap = 100000;
  std::uint64_t seed = 7;
  std::string out = "scaling";
};

int cmd_scaling(RunFlags run, const ScalingFlags& f) {
  if (run.env.empty() && run.config.empty()) run.env = "double-gates-plus";
  auto [cfg, source] = build_config(run);
  if (f.horizon_min < 1 || f.horizon_max < f.horizon_min) {
    throw ConfigError("need 1 <= --horizon-min <= --horizon-max");
  }
  std::vector<int> depths;
  for (int h = f.horizon_min; h <= f.horizon_max; ++h) depths.push_back(h);
  const Environment env = make_env(cfg.env);
  spdlog::info("planner scaling on {} ({}), H {}..{}, {} roots", cfg.env.env_name,
               to_string(cfg.env.dynamics), f.horizon_min, f.horizon_max, f.roots);
  const auto rows =
      planner_scaling(env, cfg.shield, cfg.planner, depths, f.roots, f.target, f.cap, f.seed);
  std::ostringstream ss;
  write_scaling_csv(ss, rows);
  write_file_atomic((fs::path(f.out) / "scaling.csv").string(), ss.str());
  std::cout << ss.str();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Dynamic model predictive shielding: training and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  RunFlags train_flags;
  int jobs = 0;
  auto* train = app.add_subcommand("train", "Train one configuration over several seeds");
  add_run_flags(train, train_flags);
  train->add_option("--out", train_flags.out, "Run directory");
  train->add_option("--jobs", jobs, "Worker threads (default: hardware threads)");

  std::vector<std::string> checkpoints;
  int episodes = 10;
  std::string eval_out;
  auto* eval = app.add_subcommand("eval", "Evaluate trained run directories");
  eval->add_option("--checkpoint", checkpoints, "Run directory (repeatable)")->required();
  eval->add_option("--episodes", episodes, "Evaluation episodes per seed");
  eval->add_option("--out", eval_out, "Directory for summary.csv / comparison.csv");

  std::vector<std::string> inputs;
  std::string report_out = "report";
  auto* report = app.add_subcommand("report", "Aggregate metrics into plot-ready series");
  report->add_option("--input,inputs", inputs, "metrics.csv files or run directories")
      ->required();
  report->add_option("--out", report_out, "Output directory");

  OracleFlags oracle_flags;
  auto* oracle = app.add_subcommand("oracle", "Planner and recovery-regret oracle suites");
  oracle->add_option("--suite", oracle_flags.suite, "all, mcts or regret");
  oracle->add_option("--trials", oracle_flags.trials, "Tree-search trials");
  oracle->add_option("--iterations", oracle_flags.iterations, "Search iterations per plan");
  oracle->add_option("--episodes", oracle_flags.episodes, "Episodes per regret horizon");
  oracle->add_option("--seed", oracle_flags.seed, "Root seed");
  oracle->add_option("--out", oracle_flags.out, "Output directory");

  RunFlags scaling_run;
  ScalingFlags scaling_flags;
  auto* scaling = app.add_subcommand("scaling", "Search expansions needed versus horizon");
  add_run_flags(scaling, scaling_run);
  scaling->add_option("--horizon-min", scaling_flags.horizon_min, "Smallest depth");
  scaling->add_option("--horizon-max", scaling_flags.horizon_max, "Largest depth");
  scaling->add_option("--roots", scaling_flags.roots, "Shield-trigger root states");
  scaling->add_option("--target", scaling_flags.target, "Nodes needed at the target depth");
  scaling->add_option("--cap", scaling_flags.cap, "Expansion cap per search");
  scaling->add_option("--seed", scaling_flags.seed, "Root seed");
  scaling->add_option("--out", scaling_flags.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*train) return cmd_train(train_flags, jobs);
    if (*eval) return cmd_eval(checkpoints, episodes, eval_out);
    if (*report) return cmd_report(inputs, report_out);
    if (*oracle) return cmd_oracle(oracle_flags);
    if (*scaling) return cmd_scaling(scaling_run, scaling_flags);
  } catch (const MissingCheckpoint& e) {
    spdlog::error("{}", e.what());
    return kMissingCheckpoint;
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kIo;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kIo;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kInternal;
  }
  return kInternal;
}
