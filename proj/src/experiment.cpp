#include "dmps/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "dmps/text.hpp"

#ifndef DMPS_VERSION_STRING
#define DMPS_VERSION_STRING "unknown"
#endif

namespace dmps {

namespace fs = std::filesystem;

std::string version_string() { return DMPS_VERSION_STRING; }

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["config_path"] = config_path;
  j["resolved_config"] = resolved_config;
  j["seeds"] = seeds;
  j["output_dir"] = output_dir;
  j["version"] = version;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.config_path = j.at("config_path").get<std::string>();
    m.resolved_config = j.at("resolved_config").get<std::string>();
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.output_dir = j.at("output_dir").get<std::string>();
    m.version = j.at("version").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad manifest: ") + e.what());
  }
}

std::string seed_dir(const std::string& out_dir, std::uint64_t seed) {
  return (fs::path(out_dir) / ("seed_" + std::to_string(seed))).string();
}

SeedOutcome train_seed(const RunConfig& cfg, std::uint64_t seed, const TrainHooks& hooks) {
  const Environment env = make_env(cfg.env);
  Td3Learner learner = make_learner(env, cfg.learner, stream_seed(seed, Stream::LearnerInit));
  SeedOutcome out;
  out.seed = seed;
  out.result = train(env, learner, cfg.shield, cfg.planner, cfg.train, seed, hooks);
  return out;
}

std::vector<SeedOutcome> run_training(const RunConfig& cfg, const std::string& out_dir,
                                      const std::string& config_path, const LogFn& log,
                                      int jobs) {
  RunManifest manifest;
  manifest.config_path = config_path;
  manifest.resolved_config = to_text(cfg);
  manifest.seeds = cfg.train.seeds;
  manifest.output_dir = out_dir;
  manifest.version = version_string();
  write_file_atomic((fs::path(out_dir) / "config.txt").string(), manifest.resolved_config);
  write_file_atomic((fs::path(out_dir) / "manifest.json").string(), manifest.to_json());

  const auto& seeds = cfg.train.seeds;
  std::vector<SeedOutcome> outcomes(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());

  // Each worker owns its environment, learner and streams.
  auto run_one = [&](std::size_t idx) {
    const std::uint64_t seed = seeds[idx];
    const Environment env = make_env(cfg.env);
    const std::string dir = seed_dir(out_dir, seed);
    Td3Learner learner = make_learner(env, cfg.learner, stream_seed(seed, Stream::LearnerInit));
    TrainHooks hooks;
    hooks.on_eval = [&](const EvalResult& ev) {
      learner.save_file((fs::path(dir) / "checkpoint.txt").string());
      if (cfg.train.dump_trajectories) {
        std::ostringstream ss;
        write_trajectory_csv(ss, ev.trajectory);
        write_file_atomic((fs::path(dir) / ("traj_" + std::to_string(ev.timestep) + ".csv")).string(),
                          ss.str());
      }
      if (log) {
        std::vector<double> r, inv;
        for (const auto& m : ev.episodes) {
          r.push_back(m.undiscounted_return);
          inv.push_back(m.shield_invocations);
        }
        log("seed " + std::to_string(seed) + " t=" + std::to_string(ev.timestep) +
            " eval return " + format_double(mean_sd(r).mean) + " invocations " +
            format_double(mean_sd(inv).mean));
      }
    };
    SeedOutcome& out = outcomes[idx];
    out.seed = seed;
    out.result = train(env, learner, cfg.shield, cfg.planner, cfg.train, seed, hooks);
    std::ostringstream metrics, evals;
    write_metrics_csv(metrics, seed, out.result.episodes);
    write_eval_csv(evals, seed, out.result.evals);
    write_file_atomic((fs::path(dir) / "metrics.csv").string(), metrics.str());
    write_file_atomic((fs::path(dir) / "eval.csv").string(), evals.str());
  };

  const std::size_t workers =
      std::clamp<std::size_t>(jobs > 0 ? static_cast<std::size_t>(jobs) : 1, 1, seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        run_one(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return outcomes;
}

RunEvaluation evaluate_run(const std::string& run_dir, int episodes) {
  const fs::path cfg_path = fs::path(run_dir) / "config.txt";
  if (!fs::exists(cfg_path)) throw MissingCheckpoint("no config.txt in " + run_dir);
  RunEvaluation ev;
  ev.config = load_config_file(cfg_path.string());
  ev.seeds = ev.config.train.seeds;
  const Environment env = make_env(ev.config.env);
  const int max_steps = effective_max_steps(env, ev.config.train);
  for (std::uint64_t seed : ev.seeds) {
    const fs::path ckpt = fs::path(seed_dir(run_dir, seed)) / "checkpoint.txt";
    if (!fs::exists(ckpt)) throw MissingCheckpoint("missing checkpoint " + ckpt.string());
    Td3Learner learner = make_learner(env, ev.config.learner, 0);
    learner.load_file(ckpt.string());
    ev.results.push_back(evaluate(learner, env, ev.config.shield, ev.config.planner,
                                  ev.config.train.shield_mode, episodes,
                                  stream_seed(seed, Stream::Eval), max_steps, false));
  }
  return ev;
}

MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd out;
  if (xs.empty()) return out;
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

SummaryRow summarize(const std::string& label, const RunConfig& cfg,
                     const std::vector<std::vector<EpisodeMetrics>>& per_seed) {
  SummaryRow row;
  row.label = label;
  row.env = cfg.env.env_name;
  row.dynamics = to_string(cfg.env.dynamics);
  row.shield = to_string(cfg.train.shield_mode);
  row.seeds = static_cast<int>(per_seed.size());
  std::vector<double> ret, inv, viol;
  for (const auto& eps : per_seed) {
    double r = 0.0, i = 0.0, v = 0.0;
    for (const auto& m : eps) {
      r += m.undiscounted_return;
      i += m.shield_invocations;
      v += m.safety_violations;
    }
    const double n = std::max<std::size_t>(eps.size(), 1);
    ret.push_back(r / n);
    inv.push_back(i / n);
    viol.push_back(v / n);
  }
  const auto a = mean_sd(ret), b = mean_sd(inv), c = mean_sd(viol);
  row.return_mean = a.mean;
  row.return_sd = a.sd;
  row.invocations_mean = b.mean;
  row.invocations_sd = b.sd;
  row.violations_mean = c.mean;
  row.violations_sd = c.sd;
  return row;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "label,env,dynamics,shield,seeds,return_mean,return_sd,invocations_mean,"
         "invocations_sd,violations_mean,violations_sd\n";
  for (const auto& r : rows) {
    out << r.label << ',' << r.env << ',' << r.dynamics << ',' << r.shield << ',' << r.seeds << ','
        << format_double(r.return_mean) << ',' << format_double(r.return_sd) << ','
        << format_double(r.invocations_mean) << ',' << format_double(r.invocations_sd) << ','
        << format_double(r.violations_mean) << ',' << format_double(r.violations_sd) << '\n';
  }
}

void write_comparison_csv(std::ostream& out, const SummaryRow& first, const SummaryRow& second) {
  out << "first,second,invocation_ratio,return_difference\n";
  const double ratio = first.invocations_mean > 0.0
                           ? second.invocations_mean / first.invocations_mean
                           : (second.invocations_mean > 0.0 ? INFINITY : 0.0);
  out << first.label << ',' << second.label << ',' << format_double(ratio) << ','
      << format_double(second.return_mean - first.return_mean) << '\n';
}

std::vector<std::pair<std::uint64_t, std::vector<EpisodeMetrics>>> read_metrics_csv(
    const std::string& path) {
  const std::string text = read_file(path);
  const auto lines = split(text, '\n');
  if (lines.empty() ||
      trim(lines[0]) != "seed,episode,return,invocations,violations,steps,goal_reached") {
    throw ConfigError(path + ": not a metrics file (unexpected header)");
  }
  std::vector<std::pair<std::uint64_t, std::vector<EpisodeMetrics>>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split(trim(lines[i]), ',');
    if (f.size() != 7) {
      throw ConfigError(path + ": line " + std::to_string(i + 1) + " has " +
                        std::to_string(f.size()) + " fields");
    }
    const auto seed = static_cast<std::uint64_t>(parse_int(f[0]));
    EpisodeMetrics m;
    m.episode = static_cast<int>(parse_int(f[1]));
    m.undiscounted_return = parse_double(f[2]);
    m.shield_invocations = static_cast<int>(parse_int(f[3]));
    m.safety_violations = static_cast<int>(parse_int(f[4]));
    m.steps = static_cast<int>(parse_int(f[5]));
    m.goal_reached = parse_int(f[6]) != 0;
    if (out.empty() || out.back().first != seed) out.push_back({seed, {}});
    out.back().second.push_back(m);
  }
  return out;
}

std::vector<SeriesRow> aggregate_series(const std::vector<std::vector<EpisodeMetrics>>& per_seed,
                                        std::string* warning) {
  std::vector<SeriesRow> rows;
  if (per_seed.empty()) return rows;
  std::size_t common = per_seed.front().size();
  bool uneven = false;
  for (const auto& s : per_seed) {
    if (s.size() != common) uneven = true;
    common = std::min(common, s.size());
  }
  if (uneven && warning) {
    *warning = "seeds cover different episode counts; using the first " + std::to_string(common);
  }
  for (std::size_t e = 0; e < common; ++e) {
    std::vector<double> r, inv;
    for (const auto& s : per_seed) {
      r.push_back(s[e].undiscounted_return);
      inv.push_back(s[e].shield_invocations);
    }
    const auto a = mean_sd(r), b = mean_sd(inv);
    rows.push_back({static_cast<int>(e), a.mean, a.sd, b.mean, b.sd});
  }
  return rows;
}

void write_series_csv(std::ostream& out, const std::vector<SeriesRow>& rows) {
  out << "episode,mean_return,sd_return,mean_invocations,sd_invocations\n";
  for (const auto& r : rows) {
    out << r.episode << ',' << format_double(r.mean_return) << ',' << format_double(r.sd_return)
        << ',' << format_double(r.mean_invocations) << ',' << format_double(r.sd_invocations)
        << '\n';
  }
}

std::vector<State> collect_trigger_states(const Environment& env, const ShieldConfig& shield_cfg,
                                          int count, std::uint64_t seed) {
  EnvShield shield(env, shield_cfg);
  Rng rng(seed);
  std::vector<State> roots;
  const int max_steps = env.config().episode_max_steps;
  for (int episode = 0; episode < 1000 && static_cast<int>(roots.size()) < count; ++episode) {
    State s = env.sample_initial(rng);
    for (int t = 0; t < max_steps && static_cast<int>(roots.size()) < count; ++t) {
      const ShieldDecision d = mps_action(s, env.action_box().sample_uniform(rng), shield);
      if (d.triggered) roots.push_back(s);
      s = step(env, s, d.action).next;
      if (env.is_goal(s)) break;
    }
  }
  return roots;
}

int expansions_to_depth(const State& root, const PlanningProblem& problem, PlannerConfig cfg,
                        int depth, int target, int cap, Rng& rng) {
  // Tree depth is limited to horizon + 1 edges.
  cfg.horizon = depth - 1;
  cfg.node_budget = cap;
  MctsSearch search(root, problem, cfg, rng);
  std::size_t scanned = 0;
  int at_depth = 0;
  auto count_at_depth = [&] {
    const auto& tree = search.tree();
    for (; scanned < tree.node_count(); ++scanned) {
      if (tree.node(static_cast<int>(scanned)).depth == depth) ++at_depth;
    }
    return at_depth;
  };
  if (!search.start()) return -1;
  // Iterations can stall once every reachable frontier is exhausted; bound them too.
  for (long it = 0; it < 50L * cap; ++it) {
    if (count_at_depth() >= target) return search.stats().expansions;
    if (search.stats().expansions >= cap) break;
    search.iterate();
  }
  return count_at_depth() >= target ? search.stats().expansions : cap;
}

std::vector<ScalingRow> planner_scaling(const Environment& env, const ShieldConfig& shield_cfg,
                                        const PlannerConfig& planner_cfg,
                                        const std::vector<int>& depths, int roots, int target,
                                        int cap, std::uint64_t seed) {
  const EnvShield shield(env, shield_cfg);
  PlanningProblem problem;
  problem.step = [&env](const State& s, const Action& a) { return env.transition(s, a); };
  problem.recoverable = [&shield](const State& s) { return shield.recoverable(s); };
  problem.q = [](const State&, const Action&) { return 0.0; };
  problem.sample_actions = uniform_box_sampler(env.action_box());
  const auto states = collect_trigger_states(env, shield_cfg, roots, derive_seed(seed, 1));
  std::vector<ScalingRow> rows;
  for (int depth : depths) {
    ScalingRow row;
    row.horizon = depth;
    std::vector<double> counts;
    for (std::size_t i = 0; i < states.size(); ++i) {
      Rng rng(derive_seed(seed, 100 + i));
      const int n = expansions_to_depth(states[i], problem, planner_cfg, depth, target, cap, rng);
      if (n < 0) {
        ++row.unexpandable;
        continue;
      }
      if (n >= cap) {
        ++row.censored;
        continue;
      }
      counts.push_back(n);
    }
    const auto ms = mean_sd(counts);
    row.mean_expansions = ms.mean;
    row.sd_expansions = ms.sd;
    row.roots = static_cast<int>(counts.size());
    rows.push_back(row);
  }
  return rows;
}

void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows) {
  out << "horizon,mean_expansions,sd_expansions,roots,censored,unexpandable\n";
  for (const auto& r : rows) {
    out << r.horizon << ',' << format_double(r.mean_expansions) << ','
        << format_double(r.sd_expansions) << ',' << r.roots << ',' << r.censored << ','
        << r.unexpandable << '\n';
  }
}

namespace {

struct SolvedToy {
  DiscreteToyMdp toy;
  std::vector<char> rec;
  ValueTables optimal;
};

SolvedToy solve_corridor(const CorridorSpec& spec) {
  SolvedToy out;
  out.toy = make_corridor_toy(spec);
  out.rec = recoverable_states(out.toy, spec.max_speed + 1);
  out.optimal = value_iteration(
      restrict_to_recoverable(out.toy, out.rec, corridor_unsafe_state(spec)), 1e-12);
  return out;
}

}  // namespace

MctsOracleCheck mcts_oracle_check(const OracleSettings& s) {
  const SolvedToy solved = solve_corridor(s.mcts_spec);
  const QTable q = perturb_q(solved.optimal.q, s.mcts_eps, derive_seed(s.seed, 1));
  std::vector<int> roots;
  for (int st = 0; st < solved.toy.num_states; ++st) {
    if (solved.rec[static_cast<std::size_t>(st)] && !solved.toy.terminal[static_cast<std::size_t>(st)]) {
      roots.push_back(st);
    }
  }
  const PlanningProblem problem = toy_planning_problem(solved.toy, solved.rec, q);
  PlannerConfig cfg;
  cfg.horizon = s.mcts_horizon;
  cfg.branching = solved.toy.num_actions;
  cfg.iterations = s.mcts_iterations;
  cfg.gamma = solved.toy.gamma;
  MctsOracleCheck out;
  for (int t = 0; t < s.mcts_trials; ++t) {
    Rng rng(derive_seed(s.seed, 1000 + static_cast<std::uint64_t>(t)));
    std::uniform_int_distribution<std::size_t> pick(0, roots.size() - 1);
    const int s0 = roots[pick(rng)];
    const BruteForcePlan oracle = brute_force_plan(solved.toy, s0, s.mcts_horizon, q, solved.rec);
    const PlanResult pr = plan_rec({static_cast<double>(s0)}, problem, cfg, rng);
    ++out.trials;
    if (pr.is_bottom() || !oracle.feasible()) {
      ++out.bottoms;
      continue;
    }
    const double miss = oracle.objective - pr.plan->objective_value;
    if (miss < -s.match_tol) ++out.dominance_failures;
    if (std::fabs(miss) <= s.match_tol) {
      ++out.matches;
    } else {
      out.worst_miss = std::max(out.worst_miss, std::fabs(miss));
    }
  }
  return out;
}

RegretSuiteResult regret_suite(const OracleSettings& s) {
  const SolvedToy solved = solve_corridor(s.regret_spec);
  RegretSetup base;
  base.learned.assign(static_cast<std::size_t>(solved.toy.num_states), kAccelerate);
  base.use_mcts = true;
  base.planner.iterations = s.regret_iterations;
  base.episodes = s.regret_episodes;
  base.seed = derive_seed(s.seed, 2);
  RegretSuiteResult out;
  base.planner_q = solved.optimal.q;
  out.exact = regret_decay_suite(solved.toy, solved.rec, solved.optimal, s.regret_horizons, base);
  const std::uint64_t field_seed = derive_seed(s.seed, 3);
  base.planner_q = perturb_q(solved.optimal.q, s.regret_eps, field_seed);
  out.perturbed =
      regret_decay_suite(solved.toy, solved.rec, solved.optimal, s.regret_horizons, base);
  base.planner_q = perturb_q(solved.optimal.q, 2.0 * s.regret_eps, field_seed);
  out.perturbed_double =
      regret_decay_suite(solved.toy, solved.rec, solved.optimal, s.regret_horizons, base);
  return out;
}

Inversions count_inversions(const std::vector<RegretReport>& reports) {
  Inversions inv;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const auto& a = reports[i - 1];
    const auto& b = reports[i];
    if (b.empirical_rr > a.empirical_rr) {
      ++inv.total;
      const double se = std::sqrt(a.rr_stderr * a.rr_stderr + b.rr_stderr * b.rr_stderr);
      if (b.empirical_rr - a.empirical_rr > 2.0 * se) ++inv.significant;
    }
  }
  return inv;
}

}  // namespace dmps
