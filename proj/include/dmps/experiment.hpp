#pragma once

// Experiment orchestration behind the command-line tool: seeded training
// runs with their output directory layout, checkpoint evaluation summaries,
// per-episode report series, the planner-scaling experiment and the oracle
// suites.
//
// Run directory layout
//   config.txt               resolved configuration snapshot
//   manifest.json            config path, snapshot, seeds, output dir, version
//   seed_<s>/metrics.csv     one row per training episode
//   seed_<s>/eval.csv        one row per evaluation episode
//   seed_<s>/checkpoint.txt  latest learner checkpoint
//   seed_<s>/traj_<t>.csv    evaluation trajectories (when enabled)

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <iosfwd>
#include <string>
#include <vector>

#include "dmps/config.hpp"
#include "dmps/regret.hpp"
#include "dmps/trainer.hpp"

namespace dmps {

std::string version_string();

struct RunManifest {
  std::string config_path;
  std::string resolved_config;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  std::string version;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

using LogFn = std::function<void(const std::string&)>;

struct SeedOutcome {
  std::uint64_t seed = 0;
  TrainResult result;
};

std::string seed_dir(const std::string& out_dir, std::uint64_t seed);

/// Trains every seed of `cfg` on up to `jobs` worker threads and writes the
/// run directory. Checkpoints are rewritten atomically after every
/// evaluation. `log` may be called from several threads.
std::vector<SeedOutcome> run_training(const RunConfig& cfg, const std::string& out_dir,
                                      const std::string& config_path, const LogFn& log = {},
                                      int jobs = 1);

/// Trains one seed without touching the file system.
SeedOutcome train_seed(const RunConfig& cfg, std::uint64_t seed, const TrainHooks& hooks = {});

struct RunEvaluation {
  RunConfig config;
  std::vector<std::uint64_t> seeds;
  std::vector<EvalResult> results;  // one per seed
};

/// Loads config.txt and every seed checkpoint of a run directory and
/// evaluates each with `episodes` deterministic rollouts. A missing
/// checkpoint throws MissingCheckpoint.
RunEvaluation evaluate_run(const std::string& run_dir, int episodes);

class MissingCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SummaryRow {
  std::string label;
  std::string env;
  std::string dynamics;
  std::string shield;
  int seeds = 0;
  double return_mean = 0.0, return_sd = 0.0;
  double invocations_mean = 0.0, invocations_sd = 0.0;
  double violations_mean = 0.0, violations_sd = 0.0;
};

/// Mean and sample standard deviation over seeds of the per-seed episode
/// means.
SummaryRow summarize(const std::string& label, const RunConfig& cfg,
                     const std::vector<std::vector<EpisodeMetrics>>& per_seed);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
/// Pairwise row: invocation ratio second / first and return difference.
void write_comparison_csv(std::ostream& out, const SummaryRow& first, const SummaryRow& second);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};
MeanSd mean_sd(const std::vector<double>& xs);

/// Parses a metrics.csv (possibly holding several seeds), grouped by seed.
std::vector<std::pair<std::uint64_t, std::vector<EpisodeMetrics>>> read_metrics_csv(
    const std::string& path);

struct SeriesRow {
  int episode = 0;
  double mean_return = 0.0, sd_return = 0.0;
  double mean_invocations = 0.0, sd_invocations = 0.0;
};

/// Per-episode mean and sd over seeds, over the episode indices every seed
/// reached. `warning` is set when the seeds disagree on length.
std::vector<SeriesRow> aggregate_series(const std::vector<std::vector<EpisodeMetrics>>& per_seed,
                                        std::string* warning);
void write_series_csv(std::ostream& out, const std::vector<SeriesRow>& rows);

struct ScalingRow {
  int horizon = 0;
  double mean_expansions = 0.0;
  double sd_expansions = 0.0;
  int roots = 0;
  int censored = 0;      // searches that hit the expansion cap (excluded from the mean)
  int unexpandable = 0;  // roots where the search returned bottom at once (excluded)
};

/// States at which the shield overrides uniformly random proposals, taken
/// from shielded rollouts of `env`.
std::vector<State> collect_trigger_states(const Environment& env, const ShieldConfig& shield_cfg,
                                          int count, std::uint64_t seed);

/// Expansions the search needs until `target` nodes exist at depth `depth`.
/// Stops at `cap` expansions; -1 when the root cannot be expanded.
int expansions_to_depth(const State& root, const PlanningProblem& problem, PlannerConfig cfg,
                        int depth, int target, int cap, Rng& rng);

/// The scaling experiment on `env`, with a zero Q bootstrap.
std::vector<ScalingRow> planner_scaling(const Environment& env, const ShieldConfig& shield_cfg,
                                        const PlannerConfig& planner_cfg,
                                        const std::vector<int>& depths, int roots, int target,
                                        int cap, std::uint64_t seed);
void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows);

struct MctsOracleCheck {
  int trials = 0;
  int matches = 0;  // |MCTS objective - oracle objective| <= tol
  int dominance_failures = 0;  // MCTS objective above the oracle's
  int bottoms = 0;
  double worst_miss = 0.0;
};

struct OracleSettings {
  CorridorSpec mcts_spec{};  // gamma 0.9
  double mcts_eps = 1.0;
  int mcts_trials = 100;
  int mcts_iterations = 10000;
  int mcts_horizon = 3;
  double match_tol = 1e-9;

  CorridorSpec regret_spec = [] {
    CorridorSpec s;
    s.gamma = 0.5;
    return s;
  }();
  double regret_eps = 1.0;
  std::vector<int> regret_horizons = {1, 2, 3, 4, 5};
  int regret_episodes = 300;
  int regret_iterations = 10000;
  std::uint64_t seed = 2024;
};

/// Tree search against exhaustive enumeration on random recoverable corridor
/// states, with a perturbed Q.
MctsOracleCheck mcts_oracle_check(const OracleSettings& s);

struct RegretSuiteResult {
  std::vector<RegretReport> exact;
  std::vector<RegretReport> perturbed;         // eps
  std::vector<RegretReport> perturbed_double;  // 2 eps
};

/// The decay suite with exact Q*, Q* + eps u and Q* + 2 eps u; the learned
/// proposal is always "accelerate".
RegretSuiteResult regret_suite(const OracleSettings& s);

/// Number of n -> n+1 increases in RR, and how many of them exceed two
/// combined standard errors.
struct Inversions {
  int total = 0;
  int significant = 0;
};
Inversions count_inversions(const std::vector<RegretReport>& reports);

}  // namespace dmps
