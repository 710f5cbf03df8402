#pragma once

// Shield-in-the-loop training: propose, shield, execute, record, and update
// the learner at the end of every episode. Also the deterministic evaluation
// protocol and the CSV writers for its outputs.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmps/environments.hpp"
#include "dmps/learner.hpp"
#include "dmps/planner.hpp"
#include "dmps/shield.hpp"

namespace dmps {

enum class ShieldMode { None, Mps, Dmps };
std::string to_string(ShieldMode mode);
ShieldMode parse_shield_mode(std::string_view text);

struct TrainConfig {
  long total_timesteps = 50000;
  int episode_max_steps = 0;  // <= 0 keeps the environment's own limit
  long eval_every = 10000;
  int eval_episodes = 10;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  ShieldMode shield_mode = ShieldMode::Dmps;
  double gamma = 0.99;  // copied into the learner and planner configs
  bool dump_trajectories = false;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& cfg);

struct EpisodeMetrics {
  int episode = 0;
  double undiscounted_return = 0.0;
  int shield_invocations = 0;
  int safety_violations = 0;
  int steps = 0;
  bool goal_reached = false;
};

struct TrajectoryStep {
  int episode = 0;
  int t = 0;
  State state;
  Action action;
  ActionSource source = ActionSource::Learned;
};

struct EvalResult {
  long timestep = 0;
  std::vector<EpisodeMetrics> episodes;
  std::vector<TrajectoryStep> trajectory;  // filled only when requested
};

struct TrainResult {
  std::vector<EpisodeMetrics> episodes;
  std::vector<EvalResult> evals;
  long timesteps = 0;
  long absorbing_records = 0;
};

/// Random streams of one seeded run.
enum class Stream : std::uint64_t {
  EnvReset = 1,
  LearnerInit = 2,
  Exploration = 3,
  Planner = 4,
  Eval = 5,
  Replay = 6,
};
std::uint64_t stream_seed(std::uint64_t root, Stream stream);

/// The action-selection stack for one shield mode. In DMPS mode the planner
/// bootstraps with the learner's first critic.
class ShieldedController {
 public:
  ShieldedController(const Environment& env, ShieldConfig shield_cfg, PlannerConfig planner_cfg,
                     ShieldMode mode, const Td3Learner& learner, std::uint64_t planner_seed);

  ShieldDecision decide(const State& s, const Action& proposed);

  const EnvShield& shield() const { return shield_; }
  const PlanningProblem& problem() const { return problem_; }
  long plans() const { return plans_; }
  long bottoms() const { return bottoms_; }

 private:
  const Environment& env_;
  EnvShield shield_;
  PlannerConfig planner_cfg_;
  ShieldMode mode_;
  PlanningProblem problem_;
  Rng planner_rng_;
  long plans_ = 0;
  long bottoms_ = 0;
};

/// Builds a learner wired to `env`'s feature map and action box.
Td3Learner make_learner(const Environment& env, LearnerConfig cfg, std::uint64_t seed);

struct TrainHooks {
  std::function<void(const EpisodeMetrics&)> on_episode;
  std::function<void(const EvalResult&)> on_eval;
};

/// One seeded training run. The learner is updated in place.
TrainResult train(const Environment& env, Td3Learner& learner, const ShieldConfig& shield_cfg,
                  const PlannerConfig& planner_cfg, const TrainConfig& cfg, std::uint64_t seed,
                  const TrainHooks& hooks = {});

/// Deterministic rollouts of the actor (no noise, no learning) under the
/// same shielding as training.
EvalResult evaluate(const Td3Learner& learner, const Environment& env,
                    const ShieldConfig& shield_cfg, const PlannerConfig& planner_cfg,
                    ShieldMode mode, int episodes, std::uint64_t seed, int max_steps,
                    bool record_trajectory);

int effective_max_steps(const Environment& env, const TrainConfig& cfg);

// CSV writers. Every file starts with its header row.
void write_metrics_csv(std::ostream& out, std::uint64_t seed,
                       const std::vector<EpisodeMetrics>& episodes, bool header = true);
void write_eval_csv(std::ostream& out, std::uint64_t seed, const std::vector<EvalResult>& evals,
                    bool header = true);
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryStep>& steps);

}  // namespace dmps
