#include "dmps/trainer.hpp"

#include <ostream>

#include "dmps/text.hpp"

namespace dmps {

std::string to_string(ShieldMode mode) {
  switch (mode) {
    case ShieldMode::None: return "none";
    case ShieldMode::Mps: return "mps";
    case ShieldMode::Dmps: return "dmps";
  }
  return "?";
}

ShieldMode parse_shield_mode(std::string_view text) {
  if (text == "none") return ShieldMode::None;
  if (text == "mps") return ShieldMode::Mps;
  if (text == "dmps") return ShieldMode::Dmps;
  throw ConfigError("unknown shield mode '" + std::string(text) + "' (none, mps, dmps)");
}

void validate(const TrainConfig& cfg) {
  if (cfg.total_timesteps < 1) throw ConfigError("train.total_timesteps must be positive");
  if (cfg.eval_every < 1 || cfg.eval_every > cfg.total_timesteps) {
    throw ConfigError("train.eval_every must lie in [1, total_timesteps]");
  }
  if (cfg.eval_episodes < 1) throw ConfigError("train.eval_episodes must be positive");
  if (cfg.seeds.empty()) throw ConfigError("train.seeds must not be empty");
  Discount{cfg.gamma};
}

std::uint64_t stream_seed(std::uint64_t root, Stream stream) {
  return derive_seed(root, static_cast<std::uint64_t>(stream));
}

ShieldedController::ShieldedController(const Environment& env, ShieldConfig shield_cfg,
                                       PlannerConfig planner_cfg, ShieldMode mode,
                                       const Td3Learner& learner, std::uint64_t planner_seed)
    : env_(env),
      shield_(env, shield_cfg),
      planner_cfg_(planner_cfg),
      mode_(mode),
      planner_rng_(planner_seed) {
  validate(planner_cfg_);
  problem_.step = [this](const State& s, const Action& a) { return env_.transition(s, a); };
  problem_.recoverable = [this](const State& s) { return shield_.recoverable(s); };
  problem_.q = [&learner](const State& s, const Action& a) { return learner.q_value(s, a); };
  problem_.sample_actions = uniform_box_sampler(env.action_box());
}

ShieldDecision ShieldedController::decide(const State& s, const Action& proposed) {
  switch (mode_) {
    case ShieldMode::None:
      return {proposed, ActionSource::Learned, false};
    case ShieldMode::Mps:
      return mps_action(s, proposed, shield_);
    case ShieldMode::Dmps:
      break;
  }
  return dmps_action(s, proposed, shield_, [this](const State& x) -> std::optional<Action> {
    ++plans_;
    PlanResult r = plan_rec(x, problem_, planner_cfg_, planner_rng_);
    if (r.is_bottom()) {
      ++bottoms_;
      return std::nullopt;
    }
    return r.plan->actions.front();
  });
}

Td3Learner make_learner(const Environment& env, LearnerConfig cfg, std::uint64_t seed) {
  const EnvConfig env_cfg = env.config();
  return Td3Learner([env_cfg](const State& s) { return observation_features(env_cfg, s); },
                    feature_dim(env_cfg), env.action_box(), std::move(cfg), seed);
}

int effective_max_steps(const Environment& env, const TrainConfig& cfg) {
  return cfg.episode_max_steps > 0 ? cfg.episode_max_steps : env.config().episode_max_steps;
}

namespace {

Action explore(const Action& a, const ActionBox& box, double sigma_fraction, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  Action out = a;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double range = box[i].hi - box[i].lo;
    out[i] += sigma_fraction * range * noise(rng);
  }
  return box.clamp(out);
}

}  // namespace

TrainResult train(const Environment& env, Td3Learner& learner, const ShieldConfig& shield_cfg,
                  const PlannerConfig& planner_cfg, const TrainConfig& cfg, std::uint64_t seed,
                  const TrainHooks& hooks) {
  validate(cfg);
  TrainResult result;
  const LearnerConfig& lcfg = learner.config();
  const ActionBox& box = env.action_box();
  const int max_steps = effective_max_steps(env, cfg);

  Rng reset_rng(stream_seed(seed, Stream::EnvReset));
  Rng explore_rng(stream_seed(seed, Stream::Exploration));
  ReplayBuffer buffer(lcfg.buffer_capacity, stream_seed(seed, Stream::Replay));
  ShieldedController controller(env, shield_cfg, planner_cfg, cfg.shield_mode, learner,
                                stream_seed(seed, Stream::Planner));

  long t = 0;
  long next_eval = cfg.eval_every;
  int episode = 0;
  auto run_eval = [&]() {
    EvalResult ev = evaluate(learner, env, shield_cfg, planner_cfg, cfg.shield_mode,
                             cfg.eval_episodes, stream_seed(seed, Stream::Eval), max_steps,
                             cfg.dump_trajectories);
    ev.timestep = t;
    if (hooks.on_eval) hooks.on_eval(ev);
    result.evals.push_back(std::move(ev));
  };

  while (t < cfg.total_timesteps) {
    EpisodeMetrics m;
    m.episode = episode;
    State s = env.sample_initial(reset_rng);
    while (m.steps < max_steps && t < cfg.total_timesteps) {
      Action proposed = t < lcfg.warmup_steps
                            ? box.sample_uniform(explore_rng)
                            : explore(learner.act(s), box, lcfg.exploration_sigma, explore_rng);
      const ShieldDecision d = controller.decide(s, proposed);
      if (d.triggered) {
        ++m.shield_invocations;
        ++result.absorbing_records;
        buffer.push({s, proposed, std::nullopt, shield_cfg.r_minus, true});
      }
      StepResult out = step(env, s, d.action);
      const bool unsafe = env.is_unsafe(out.next);
      const bool goal = env.is_goal(out.next);
      // Without a shield an unsafe step is counted but does not end the episode.
      if (unsafe) ++m.safety_violations;
      m.undiscounted_return += out.reward;
      ++m.steps;
      ++t;
      // Time-limit truncation is not terminal; only the goal is.
      buffer.push({s, d.action, out.next, out.reward, goal});
      s = std::move(out.next);
      if (goal) {
        m.goal_reached = true;
        break;
      }
    }
    if (t >= lcfg.warmup_steps && buffer.size() >= static_cast<std::size_t>(lcfg.batch_size)) {
      for (int k = 0; k < m.steps; ++k) learner.update(buffer);
    }
    if (hooks.on_episode) hooks.on_episode(m);
    result.episodes.push_back(m);
    ++episode;
    if (t >= next_eval) {
      run_eval();
      while (next_eval <= t) next_eval += cfg.eval_every;
    }
  }
  if (result.evals.empty() || result.evals.back().timestep != t) run_eval();
  result.timesteps = t;
  return result;
}

EvalResult evaluate(const Td3Learner& learner, const Environment& env,
                    const ShieldConfig& shield_cfg, const PlannerConfig& planner_cfg,
                    ShieldMode mode, int episodes, std::uint64_t seed, int max_steps,
                    bool record_trajectory) {
  EvalResult result;
  Rng reset_rng(derive_seed(seed, 1));
  ShieldedController controller(env, shield_cfg, planner_cfg, mode, learner, derive_seed(seed, 2));
  for (int ep = 0; ep < episodes; ++ep) {
    EpisodeMetrics m;
    m.episode = ep;
    State s = env.sample_initial(reset_rng);
    while (m.steps < max_steps) {
      const ShieldDecision d = controller.decide(s, learner.act(s));
      if (d.triggered) ++m.shield_invocations;
      if (record_trajectory) result.trajectory.push_back({ep, m.steps, s, d.action, d.source});
      StepResult out = step(env, s, d.action);
      if (env.is_unsafe(out.next)) ++m.safety_violations;
      m.undiscounted_return += out.reward;
      ++m.steps;
      s = std::move(out.next);
      if (env.is_goal(s)) {
        m.goal_reached = true;
        break;
      }
    }
    result.episodes.push_back(m);
  }
  return result;
}

void write_metrics_csv(std::ostream& out, std::uint64_t seed,
                       const std::vector<EpisodeMetrics>& episodes, bool header) {
  if (header) out << "seed,episode,return,invocations,violations,steps,goal_reached\n";
  for (const auto& m : episodes) {
    out << seed << ',' << m.episode << ',' << format_double(m.undiscounted_return) << ','
        << m.shield_invocations << ',' << m.safety_violations << ',' << m.steps << ','
        << (m.goal_reached ? 1 : 0) << '\n';
  }
}

void write_eval_csv(std::ostream& out, std::uint64_t seed, const std::vector<EvalResult>& evals,
                    bool header) {
  if (header) out << "seed,timestep,episode,return,invocations,violations,steps,goal_reached\n";
  for (const auto& ev : evals) {
    for (const auto& m : ev.episodes) {
      out << seed << ',' << ev.timestep << ',' << m.episode << ','
          << format_double(m.undiscounted_return) << ',' << m.shield_invocations << ','
          << m.safety_violations << ',' << m.steps << ',' << (m.goal_reached ? 1 : 0) << '\n';
    }
  }
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryStep>& steps) {
  const std::size_t sd = steps.empty() ? 0 : steps.front().state.size();
  const std::size_t ad = steps.empty() ? 0 : steps.front().action.size();
  out << "episode,t";
  for (std::size_t i = 0; i < sd; ++i) out << ",s" << i;
  for (std::size_t i = 0; i < ad; ++i) out << ",a" << i;
  out << ",source\n";
  for (const auto& st : steps) {
    out << st.episode << ',' << st.t;
    for (double v : st.state) out << ',' << format_double(v);
    for (double v : st.action) out << ',' << format_double(v);
    out << ',' << to_string(st.source) << '\n';
  }
}

}  // namespace dmps
