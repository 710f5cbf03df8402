#include <gtest/gtest.h>

#include <sstream>

#include "dmps/config.hpp"
#include "dmps/experiment.hpp"
#include "dmps/trainer.hpp"

using namespace dmps;

namespace {

RunConfig quick(const char* env, ShieldMode mode, long steps = 1500) {
  RunConfig c = default_run_config(env, Dynamics::DoubleIntegrator);
  c.train.shield_mode = mode;
  c.train.total_timesteps = steps;
  c.train.eval_every = steps;
  c.train.eval_episodes = 2;
  c.learner.warmup_steps = 500;
  c.learner.hidden = {16, 16};
  c.learner.batch_size = 32;
  c.planner.iterations = 30;
  resolve(c);
  return c;
}

long total(const std::vector<EpisodeMetrics>& eps, int EpisodeMetrics::*field) {
  long n = 0;
  for (const auto& m : eps) n += m.*field;
  return n;
}

}  // namespace

TEST(ShieldMode, Parsing) {
  EXPECT_EQ(parse_shield_mode("none"), ShieldMode::None);
  EXPECT_EQ(parse_shield_mode("mps"), ShieldMode::Mps);
  EXPECT_EQ(parse_shield_mode("dmps"), ShieldMode::Dmps);
  EXPECT_THROW(parse_shield_mode("both"), ConfigError);
  for (ShieldMode m : {ShieldMode::None, ShieldMode::Mps, ShieldMode::Dmps}) {
    EXPECT_EQ(parse_shield_mode(to_string(m)), m);
  }
}

TEST(Train, DmpsNeverViolates) {
  for (const char* env : {"double-gates", "dynamic-obst", "road2d"}) {
    const RunConfig c = quick(env, ShieldMode::Dmps);
    const SeedOutcome o = train_seed(c, 1);
    EXPECT_EQ(total(o.result.episodes, &EpisodeMetrics::safety_violations), 0) << env;
    for (const auto& ev : o.result.evals) {
      EXPECT_EQ(total(ev.episodes, &EpisodeMetrics::safety_violations), 0) << env;
    }
  }
}

TEST(Train, UnshieldedDoubleGatesIsHazardous) {
  RunConfig c = quick("double-gates", ShieldMode::None, 20000);
  const SeedOutcome o = train_seed(c, 0);
  ASSERT_GE(o.result.episodes.size(), 1u);
  long violations = 0;
  for (std::size_t i = 0; i < std::min<std::size_t>(50, o.result.episodes.size()); ++i) {
    violations += o.result.episodes[i].safety_violations;
  }
  EXPECT_GT(violations, 0);
  EXPECT_EQ(total(o.result.episodes, &EpisodeMetrics::shield_invocations), 0);
}

TEST(Train, OnePenaltyRecordPerInvocation) {
  for (ShieldMode mode : {ShieldMode::Mps, ShieldMode::Dmps}) {
    const SeedOutcome o = train_seed(quick("double-gates-plus", mode), 3);
    const long inv = total(o.result.episodes, &EpisodeMetrics::shield_invocations);
    EXPECT_GT(inv, 0);
    EXPECT_EQ(o.result.absorbing_records, inv);
  }
}

TEST(Train, StepAccounting) {
  const RunConfig c = quick("single-gate", ShieldMode::Mps, 1234);
  const SeedOutcome o = train_seed(c, 2);
  EXPECT_EQ(o.result.timesteps, 1234);
  EXPECT_EQ(total(o.result.episodes, &EpisodeMetrics::steps), 1234);
  for (std::size_t i = 0; i < o.result.episodes.size(); ++i) {
    EXPECT_EQ(o.result.episodes[i].episode, static_cast<int>(i));
    EXPECT_LE(o.result.episodes[i].steps, c.env.episode_max_steps);
  }
  ASSERT_FALSE(o.result.evals.empty());
  EXPECT_EQ(o.result.evals.back().timestep, 1234);
  EXPECT_EQ(o.result.evals.back().episodes.size(), 2u);
}

TEST(Train, EpisodeLimitOverride) {
  RunConfig c = quick("single-gate", ShieldMode::Mps, 600);
  c.train.episode_max_steps = 50;
  const SeedOutcome o = train_seed(c, 2);
  EXPECT_EQ(o.result.episodes.size(), 12u);
}

TEST(Train, Deterministic) {
  const RunConfig c = quick("double-gates-plus", ShieldMode::Dmps);
  const SeedOutcome a = train_seed(c, 4), b = train_seed(c, 4);
  std::ostringstream sa, sb;
  write_metrics_csv(sa, 4, a.result.episodes);
  write_metrics_csv(sb, 4, b.result.episodes);
  EXPECT_EQ(sa.str(), sb.str());
  const SeedOutcome other = train_seed(c, 5);
  std::ostringstream so;
  write_metrics_csv(so, 4, other.result.episodes);
  EXPECT_NE(sa.str(), so.str());
}

TEST(Evaluate, SameCheckpointSameSeedSameMetrics) {
  const RunConfig c = quick("double-gates-plus", ShieldMode::Dmps);
  const Environment env = make_env(c.env);
  Td3Learner learner = make_learner(env, c.learner, 3);
  train(env, learner, c.shield, c.planner, c.train, 3);
  std::stringstream ckpt;
  learner.save(ckpt);
  Td3Learner restored = make_learner(env, c.learner, 999);
  restored.load(ckpt);
  const int steps = effective_max_steps(env, c.train);
  const EvalResult a = evaluate(learner, env, c.shield, c.planner, ShieldMode::Dmps, 3, 8, steps, true);
  const EvalResult b = evaluate(restored, env, c.shield, c.planner, ShieldMode::Dmps, 3, 8, steps, true);
  std::ostringstream ea, eb, ta, tb;
  write_eval_csv(ea, 0, {a});
  write_eval_csv(eb, 0, {b});
  write_trajectory_csv(ta, a.trajectory);
  write_trajectory_csv(tb, b.trajectory);
  EXPECT_EQ(ea.str(), eb.str());
  EXPECT_EQ(ta.str(), tb.str());
  EXPECT_FALSE(a.trajectory.empty());
}

TEST(Controller, ZeroBudgetUsesBackup) {
  RunConfig c = quick("single-gate", ShieldMode::Dmps);
  c.planner.node_budget = 0;
  const Environment env = make_env(c.env);
  const Td3Learner learner = make_learner(env, c.learner, 1);
  ShieldedController ctl(env, c.shield, c.planner, ShieldMode::Dmps, learner, 1);
  Rng rng(2);
  State s = env.sample_initial(rng);
  int triggers = 0;
  for (int t = 0; t < 300; ++t) {
    const ShieldDecision d = ctl.decide(s, {0.0, c.env.a_max});
    if (d.triggered) {
      ++triggers;
      EXPECT_EQ(d.source, ActionSource::Backup);
      EXPECT_EQ(d.action, ctl.shield().backup(s));
    }
    s = step(env, s, d.action).next;
    ASSERT_FALSE(env.is_unsafe(s));
  }
  EXPECT_GT(triggers, 0);
  EXPECT_EQ(ctl.plans(), ctl.bottoms());
}

TEST(Csv, HeadersAreStable) {
  std::ostringstream m, e, t;
  write_metrics_csv(m, 0, {});
  write_eval_csv(e, 0, {});
  TrajectoryStep step;
  step.state = {1, 2};
  step.action = {0.5};
  write_trajectory_csv(t, {step});
  EXPECT_EQ(m.str(), "seed,episode,return,invocations,violations,steps,goal_reached\n");
  EXPECT_EQ(e.str().substr(0, e.str().find('\n')),
            "seed,timestep,episode,return,invocations,violations,steps,goal_reached");
  EXPECT_EQ(t.str(), "episode,t,s0,s1,a0,source\n0,0,1,2,0.5,learned\n");
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(validate(c));
  c.total_timesteps = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = TrainConfig{};
  c.seeds = {};
  EXPECT_THROW(validate(c), ConfigError);
  c = TrainConfig{};
  c.eval_episodes = 0;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Streams, Distinct) {
  EXPECT_NE(stream_seed(1, Stream::EnvReset), stream_seed(1, Stream::Planner));
  EXPECT_NE(stream_seed(1, Stream::EnvReset), stream_seed(2, Stream::EnvReset));
}
