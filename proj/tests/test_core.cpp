#include <gtest/gtest.h>

#include <cmath>

#include "dmps/core.hpp"
#include "dmps/environments.hpp"

using namespace dmps;

TEST(NStepReturn, EmptyHorizonIsTerminalQ) {
  EXPECT_DOUBLE_EQ(n_step_return({}, 7.0, 0.9), 7.0);
}

TEST(NStepReturn, HandArithmetic) {
  const std::vector<double> ones = {1, 1, 1};
  EXPECT_DOUBLE_EQ(n_step_return(ones, 0.0, 0.5), 1.75);
  const std::vector<double> two = {2};
  EXPECT_NEAR(n_step_return(two, 10.0, 0.99), 11.9, 1e-12);
}

TEST(NStepReturn, MatchesExplicitSum) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> r(static_cast<std::size_t>(trial % 7));
    for (auto& x : r) x = u(rng);
    const double q = u(rng), g = 0.95;
    double expect = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) expect += std::pow(g, i) * r[i];
    expect += std::pow(g, r.size()) * q;
    EXPECT_NEAR(n_step_return(r, q, g), expect, 1e-12);
  }
}

TEST(Discount, RejectsOutOfRange) {
  EXPECT_THROW(Discount(0.0), ConfigError);
  EXPECT_THROW(Discount(1.0), ConfigError);
  EXPECT_THROW(Discount(std::nan("")), ConfigError);
  EXPECT_DOUBLE_EQ(Discount(0.5).value(), 0.5);
}

TEST(ActionBox, ClampAndContains) {
  ActionBox box({{-1, 1}, {0, 2}});
  EXPECT_EQ(box.clamp({-3, 5}), (Action{-1, 2}));
  EXPECT_TRUE(box.contains({0, 1}));
  EXPECT_FALSE(box.contains({0, 2.5}));
  EXPECT_THROW(box.clamp({0}), EnvError);
  EXPECT_EQ(box.center(), (Vec{0, 1}));
  EXPECT_EQ(box.half_range(), (Vec{1, 1}));
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_TRUE(box.contains(box.sample_uniform(rng)));
}

TEST(Step, RejectsCorruptState) {
  const Environment env = make_env(default_env_config("obstacle", Dynamics::DoubleIntegrator));
  EXPECT_THROW(step(env, {0, 0, std::nan(""), 0}, {0, 0}), EnvError);
  EXPECT_THROW(step(env, {0, 0, 0}, {0, 0}), EnvError);
}

TEST(Step, ClampsAction) {
  const Environment env = make_env(default_env_config("obstacle", Dynamics::DoubleIntegrator));
  const State s = {0, -6, 0, 0};
  EXPECT_EQ(step(env, s, {100, -100}).next, step(env, s, {env.config().a_max, -env.config().a_max}).next);
}

TEST(ReachSet, StationaryHaltIsFixedPoint) {
  const Environment env = make_env(default_env_config("obstacle", Dynamics::DoubleIntegrator));
  const State s = {1, -6, 0, 0};
  const auto trace = reach_set_sample(env, [](const State&) { return Action{0, 0}; }, s, 1);
  ASSERT_EQ(trace.size(), 2u);
  EXPECT_EQ(trace[0], trace[1]);
}

TEST(ReachSet, EachElementIsStepOfPredecessor) {
  const Environment env = make_env(default_env_config("single-gate", Dynamics::DoubleIntegrator));
  const Policy pol = [](const State& s) { return Action{0.3, -0.2 * s[1]}; };
  const State s = {0.5, -6, 1.0, 0.5, 0.3};
  const auto trace = reach_set_sample(env, pol, s, 3);
  ASSERT_EQ(trace.size(), 4u);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    EXPECT_EQ(trace[i], step(env, trace[i - 1], pol(trace[i - 1])).next);
  }
}

TEST(ReachSet, WallPhaseAdvancesInClosedForm) {
  const EnvConfig cfg = default_env_config("single-gate", Dynamics::DoubleIntegrator);
  const Environment env = make_env(cfg);
  const double phase0 = 1.0;
  const State s = {0, -6, 0, 0, phase0};
  const auto trace = reach_set_sample(env, [](const State&) { return Action{0, 0}; }, s, 20);
  const double omega = cfg.walls.at(0).omega;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const double expect = wrap_angle_pos(phase0 + static_cast<double>(k) * omega * cfg.dt);
    EXPECT_NEAR(std::remainder(trace[k][4] - expect, kTwoPi), 0.0, 1e-12) << k;
  }
}

TEST(Angles, Wrapping) {
  EXPECT_NEAR(wrap_angle_pos(6.3), 6.3 - kTwoPi, 1e-12);
  EXPECT_EQ(wrap_angle_sym(0.7), 0.7);
  EXPECT_NEAR(wrap_angle_pos(-0.5), kTwoPi - 0.5, 1e-12);
  EXPECT_NEAR(wrap_angle_sym(kPi + 0.1), -kPi + 0.1, 1e-12);
  for (double a = -20; a < 20; a += 0.37) {
    const double p = wrap_angle_pos(a), q = wrap_angle_sym(a);
    EXPECT_GE(p, 0.0);
    EXPECT_LT(p, kTwoPi);
    EXPECT_GE(q, -kPi);
    EXPECT_LT(q, kPi);
    EXPECT_NEAR(std::cos(p), std::cos(a), 1e-12);
    EXPECT_NEAR(std::sin(q), std::sin(a), 1e-12);
  }
}

TEST(DeriveSeed, DistinctStreams) {
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}
