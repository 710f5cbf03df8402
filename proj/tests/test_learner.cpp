#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "dmps/learner.hpp"
#include "support/gradcheck.hpp"

using namespace dmps;

namespace {

Td3Learner make(LearnerConfig cfg, std::size_t feat = 2, std::uint64_t seed = 1) {
  return Td3Learner([](const State& s) { return s; }, feat, ActionBox({{-1, 1}}), cfg, seed);
}

LearnerConfig small() {
  LearnerConfig c;
  c.hidden = {16, 16};
  c.batch_size = 8;
  return c;
}

TransitionRecord rec(double x, double a, std::optional<double> next, double r, bool done = false) {
  TransitionRecord t;
  t.s = {x, 0.0};
  t.a = {a};
  if (next) t.next = State{*next, 0.0};
  t.r = r;
  t.done = done;
  return t;
}

}  // namespace

TEST(Mlp, ZeroWeightsGiveBias) {
  Mlp lin({3, 4, 2}, OutputKind::Linear);
  for (auto& l : lin.layers()) {
    l.w.setZero();
    l.b.setZero();
  }
  lin.layers().back().b << 0.7, -1.2;
  EXPECT_EQ(mlp_forward(lin, Vec{1, 2, 3}), (Vec{0.7, -1.2}));

  Mlp act({3, 4, 1}, OutputKind::ScaledTanh, {0.5}, {2.0});
  for (auto& l : act.layers()) {
    l.w.setZero();
    l.b.setZero();
  }
  act.layers().back().b << 0.3;
  EXPECT_NEAR(mlp_forward(act, Vec{1, 2, 3})[0], 0.5 + 2.0 * std::tanh(0.3), 1e-14);
}

TEST(Mlp, IdentityLayer) {
  Mlp net({3, 3}, OutputKind::Linear);
  net.layers()[0].w.setIdentity();
  net.layers()[0].b.setZero();
  EXPECT_EQ(mlp_forward(net, Vec{1.5, -2, 0.25}), (Vec{1.5, -2, 0.25}));
}

TEST(Mlp, SizeMismatchThrows) {
  Mlp net({3, 2}, OutputKind::Linear);
  EXPECT_THROW(mlp_forward(net, Vec{1, 2}), EnvError);
  EXPECT_THROW(Mlp({3}, OutputKind::Linear), ConfigError);
}

TEST(Mlp, TanhMatchesStdTanh) {
  Rng rng(4);
  Mlp net({2, 5, 1}, OutputKind::ScaledTanh);
  net.init(rng, 1.0);
  net.layers()[0].w *= 30.0;  // drive hidden units into saturation
  const Vec x = {0.9, -0.4};
  const auto& l0 = net.layers()[0];
  const auto& l1 = net.layers()[1];
  double z = l1.b(0);
  for (int i = 0; i < 5; ++i) {
    z += l1.w(0, i) * std::tanh(l0.w(i, 0) * x[0] + l0.w(i, 1) * x[1] + l0.b(i));
  }
  EXPECT_NEAR(mlp_forward(net, x)[0], std::tanh(z), 1e-13);
}

TEST(Mlp, GradientsMatchFiniteDifferences) {
  const auto r = checks::gradient_check(60, 99);
  EXPECT_EQ(r.failures, 0) << "worst relative error " << r.worst_relative;
  EXPECT_GT(r.parameters, 500);
}

TEST(Mlp, SoftUpdate) {
  Rng rng(1);
  Mlp a({2, 3, 1}, OutputKind::Linear), b({2, 3, 1}, OutputKind::Linear);
  a.init(rng, 1.0);
  b.init(rng, 1.0);
  const Vec pa = a.flat_parameters(), pb = b.flat_parameters();
  b.soft_update_from(a, 0.25);
  const Vec pc = b.flat_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(pc[i], 0.25 * pa[i] + 0.75 * pb[i], 1e-15);
  b.soft_update_from(a, 1.0);
  EXPECT_EQ(b.flat_parameters(), pa);
}

TEST(Adam, MinimizesQuadratic) {
  Mlp net({1, 1}, OutputKind::Linear);
  net.layers()[0].w(0, 0) = 3.0;
  net.layers()[0].b(0) = -2.0;
  Adam opt(net, 0.05);
  for (int i = 0; i < 2000; ++i) {
    Mlp::Gradients g = net.zero_gradients();
    g.w[0](0, 0) = 2 * net.layers()[0].w(0, 0);
    g.b[0](0) = 2 * net.layers()[0].b(0);
    opt.step(net, g);
  }
  EXPECT_NEAR(net.layers()[0].w(0, 0), 0.0, 1e-3);
  EXPECT_NEAR(net.layers()[0].b(0), 0.0, 1e-3);
}

TEST(Critic, FreshCriticIsZero) {
  const Td3Learner l = make(small());
  Rng rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(l.q_value({u(rng), u(rng)}, {u(rng) / 3}), 0.0);
}

TEST(Critic, SameSeedSameData) {
  Td3Learner a = make(small(), 2, 5), b = make(small(), 2, 5);
  ReplayBuffer ba(100, 9), bb(100, 9);
  for (int i = 0; i < 40; ++i) {
    const auto r = rec(i * 0.1, 0.2, i * 0.1 + 0.05, -i * 0.01);
    ba.push(r);
    bb.push(r);
  }
  for (int i = 0; i < 30; ++i) {
    a.update(ba);
    b.update(bb);
  }
  EXPECT_EQ(a.critic1().flat_parameters(), b.critic1().flat_parameters());
  EXPECT_EQ(a.critic2().flat_parameters(), b.critic2().flat_parameters());
  EXPECT_EQ(a.actor().flat_parameters(), b.actor().flat_parameters());
}

TEST(Critic, BanditConvergesToReward) {
  LearnerConfig c = small();
  c.critic_lr = 1e-3;
  Td3Learner l = make(c);
  ReplayBuffer buf(1000, 2);
  Rng rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 200; ++i) buf.push(rec(u(rng), u(rng), u(rng), 1.0, true));
  for (int i = 0; i < 3000; ++i) l.update(buf);
  for (int i = 0; i < 20; ++i) EXPECT_NEAR(l.q_value({u(rng), 0.0}, {u(rng)}), 1.0, 0.05);
}

TEST(Targets, TerminalRecordsTakeRewardExactly) {
  Td3Learner l = make(small());
  // Perturb the targets so a bootstrap would be visible.
  Rng rng(1);
  l.critic1_target().init(rng, 1.0);
  l.critic2_target().init(rng, 1.0);
  const auto r1 = rec(0.3, 0.1, 0.4, 2.5, true);
  const auto r2 = rec(0.3, 0.1, std::nullopt, -10.0);
  const auto r3 = rec(0.3, 0.1, 0.4, 2.5, false);
  const Batch b = l.make_batch({&r1, &r2, &r3});
  Rng noise(2);
  const Matrix y = l.td_targets(b, noise);
  EXPECT_EQ(y(0, 0), 2.5);
  EXPECT_EQ(y(0, 1), -10.0);
  EXPECT_NE(y(0, 2), 2.5);
}

TEST(Targets, TauOneIsHardCopy) {
  LearnerConfig c = small();
  c.tau = 1.0;
  Td3Learner l = make(c);
  ReplayBuffer buf(100, 1);
  for (int i = 0; i < 20; ++i) buf.push(rec(i * 0.1, 0.5, i * 0.1, 1.0));
  l.update(buf);
  EXPECT_EQ(l.update_count(), 1);
  EXPECT_EQ(l.actor_target().flat_parameters(), l.actor().flat_parameters());
  EXPECT_EQ(l.critic1_target().flat_parameters(), l.critic1().flat_parameters());
  EXPECT_EQ(l.critic2_target().flat_parameters(), l.critic2().flat_parameters());
}

TEST(Targets, ActorUpdatesAreDelayed) {
  Td3Learner l = make(small());
  ReplayBuffer buf(100, 1);
  for (int i = 0; i < 20; ++i) buf.push(rec(i * 0.1, 0.5, i * 0.1, 1.0));
  l.update(buf);  // update 0: actor moves
  const Vec after_first = l.actor().flat_parameters();
  l.update(buf);  // update 1: delayed
  EXPECT_EQ(l.actor().flat_parameters(), after_first);
  l.update(buf);
  EXPECT_NE(l.actor().flat_parameters(), after_first);
}

TEST(Buffer, RingEvictsOldest) {
  ReplayBuffer buf(3, 0);
  for (int i = 0; i < 4; ++i) buf.push(rec(i, 0, i, i));
  EXPECT_EQ(buf.size(), 3u);
  EXPECT_EQ(buf.at(0).r, 1.0);
  EXPECT_EQ(buf.at(2).r, 3.0);
}

TEST(Buffer, AbsorbingRecordsAreTerminal) {
  ReplayBuffer buf(3, 0);
  buf.push(rec(0, 0, std::nullopt, -10, false));
  EXPECT_TRUE(buf.at(0).done);
}

TEST(Buffer, SamplingIsSeeded) {
  ReplayBuffer a(50, 3), b(50, 3);
  for (int i = 0; i < 50; ++i) {
    a.push(rec(i, 0, i, i));
    b.push(rec(i, 0, i, i));
  }
  const auto sa = a.sample(20), sb = b.sample(20);
  for (std::size_t i = 0; i < sa.size(); ++i) EXPECT_EQ(sa[i]->r, sb[i]->r);
  EXPECT_THROW(ReplayBuffer(5, 0).sample(1), std::exception);
}

TEST(Buffer, UniformDistribution) {
  ReplayBuffer buf(10, 123);
  for (int i = 0; i < 10; ++i) buf.push(rec(i, 0, i, i));
  std::map<double, int> counts;
  const int total = 100000;
  for (int i = 0; i < total / 10; ++i) {
    for (const auto* r : buf.sample(10)) ++counts[r->r];
  }
  ASSERT_EQ(counts.size(), 10u);
  for (const auto& [k, n] : counts) EXPECT_NEAR(double(n) / total, 0.10, 0.01) << k;
}

TEST(Checkpoint, RoundTripIsExact) {
  Td3Learner a = make(small(), 2, 3);
  ReplayBuffer buf(100, 1);
  for (int i = 0; i < 20; ++i) buf.push(rec(i * 0.1, 0.5, i * 0.1, 1.0));
  for (int i = 0; i < 5; ++i) a.update(buf);
  std::stringstream ss;
  a.save(ss);
  Td3Learner b = make(small(), 2, 99);
  b.load(ss);
  EXPECT_EQ(a.actor().flat_parameters(), b.actor().flat_parameters());
  EXPECT_EQ(a.critic1().flat_parameters(), b.critic1().flat_parameters());
  EXPECT_EQ(a.critic2().flat_parameters(), b.critic2().flat_parameters());
  EXPECT_EQ(a.actor_target().flat_parameters(), b.actor_target().flat_parameters());
  std::stringstream again;
  b.save(again);
  std::stringstream first;
  a.save(first);
  EXPECT_EQ(first.str(), again.str());
}

TEST(Checkpoint, RejectsCorruptInput) {
  Td3Learner a = make(small());
  std::stringstream bad("not a checkpoint\n");
  EXPECT_ANY_THROW(a.load(bad));
  std::stringstream ss;
  a.save(ss);
  std::string text = ss.str();
  text.resize(text.size() / 2);
  std::stringstream cut(text);
  EXPECT_ANY_THROW(a.load(cut));
  Td3Learner other = make(small(), 3);
  std::stringstream full;
  a.save(full);
  EXPECT_ANY_THROW(other.load(full));
}

TEST(LearnerConfig, Validation) {
  LearnerConfig c;
  EXPECT_NO_THROW(validate(c));
  c.tau = 0.0;
  EXPECT_THROW(validate(c), ConfigError);
  c = LearnerConfig{};
  c.batch_size = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = LearnerConfig{};
  c.hidden = {};
  EXPECT_THROW(validate(c), ConfigError);
  c = LearnerConfig{};
  c.policy_delay = 0;
  EXPECT_THROW(validate(c), ConfigError);
}

// Task: x' = clip(x + 0.2 a, -2, 2), reward -|x'|, 25-step episodes from a
// random start. Checks TD3 beats uniform random actions.
TEST(Learning, MoveToOrigin) {
  LearnerConfig c;
  c.hidden = {32, 32};
  c.batch_size = 64;
  c.gamma = 0.9;
  c.warmup_steps = 1000;
  Td3Learner l([](const State& s) { return s; }, 1, ActionBox({{-1, 1}}), c, 11);
  ReplayBuffer buf(100000, 12);
  Rng rng(13);
  std::uniform_real_distribution<double> start(-2, 2), unif(-1, 1);
  std::normal_distribution<double> noise(0, 0.2);
  auto stepf = [](double x, double a) { return std::clamp(x + 0.2 * std::clamp(a, -1.0, 1.0), -2.0, 2.0); };
  const int horizon = 25;
  long t = 0;
  while (t < 20000) {
    double x = start(rng);
    for (int k = 0; k < horizon; ++k, ++t) {
      const double a = t < c.warmup_steps ? unif(rng) : std::clamp(l.act({x})[0] + noise(rng), -1.0, 1.0);
      const double nx = stepf(x, a);
      TransitionRecord r;
      r.s = {x};
      r.a = {a};
      r.next = State{nx};
      r.r = -std::fabs(nx);
      r.done = false;
      buf.push(r);
      x = nx;
    }
    if (t >= c.warmup_steps) {
      for (int k = 0; k < horizon; ++k) l.update(buf);
    }
  }
  auto evaluate = [&](const std::function<double(double)>& pol, std::uint64_t seed) {
    Rng er(seed);
    double total = 0.0;
    for (int ep = 0; ep < 200; ++ep) {
      double x = start(er);
      for (int k = 0; k < horizon; ++k) {
        x = stepf(x, pol(x));
        total -= std::fabs(x);
      }
    }
    return total / 200;
  };
  Rng pr(5);
  const double random_return = evaluate([&](double) { return unif(pr); }, 21);
  const double learned = evaluate([&](double x) { return l.act({x})[0]; }, 21);
  EXPECT_GT(learned, random_return);
  EXPECT_GT(learned, 0.5 * random_return);  // well clear of random
}
