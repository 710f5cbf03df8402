#pragma once

// Deterministic actor-critic learner (TD3: twin critics, target networks,
// delayed actor updates, target-policy smoothing) and its replay buffer.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dmps/core.hpp"
#include "dmps/mlp.hpp"

namespace dmps {

/// (s, a, s', r). An empty `next` is the absorbing marker used for shield
/// penalties; absorbing records are always terminal.
struct TransitionRecord {
  State s;
  Action a;
  std::optional<State> next;
  double r = 0.0;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity, std::uint64_t seed = 0);

  void push(TransitionRecord record);
  /// Uniform sampling with replacement; fewer than `batch_size` stored
  /// records is an error.
  std::vector<const TransitionRecord*> sample(std::size_t batch_size);

  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// i-th record in insertion order, oldest first.
  const TransitionRecord& at(std::size_t i) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // slot overwritten next once full
  std::vector<TransitionRecord> records_;
  Rng rng_;
};

struct LearnerConfig {
  double gamma = 0.99;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double tau = 0.005;
  int policy_delay = 2;
  double smoothing_sigma = 0.2;  // fraction of the action half-range
  double smoothing_clip = 0.5;   // fraction of the action half-range
  int batch_size = 128;
  std::vector<int> hidden = {64, 64};
  std::size_t buffer_capacity = 1000000;
  double exploration_sigma = 0.1;  // fraction of the full action range
  int warmup_steps = 2000;         // uniform random actions before the actor takes over

  bool operator==(const LearnerConfig&) const = default;
};

void validate(const LearnerConfig& cfg);

using FeatureMap = std::function<Vec(const State&)>;

/// Network inputs for a minibatch.
struct Batch {
  Matrix s;         // features x B
  Matrix a;         // act_dim x B
  Matrix r;         // 1 x B
  Matrix s_next;    // features x B (zeros for absorbing records)
  Matrix not_done;  // 1 x B
};

/// Mean squared TD error (1/B) * sum (Q(s,a) - y)^2. Adds its gradient to
/// `grads` when non-null.
double critic_loss(const Mlp& critic, const Batch& batch, const Matrix& targets,
                   Mlp::Gradients* grads);

/// -(1/B) * sum Q(s, actor(s)). Adds the actor-parameter gradient to
/// `grads` when non-null; the critic is held fixed.
double actor_loss(const Mlp& actor, const Mlp& critic, const Batch& batch,
                  Mlp::Gradients* grads);

/// Critic output for the concatenated (s, a) input.
double q_value(const Mlp& critic, std::span<const double> features, std::span<const double> a);

class Td3Learner {
 public:
  Td3Learner(FeatureMap features, std::size_t feature_dim, ActionBox box, LearnerConfig cfg,
             std::uint64_t seed);

  Action act(const State& s) const;
  double q_value(const State& s, const Action& a) const;

  Batch make_batch(const std::vector<const TransitionRecord*>& records) const;
  /// r + gamma * not_done * min(Q1', Q2') at the smoothed target action.
  Matrix td_targets(const Batch& batch, Rng& rng) const;

  /// One TD3 gradient step on a batch sampled from `buffer`.
  void update(ReplayBuffer& buffer);
  /// Same step on a caller-provided batch.
  void update_on(const Batch& batch);

  long update_count() const { return updates_; }
  const LearnerConfig& config() const { return cfg_; }
  const ActionBox& action_box() const { return box_; }
  std::size_t feature_dim() const { return feature_dim_; }
  Vec features(const State& s) const { return features_(s); }

  Mlp& actor() { return actor_; }
  Mlp& critic1() { return critic1_; }
  Mlp& critic2() { return critic2_; }
  Mlp& actor_target() { return actor_target_; }
  Mlp& critic1_target() { return critic1_target_; }
  Mlp& critic2_target() { return critic2_target_; }
  const Mlp& actor() const { return actor_; }
  const Mlp& critic1() const { return critic1_; }
  const Mlp& critic2() const { return critic2_; }
  bool parameters_finite() const;

  void save(std::ostream& out) const;
  void load(std::istream& in);
  void save_file(const std::string& path) const;
  void load_file(const std::string& path);

 private:
  FeatureMap features_;
  std::size_t feature_dim_;
  ActionBox box_;
  LearnerConfig cfg_;
  Rng rng_;
  Mlp actor_, critic1_, critic2_;
  Mlp actor_target_, critic1_target_, critic2_target_;
  Adam actor_opt_, critic1_opt_, critic2_opt_;
  long updates_ = 0;
};

}  // namespace dmps
