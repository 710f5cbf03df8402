#pragma once

// Deterministic MDP abstraction shared by every other module: state and
// action vectors, bounded action boxes, the environment model interface,
// discounted-return arithmetic and seeded random streams.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmps {

using Vec = std::vector<double>;
using State = Vec;
using Action = Vec;
using Rng = std::mt19937_64;
using Policy = std::function<Action(const State&)>;

/// Raised when a simulation input is corrupt (non-finite state, wrong size).
class EnvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid configuration values or unknown names.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a file cannot be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

class ActionBox {
 public:
  ActionBox() = default;
  explicit ActionBox(std::vector<Interval> bounds);

  std::size_t dim() const { return bounds_.size(); }
  const Interval& operator[](std::size_t i) const { return bounds_[i]; }
  const std::vector<Interval>& bounds() const { return bounds_; }

  /// Component-wise clamp; a size mismatch is an EnvError.
  Action clamp(const Action& a) const;
  bool contains(const Action& a) const;
  Action sample_uniform(Rng& rng) const;
  Vec center() const;
  Vec half_range() const;

 private:
  std::vector<Interval> bounds_;
};

struct StepResult {
  State next;
  double reward = 0.0;
};

/// A deterministic environment: every method is a pure function of its
/// arguments, so one instance may be shared freely across threads.
class EnvModel {
 public:
  virtual ~EnvModel() = default;

  virtual std::size_t obs_dim() const = 0;
  virtual const ActionBox& action_box() const = 0;
  virtual double dt() const = 0;

  /// T(s, a) and R(s, a). `a` is assumed to be inside the action box.
  virtual StepResult transition(const State& s, const Action& a) const = 0;
  virtual bool is_unsafe(const State& s) const = 0;
  virtual bool is_goal(const State& s) const = 0;
  virtual State sample_initial(Rng& rng) const = 0;

  /// Magnitude of the agent's velocity.
  virtual double speed(const State& s) const = 0;
  /// True when a motionless agent at this position stays safe for every
  /// future configuration of the moving geometry.
  virtual bool permanently_safe(const State& s) const = 0;
};

/// Validated discount factor, 0 < gamma < 1.
class Discount {
 public:
  explicit Discount(double gamma);
  double value() const { return gamma_; }

 private:
  double gamma_;
};

bool all_finite(std::span<const double> v);

/// Clamps `a` into the model's action box, checks `s`, and applies T and R.
/// A non-finite or wrongly sized state is an EnvError.
StepResult step(const EnvModel& model, const State& s, const Action& a);

/// sum_i gamma^i * rewards[i] + gamma^n * terminal_q.
double n_step_return(std::span<const double> rewards, double terminal_q, double gamma);

/// Rollout trace of `horizon + 1` states starting at s0 and following `policy`.
std::vector<State> reach_set_sample(const EnvModel& model, const Policy& policy, const State& s0,
                                    int horizon);

double wrap_angle_pos(double angle);  // [0, 2pi)
double wrap_angle_sym(double angle);  // [-pi, pi)

/// Deterministic stream splitting: derives an independent seed for a named
/// stream from one root seed.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

}  // namespace dmps
