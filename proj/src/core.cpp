#include "dmps/core.hpp"

#include <algorithm>
#include <cmath>

namespace dmps {

ActionBox::ActionBox(std::vector<Interval> bounds) : bounds_(std::move(bounds)) {
  for (const auto& b : bounds_) {
    if (!(b.lo <= b.hi) || !std::isfinite(b.lo) || !std::isfinite(b.hi)) {
      throw ConfigError("action bound must satisfy lo <= hi and be finite");
    }
  }
}

Action ActionBox::clamp(const Action& a) const {
  if (a.size() != bounds_.size()) {
    throw EnvError("action has dimension " + std::to_string(a.size()) + ", expected " +
                   std::to_string(bounds_.size()));
  }
  Action out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    // NaN actions collapse to the box center rather than propagating.
    out[i] = std::isnan(a[i]) ? 0.5 * (bounds_[i].lo + bounds_[i].hi)
                              : std::clamp(a[i], bounds_[i].lo, bounds_[i].hi);
  }
  return out;
}

bool ActionBox::contains(const Action& a) const {
  if (a.size() != bounds_.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] >= bounds_[i].lo && a[i] <= bounds_[i].hi)) return false;
  }
  return true;
}

Action ActionBox::sample_uniform(Rng& rng) const {
  Action a(bounds_.size());
  for (std::size_t i = 0; i < bounds_.size(); ++i) {
    std::uniform_real_distribution<double> dist(bounds_[i].lo, bounds_[i].hi);
    a[i] = dist(rng);
  }
  return a;
}

Vec ActionBox::center() const {
  Vec c(bounds_.size());
  for (std::size_t i = 0; i < bounds_.size(); ++i) c[i] = 0.5 * (bounds_[i].lo + bounds_[i].hi);
  return c;
}

Vec ActionBox::half_range() const {
  Vec h(bounds_.size());
  for (std::size_t i = 0; i < bounds_.size(); ++i) h[i] = 0.5 * (bounds_[i].hi - bounds_[i].lo);
  return h;
}

Discount::Discount(double gamma) : gamma_(gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

StepResult step(const EnvModel& model, const State& s, const Action& a) {
  if (s.size() != model.obs_dim()) {
    throw EnvError("state has dimension " + std::to_string(s.size()) + ", expected " +
                   std::to_string(model.obs_dim()));
  }
  if (!all_finite(s)) throw EnvError("non-finite state passed to step");
  return model.transition(s, model.action_box().clamp(a));
}

double n_step_return(std::span<const double> rewards, double terminal_q, double gamma) {
  // Horner form: r0 + g*(r1 + g*(... + g*q)).
  double acc = terminal_q;
  for (auto it = rewards.rbegin(); it != rewards.rend(); ++it) acc = *it + gamma * acc;
  return acc;
}

std::vector<State> reach_set_sample(const EnvModel& model, const Policy& policy, const State& s0,
                                    int horizon) {
  if (horizon < 1) throw ConfigError("reach_set_sample horizon must be >= 1");
  std::vector<State> trace;
  trace.reserve(static_cast<std::size_t>(horizon) + 1);
  trace.push_back(s0);
  for (int k = 0; k < horizon; ++k) {
    const State& s = trace.back();
    trace.push_back(step(model, s, policy(s)).next);
  }
  return trace;
}

double wrap_angle_pos(double angle) {
  double w = std::fmod(angle, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w -= kTwoPi;
  return w;
}

double wrap_angle_sym(double angle) {
  // In-range inputs pass through untouched so rest states stay bit-exact.
  if (angle >= -kPi && angle < kPi) return angle;
  double w = wrap_angle_pos(angle + kPi) - kPi;
  if (w >= kPi) w -= kTwoPi;
  return w;
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  // splitmix64 over (root, stream)
  std::uint64_t z = root + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace dmps
