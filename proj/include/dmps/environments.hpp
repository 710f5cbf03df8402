#pragma once

// Benchmark environments: static obstacle courses, speed-limited roads,
// circling obstacles and rotating gates around a goal, each available with
// double-integrator (DI) or differential-drive (DD) agent dynamics.
//
// State layout
//   DI: [x, y, vx, vy, phase_0, ..., phase_k]
//   DD: [x, y, v, theta, phase_0, ..., phase_k]
// Phases are the rotating-wall angles followed by the moving-obstacle angles,
// all wrapped to [0, 2pi). theta is wrapped to [-pi, pi).

#include <string>
#include <string_view>
#include <vector>

#include "dmps/core.hpp"

namespace dmps {

enum class Dynamics { DoubleIntegrator, DifferentialDrive };

std::string to_string(Dynamics d);
Dynamics parse_dynamics(std::string_view text);

struct Disc {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;

  bool operator==(const Disc&) const = default;
};

/// A disc obstacle whose center moves on a circle around (x, y).
struct MovingDisc {
  double x = 0.0;
  double y = 0.0;
  double orbit_radius = 0.0;
  double radius = 0.0;
  double omega = 0.0;  // rad/s

  bool operator==(const MovingDisc&) const = default;
};

/// Annular wall around the goal with one opening. The opening is centered on
/// the wall's phase angle; everything else in the annulus is solid.
struct RotatingWall {
  double inner_radius = 0.0;
  double thickness = 0.0;
  double opening_half_angle = 0.0;
  double omega = 0.0;  // rad/s, sign gives the direction

  bool operator==(const RotatingWall&) const = default;
};

/// Axis-aligned drivable region; leaving it is unsafe when enabled.
struct Region {
  bool enabled = false;
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;

  bool operator==(const Region&) const = default;
};

struct EnvConfig {
  std::string env_name = "single-gate";
  Dynamics dynamics = Dynamics::DoubleIntegrator;
  double dt = 0.1;

  double a_max = 2.0;        // DI acceleration bound per axis, m/s^2
  double torque_max = 2.0;   // DD wheel torque bound
  double body_width = 1.0;   // DD wheel separation, m
  double v_max = 2.0;        // m/s

  double goal_x = 0.0, goal_y = 0.0;
  double goal_radius = 0.5;
  double step_penalty = -0.01;
  double shaping = 1.0;
  double goal_bonus = 20.0;

  double start_x = 0.0, start_y = -6.0;
  double start_radius = 0.5;
  double start_heading_spread = 0.25 * kPi;  // DD: heading = bearing-to-goal +- spread
  int episode_max_steps = 500;

  double speed_limit = 0.0;  // <= 0 disables the speed-limit hazard
  Region road;
  std::vector<Disc> static_discs;
  std::vector<MovingDisc> moving_discs;
  std::vector<RotatingWall> walls;

  std::size_t phase_count() const { return walls.size() + moving_discs.size(); }
  std::size_t obs_dim() const { return 4 + phase_count(); }

  bool operator==(const EnvConfig&) const = default;
};

/// Names accepted by default_env_config / make_env.
const std::vector<std::string>& env_names();

/// Benchmark defaults for `name` with the given dynamics. Unknown names are a
/// ConfigError.
EnvConfig default_env_config(std::string_view name, Dynamics dynamics);

/// Throws ConfigError when `cfg` violates a geometric invariant.
void validate(const EnvConfig& cfg);

class Environment final : public EnvModel {
 public:
  explicit Environment(EnvConfig cfg);

  const EnvConfig& config() const { return cfg_; }
  Dynamics dynamics() const { return cfg_.dynamics; }

  std::size_t obs_dim() const override { return cfg_.obs_dim(); }
  const ActionBox& action_box() const override { return box_; }
  double dt() const override { return cfg_.dt; }

  StepResult transition(const State& s, const Action& a) const override;
  bool is_unsafe(const State& s) const override;
  bool is_goal(const State& s) const override;
  State sample_initial(Rng& rng) const override;
  double speed(const State& s) const override;
  bool permanently_safe(const State& s) const override;

  /// Pure dynamics without reward.
  State advance(const State& s, const Action& a) const;
  double reward(const State& s, const Action& a) const;
  double goal_distance(const State& s) const;

 private:
  EnvConfig cfg_;
  ActionBox box_;
};

/// Network input encoding of a state. Positions are taken relative to the
/// goal and scaled, velocities are divided by v_max and every angle enters
/// as (cos, sin). Wall phases are encoded relative to the agent's bearing
/// from the goal; moving obstacles by their center relative to the agent.
std::size_t feature_dim(const EnvConfig& cfg);
Vec observation_features(const EnvConfig& cfg, const State& s);

/// make_env: validates and wires an environment for `cfg`.
Environment make_env(const EnvConfig& cfg);

// Dynamics kernels, exposed for testing. They take clamped actions.
State di_step(const State& s, const Action& a, const EnvConfig& cfg);
State dd_step(const State& s, const Action& a, const EnvConfig& cfg);

/// Geometry predicate shared by is_unsafe: is the point inside the solid part
/// of `wall` (centered at the goal) when the wall's opening faces `phase`?
bool in_wall_segment(double px, double py, double cx, double cy, const RotatingWall& wall,
                     double phase);

}  // namespace dmps
