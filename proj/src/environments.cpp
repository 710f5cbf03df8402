#include "dmps/environments.hpp"

#include <algorithm>
#include <cmath>

namespace dmps {

namespace {

constexpr std::size_t kX = 0, kY = 1;

double hypot2(double x, double y) { return std::sqrt(x * x + y * y); }

RotatingWall gate(double inner_radius, double thickness, double omega) {
  return RotatingWall{inner_radius, thickness, kPi / 8.0, omega};
}

}  // namespace

std::string to_string(Dynamics d) {
  return d == Dynamics::DoubleIntegrator ? "di" : "dd";
}

Dynamics parse_dynamics(std::string_view text) {
  if (text == "di" || text == "DI") return Dynamics::DoubleIntegrator;
  if (text == "dd" || text == "DD") return Dynamics::DifferentialDrive;
  throw ConfigError("unknown dynamics '" + std::string(text) + "' (expected di or dd)");
}

const std::vector<std::string>& env_names() {
  static const std::vector<std::string> names = {
      "obstacle",    "obstacle2",    "road",          "road2d",
      "dynamic-obst", "single-gate", "double-gates", "double-gates-plus"};
  return names;
}

EnvConfig default_env_config(std::string_view name, Dynamics dynamics) {
  EnvConfig cfg;
  cfg.env_name = std::string(name);
  cfg.dynamics = dynamics;

  if (name == "obstacle") {
    cfg.start_x = -5.0, cfg.start_y = 0.0;
    cfg.static_discs = {{-2.5, 1.6, 0.8}};
    cfg.episode_max_steps = 200;
  } else if (name == "obstacle2") {
    cfg.start_x = -5.0, cfg.start_y = 0.0;
    cfg.static_discs = {{-2.5, 0.0, 1.0}};
    cfg.episode_max_steps = 200;
  } else if (name == "road") {
    cfg.start_x = -8.0, cfg.start_y = 0.0;
    cfg.start_radius = 0.3;
    cfg.speed_limit = 1.0;
    cfg.episode_max_steps = 100;
  } else if (name == "road2d") {
    cfg.start_x = -5.0, cfg.start_y = -4.0;
    cfg.start_radius = 0.3;
    cfg.speed_limit = 1.0;
    cfg.road = Region{true, -7.0, 1.5, -6.0, 1.5};
    cfg.episode_max_steps = 100;
  } else if (name == "dynamic-obst") {
    cfg.start_x = -6.0, cfg.start_y = 0.0;
    cfg.moving_discs = {{-4.5, 0.6, 0.8, 0.4, 1.0},
                        {-3.0, -0.6, 0.8, 0.4, -1.0},
                        {-1.5, 0.6, 0.8, 0.4, 1.0}};
  } else if (name == "single-gate") {
    cfg.start_x = 0.0, cfg.start_y = -4.5;
    cfg.walls = {gate(2.0, 0.22, 0.3)};
  } else if (name == "double-gates") {
    cfg.start_x = 0.0, cfg.start_y = -6.0;
    cfg.walls = {gate(2.0, 0.22, 0.3), gate(4.0, 0.22, -0.3)};
  } else if (name == "double-gates-plus") {
    cfg.start_x = 0.0, cfg.start_y = -6.0;
    cfg.walls = {gate(2.0, 0.3, 0.3), gate(4.0, 0.3, -0.3)};
  } else {
    throw ConfigError("unknown environment '" + std::string(name) + "'");
  }
  return cfg;
}

void validate(const EnvConfig& cfg) {
  const auto& names = env_names();
  if (std::find(names.begin(), names.end(), cfg.env_name) == names.end()) {
    throw ConfigError("unknown environment '" + cfg.env_name + "'");
  }
  if (!(cfg.dt > 0.0)) throw ConfigError("env.dt must be positive");
  if (!(cfg.v_max > 0.0)) throw ConfigError("env.v_max must be positive");
  if (!(cfg.a_max > 0.0) || !(cfg.torque_max > 0.0)) {
    throw ConfigError("env.a_max and env.torque_max must be positive");
  }
  if (!(cfg.body_width > 0.0)) throw ConfigError("env.body_width must be positive");
  if (!(cfg.goal_radius > 0.0)) throw ConfigError("env.goal_radius must be positive");
  if (cfg.episode_max_steps < 1) throw ConfigError("env.episode_max_steps must be >= 1");
  const double travel = cfg.v_max * cfg.dt;
  for (const auto& w : cfg.walls) {
    if (!(w.opening_half_angle > 0.0 && w.opening_half_angle < kPi)) {
      throw ConfigError("wall opening half-angle must lie in (0, pi)");
    }
    if (!(w.inner_radius > cfg.goal_radius)) {
      throw ConfigError("wall inner radius must exceed the goal radius");
    }
    if (!(w.thickness > travel)) {
      throw ConfigError("wall thickness must exceed v_max * dt (no tunneling)");
    }
  }
  for (const auto& d : cfg.static_discs) {
    if (hypot2(cfg.goal_x - d.x, cfg.goal_y - d.y) <= d.radius + cfg.goal_radius) {
      throw ConfigError("goal region overlaps a static obstacle");
    }
  }
  for (const auto& m : cfg.moving_discs) {
    if (!(m.radius > 0.0) || !(m.orbit_radius >= 0.0)) {
      throw ConfigError("moving obstacle radii must be positive");
    }
  }
  if (cfg.road.enabled && !(cfg.road.x_min < cfg.road.x_max && cfg.road.y_min < cfg.road.y_max)) {
    throw ConfigError("road region bounds are empty");
  }
}

bool in_wall_segment(double px, double py, double cx, double cy, const RotatingWall& wall,
                     double phase) {
  const double dx = px - cx, dy = py - cy;
  const double r = hypot2(dx, dy);
  if (r < wall.inner_radius || r > wall.inner_radius + wall.thickness) return false;
  const double offset = std::fabs(wrap_angle_sym(std::atan2(dy, dx) - phase));
  return offset > wall.opening_half_angle;
}

namespace {

void advance_phases(State& next, const EnvConfig& cfg) {
  std::size_t k = 4;
  for (const auto& w : cfg.walls) {
    next[k] = wrap_angle_pos(next[k] + w.omega * cfg.dt);
    ++k;
  }
  for (const auto& m : cfg.moving_discs) {
    next[k] = wrap_angle_pos(next[k] + m.omega * cfg.dt);
    ++k;
  }
}

}  // namespace

State di_step(const State& s, const Action& a, const EnvConfig& cfg) {
  State n = s;
  n[kX] = s[kX] + s[2] * cfg.dt;
  n[kY] = s[kY] + s[3] * cfg.dt;
  double vx = s[2] + a[0] * cfg.dt;
  double vy = s[3] + a[1] * cfg.dt;
  const double speed = hypot2(vx, vy);
  if (speed > cfg.v_max) {
    const double scale = cfg.v_max / speed;
    vx *= scale;
    vy *= scale;
  }
  n[2] = vx;
  n[3] = vy;
  advance_phases(n, cfg);
  return n;
}

State dd_step(const State& s, const Action& a, const EnvConfig& cfg) {
  State n = s;
  const double v = s[2], theta = s[3];
  const double accel = 0.5 * (a[0] + a[1]);
  const double turn_rate = (a[1] - a[0]) / cfg.body_width;
  n[kX] = s[kX] + v * std::cos(theta) * cfg.dt;
  n[kY] = s[kY] + v * std::sin(theta) * cfg.dt;
  n[2] = std::clamp(v + accel * cfg.dt, -cfg.v_max, cfg.v_max);
  n[3] = wrap_angle_sym(theta + turn_rate * cfg.dt);
  advance_phases(n, cfg);
  return n;
}

Environment::Environment(EnvConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  const double bound =
      cfg_.dynamics == Dynamics::DoubleIntegrator ? cfg_.a_max : cfg_.torque_max;
  box_ = ActionBox({{-bound, bound}, {-bound, bound}});
}

Environment make_env(const EnvConfig& cfg) { return Environment(cfg); }

State Environment::advance(const State& s, const Action& a) const {
  return cfg_.dynamics == Dynamics::DoubleIntegrator ? di_step(s, a, cfg_) : dd_step(s, a, cfg_);
}

double Environment::goal_distance(const State& s) const {
  return hypot2(s[kX] - cfg_.goal_x, s[kY] - cfg_.goal_y);
}

double Environment::reward(const State& s, const Action& a) const {
  return transition(s, a).reward;
}

StepResult Environment::transition(const State& s, const Action& a) const {
  StepResult out;
  out.next = advance(s, a);
  // Potential-based shaping on the Euclidean goal distance.
  out.reward = cfg_.step_penalty + cfg_.shaping * (goal_distance(s) - goal_distance(out.next));
  if (is_goal(out.next)) out.reward += cfg_.goal_bonus;
  return out;
}

double Environment::speed(const State& s) const {
  return cfg_.dynamics == Dynamics::DoubleIntegrator ? hypot2(s[2], s[3]) : std::fabs(s[2]);
}

bool Environment::is_goal(const State& s) const { return goal_distance(s) <= cfg_.goal_radius; }

bool Environment::is_unsafe(const State& s) const {
  const double px = s[kX], py = s[kY];
  for (const auto& d : cfg_.static_discs) {
    if (hypot2(px - d.x, py - d.y) <= d.radius) return true;
  }
  std::size_t k = 4;
  for (const auto& w : cfg_.walls) {
    if (in_wall_segment(px, py, cfg_.goal_x, cfg_.goal_y, w, s[k])) return true;
    ++k;
  }
  for (const auto& m : cfg_.moving_discs) {
    const double cx = m.x + m.orbit_radius * std::cos(s[k]);
    const double cy = m.y + m.orbit_radius * std::sin(s[k]);
    if (hypot2(px - cx, py - cy) <= m.radius) return true;
    ++k;
  }
  if (cfg_.speed_limit > 0.0 && speed(s) > cfg_.speed_limit) return true;
  if (cfg_.road.enabled) {
    if (px < cfg_.road.x_min || px > cfg_.road.x_max || py < cfg_.road.y_min ||
        py > cfg_.road.y_max) {
      return true;
    }
  }
  return false;
}

bool Environment::permanently_safe(const State& s) const {
  const double px = s[kX], py = s[kY];
  for (const auto& d : cfg_.static_discs) {
    if (hypot2(px - d.x, py - d.y) <= d.radius) return false;
  }
  for (const auto& w : cfg_.walls) {
    // A full revolution sweeps the whole annulus.
    const double r = hypot2(px - cfg_.goal_x, py - cfg_.goal_y);
    if (r >= w.inner_radius && r <= w.inner_radius + w.thickness) return false;
  }
  for (const auto& m : cfg_.moving_discs) {
    // The orbiting disc covers the annulus [orbit - radius, orbit + radius].
    const double r = hypot2(px - m.x, py - m.y);
    if (std::fabs(r - m.orbit_radius) <= m.radius) return false;
  }
  if (cfg_.road.enabled) {
    if (px < cfg_.road.x_min || px > cfg_.road.x_max || py < cfg_.road.y_min ||
        py > cfg_.road.y_max) {
      return false;
    }
  }
  return true;
}

std::size_t feature_dim(const EnvConfig& cfg) {
  const std::size_t base = cfg.dynamics == Dynamics::DoubleIntegrator ? 4 : 5;
  return base + 2 * cfg.phase_count();
}

Vec observation_features(const EnvConfig& cfg, const State& s) {
  constexpr double kPosScale = 5.0;
  if (s.size() != cfg.obs_dim()) throw EnvError("feature map: wrong state size");
  Vec f;
  f.reserve(feature_dim(cfg));
  const double rx = s[kX] - cfg.goal_x, ry = s[kY] - cfg.goal_y;
  f.push_back(rx / kPosScale);
  f.push_back(ry / kPosScale);
  if (cfg.dynamics == Dynamics::DoubleIntegrator) {
    f.push_back(s[2] / cfg.v_max);
    f.push_back(s[3] / cfg.v_max);
  } else {
    f.push_back(s[2] / cfg.v_max);
    f.push_back(std::cos(s[3]));
    f.push_back(std::sin(s[3]));
  }
  const double bearing = std::atan2(ry, rx);
  std::size_t k = 4;
  for (std::size_t i = 0; i < cfg.walls.size(); ++i, ++k) {
    f.push_back(std::cos(s[k] - bearing));
    f.push_back(std::sin(s[k] - bearing));
  }
  for (const auto& m : cfg.moving_discs) {
    const double cx = m.x + m.orbit_radius * std::cos(s[k]);
    const double cy = m.y + m.orbit_radius * std::sin(s[k]);
    f.push_back((cx - s[kX]) / kPosScale);
    f.push_back((cy - s[kY]) / kPosScale);
    ++k;
  }
  return f;
}

State Environment::sample_initial(Rng& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  State s(obs_dim(), 0.0);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double r = cfg_.start_radius * std::sqrt(unit(rng));
    const double ang = kTwoPi * unit(rng);
    s[kX] = cfg_.start_x + r * std::cos(ang);
    s[kY] = cfg_.start_y + r * std::sin(ang);
    s[2] = 0.0;
    if (cfg_.dynamics == Dynamics::DifferentialDrive) {
      const double bearing = std::atan2(cfg_.goal_y - s[kY], cfg_.goal_x - s[kX]);
      s[3] = wrap_angle_sym(bearing + cfg_.start_heading_spread * (2.0 * unit(rng) - 1.0));
    } else {
      s[3] = 0.0;
    }
    for (std::size_t k = 4; k < s.size(); ++k) s[k] = kTwoPi * unit(rng);
    if (!is_unsafe(s) && permanently_safe(s) && !is_goal(s)) return s;
  }
  throw ConfigError("could not sample a safe initial state for '" + cfg_.env_name + "'");
}

}  // namespace dmps
