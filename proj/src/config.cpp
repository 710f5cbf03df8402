#include "dmps/config.hpp"

#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "dmps/text.hpp"

namespace dmps {

RunConfig default_run_config(std::string_view env_name, Dynamics dynamics) {
  RunConfig cfg;
  cfg.env = default_env_config(env_name, dynamics);
  cfg.shield = default_shield_config(cfg.env);
  resolve(cfg);
  return cfg;
}

void resolve(RunConfig& cfg) {
  validate(cfg.train);
  cfg.learner.gamma = cfg.train.gamma;
  cfg.planner.gamma = cfg.train.gamma;
  validate(cfg.env);
  validate(cfg.shield, cfg.env);
  validate(cfg.planner);
  validate(cfg.learner);
}

namespace {

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

std::string fmt(double x) { return format_double(x); }
std::string fmt(long long x) { return std::to_string(x); }

int to_int(std::string_view v) {
  const long long x = parse_int(v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError("integer out of range: " + std::string(v));
  }
  return static_cast<int>(x);
}

// Lists: items separated by ';', fields within an item by ':'. Empty = none.
std::vector<std::vector<double>> parse_records(std::string_view v, std::size_t width) {
  std::vector<std::vector<double>> out;
  if (trim(v).empty() || trim(v) == "none") return out;
  for (const auto& item : split(v, ';')) {
    const auto parts = split(item, ':');
    if (parts.size() != width) {
      throw ConfigError("expected " + std::to_string(width) + " ':'-separated fields in '" + item +
                        "'");
    }
    std::vector<double> rec;
    for (const auto& p : parts) rec.push_back(parse_double(p));
    out.push_back(std::move(rec));
  }
  return out;
}

std::string format_records(const std::vector<std::vector<double>>& recs) {
  if (recs.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (i) out += ';';
    for (std::size_t j = 0; j < recs[i].size(); ++j) {
      if (j) out += ':';
      out += format_double(recs[i][j]);
    }
  }
  return out;
}

template <typename T, typename M>
Field num(std::string key, M member_path) {
  return {std::move(key),
          [member_path](const RunConfig& c) {
            const T& x = member_path(c);
            if constexpr (std::is_floating_point_v<T>) {
              return fmt(static_cast<double>(x));
            } else {
              return fmt(static_cast<long long>(x));
            }
          },
          [member_path](RunConfig& c, std::string_view v) {
            T& x = member_path(c);
            if constexpr (std::is_floating_point_v<T>) {
              x = parse_double(v);
            } else if constexpr (std::is_same_v<T, int>) {
              x = to_int(v);
            } else if constexpr (std::is_same_v<T, std::size_t>) {
              const long long n = parse_int(v);
              if (n < 0) throw ConfigError("expected a non-negative integer");
              x = static_cast<std::size_t>(n);
            } else {
              x = static_cast<T>(parse_int(v));
            }
          }};
}

#define DMPS_FIELD(T, key, expr) num<T>(key, [](auto& c) -> auto& { return expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"env.name", [](const RunConfig& c) { return c.env.env_name; },
                 [](RunConfig& c, std::string_view v) { c.env.env_name = std::string(trim(v)); }});
    f.push_back({"env.dynamics",
                 [](const RunConfig& c) { return to_string(c.env.dynamics); },
                 [](RunConfig& c, std::string_view v) { c.env.dynamics = parse_dynamics(trim(v)); }});
    f.push_back(DMPS_FIELD(double, "env.dt", c.env.dt));
    f.push_back(DMPS_FIELD(double, "env.a_max", c.env.a_max));
    f.push_back(DMPS_FIELD(double, "env.torque_max", c.env.torque_max));
    f.push_back(DMPS_FIELD(double, "env.body_width", c.env.body_width));
    f.push_back(DMPS_FIELD(double, "env.v_max", c.env.v_max));
    f.push_back(DMPS_FIELD(double, "env.goal_x", c.env.goal_x));
    f.push_back(DMPS_FIELD(double, "env.goal_y", c.env.goal_y));
    f.push_back(DMPS_FIELD(double, "env.goal_radius", c.env.goal_radius));
    f.push_back(DMPS_FIELD(double, "env.step_penalty", c.env.step_penalty));
    f.push_back(DMPS_FIELD(double, "env.shaping", c.env.shaping));
    f.push_back(DMPS_FIELD(double, "env.goal_bonus", c.env.goal_bonus));
    f.push_back(DMPS_FIELD(double, "env.start_x", c.env.start_x));
    f.push_back(DMPS_FIELD(double, "env.start_y", c.env.start_y));
    f.push_back(DMPS_FIELD(double, "env.start_radius", c.env.start_radius));
    f.push_back(DMPS_FIELD(double, "env.start_heading_spread", c.env.start_heading_spread));
    f.push_back(DMPS_FIELD(int, "env.episode_max_steps", c.env.episode_max_steps));
    f.push_back(DMPS_FIELD(double, "env.speed_limit", c.env.speed_limit));
    f.push_back({"env.road",
                 [](const RunConfig& c) {
                   const Region& r = c.env.road;
                   return r.enabled ? format_records({{r.x_min, r.x_max, r.y_min, r.y_max}})
                                    : std::string("none");
                 },
                 [](RunConfig& c, std::string_view v) {
                   const auto recs = parse_records(v, 4);
                   if (recs.size() > 1) throw ConfigError("env.road takes one region");
                   c.env.road = recs.empty() ? Region{}
                                             : Region{true, recs[0][0], recs[0][1], recs[0][2],
                                                      recs[0][3]};
                 }});
    f.push_back({"env.static_discs",
                 [](const RunConfig& c) {
                   std::vector<std::vector<double>> recs;
                   for (const auto& d : c.env.static_discs) recs.push_back({d.x, d.y, d.radius});
                   return format_records(recs);
                 },
                 [](RunConfig& c, std::string_view v) {
                   c.env.static_discs.clear();
                   for (const auto& r : parse_records(v, 3)) {
                     c.env.static_discs.push_back({r[0], r[1], r[2]});
                   }
                 }});
    f.push_back({"env.moving_discs",
                 [](const RunConfig& c) {
                   std::vector<std::vector<double>> recs;
                   for (const auto& m : c.env.moving_discs) {
                     recs.push_back({m.x, m.y, m.orbit_radius, m.radius, m.omega});
                   }
                   return format_records(recs);
                 },
                 [](RunConfig& c, std::string_view v) {
                   c.env.moving_discs.clear();
                   for (const auto& r : parse_records(v, 5)) {
                     c.env.moving_discs.push_back({r[0], r[1], r[2], r[3], r[4]});
                   }
                 }});
    f.push_back({"env.walls",
                 [](const RunConfig& c) {
                   std::vector<std::vector<double>> recs;
                   for (const auto& w : c.env.walls) {
                     recs.push_back({w.inner_radius, w.thickness, w.opening_half_angle, w.omega});
                   }
                   return format_records(recs);
                 },
                 [](RunConfig& c, std::string_view v) {
                   c.env.walls.clear();
                   for (const auto& r : parse_records(v, 4)) {
                     c.env.walls.push_back({r[0], r[1], r[2], r[3]});
                   }
                 }});

    f.push_back(DMPS_FIELD(int, "shield.recovery_horizon", c.shield.recovery_horizon));
    f.push_back(DMPS_FIELD(double, "shield.equilibrium_speed_tol", c.shield.equilibrium_speed_tol));
    f.push_back(DMPS_FIELD(double, "shield.r_minus", c.shield.r_minus));

    f.push_back(DMPS_FIELD(int, "planner.horizon", c.planner.horizon));
    f.push_back(DMPS_FIELD(int, "planner.branching", c.planner.branching));
    f.push_back(DMPS_FIELD(int, "planner.iterations", c.planner.iterations));
    f.push_back(DMPS_FIELD(double, "planner.ucb_c", c.planner.ucb_c));
    f.push_back(DMPS_FIELD(int, "planner.node_budget", c.planner.node_budget));

    f.push_back(DMPS_FIELD(double, "learner.actor_lr", c.learner.actor_lr));
    f.push_back(DMPS_FIELD(double, "learner.critic_lr", c.learner.critic_lr));
    f.push_back(DMPS_FIELD(double, "learner.tau", c.learner.tau));
    f.push_back(DMPS_FIELD(int, "learner.policy_delay", c.learner.policy_delay));
    f.push_back(DMPS_FIELD(double, "learner.smoothing_sigma", c.learner.smoothing_sigma));
    f.push_back(DMPS_FIELD(double, "learner.smoothing_clip", c.learner.smoothing_clip));
    f.push_back(DMPS_FIELD(int, "learner.batch_size", c.learner.batch_size));
    f.push_back({"learner.hidden",
                 [](const RunConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.learner.hidden.size(); ++i) {
                     out += (i ? "," : "") + std::to_string(c.learner.hidden[i]);
                   }
                   return out;
                 },
                 [](RunConfig& c, std::string_view v) {
                   c.learner.hidden.clear();
                   for (const auto& p : split(v, ',')) c.learner.hidden.push_back(to_int(p));
                 }});
    f.push_back(DMPS_FIELD(std::size_t, "learner.buffer_capacity", c.learner.buffer_capacity));
    f.push_back(DMPS_FIELD(double, "learner.exploration_sigma", c.learner.exploration_sigma));
    f.push_back(DMPS_FIELD(int, "learner.warmup_steps", c.learner.warmup_steps));

    f.push_back(DMPS_FIELD(long, "train.total_timesteps", c.train.total_timesteps));
    f.push_back(DMPS_FIELD(int, "train.episode_max_steps", c.train.episode_max_steps));
    f.push_back(DMPS_FIELD(long, "train.eval_every", c.train.eval_every));
    f.push_back(DMPS_FIELD(int, "train.eval_episodes", c.train.eval_episodes));
    f.push_back({"train.seeds",
                 [](const RunConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.train.seeds.size(); ++i) {
                     out += (i ? "," : "") + std::to_string(c.train.seeds[i]);
                   }
                   return out;
                 },
                 [](RunConfig& c, std::string_view v) {
                   c.train.seeds.clear();
                   for (const auto& p : split(v, ',')) {
                     const long long s = parse_int(p);
                     if (s < 0) throw ConfigError("seeds must be non-negative");
                     c.train.seeds.push_back(static_cast<std::uint64_t>(s));
                   }
                 }});
    f.push_back({"train.shield_mode",
                 [](const RunConfig& c) { return to_string(c.train.shield_mode); },
                 [](RunConfig& c, std::string_view v) {
                   c.train.shield_mode = parse_shield_mode(trim(v));
                 }});
    f.push_back(DMPS_FIELD(double, "train.gamma", c.train.gamma));
    f.push_back({"train.dump_trajectories",
                 [](const RunConfig& c) {
                   return std::string(c.train.dump_trajectories ? "true" : "false");
                 },
                 [](RunConfig& c, std::string_view v) { c.train.dump_trajectories = parse_bool(v); }});
    return f;
  }();
  return table;
}

#undef DMPS_FIELD

const Field& find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  const Field& f = find_field(trim(key));
  try {
    f.set(cfg, trim(value));
  } catch (const ConfigError& e) {
    throw ConfigError(f.key + ": " + e.what());
  }
}

RunConfig parse_config(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::map<std::string, std::size_t> line_of;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    find_field(key);
    if (line_of.count(key)) {
      throw ConfigError("line " + std::to_string(line_no) + ": repeated key '" + key +
                        "' (first on line " + std::to_string(line_of[key]) + ")");
    }
    line_of[key] = line_no;
    entries.emplace_back(std::move(key), std::move(value));
  }

  std::string name = "single-gate";
  Dynamics dyn = Dynamics::DoubleIntegrator;
  for (const auto& [k, v] : entries) {
    if (k == "env.name") name = v;
    if (k == "env.dynamics") dyn = parse_dynamics(v);
  }
  RunConfig cfg;
  cfg.env = default_env_config(name, dyn);
  for (const auto& [k, v] : entries) {
    if (k.rfind("env.", 0) == 0) set_config_value(cfg, k, v);
  }
  // The shield horizon default depends on the (possibly overridden) dynamics limits.
  cfg.shield = default_shield_config(cfg.env);
  for (const auto& [k, v] : entries) {
    if (k.rfind("env.", 0) != 0) set_config_value(cfg, k, v);
  }
  resolve(cfg);
  return cfg;
}

RunConfig load_config_file(const std::string& path) { return parse_config(read_file(path)); }

std::string to_text(const RunConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    const std::string sec = f.key.substr(0, f.key.find('.'));
    if (sec != section) {
      if (!section.empty()) out << '\n';
      section = sec;
    }
    out << f.key << " = " << f.get(cfg) << '\n';
  }
  return out.str();
}

}  // namespace dmps
