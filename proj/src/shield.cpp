#include "dmps/shield.hpp"

#include <cmath>

namespace dmps {

namespace {

double decel_bound(const EnvConfig& env) {
  return env.dynamics == Dynamics::DoubleIntegrator ? env.a_max : env.torque_max;
}

}  // namespace

ShieldConfig default_shield_config(const EnvConfig& env) {
  ShieldConfig cfg;
  cfg.recovery_horizon =
      static_cast<int>(std::ceil(env.v_max / (decel_bound(env) * env.dt) - 1e-9)) + 2;
  return cfg;
}

double min_step_reward(const EnvConfig& env) {
  // Shaping can lose at most the distance travelled in one step.
  return env.step_penalty - std::fabs(env.shaping) * env.v_max * env.dt;
}

void validate(const ShieldConfig& cfg, const EnvConfig& env) {
  if (cfg.recovery_horizon < 1) throw ConfigError("shield.recovery_horizon must be >= 1");
  if (!(cfg.equilibrium_speed_tol >= 0.0)) {
    throw ConfigError("shield.equilibrium_speed_tol must be >= 0");
  }
  if (!(cfg.r_minus < min_step_reward(env))) {
    throw ConfigError("shield.r_minus must be below the minimum one-step reward");
  }
}

std::string to_string(ActionSource source) {
  switch (source) {
    case ActionSource::Learned: return "learned";
    case ActionSource::Planner: return "planner";
    case ActionSource::Backup: return "backup";
  }
  return "unknown";
}

Action backup_halt(const Environment& env, const State& s, double tol) {
  const EnvConfig& cfg = env.config();
  if (env.dynamics() == Dynamics::DoubleIntegrator) {
    const double speed = std::hypot(s[2], s[3]);
    if (speed <= tol) return {0.0, 0.0};
    const double mag = std::min(cfg.a_max, speed / cfg.dt);
    return {-mag * s[2] / speed, -mag * s[3] / speed};
  }
  const double v = s[2];
  if (std::fabs(v) <= tol) return {0.0, 0.0};
  const double mag = std::min(cfg.torque_max, std::fabs(v) / cfg.dt);
  const double torque = v > 0.0 ? -mag : mag;
  return {torque, torque};
}

bool is_recoverable(const State& s, const BackupPolicy& backup, const EnvModel& model,
                    const ShieldConfig& cfg) {
  if (model.is_unsafe(s)) return false;
  State cur = s;
  for (int k = 0; k < cfg.recovery_horizon; ++k) {
    cur = step(model, cur, backup(cur)).next;
    if (model.is_unsafe(cur)) return false;
  }
  return model.speed(cur) <= cfg.equilibrium_speed_tol && model.permanently_safe(cur);
}

EnvShield::EnvShield(const Environment& env, ShieldConfig cfg) : env_(env), cfg_(cfg) {
  validate(cfg_, env_.config());
}

State EnvShield::successor(const State& s, const Action& a) const {
  return step(env_, s, a).next;
}

bool EnvShield::recoverable(const State& s) const {
  const double tol = cfg_.equilibrium_speed_tol;
  return is_recoverable(
      s, [this, tol](const State& x) { return backup_halt(env_, x, tol); }, env_, cfg_);
}

Action EnvShield::backup(const State& s) const {
  return backup_halt(env_, s, cfg_.equilibrium_speed_tol);
}

ShieldDecision mps_action(const State& s, const Action& proposed, const RecoveryModel& shield) {
  if (shield.recoverable(shield.successor(s, proposed))) {
    return {proposed, ActionSource::Learned, false};
  }
  return {shield.backup(s), ActionSource::Backup, true};
}

ShieldDecision dmps_action(const State& s, const Action& proposed, const RecoveryModel& shield,
                           const RecoveryPlanner& planner) {
  if (shield.recoverable(shield.successor(s, proposed))) {
    return {proposed, ActionSource::Learned, false};
  }
  if (planner) {
    // Re-checked so that a faulty planner cannot break the safety induction.
    auto planned = planner(s);
    if (planned && shield.recoverable(shield.successor(s, *planned))) {
      return {std::move(*planned), ActionSource::Planner, true};
    }
  }
  return {shield.backup(s), ActionSource::Backup, true};
}

}  // namespace dmps
