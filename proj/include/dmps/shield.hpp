#pragma once

// Model predictive shielding: the halting backup policy, the N-step
// recoverability check, and the MPS / DMPS action compositions.

#include <functional>
#include <optional>
#include <string>

#include "dmps/core.hpp"
#include "dmps/environments.hpp"

namespace dmps {

struct ShieldConfig {
  int recovery_horizon = 12;           // N, steps of backup simulation
  double equilibrium_speed_tol = 1e-6;  // m/s
  double r_minus = -10.0;               // penalty recorded on every trigger

  bool operator==(const ShieldConfig&) const = default;
};

/// N = ceil(v_max / (decel * dt)) + 2, the shortest horizon in which the
/// halting backup stops the agent from full speed, plus margin.
ShieldConfig default_shield_config(const EnvConfig& env);

/// Lowest reward a single environment step can pay.
double min_step_reward(const EnvConfig& env);

/// Throws ConfigError unless N >= 1, tol >= 0 and r_minus is strictly below
/// every achievable one-step reward.
void validate(const ShieldConfig& cfg, const EnvConfig& env);

enum class ActionSource { Learned, Planner, Backup };
std::string to_string(ActionSource source);

struct ShieldDecision {
  Action action;
  ActionSource source = ActionSource::Learned;
  bool triggered = false;
};

using BackupPolicy = Policy;

/// Maximum deceleration opposing the current velocity. The magnitude is
/// capped at |v|/dt so the agent stops exactly instead of reversing.
Action backup_halt(const Environment& env, const State& s, double tol);

/// Simulates `backup` for N steps from `s`. True iff no visited state
/// (including `s`) is unsafe and the final state is a safe equilibrium:
/// speed <= tol at a permanently safe position.
bool is_recoverable(const State& s, const BackupPolicy& backup, const EnvModel& model,
                    const ShieldConfig& cfg);

/// What the compositions need from a shielded system.
class RecoveryModel {
 public:
  virtual ~RecoveryModel() = default;
  virtual State successor(const State& s, const Action& a) const = 0;
  virtual bool recoverable(const State& s) const = 0;
  virtual Action backup(const State& s) const = 0;
};

/// Shield over a concrete benchmark environment with the halting backup.
class EnvShield final : public RecoveryModel {
 public:
  EnvShield(const Environment& env, ShieldConfig cfg);

  State successor(const State& s, const Action& a) const override;
  bool recoverable(const State& s) const override;
  Action backup(const State& s) const override;

  const Environment& env() const { return env_; }
  const ShieldConfig& config() const { return cfg_; }

 private:
  const Environment& env_;
  ShieldConfig cfg_;
};

/// Returns the first planned recovery action, or nullopt when planning fails.
using RecoveryPlanner = std::function<std::optional<Action>(const State&)>;

ShieldDecision mps_action(const State& s, const Action& proposed, const RecoveryModel& shield);

/// Like mps_action, but a trigger first asks `planner`. Its action is used
/// only if its successor is recoverable; otherwise the backup runs.
ShieldDecision dmps_action(const State& s, const Action& proposed, const RecoveryModel& shield,
                           const RecoveryPlanner& planner);

}  // namespace dmps
