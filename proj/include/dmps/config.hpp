#pragma once

// Plain-text run configuration: one `section.key = value` per line, `#`
// starts a comment. Sections are env, shield, planner, learner and train.
// Keys that are absent keep the defaults of the chosen environment.

#include <string>
#include <string_view>

#include "dmps/environments.hpp"
#include "dmps/learner.hpp"
#include "dmps/planner.hpp"
#include "dmps/shield.hpp"
#include "dmps/trainer.hpp"

namespace dmps {

struct RunConfig {
  EnvConfig env;
  ShieldConfig shield;
  PlannerConfig planner;
  LearnerConfig learner;
  TrainConfig train;

  bool operator==(const RunConfig&) const = default;
};

/// Benchmark defaults for one environment, already resolved.
RunConfig default_run_config(std::string_view env_name, Dynamics dynamics);

/// Copies train.gamma into the learner and planner and validates every
/// section. Throws ConfigError.
void resolve(RunConfig& cfg);

/// Parses config text on top of the defaults of its env.name / env.dynamics
/// (single-gate, di when absent). Unknown or repeated keys are errors.
RunConfig parse_config(std::string_view text);
RunConfig load_config_file(const std::string& path);

/// Every field, one key per line, doubles in shortest round-trip form.
std::string to_text(const RunConfig& cfg);

/// Applies one key = value assignment to `cfg` (no resolve).
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

}  // namespace dmps
