#pragma once

// Exact oracles on small discrete MDPs: value iteration, exhaustive recovery
// planning, and Monte Carlo estimates of the recovery regret of a shielded
// policy stack.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "dmps/core.hpp"
#include "dmps/planner.hpp"

namespace dmps {

/// Deterministic finite MDP. Tables are indexed [s * num_actions + a].
struct DiscreteToyMdp {
  int num_states = 0;
  int num_actions = 0;
  std::vector<int> next;
  std::vector<double> reward;
  std::vector<char> unsafe;    // absorbing, large negative reward
  std::vector<char> terminal;  // absorbing states (unsafe sinks and goals)
  std::vector<char> at_rest;   // safe equilibria of the backup policy
  std::vector<int> backup;     // backup action per state
  std::vector<int> initial_states;
  double gamma = 0.9;

  int succ(int s, int a) const { return next[static_cast<std::size_t>(s * num_actions + a)]; }
  double r(int s, int a) const { return reward[static_cast<std::size_t>(s * num_actions + a)]; }
};

/// Throws ConfigError unless every table is total and consistent.
void validate(const DiscreteToyMdp& toy);

/// A straight corridor crossed by one wall with a gap. States are
/// (x, y, v) with speed along +x; actions are brake, accelerate and steer
/// (one row toward the gap at constant speed). Crossing the wall outside
/// the gap leads to the unsafe sink; reaching the last column leads to the
/// goal sink. The backup action is brake.
struct CorridorSpec {
  int width = 15;
  int height = 15;
  int max_speed = 4;
  int wall_x = 9;
  int gap_lo = 9;
  int gap_hi = 11;
  int start_x_max = 2;  // episodes start at rest with x <= start_x_max
  double step_reward = -1.0;
  double goal_reward = 10.0;
  double unsafe_reward = -20.0;
  double gamma = 0.9;
};

enum CorridorAction { kBrake = 0, kAccelerate = 1, kSteer = 2 };

DiscreteToyMdp make_corridor_toy(const CorridorSpec& spec);
int corridor_state(const CorridorSpec& spec, int x, int y, int v);
int corridor_goal_state(const CorridorSpec& spec);
int corridor_unsafe_state(const CorridorSpec& spec);

/// Backup-policy recoverability of every state: `horizon` steps of the
/// backup action never enter an unsafe state and end at rest.
std::vector<char> recoverable_states(const DiscreteToyMdp& toy, int horizon);

/// Copy of `toy` in which every transition into a non-recoverable state is
/// redirected to `sink` with that sink's self-loop reward. Its optimal
/// values are the best achievable by policies that stay recoverable.
DiscreteToyMdp restrict_to_recoverable(const DiscreteToyMdp& toy, const std::vector<char>& rec,
                                       int sink);

struct ValueTables {
  int num_actions = 0;
  std::vector<double> v;
  std::vector<double> q;
  int iterations = 0;
  double residual = 0.0;  // max |T Q - Q| over all (s, a) at return

  double q_at(int s, int a) const { return q[static_cast<std::size_t>(s * num_actions + a)]; }
};

/// Q-value iteration until the returned Q is provably within `tol` of Q*
/// in the sup norm.
ValueTables value_iteration(const DiscreteToyMdp& toy, double tol);

using QTable = std::vector<double>;

struct BruteForcePlan {
  std::vector<int> actions;  // empty when no sequence is feasible
  double objective = 0.0;
  bool feasible() const { return !actions.empty(); }
};

/// Exhaustive planRec: best n + 1 action sequence whose every successor is
/// recoverable. Ties keep the lexicographically smallest sequence. Refuses
/// (ConfigError) when |A|^(n+1) exceeds 10^6.
BruteForcePlan brute_force_plan(const DiscreteToyMdp& toy, int s0, int n, const QTable& q,
                                const std::vector<char>& rec);

/// The toy as a planning problem for the tree search. States and actions are
/// one-element vectors holding the index; the sampler draws distinct actions.
PlanningProblem toy_planning_problem(const DiscreteToyMdp& toy, const std::vector<char>& rec,
                                     const QTable& q);

struct RegretSetup {
  int horizon = 3;
  QTable planner_q;          // Q handed to the planner (exact or perturbed)
  std::vector<int> learned;  // proposed action per state
  bool use_mcts = true;      // false: plan with brute_force_plan
  PlannerConfig planner;     // horizon is overwritten by `horizon`
  int episodes = 200;
  int max_steps = 60;
  std::uint64_t seed = 0;
};

struct RegretReport {
  int horizon = 0;
  double empirical_rr = 0.0;
  double rr_stderr = 0.0;
  double bound_constant = 0.0;  // C in RR(n) <= C * gamma^n
  double gamma_power = 0.0;     // gamma^n
  long triggers = 0;
  double planner_gap = 0.0;     // mean oracle - planner objective at triggers
};

/// Monte Carlo recovery regret of the DMPS stack over `episodes` rollouts:
/// the mean over episodes of sum_t (1 - gamma) gamma^t 1[trigger at s_t]
/// (V*(s_t) - Q*(s_t, chosen action)).
RegretReport empirical_recovery_regret(const DiscreteToyMdp& toy, const std::vector<char>& rec,
                                       const ValueTables& optimal, const RegretSetup& setup);

/// One report per horizon (ascending). The bound constant is anchored at the
/// shortest horizon, C = RR(n_min) / gamma^n_min, and shared by all rows.
std::vector<RegretReport> regret_decay_suite(const DiscreteToyMdp& toy,
                                             const std::vector<char>& rec,
                                             const ValueTables& optimal,
                                             const std::vector<int>& horizons,
                                             const RegretSetup& base);

/// Q* + eps * u(s, a) with u ~ Uniform(-1, 1) drawn from `seed`.
QTable perturb_q(const QTable& q, double eps, std::uint64_t seed);

void write_regret_csv(std::ostream& out, const std::vector<RegretReport>& reports,
                      const std::string& label, bool header = true);

}  // namespace dmps
