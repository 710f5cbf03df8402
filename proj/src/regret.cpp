#include "dmps/regret.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "dmps/text.hpp"

namespace dmps {

void validate(const DiscreteToyMdp& toy) {
  const auto ns = static_cast<std::size_t>(toy.num_states);
  const auto na = static_cast<std::size_t>(toy.num_actions);
  if (toy.num_states < 1 || toy.num_actions < 1) throw ConfigError("toy MDP is empty");
  if (toy.next.size() != ns * na || toy.reward.size() != ns * na) {
    throw ConfigError("toy MDP tables are not total");
  }
  if (toy.unsafe.size() != ns || toy.terminal.size() != ns || toy.at_rest.size() != ns ||
      toy.backup.size() != ns) {
    throw ConfigError("toy MDP per-state tables have the wrong size");
  }
  for (int nx : toy.next) {
    if (nx < 0 || nx >= toy.num_states) throw ConfigError("toy MDP transition out of range");
  }
  for (int b : toy.backup) {
    if (b < 0 || b >= toy.num_actions) throw ConfigError("toy MDP backup out of range");
  }
  for (int s = 0; s < toy.num_states; ++s) {
    if (toy.unsafe[static_cast<std::size_t>(s)]) {
      for (int a = 0; a < toy.num_actions; ++a) {
        if (toy.succ(s, a) != s) throw ConfigError("unsafe toy states must be absorbing");
      }
    }
  }
  for (int s : toy.initial_states) {
    if (s < 0 || s >= toy.num_states) throw ConfigError("toy initial state out of range");
  }
  Discount{toy.gamma};
}

int corridor_state(const CorridorSpec& spec, int x, int y, int v) {
  return (x * spec.height + y) * (spec.max_speed + 1) + v;
}

int corridor_goal_state(const CorridorSpec& spec) {
  return spec.width * spec.height * (spec.max_speed + 1);
}

int corridor_unsafe_state(const CorridorSpec& spec) { return corridor_goal_state(spec) + 1; }

DiscreteToyMdp make_corridor_toy(const CorridorSpec& spec) {
  if (spec.width < 3 || spec.height < 1 || spec.max_speed < 1) {
    throw ConfigError("corridor too small");
  }
  if (spec.wall_x <= spec.start_x_max || spec.wall_x >= spec.width - 1) {
    throw ConfigError("corridor wall must lie between the start and the goal column");
  }
  if (spec.gap_lo < 0 || spec.gap_hi >= spec.height || spec.gap_lo > spec.gap_hi) {
    throw ConfigError("corridor gap rows out of range");
  }
  DiscreteToyMdp toy;
  toy.num_actions = 3;
  toy.num_states = corridor_goal_state(spec) + 2;
  toy.gamma = spec.gamma;
  const auto ns = static_cast<std::size_t>(toy.num_states);
  toy.next.assign(ns * 3, 0);
  toy.reward.assign(ns * 3, 0.0);
  toy.unsafe.assign(ns, 0);
  toy.terminal.assign(ns, 0);
  toy.at_rest.assign(ns, 0);
  toy.backup.assign(ns, kBrake);

  const int goal = corridor_goal_state(spec);
  const int bad = corridor_unsafe_state(spec);
  const int gap_center = (spec.gap_lo + spec.gap_hi) / 2;
  auto set = [&](int s, int a, int nx, double r) {
    toy.next[static_cast<std::size_t>(s * 3 + a)] = nx;
    toy.reward[static_cast<std::size_t>(s * 3 + a)] = r;
  };
  for (int x = 0; x < spec.width - 1; ++x) {
    for (int y = 0; y < spec.height; ++y) {
      for (int v = 0; v <= spec.max_speed; ++v) {
        const int s = corridor_state(spec, x, y, v);
        toy.at_rest[static_cast<std::size_t>(s)] = v == 0;
        for (int a = 0; a < 3; ++a) {
          int v2 = v, y2 = y;
          if (a == kBrake) v2 = std::max(v - 1, 0);
          if (a == kAccelerate) v2 = std::min(v + 1, spec.max_speed);
          if (a == kSteer) y2 = y + (gap_center > y) - (gap_center < y);
          const int x2 = x + v2;
          const bool blocked = y2 < spec.gap_lo || y2 > spec.gap_hi;
          if (blocked && x <= spec.wall_x && spec.wall_x <= x2) {
            set(s, a, bad, spec.unsafe_reward);
          } else if (x2 >= spec.width - 1) {
            set(s, a, goal, spec.step_reward + spec.goal_reward);
          } else {
            set(s, a, corridor_state(spec, x2, y2, v2), spec.step_reward);
          }
        }
      }
    }
  }
  // Unused (x = width - 1) grid slots are unreachable; make them goal-like.
  for (int y = 0; y < spec.height; ++y) {
    for (int v = 0; v <= spec.max_speed; ++v) {
      const int s = corridor_state(spec, spec.width - 1, y, v);
      for (int a = 0; a < 3; ++a) set(s, a, goal, 0.0);
      toy.terminal[static_cast<std::size_t>(s)] = 1;
      toy.at_rest[static_cast<std::size_t>(s)] = 1;
    }
  }
  for (int a = 0; a < 3; ++a) {
    set(goal, a, goal, 0.0);
    set(bad, a, bad, spec.unsafe_reward);
  }
  toy.terminal[static_cast<std::size_t>(goal)] = 1;
  toy.at_rest[static_cast<std::size_t>(goal)] = 1;
  toy.terminal[static_cast<std::size_t>(bad)] = 1;
  toy.unsafe[static_cast<std::size_t>(bad)] = 1;
  for (int x = 0; x <= spec.start_x_max; ++x) {
    for (int y = 0; y < spec.height; ++y) toy.initial_states.push_back(corridor_state(spec, x, y, 0));
  }
  validate(toy);
  return toy;
}

std::vector<char> recoverable_states(const DiscreteToyMdp& toy, int horizon) {
  if (horizon < 1) throw ConfigError("recovery horizon must be >= 1");
  std::vector<char> rec(static_cast<std::size_t>(toy.num_states), 0);
  for (int s = 0; s < toy.num_states; ++s) {
    int cur = s;
    bool ok = !toy.unsafe[static_cast<std::size_t>(cur)];
    for (int k = 0; k < horizon && ok; ++k) {
      cur = toy.succ(cur, toy.backup[static_cast<std::size_t>(cur)]);
      ok = !toy.unsafe[static_cast<std::size_t>(cur)];
    }
    rec[static_cast<std::size_t>(s)] = ok && toy.at_rest[static_cast<std::size_t>(cur)];
  }
  return rec;
}

DiscreteToyMdp restrict_to_recoverable(const DiscreteToyMdp& toy, const std::vector<char>& rec,
                                       int sink) {
  DiscreteToyMdp out = toy;
  const double sink_reward = toy.r(sink, 0);
  for (int s = 0; s < toy.num_states; ++s) {
    for (int a = 0; a < toy.num_actions; ++a) {
      const auto k = static_cast<std::size_t>(s * toy.num_actions + a);
      if (!rec[static_cast<std::size_t>(toy.next[k])] && toy.next[k] != sink) {
        out.next[k] = sink;
        out.reward[k] = sink_reward;
      }
    }
  }
  return out;
}

ValueTables value_iteration(const DiscreteToyMdp& toy, double tol) {
  if (!(tol > 0.0)) throw ConfigError("value iteration tolerance must be positive");
  const int na = toy.num_actions;
  ValueTables t;
  t.num_actions = na;
  t.q.assign(static_cast<std::size_t>(toy.num_states * na), 0.0);
  t.v.assign(static_cast<std::size_t>(toy.num_states), 0.0);
  std::vector<double> q_new(t.q.size());
  // A last change of d bounds the distance to the fixed point by
  // d * gamma / (1 - gamma); stop once that bound is within tol.
  const double stop = tol * (1.0 - toy.gamma) / toy.gamma;
  while (true) {
    ++t.iterations;
    double change = 0.0;
    for (int s = 0; s < toy.num_states; ++s) {
      for (int a = 0; a < na; ++a) {
        const auto k = static_cast<std::size_t>(s * na + a);
        q_new[k] = toy.reward[k] + toy.gamma * t.v[static_cast<std::size_t>(toy.next[k])];
        change = std::max(change, std::fabs(q_new[k] - t.q[k]));
      }
    }
    t.q.swap(q_new);
    for (int s = 0; s < toy.num_states; ++s) {
      const auto first = t.q.begin() + s * na;
      t.v[static_cast<std::size_t>(s)] = *std::max_element(first, first + na);
    }
    if (change <= stop) break;
  }
  t.residual = 0.0;
  for (int s = 0; s < toy.num_states; ++s) {
    for (int a = 0; a < na; ++a) {
      const auto k = static_cast<std::size_t>(s * na + a);
      const double backed = toy.reward[k] + toy.gamma * t.v[static_cast<std::size_t>(toy.next[k])];
      t.residual = std::max(t.residual, std::fabs(backed - t.q[k]));
    }
  }
  return t;
}

BruteForcePlan brute_force_plan(const DiscreteToyMdp& toy, int s0, int n, const QTable& q,
                                const std::vector<char>& rec) {
  if (n < 0) throw ConfigError("horizon must be >= 0");
  const int len = n + 1;
  double count = std::pow(static_cast<double>(toy.num_actions), len);
  if (count > 1e6) throw ConfigError("brute-force plan space exceeds 10^6 sequences");
  const int na = toy.num_actions;
  BruteForcePlan best;
  std::vector<int> seq(static_cast<std::size_t>(len), 0);
  std::vector<double> rewards(static_cast<std::size_t>(n));
  // Lexicographic odometer over all sequences.
  while (true) {
    int s = s0;
    bool ok = true;
    for (int i = 0; i < len && ok; ++i) {
      const int a = seq[static_cast<std::size_t>(i)];
      const int nx = toy.succ(s, a);
      if (!rec[static_cast<std::size_t>(nx)]) {
        ok = false;
        break;
      }
      if (i < n) {
        rewards[static_cast<std::size_t>(i)] = toy.r(s, a);
        s = nx;
      }
    }
    if (ok) {
      const double value = n_step_return(
          rewards, q[static_cast<std::size_t>(s * na + seq.back())], toy.gamma);
      if (!best.feasible() || value > best.objective) {
        best.actions = seq;
        best.objective = value;
      }
    }
    int pos = len - 1;
    while (pos >= 0 && ++seq[static_cast<std::size_t>(pos)] == na) {
      seq[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return best;
}

PlanningProblem toy_planning_problem(const DiscreteToyMdp& toy, const std::vector<char>& rec,
                                     const QTable& q) {
  PlanningProblem p;
  p.step = [&toy](const State& s, const Action& a) {
    const int si = static_cast<int>(s[0]), ai = static_cast<int>(a[0]);
    return StepResult{{static_cast<double>(toy.succ(si, ai))}, toy.r(si, ai)};
  };
  p.recoverable = [&rec](const State& s) { return rec[static_cast<std::size_t>(s[0])] != 0; };
  p.q = [&toy, &q](const State& s, const Action& a) {
    return q[static_cast<std::size_t>(static_cast<int>(s[0]) * toy.num_actions +
                                      static_cast<int>(a[0]))];
  };
  std::vector<Action> actions;
  for (int a = 0; a < toy.num_actions; ++a) actions.push_back({static_cast<double>(a)});
  p.sample_actions = finite_set_sampler(std::move(actions));
  return p;
}

QTable perturb_q(const QTable& q, double eps, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  QTable out = q;
  for (double& x : out) x += eps * u(rng);
  return out;
}

RegretReport empirical_recovery_regret(const DiscreteToyMdp& toy, const std::vector<char>& rec,
                                       const ValueTables& optimal, const RegretSetup& setup) {
  if (setup.episodes < 1) throw ConfigError("regret estimate needs at least one episode");
  if (setup.learned.size() != static_cast<std::size_t>(toy.num_states)) {
    throw ConfigError("learned policy table has the wrong size");
  }
  if (toy.initial_states.empty()) throw ConfigError("toy has no initial states");
  RegretReport report;
  report.horizon = setup.horizon;
  report.gamma_power = std::pow(toy.gamma, setup.horizon);

  PlannerConfig pcfg = setup.planner;
  pcfg.horizon = setup.horizon;
  pcfg.gamma = toy.gamma;
  pcfg.branching = std::max(pcfg.branching, toy.num_actions);
  const PlanningProblem problem = toy_planning_problem(toy, rec, setup.planner_q);
  Rng rng(setup.seed);
  std::uniform_int_distribution<std::size_t> pick_start(0, toy.initial_states.size() - 1);

  double sum = 0.0, sum_sq = 0.0, gap_sum = 0.0;
  for (int ep = 0; ep < setup.episodes; ++ep) {
    int s = toy.initial_states[pick_start(rng)];
    double weight = 1.0 - toy.gamma;
    double total = 0.0;
    for (int t = 0; t < setup.max_steps && !toy.terminal[static_cast<std::size_t>(s)]; ++t) {
      int a = setup.learned[static_cast<std::size_t>(s)];
      if (!rec[static_cast<std::size_t>(toy.succ(s, a))]) {
        ++report.triggers;
        const BruteForcePlan oracle = brute_force_plan(toy, s, setup.horizon, setup.planner_q, rec);
        if (setup.use_mcts) {
          PlanResult pr = plan_rec({static_cast<double>(s)}, problem, pcfg, rng);
          a = pr.is_bottom() ? toy.backup[static_cast<std::size_t>(s)]
                             : static_cast<int>(pr.plan->actions.front()[0]);
          if (!pr.is_bottom() && oracle.feasible()) {
            gap_sum += oracle.objective - pr.plan->objective_value;
          }
        } else {
          a = oracle.feasible() ? oracle.actions.front() : toy.backup[static_cast<std::size_t>(s)];
        }
        total += weight * (optimal.v[static_cast<std::size_t>(s)] - optimal.q_at(s, a));
      }
      s = toy.succ(s, a);
      weight *= toy.gamma;
    }
    sum += total;
    sum_sq += total * total;
  }
  const double n = setup.episodes;
  report.empirical_rr = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * report.empirical_rr * report.empirical_rr) /
                                               (n - 1.0))
                           : 0.0;
  report.rr_stderr = std::sqrt(var / n);
  report.planner_gap = report.triggers > 0 ? gap_sum / static_cast<double>(report.triggers) : 0.0;
  return report;
}

std::vector<RegretReport> regret_decay_suite(const DiscreteToyMdp& toy,
                                             const std::vector<char>& rec,
                                             const ValueTables& optimal,
                                             const std::vector<int>& horizons,
                                             const RegretSetup& base) {
  if (!std::is_sorted(horizons.begin(), horizons.end())) {
    throw ConfigError("regret suite horizons must be ascending");
  }
  std::vector<RegretReport> out;
  for (int n : horizons) {
    RegretSetup setup = base;
    setup.horizon = n;
    out.push_back(empirical_recovery_regret(toy, rec, optimal, setup));
  }
  if (!out.empty()) {
    const double c = out.front().empirical_rr / out.front().gamma_power;
    for (auto& r : out) r.bound_constant = c;
  }
  return out;
}

void write_regret_csv(std::ostream& out, const std::vector<RegretReport>& reports,
                      const std::string& label, bool header) {
  if (header) out << "setting,horizon,rr_mean,rr_stderr,fitted_c,gamma_power,triggers,planner_gap\n";
  for (const auto& r : reports) {
    out << label << ',' << r.horizon << ',' << format_double(r.empirical_rr) << ','
        << format_double(r.rr_stderr) << ',' << format_double(r.bound_constant) << ','
        << format_double(r.gamma_power) << ',' << r.triggers << ','
        << format_double(r.planner_gap) << '\n';
  }
}

}  // namespace dmps
