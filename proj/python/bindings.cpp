// Python bindings for the core library.

#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "dmps/config.hpp"
#include "dmps/experiment.hpp"

namespace py = pybind11;
using namespace dmps;

namespace {

// The shield keeps a reference to its environment, so hold both.
struct PyShield {
  std::shared_ptr<const Environment> env;
  EnvShield shield;

  PyShield(std::shared_ptr<const Environment> e, const ShieldConfig& cfg)
      : env(std::move(e)), shield(*env, cfg) {}
};

py::dict episode_dict(const EpisodeMetrics& m) {
  py::dict d;
  d["episode"] = m.episode;
  d["return"] = m.undiscounted_return;
  d["invocations"] = m.shield_invocations;
  d["violations"] = m.safety_violations;
  d["steps"] = m.steps;
  d["goal_reached"] = m.goal_reached;
  return d;
}

py::dict decision_dict(const ShieldDecision& d) {
  py::dict out;
  out["action"] = d.action;
  out["source"] = to_string(d.source);
  out["triggered"] = d.triggered;
  return out;
}

PlanningProblem zero_q_problem(const PyShield& sh) {
  PlanningProblem p;
  const Environment* env = sh.env.get();
  const EnvShield* shield = &sh.shield;
  p.step = [env](const State& s, const Action& a) { return env->transition(s, a); };
  p.recoverable = [shield](const State& s) { return shield->recoverable(s); };
  p.q = [](const State&, const Action&) { return 0.0; };
  p.sample_actions = uniform_box_sampler(env->action_box());
  return p;
}

}  // namespace

PYBIND11_MODULE(_dmps, m) {
  m.doc() = "Dynamic model predictive shielding";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<EnvError>(m, "EnvError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<MissingCheckpoint>(m, "MissingCheckpoint", PyExc_FileNotFoundError);

  m.def("version", &version_string);
  m.def("env_names", &env_names);

  py::class_<RunConfig>(m, "Config")
      .def(py::init([](const std::string& env, const std::string& dynamics) {
             return default_run_config(env, parse_dynamics(dynamics));
           }),
           py::arg("env") = "single-gate", py::arg("dynamics") = "di")
      .def_static("parse", &parse_config, py::arg("text"))
      .def_static("load", &load_config_file, py::arg("path"))
      .def("to_text", &to_text)
      .def(
          "set",
          [](RunConfig& c, const std::string& key, const std::string& value) {
            set_config_value(c, key, value);
            resolve(c);
          },
          py::arg("key"), py::arg("value"))
      .def_property_readonly("env_name", [](const RunConfig& c) { return c.env.env_name; })
      .def_property_readonly("dynamics",
                             [](const RunConfig& c) { return to_string(c.env.dynamics); })
      .def_property_readonly("shield_mode",
                             [](const RunConfig& c) { return to_string(c.train.shield_mode); })
      .def_property_readonly("seeds", [](const RunConfig& c) { return c.train.seeds; })
      .def(py::self == py::self)
      .def("__repr__", [](const RunConfig& c) {
        return "<Config " + c.env.env_name + " " + to_string(c.env.dynamics) + " " +
               to_string(c.train.shield_mode) + ">";
      });

  py::class_<Environment, std::shared_ptr<Environment>>(m, "Environment")
      .def(py::init([](const RunConfig& c) { return std::make_shared<Environment>(make_env(c.env)); }),
           py::arg("config"))
      .def_property_readonly("state_dim", &Environment::obs_dim)
      .def_property_readonly("action_dim", [](const Environment& e) { return e.action_box().dim(); })
      .def_property_readonly("action_low",
                             [](const Environment& e) {
                               std::vector<double> v;
                               for (const auto& b : e.action_box().bounds()) v.push_back(b.lo);
                               return v;
                             })
      .def_property_readonly("action_high",
                             [](const Environment& e) {
                               std::vector<double> v;
                               for (const auto& b : e.action_box().bounds()) v.push_back(b.hi);
                               return v;
                             })
      .def_property_readonly("max_steps",
                             [](const Environment& e) { return e.config().episode_max_steps; })
      .def(
          "reset",
          [](const Environment& e, std::uint64_t seed) {
            Rng rng(seed);
            return e.sample_initial(rng);
          },
          py::arg("seed"))
      .def(
          "step",
          [](const Environment& e, const State& s, const Action& a) {
            const StepResult r = step(e, s, a);
            return py::make_tuple(r.next, r.reward, e.is_unsafe(r.next), e.is_goal(r.next));
          },
          py::arg("state"), py::arg("action"),
          "Returns (next_state, reward, unsafe, goal).")
      .def("is_unsafe", &Environment::is_unsafe, py::arg("state"))
      .def("is_goal", &Environment::is_goal, py::arg("state"))
      .def("features",
           [](const Environment& e, const State& s) { return observation_features(e.config(), s); },
           py::arg("state"));

  py::class_<PyShield>(m, "Shield")
      .def(py::init([](std::shared_ptr<Environment> env, const RunConfig& c) {
             return std::make_unique<PyShield>(std::move(env), c.shield);
           }),
           py::arg("env"), py::arg("config"))
      .def("recoverable", [](const PyShield& s, const State& x) { return s.shield.recoverable(x); },
           py::arg("state"))
      .def("backup", [](const PyShield& s, const State& x) { return s.shield.backup(x); },
           py::arg("state"))
      .def(
          "mps_action",
          [](const PyShield& s, const State& x, const Action& a) {
            return decision_dict(mps_action(x, a, s.shield));
          },
          py::arg("state"), py::arg("proposed"))
      .def(
          "dmps_action",
          [](const PyShield& s, const State& x, const Action& a, int horizon, int iterations,
             int node_budget, std::uint64_t seed) {
            PlannerConfig cfg;
            cfg.horizon = horizon;
            cfg.iterations = iterations;
            cfg.node_budget = node_budget;
            validate(cfg);
            const PlanningProblem problem = zero_q_problem(s);
            Rng rng(seed);
            RecoveryPlanner planner = [&](const State& st) -> std::optional<Action> {
              PlanResult r = plan_rec(st, problem, cfg, rng);
              if (r.is_bottom()) return std::nullopt;
              return r.plan->actions.front();
            };
            return decision_dict(dmps_action(x, a, s.shield, planner));
          },
          py::arg("state"), py::arg("proposed"), py::arg("horizon") = 5,
          py::arg("iterations") = 100, py::arg("node_budget") = -1, py::arg("seed") = 0,
          "DMPS decision with a zero Q bootstrap.");

  m.def(
      "train",
      [](const RunConfig& cfg, std::uint64_t seed) {
        SeedOutcome out;
        {
          py::gil_scoped_release release;
          out = train_seed(cfg, seed);
        }
        py::list episodes;
        for (const auto& e : out.result.episodes) episodes.append(episode_dict(e));
        py::list evals;
        for (const auto& ev : out.result.evals) {
          py::dict d;
          d["timestep"] = ev.timestep;
          py::list eps;
          for (const auto& e : ev.episodes) eps.append(episode_dict(e));
          d["episodes"] = eps;
          evals.append(d);
        }
        py::dict d;
        d["episodes"] = episodes;
        d["evals"] = evals;
        d["timesteps"] = out.result.timesteps;
        d["absorbing_records"] = out.result.absorbing_records;
        return d;
      },
      py::arg("config"), py::arg("seed"), "One seeded training run; returns metrics.");

  m.def(
      "mcts_oracle_check",
      [](int trials, int iterations, std::uint64_t seed) {
        OracleSettings s;
        s.mcts_trials = trials;
        s.mcts_iterations = iterations;
        s.seed = seed;
        MctsOracleCheck r;
        {
          py::gil_scoped_release release;
          r = mcts_oracle_check(s);
        }
        py::dict d;
        d["trials"] = r.trials;
        d["matches"] = r.matches;
        d["dominance_failures"] = r.dominance_failures;
        d["bottoms"] = r.bottoms;
        d["worst_miss"] = r.worst_miss;
        return d;
      },
      py::arg("trials") = 100, py::arg("iterations") = 10000, py::arg("seed") = 2024,
      "Tree search against exhaustive enumeration on the discrete corridor.");

  m.def(
      "regret_decay",
      [](std::vector<int> horizons, int episodes, int iterations, double eps, std::uint64_t seed) {
        OracleSettings s;
        s.regret_horizons = std::move(horizons);
        s.regret_episodes = episodes;
        s.regret_iterations = iterations;
        s.regret_eps = eps;
        s.seed = seed;
        RegretSuiteResult r;
        {
          py::gil_scoped_release release;
          r = regret_suite(s);
        }
        auto rows = [](const std::vector<RegretReport>& reports) {
          py::list out;
          for (const auto& x : reports) {
            py::dict d;
            d["horizon"] = x.horizon;
            d["rr"] = x.empirical_rr;
            d["stderr"] = x.rr_stderr;
            d["fitted_c"] = x.bound_constant;
            d["triggers"] = x.triggers;
            out.append(d);
          }
          return out;
        };
        py::dict d;
        d["exact"] = rows(r.exact);
        d["eps"] = rows(r.perturbed);
        d["2eps"] = rows(r.perturbed_double);
        return d;
      },
      py::arg("horizons") = std::vector<int>{1, 2, 3, 4, 5}, py::arg("episodes") = 300,
      py::arg("iterations") = 10000, py::arg("eps") = 1.0, py::arg("seed") = 2024,
      "Recovery-regret decay on the corridor with exact and perturbed Q.");
}
