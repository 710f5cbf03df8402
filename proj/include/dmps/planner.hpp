#pragma once

// Continuous-action Monte Carlo tree search for recovery planning.
//
// The search maximizes
//     sum_{i<n} gamma^i R(s_i, a_i) + gamma^n Q(s_n, a_n)
// over action sequences a_0..a_n whose every successor is recoverable.
// Nodes are states, edges are sampled actions. Each edge carries the
// environment reward of its transition, a running-mean value estimate
// q_hat and a visit count.

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "dmps/core.hpp"

namespace dmps {

struct PlannerConfig {
  int horizon = 5;        // n: plans hold up to n + 1 actions
  int branching = 10;     // K: actions sampled per expansion
  int iterations = 100;   // I: search iterations after the root expansion
  double ucb_c = 1.4142135623730951;
  double gamma = 0.99;
  int node_budget = -1;   // cap on expand() calls including the root; < 0 = unlimited

  bool operator==(const PlannerConfig&) const = default;
};

void validate(const PlannerConfig& cfg);

using ActionSampler = std::function<std::vector<Action>(Rng&, int k)>;

/// Everything the search needs to know about the system it plans in.
struct PlanningProblem {
  std::function<StepResult(const State&, const Action&)> step;
  std::function<bool(const State&)> recoverable;
  std::function<double(const State&, const Action&)> q;
  ActionSampler sample_actions;
};

/// K independent uniform draws from the box.
ActionSampler uniform_box_sampler(ActionBox box);

/// min(K, |actions|) distinct members of a finite action set, in random order.
ActionSampler finite_set_sampler(std::vector<Action> actions);

class SearchTree {
 public:
  struct Edge {
    Action action;
    double reward = 0.0;  // R(parent, action), cached at creation
    double q_init = 0.0;  // Q(parent, action)
    double q_hat = 0.0;
    int visits = 0;
    int parent = -1;
    int child = -1;
  };
  struct Node {
    State state;
    int depth = 0;
    std::vector<int> edges;
    bool expansion_tried = false;
  };

  explicit SearchTree(State root);

  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const Edge& edge(int id) const { return edges_[static_cast<std::size_t>(id)]; }
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  Edge& edge(int id) { return edges_[static_cast<std::size_t>(id)]; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  static constexpr int root() { return 0; }
  bool is_leaf(int node_id) const { return node(node_id).edges.empty(); }

  int add_edge(int parent, Action action, StepResult outcome, double q);

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
};

/// Samples K actions at `node_id` and adds an edge for every sample whose
/// successor is recoverable, with q_hat = Q(s, a) and one visit. Returns true
/// iff at least one edge was added.
bool expand(int node_id, SearchTree& tree, const PlanningProblem& problem,
            const PlannerConfig& cfg, Rng& rng);

struct SelectedPath {
  std::vector<int> edges;
  int end_node = SearchTree::root();
};

/// Walks from the root along the UCB-maximizing edge
///     q_hat + c * sqrt(ln(sum_b N(s,b)) / N(s,a))
/// until a leaf or the depth limit of horizon + 1 edges. Ties keep the
/// earliest inserted edge.
SelectedPath select_path_ucb(const SearchTree& tree, const PlannerConfig& cfg);

/// Running-mean update of every edge on `path` toward its discounted
/// return-to-go (cached rewards, bootstrapped with `terminal_q_hat`), then
/// one more visit per edge.
void backprop(std::span<const int> path, double terminal_q_hat, SearchTree& tree,
              const PlannerConfig& cfg);

/// Edges of the argmax-q_hat path from the root to a leaf.
std::vector<int> select_path_greedy(const SearchTree& tree);

struct Plan {
  std::vector<Action> actions;
  double objective_value = 0.0;
};

struct SearchStats {
  int expansions = 0;   // expand() calls, successful or not
  int iterations = 0;
};

struct PlanResult {
  std::optional<Plan> plan;  // empty means the bottom result
  SearchStats stats;
  bool is_bottom() const { return !plan.has_value(); }
};

/// One search, driven iteration by iteration.
class MctsSearch {
 public:
  MctsSearch(const State& root, const PlanningProblem& problem, const PlannerConfig& cfg,
             Rng& rng);

  /// Expands the root. False means no recoverable action was sampled there.
  bool start();
  /// One select / expand / backpropagate round.
  void iterate();
  /// Greedy plan from the current tree.
  Plan extract() const;

  const SearchTree& tree() const { return tree_; }
  const SearchStats& stats() const { return stats_; }

 private:
  bool try_expand(int node_id);

  const PlanningProblem& problem_;
  const PlannerConfig& cfg_;
  Rng& rng_;
  SearchTree tree_;
  SearchStats stats_;
};

/// planRec: bottom when the root cannot be expanded (or the node budget is
/// zero), otherwise the greedy plan after `iterations` search rounds.
PlanResult plan_rec(const State& s0, const PlanningProblem& problem, const PlannerConfig& cfg,
                    Rng& rng);

/// Debug dump: one line per edge (parent depth, action, reward, q_hat, visits).
void write_tree(std::ostream& out, const SearchTree& tree);

}  // namespace dmps
