#include "dmps/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace dmps {

void validate(const PlannerConfig& cfg) {
  if (cfg.horizon < 0) throw ConfigError("planner.horizon must be >= 0");
  if (cfg.branching < 1) throw ConfigError("planner.branching must be >= 1");
  if (cfg.iterations < 0) throw ConfigError("planner.iterations must be >= 0");
  if (!(cfg.ucb_c > 0.0)) throw ConfigError("planner.ucb_c must be positive");
  Discount{cfg.gamma};
}

ActionSampler uniform_box_sampler(ActionBox box) {
  return [box = std::move(box)](Rng& rng, int k) {
    std::vector<Action> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out.push_back(box.sample_uniform(rng));
    return out;
  };
}

ActionSampler finite_set_sampler(std::vector<Action> actions) {
  return [actions = std::move(actions)](Rng& rng, int k) {
    std::vector<std::size_t> order(actions.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Partial Fisher-Yates with an explicit draw so results don't depend on
    // the standard library's shuffle implementation.
    const std::size_t take = std::min(order.size(), static_cast<std::size_t>(std::max(k, 0)));
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    std::vector<Action> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(actions[order[i]]);
    return out;
  };
}

SearchTree::SearchTree(State root) {
  nodes_.push_back(Node{std::move(root), 0, {}, false});
}

int SearchTree::add_edge(int parent, Action action, StepResult outcome, double q) {
  const int child = static_cast<int>(nodes_.size());
  const int id = static_cast<int>(edges_.size());
  const int depth = node(parent).depth + 1;
  nodes_.push_back(Node{std::move(outcome.next), depth, {}, false});
  edges_.push_back(Edge{std::move(action), outcome.reward, q, q, 1, parent, child});
  node(parent).edges.push_back(id);
  return id;
}

bool expand(int node_id, SearchTree& tree, const PlanningProblem& problem,
            const PlannerConfig& cfg, Rng& rng) {
  tree.node(node_id).expansion_tried = true;
  const State s = tree.node(node_id).state;
  bool success = false;
  for (Action& a : problem.sample_actions(rng, cfg.branching)) {
    StepResult outcome = problem.step(s, a);
    if (!problem.recoverable(outcome.next)) continue;
    const double q = problem.q(s, a);
    tree.add_edge(node_id, std::move(a), std::move(outcome), q);
    success = true;
  }
  return success;
}

namespace {

int best_edge(const SearchTree& tree, int node_id) {
  int best = -1;
  double best_value = 0.0;
  for (int e : tree.node(node_id).edges) {
    const double v = tree.edge(e).q_hat;
    if (best < 0 || v > best_value) {
      best = e;
      best_value = v;
    }
  }
  return best;
}

}  // namespace

SelectedPath select_path_ucb(const SearchTree& tree, const PlannerConfig& cfg) {
  SelectedPath path;
  const int max_edges = cfg.horizon + 1;
  int cur = SearchTree::root();
  while (tree.node(cur).depth < max_edges && !tree.is_leaf(cur)) {
    const auto& edges = tree.node(cur).edges;
    double total = 0.0;
    for (int e : edges) total += tree.edge(e).visits;
    const double log_total = std::log(total);
    int chosen = -1;
    double chosen_score = 0.0;
    for (int e : edges) {
      const auto& edge = tree.edge(e);
      const double score = edge.q_hat + cfg.ucb_c * std::sqrt(log_total / edge.visits);
      if (chosen < 0 || score > chosen_score) {
        chosen = e;
        chosen_score = score;
      }
    }
    path.edges.push_back(chosen);
    cur = tree.edge(chosen).child;
  }
  path.end_node = cur;
  return path;
}

void backprop(std::span<const int> path, double terminal_q_hat, SearchTree& tree,
              const PlannerConfig& cfg) {
  // Return-to-go accumulated from the end of the path backwards.
  double ret = terminal_q_hat;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    auto& edge = tree.edge(*it);
    ret = edge.reward + cfg.gamma * ret;
    const double n = edge.visits;
    edge.q_hat = (n * edge.q_hat + ret) / (n + 1.0);
  }
  for (int e : path) tree.edge(e).visits += 1;
}

std::vector<int> select_path_greedy(const SearchTree& tree) {
  std::vector<int> path;
  int cur = SearchTree::root();
  while (!tree.is_leaf(cur)) {
    const int e = best_edge(tree, cur);
    path.push_back(e);
    cur = tree.edge(e).child;
  }
  return path;
}

MctsSearch::MctsSearch(const State& root, const PlanningProblem& problem,
                       const PlannerConfig& cfg, Rng& rng)
    : problem_(problem), cfg_(cfg), rng_(rng), tree_(root) {}

bool MctsSearch::try_expand(int node_id) {
  if (cfg_.node_budget >= 0 && stats_.expansions >= cfg_.node_budget) return false;
  ++stats_.expansions;
  return expand(node_id, tree_, problem_, cfg_, rng_);
}

bool MctsSearch::start() { return try_expand(SearchTree::root()); }

void MctsSearch::iterate() {
  ++stats_.iterations;
  SelectedPath sel = select_path_ucb(tree_, cfg_);
  const int end = sel.end_node;
  const auto& end_node = tree_.node(end);
  if (end_node.depth < cfg_.horizon + 1 && tree_.is_leaf(end) && !end_node.expansion_tried) {
    try_expand(end);
  }
  if (!tree_.is_leaf(end)) {
    const double terminal = tree_.edge(best_edge(tree_, end)).q_hat;
    backprop(sel.edges, terminal, tree_, cfg_);
    return;
  }
  // Depth limit or dead end: the last edge on the path becomes the bootstrap
  // edge. Its estimate is unchanged but it still counts the visit.
  if (sel.edges.empty()) return;
  const int last = sel.edges.back();
  sel.edges.pop_back();
  backprop(sel.edges, tree_.edge(last).q_hat, tree_, cfg_);
  tree_.edge(last).visits += 1;
}

Plan MctsSearch::extract() const {
  Plan plan;
  const auto path = select_path_greedy(tree_);
  std::vector<double> rewards;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const auto& e = tree_.edge(path[i]);
    plan.actions.push_back(e.action);
    if (i + 1 < path.size()) rewards.push_back(e.reward);
  }
  const double terminal = path.empty() ? 0.0 : tree_.edge(path.back()).q_init;
  plan.objective_value = n_step_return(rewards, terminal, cfg_.gamma);
  return plan;
}

PlanResult plan_rec(const State& s0, const PlanningProblem& problem, const PlannerConfig& cfg,
                    Rng& rng) {
  PlanResult result;
  MctsSearch search(s0, problem, cfg, rng);
  if (search.start()) {
    for (int t = 0; t < cfg.iterations; ++t) search.iterate();
    result.plan = search.extract();
  }
  result.stats = search.stats();
  return result;
}

void write_tree(std::ostream& out, const SearchTree& tree) {
  out << "edge,parent_node,child_node,depth,reward,q_init,q_hat,visits,action\n";
  for (std::size_t i = 0; i < tree.edge_count(); ++i) {
    const auto& e = tree.edge(static_cast<int>(i));
    out << i << ',' << e.parent << ',' << e.child << ',' << tree.node(e.child).depth << ','
        << e.reward << ',' << e.q_init << ',' << e.q_hat << ',' << e.visits << ',';
    for (std::size_t k = 0; k < e.action.size(); ++k) out << (k ? " " : "") << e.action[k];
    out << '\n';
  }
}

}  // namespace dmps
