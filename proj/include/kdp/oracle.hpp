#pragma once

#include <utility>
#include <vector>

#include "kdp/types.hpp"

namespace kdp {

// Explicit finite MDP: per-action row-stochastic transition matrices,
// reward table and discount. Ground truth for V*, V^pi, Q*.
struct TabularMDP {
  std::vector<Mat> transitions;  // per action, n x n, rows sum to 1
  Mat rewards;                   // n x |A|
  double gamma = 0.9;

  Index num_states() const { return rewards.rows(); }
  Index num_actions() const { return rewards.cols(); }
  void validate() const;
};

// Finite MDP with deterministic transitions, stored as successor
// indices. Used for fine-grid references where a dense tensor would not
// fit in memory.
struct DeterministicMDP {
  Eigen::MatrixXi successors;  // n x |A|
  Mat rewards;                 // n x |A|
  double gamma = 0.9;

  Index num_states() const { return rewards.rows(); }
  Index num_actions() const { return rewards.cols(); }
  void validate() const;
  TabularMDP to_tabular() const;
};

struct ExactViResult {
  Vec values;              // V*
  Eigen::VectorXi policy;  // greedy on V*, ties to lowest action index
  int iterations = 0;
};

// Exact Bellman iteration until the sweep residual guarantees
// ||V - V*||_inf <= tol.
ExactViResult exact_value_iteration(const TabularMDP& mdp, double tol);
ExactViResult exact_value_iteration(const DeterministicMDP& mdp, double tol);

// Direct solve of (I - gamma P^pi) V = r^pi.
Vec exact_policy_value(const TabularMDP& mdp, const Eigen::VectorXi& policy);
Vec exact_policy_value(const DeterministicMDP& mdp,
                       const Eigen::VectorXi& policy);

// Q*(x,a) = r(x,a) + gamma E_{P(.|x,a)}[V*].
Mat q_star(const TabularMDP& mdp, const Vec& v_star);

// Both sides of ||V^{pi_Q} - V*||_inf <= 2/(1-gamma) ||Q* - Q||_inf,
// computed exactly.
std::pair<double, double> greedy_suboptimality_bound(const TabularMDP& mdp, const Mat& q);

// Greedy policy of a Q table, ties to lowest action index.
Eigen::VectorXi greedy_policy_of(const Mat& q);

}  // namespace kdp
