#include "kdp/oracle.hpp"

#include <cmath>
#include <limits>

namespace kdp {

void TabularMDP::validate() const {
  const Index n = num_states();
  const Index na = num_actions();
  if (n < 1 || na < 1) {
    throw std::invalid_argument("tabular mdp: need >= 1 state and action");
  }
  if (!(gamma >= 0.0) || gamma >= 1.0) {
    throw std::invalid_argument("tabular mdp: gamma must be in [0,1)");
  }
  if (static_cast<Index>(transitions.size()) != na) {
    throw std::invalid_argument("tabular mdp: one transition matrix per action");
  }
  for (const Mat& p : transitions) {
    if (p.rows() != n || p.cols() != n) {
      throw std::invalid_argument("tabular mdp: transition matrix shape");
    }
    if (p.minCoeff() < 0.0) {
      throw std::invalid_argument("tabular mdp: negative transition probability");
    }
    if (((p.rowwise().sum().array() - 1.0).abs() > 1e-12).any()) {
      throw std::invalid_argument("tabular mdp: transition rows must sum to 1");
    }
  }
}

void DeterministicMDP::validate() const {
  const Index n = num_states();
  const Index na = num_actions();
  if (n < 1 || na < 1) {
    throw std::invalid_argument("deterministic mdp: need >= 1 state and action");
  }
  if (!(gamma >= 0.0) || gamma >= 1.0) {
    throw std::invalid_argument("deterministic mdp: gamma must be in [0,1)");
  }
  if (successors.rows() != n || successors.cols() != na) {
    throw std::invalid_argument("deterministic mdp: successor table shape");
  }
  if (successors.minCoeff() < 0 || successors.maxCoeff() >= n) {
    throw std::invalid_argument("deterministic mdp: successor out of range");
  }
}

TabularMDP DeterministicMDP::to_tabular() const {
  validate();
  TabularMDP mdp;
  mdp.gamma = gamma;
  mdp.rewards = rewards;
  mdp.transitions.assign(num_actions(), Mat::Zero(num_states(), num_states()));
  for (Index a = 0; a < num_actions(); ++a) {
    for (Index x = 0; x < num_states(); ++x) {
      mdp.transitions[a](x, successors(x, a)) = 1.0;
    }
  }
  return mdp;
}

namespace {

Eigen::VectorXi greedy_rows(const Mat& q) {
  Eigen::VectorXi policy(q.rows());
  for (Index x = 0; x < q.rows(); ++x) {
    int best = 0;
    double best_q = q(x, 0);
    for (Index a = 1; a < q.cols(); ++a) {
      if (q(x, a) > best_q) {
        best_q = q(x, a);
        best = static_cast<int>(a);
      }
    }
    policy[x] = best;
  }
  return policy;
}

// Residual threshold converting the sweep residual into a true-error
// guarantee ||V - V*||_inf <= tol.
double stop_residual(double tol, double gamma) {
  if (gamma == 0.0) return std::numeric_limits<double>::infinity();
  return tol * (1.0 - gamma) / gamma;
}

template <typename SweepFn>
ExactViResult iterate_to_fixpoint(Index n, double gamma, double tol,
                                  SweepFn&& sweep_q) {
  ExactViResult out;
  out.values = Vec::Zero(n);
  const double stop = stop_residual(tol, gamma);
  Mat q;
  while (true) {
    q = sweep_q(out.values);
    Vec next = q.rowwise().maxCoeff();
    double err = (next - out.values).lpNorm<Eigen::Infinity>();
    out.values = next;
    ++out.iterations;
    if (err <= stop || gamma == 0.0) break;
  }
  out.policy = greedy_rows(q);
  return out;
}

}  // namespace

ExactViResult exact_value_iteration(const TabularMDP& mdp, double tol) {
  mdp.validate();
  if (!(tol > 0.0)) {
    throw std::invalid_argument("exact_value_iteration: tol must be positive");
  }
  return iterate_to_fixpoint(
      mdp.num_states(), mdp.gamma, tol, [&](const Vec& v) {
        Mat q = mdp.rewards;
        for (Index a = 0; a < mdp.num_actions(); ++a) {
          q.col(a) += mdp.gamma * (mdp.transitions[a] * v);
        }
        return q;
      });
}

ExactViResult exact_value_iteration(const DeterministicMDP& mdp, double tol) {
  mdp.validate();
  if (!(tol > 0.0)) {
    throw std::invalid_argument("exact_value_iteration: tol must be positive");
  }
  return iterate_to_fixpoint(
      mdp.num_states(), mdp.gamma, tol, [&](const Vec& v) {
        Mat q = mdp.rewards;
        for (Index a = 0; a < mdp.num_actions(); ++a) {
          for (Index x = 0; x < mdp.num_states(); ++x) {
            q(x, a) += mdp.gamma * v[mdp.successors(x, a)];
          }
        }
        return q;
      });
}

namespace {

Vec solve_policy_system(const Mat& p_pi, const Vec& r_pi, double gamma) {
  const Index n = r_pi.size();
  Mat a = Mat::Identity(n, n) - gamma * p_pi;
  return a.partialPivLu().solve(r_pi);
}

}  // namespace

Vec exact_policy_value(const TabularMDP& mdp, const Eigen::VectorXi& policy) {
  mdp.validate();
  const Index n = mdp.num_states();
  if (policy.size() != n || policy.minCoeff() < 0 ||
      policy.maxCoeff() >= mdp.num_actions()) {
    throw std::invalid_argument("exact_policy_value: invalid policy table");
  }
  Mat p_pi(n, n);
  Vec r_pi(n);
  for (Index x = 0; x < n; ++x) {
    p_pi.row(x) = mdp.transitions[policy[x]].row(x);
    r_pi[x] = mdp.rewards(x, policy[x]);
  }
  return solve_policy_system(p_pi, r_pi, mdp.gamma);
}

Vec exact_policy_value(const DeterministicMDP& mdp,
                       const Eigen::VectorXi& policy) {
  mdp.validate();
  const Index n = mdp.num_states();
  if (policy.size() != n || policy.minCoeff() < 0 ||
      policy.maxCoeff() >= mdp.num_actions()) {
    throw std::invalid_argument("exact_policy_value: invalid policy table");
  }
  Mat p_pi = Mat::Zero(n, n);
  Vec r_pi(n);
  for (Index x = 0; x < n; ++x) {
    p_pi(x, mdp.successors(x, policy[x])) = 1.0;
    r_pi[x] = mdp.rewards(x, policy[x]);
  }
  return solve_policy_system(p_pi, r_pi, mdp.gamma);
}

Mat q_star(const TabularMDP& mdp, const Vec& v_star) {
  mdp.validate();
  if (v_star.size() != mdp.num_states()) {
    throw std::invalid_argument("q_star: value vector size mismatch");
  }
  Mat q = mdp.rewards;
  for (Index a = 0; a < mdp.num_actions(); ++a) {
    q.col(a) += mdp.gamma * (mdp.transitions[a] * v_star);
  }
  return q;
}

Eigen::VectorXi greedy_policy_of(const Mat& q) {
  if (q.rows() < 1 || q.cols() < 1) {
    throw std::invalid_argument("greedy_policy_of: empty Q table");
  }
  return greedy_rows(q);
}

std::pair<double, double> greedy_suboptimality_bound(const TabularMDP& mdp, const Mat& q) {
  mdp.validate();
  if (q.rows() != mdp.num_states() || q.cols() != mdp.num_actions()) {
    throw std::invalid_argument("greedy_suboptimality_bound: Q table shape mismatch");
  }
  ExactViResult star = exact_value_iteration(mdp, 1e-12);
  Mat qs = q_star(mdp, star.values);
  Vec v_pi = exact_policy_value(mdp, greedy_policy_of(q));
  double lhs = (v_pi - star.values).lpNorm<Eigen::Infinity>();
  double rhs =
      2.0 / (1.0 - mdp.gamma) * (qs - q).lpNorm<Eigen::Infinity>();
  return {lhs, rhs};
}

}  // namespace kdp
