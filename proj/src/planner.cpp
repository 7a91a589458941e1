#include "kdp/planner.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace kdp {

void PlannerConfig::validate() const {
  if (!(gamma >= 0.0) || gamma >= 1.0) {
    throw std::invalid_argument("planner: gamma must be in [0,1)");
  }
  if (max_iters < 1) {
    throw std::invalid_argument("planner: max_iters must be >= 1");
  }
  if (!(threshold > 0.0)) {
    throw std::invalid_argument("planner: threshold must be positive");
  }
  if (actions.empty()) {
    throw std::invalid_argument("planner: action set must be non-empty");
  }
}

namespace {

Mat sweep_rewards(const TransitionSample& sample, const RewardFn& reward,
                  const std::vector<double>& actions) {
  const Index m = sample.size();
  Mat r(m, static_cast<Index>(actions.size()));
  for (Index ai = 0; ai < r.cols(); ++ai) {
    for (Index i = 0; i < m; ++i) {
      r(i, ai) = reward(sample.next_states.row(i), actions[ai]);
    }
  }
  return r;
}

// Synchronous sweep loop from V = 0. A sweep residual e bounds the next
// residual by gamma * e, so iteration stops once gamma * e <= threshold.
void run_sweeps(const QueryPlan& plan, const Mat& rewards, double gamma,
                int max_iters, double threshold, Vec& v,
                std::vector<double>& residuals, int& iterations,
                double& final_error) {
  const Index m = rewards.rows();
  v = Vec::Zero(m);
  iterations = 0;
  final_error = std::numeric_limits<double>::infinity();
  while (iterations < max_iters) {
    Vec next(m);
    if (gamma == 0.0) {
      next = rewards.rowwise().maxCoeff();
    } else {
      Mat e = plan.expect_all(v);
      next = (rewards + gamma * e).rowwise().maxCoeff();
    }
    final_error = (next - v).lpNorm<Eigen::Infinity>();
    residuals.push_back(final_error);
    v = next;
    ++iterations;
    if (final_error <= threshold || gamma * final_error <= threshold) break;
  }
}

}  // namespace

ValueEstimate evaluate_policy(std::shared_ptr<const ConditionalEmbedding> emb,
                              const PolicyFn& policy, const RewardFn& reward,
                              const PlannerConfig& cfg) {
  cfg.validate();
  const TransitionSample& sample = emb->sample();
  const Index m = sample.size();

  Vec policy_actions(m);
  Mat rewards(m, 1);
  for (Index i = 0; i < m; ++i) {
    Vec x = sample.next_states.row(i);
    policy_actions[i] = policy(x);
    rewards(i, 0) = reward(x, policy_actions[i]);
  }

  ValueEstimate est;
  est.emb_ = emb;
  est.reward_ = reward;
  est.policy_ = policy;
  est.cfg_ = cfg;
  est.maximize_ = false;
  try {
    QueryPlan plan = emb->plan_policy(sample.next_states, policy_actions);
    run_sweeps(plan, rewards, cfg.gamma, cfg.max_iters, cfg.threshold,
               est.values_, est.residuals_, est.iterations_, est.final_error_);
  } catch (const UndefinedQueryError& e) {
    throw UndefinedQueryError(
        "evaluate_policy: embedding undefined at sampled next-state index " +
            std::to_string(e.sample_index()) + " under the given policy",
        e.sample_index());
  }
  return est;
}

ValueEstimate value_iteration(std::shared_ptr<const ConditionalEmbedding> emb,
                              const RewardFn& reward,
                              const PlannerConfig& cfg) {
  cfg.validate();
  const TransitionSample& sample = emb->sample();

  ValueEstimate est;
  est.emb_ = emb;
  est.reward_ = reward;
  est.cfg_ = cfg;
  est.maximize_ = true;
  Mat rewards = sweep_rewards(sample, reward, cfg.actions);
  try {
    QueryPlan plan = emb->plan_action_grid(sample.next_states, cfg.actions);
    run_sweeps(plan, rewards, cfg.gamma, cfg.max_iters, cfg.threshold,
               est.values_, est.residuals_, est.iterations_, est.final_error_);
  } catch (const UndefinedQueryError& e) {
    throw UndefinedQueryError(
        "value_iteration: embedding undefined at sampled next-state index " +
            std::to_string(e.sample_index()),
        e.sample_index());
  }
  return est;
}

double ValueEstimate::value_at(const Vec& x) const {
  if (maximize_) {
    double best = -std::numeric_limits<double>::infinity();
    for (double a : cfg_.actions) {
      double q = reward_(x, a);
      if (cfg_.gamma > 0.0) q += cfg_.gamma * emb_->expect(x, a, values_);
      best = std::max(best, q);
    }
    return best;
  }
  double a = policy_(x);
  double q = reward_(x, a);
  if (cfg_.gamma > 0.0) q += cfg_.gamma * emb_->expect(x, a, values_);
  return q;
}

Vec ValueEstimate::values_at(const Mat& states) const {
  const Index n = states.rows();
  if (maximize_) {
    QueryPlan plan = emb_->plan_action_grid(
        states, cfg_.actions);
    Mat e = cfg_.gamma > 0.0 ? plan.expect_all(values_)
                             : Mat::Zero(n, Index(cfg_.actions.size()));
    Vec out(n);
    for (Index i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (Index ai = 0; ai < e.cols(); ++ai) {
        double q = reward_(states.row(i), cfg_.actions[ai]) +
                   cfg_.gamma * e(i, ai);
        best = std::max(best, q);
      }
      out[i] = best;
    }
    return out;
  }
  Vec acts(n);
  for (Index i = 0; i < n; ++i) acts[i] = policy_(states.row(i));
  QueryPlan plan = emb_->plan_policy(states, acts);
  Vec e = cfg_.gamma > 0.0 ? Vec(plan.expect_all(values_).col(0))
                           : Vec(Vec::Zero(n));
  Vec out(n);
  for (Index i = 0; i < n; ++i) {
    out[i] = reward_(states.row(i), acts[i]) + cfg_.gamma * e[i];
  }
  return out;
}

double q_value(const ValueEstimate& est, const Vec& x, double a) {
  double q = est.reward()(x, a);
  if (est.config().gamma > 0.0) {
    q += est.config().gamma * est.embedding()->expect(x, a, est.values());
  }
  return q;
}

int GreedyPolicy::action_index_at(const Vec& x) const {
  const auto& actions = est_->config().actions;
  int best = 0;
  double best_q = -std::numeric_limits<double>::infinity();
  for (std::size_t ai = 0; ai < actions.size(); ++ai) {
    double q = q_value(*est_, x, actions[ai]);
    if (q > best_q) {
      best_q = q;
      best = static_cast<int>(ai);
    }
  }
  return best;
}

double GreedyPolicy::action_at(const Vec& x) const {
  return est_->config().actions[action_index_at(x)];
}

Eigen::VectorXi GreedyPolicy::action_indices(const Mat& states) const {
  const auto& cfg = est_->config();
  QueryPlan plan = est_->embedding()->plan_action_grid(states, cfg.actions);
  const Index n = states.rows();
  Mat e = cfg.gamma > 0.0 ? plan.expect_all(est_->values())
                          : Mat::Zero(n, Index(cfg.actions.size()));
  Eigen::VectorXi out(n);
  for (Index i = 0; i < n; ++i) {
    int best = 0;
    double best_q = -std::numeric_limits<double>::infinity();
    for (Index ai = 0; ai < e.cols(); ++ai) {
      double q =
          est_->reward()(states.row(i), cfg.actions[ai]) + cfg.gamma * e(i, ai);
      if (q > best_q) {
        best_q = q;
        best = static_cast<int>(ai);
      }
    }
    out[i] = best;
  }
  return out;
}

double contraction_check(std::shared_ptr<const ConditionalEmbedding> emb,
                         const RewardFn& reward, const PlannerConfig& cfg,
                         int trials, std::uint64_t rng_seed) {
  cfg.validate();
  if (trials < 1) {
    throw std::invalid_argument("contraction_check: trials must be >= 1");
  }
  const TransitionSample& sample = emb->sample();
  const Index m = sample.size();
  QueryPlan plan = emb->plan_action_grid(sample.next_states, cfg.actions);
  Mat rewards = sweep_rewards(sample, reward, cfg.actions);

  auto apply = [&](const Vec& v) -> Vec {
    return (rewards + cfg.gamma * plan.expect_all(v)).rowwise().maxCoeff();
  };

  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double max_ratio = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    Vec u(m), v(m);
    for (Index i = 0; i < m; ++i) u[i] = unif(rng);
    for (Index i = 0; i < m; ++i) v[i] = unif(rng);
    double denom = (v - u).lpNorm<Eigen::Infinity>();
    if (denom <= 0.0) continue;  // 0/0 pair, contributes nothing
    double num = (apply(v) - apply(u)).lpNorm<Eigen::Infinity>();
    max_ratio = std::max(max_ratio, num / denom);
  }
  return max_ratio;
}

std::vector<double> convergence_trace(const ValueEstimate& est) {
  return est.sweep_residuals();
}

}  // namespace kdp
