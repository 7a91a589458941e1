#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "kdp/embedding.hpp"
#include "kdp/types.hpp"

namespace kdp {

struct PlannerConfig {
  double gamma = 0.9;
  int max_iters = 1000;
  double threshold = 1e-6;
  std::vector<double> actions;

  void validate() const;
};

using RewardFn = std::function<double(const Vec& x, double a)>;
using PolicyFn = std::function<double(const Vec& x)>;

// Value vector over the m sampled next-states plus everything needed to
// extrapolate V-hat at arbitrary states: the embedding, the reward
// function, the discount and (for policy evaluation) the policy.
class ValueEstimate {
 public:
  const Vec& values() const { return values_; }
  int iterations() const { return iterations_; }
  double final_error() const { return final_error_; }
  const std::vector<double>& sweep_residuals() const { return residuals_; }
  const std::shared_ptr<const ConditionalEmbedding>& embedding() const {
    return emb_;
  }
  const PlannerConfig& config() const { return cfg_; }
  const RewardFn& reward() const { return reward_; }
  bool maximizing() const { return maximize_; }

  // V-hat(x): max_a r(x,a) + gamma E[(x,a)][V] after value iteration,
  // r(x,pi(x)) + gamma E[(x,pi(x))][V] after policy evaluation.
  double value_at(const Vec& x) const;
  Vec values_at(const Mat& states) const;

 private:
  friend ValueEstimate evaluate_policy(
      std::shared_ptr<const ConditionalEmbedding>, const PolicyFn&,
      const RewardFn&, const PlannerConfig&);
  friend ValueEstimate value_iteration(
      std::shared_ptr<const ConditionalEmbedding>, const RewardFn&,
      const PlannerConfig&);

  std::shared_ptr<const ConditionalEmbedding> emb_;
  RewardFn reward_;
  PolicyFn policy_;
  PlannerConfig cfg_;
  bool maximize_ = true;
  Vec values_;
  int iterations_ = 0;
  double final_error_ = 0.0;
  std::vector<double> residuals_;
};

// Iterated one-policy sweep over the sampled next-states from V = 0.
ValueEstimate evaluate_policy(std::shared_ptr<const ConditionalEmbedding> emb,
                              const PolicyFn& policy, const RewardFn& reward,
                              const PlannerConfig& cfg);

// Approximate value iteration: iterates the empirical Bellman sweep
// V'(x'_i) = max_a r(x'_i,a) + gamma E[(x'_i,a)][V] from V = 0.
ValueEstimate value_iteration(std::shared_ptr<const ConditionalEmbedding> emb,
                              const RewardFn& reward,
                              const PlannerConfig& cfg);

// Q-hat(x,a) = r(x,a) + gamma E[(x,a)][V].
double q_value(const ValueEstimate& est, const Vec& x, double a);

class GreedyPolicy {
 public:
  explicit GreedyPolicy(std::shared_ptr<const ValueEstimate> est)
      : est_(std::move(est)) {}

  // Argmax over the finite action list, ties to the lowest index.
  double action_at(const Vec& x) const;
  int action_index_at(const Vec& x) const;
  // Batched variant; returns indices into the action list.
  Eigen::VectorXi action_indices(const Mat& states) const;

  const ValueEstimate& estimate() const { return *est_; }

 private:
  std::shared_ptr<const ValueEstimate> est_;
};

// Max over random value-vector pairs of the one-sweep sup-norm ratio
// ||B V - B U||_inf / ||V - U||_inf; at most gamma for the normalized
// estimator.
double contraction_check(std::shared_ptr<const ConditionalEmbedding> emb,
                         const RewardFn& reward, const PlannerConfig& cfg,
                         int trials, std::uint64_t rng_seed);

// Per-sweep sup-norm residuals e_k = ||V_{k+1} - V_k||_inf.
std::vector<double> convergence_trace(const ValueEstimate& est);

}  // namespace kdp
