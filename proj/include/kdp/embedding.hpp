#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "kdp/kernels.hpp"
#include "kdp/types.hpp"

namespace kdp {

// Sample of m transitions (x_i, a_i, x'_i). Duplicate next-states are
// kept as-is; merging identical x' amounts to summing their weights and
// happens implicitly in every expectation.
struct TransitionSample {
  Mat states;       // m x d
  Vec actions;      // m
  Mat next_states;  // m x d

  Index size() const { return states.rows(); }
  Index dim() const { return states.cols(); }
  void validate() const;
};

struct IncompleteCholeskyResult {
  Mat r;                      // l x m factor, K ~= r^T r
  std::vector<Index> pivots;  // l training indices, pivot order
  double residual_trace;      // trace of K - r^T r at termination
  bool degenerate = false;    // rank 0 (tol >= trace(K))

  Index rank() const { return r.rows(); }
};

// Pivoted partial Cholesky of the state-action Gram matrix. Stops when
// the residual trace drops to tol or the rank reaches max_rank.
IncompleteCholeskyResult incomplete_cholesky(const Mat& states,
                                             const Vec& actions,
                                             const StateActionKernelConfig& cfg,
                                             double tol, Index max_rank);

class ConditionalEmbedding;

// Precomputed machinery for evaluating normalized expectations at a
// fixed set of query states, repeatedly for changing value vectors.
// Grid mode pairs every query state with every action in a list; policy
// mode pairs query state i with its own action.
class QueryPlan {
 public:
  // E(i, a) = normalized expectation of f at (state i, action a);
  // policy-mode result has one column. Throws UndefinedQueryError when a
  // query has all-zero raw weights.
  Mat expect_all(const Vec& f) const;

  Index num_queries() const { return norms_.rows(); }
  Index num_actions() const { return norms_.cols(); }
  const Mat& weight_l1_norms() const { return norms_; }

 private:
  friend class ConditionalEmbedding;
  QueryPlan() = default;

  const ConditionalEmbedding* emb_ = nullptr;
  bool policy_mode_ = false;
  Mat norms_;  // n x A (A = 1 in policy mode)
  // dense
  Mat sq_;                                   // m x n state cross-kernel
  Mat action_cols_;                          // m x A action-kernel factors
  std::vector<std::vector<Index>> delta_idx_;  // per action, nonzero rows
  bool delta_fast_ = false;
  Mat kq_;  // m x n, policy mode only
  // sparse
  std::vector<Mat> h_;  // per action (or single), l x n
};

// The fitted conditional-distribution embedding: evaluates the ridge
// weight vector alpha(x,a) = W k(x,a) with W = (K + lambda m I)^{-1},
// its L1-normalized variant, and expectations of functions known at the
// sampled next-states. The sparse variant stores an incomplete-Cholesky
// factor R instead of W and applies the rank-l inversion identity.
class ConditionalEmbedding {
 public:
  static ConditionalEmbedding fit(const TransitionSample& sample,
                                  const StateActionKernelConfig& k_cfg,
                                  const StateKernelConfig& l_cfg,
                                  double lambda);

  static ConditionalEmbedding fit_sparse(const TransitionSample& sample,
                                         const StateActionKernelConfig& k_cfg,
                                         const StateKernelConfig& l_cfg,
                                         double lambda, double tol,
                                         Index max_rank);

  Vec raw_weights(const Vec& x, double a) const;
  Vec normalized_weights(const Vec& x, double a) const;

  // Normalized expectation (planner default): sum_i alpha_hat_i * f_i.
  double expect(const Vec& x, double a, const Vec& f) const;
  // Unnormalized expectation: sum_i alpha_i * f_i.
  double expect_raw(const Vec& x, double a, const Vec& f) const;

  QueryPlan plan_action_grid(const Mat& states,
                             const std::vector<double>& actions) const;
  QueryPlan plan_policy(const Mat& states, const Vec& action_per_row) const;

  // Sparse fast path: project f once, then each raw expectation costs
  // O(l^2) independent of m.
  Vec project_values(const Vec& f) const;
  double expect_raw_projected(const Vec& x, double a, const Vec& proj) const;

  const TransitionSample& sample() const { return sample_; }
  const StateActionKernelConfig& pair_kernel() const { return k_cfg_; }
  const StateKernelConfig& state_kernel() const { return l_cfg_; }
  double lambda() const { return lambda_; }
  bool is_sparse() const { return sparse_; }
  Index rank() const { return sparse_ ? icd_.rank() : sample_.size(); }
  const Mat& weight_matrix() const;
  const IncompleteCholeskyResult& factor() const;

 private:
  friend class QueryPlan;
  ConditionalEmbedding() = default;

  // m-vector of kernel evaluations of training pairs against (x, a).
  Vec kernel_column(const Vec& x, double a) const;
  Vec raw_weights_from_column(const Vec& k) const;
  // sparse: l-vector r_q with query column approximated as R^T r_q.
  Vec pivot_column(const Vec& x, double a) const;

  TransitionSample sample_;
  StateActionKernelConfig k_cfg_;
  StateKernelConfig l_cfg_;
  double lambda_ = 0.0;
  bool sparse_ = false;
  Mat w_;  // dense path
  IncompleteCholeskyResult icd_;
  Mat rp_;                   // l x l upper-triangular pivot block of R
  Eigen::LLT<Mat> cap_llt_;  // lambda m I + R R^T
};

struct CvResult {
  double lambda = 0.0;
  std::vector<double> grid;    // ascending
  std::vector<double> losses;  // aligned with grid
};

// K-fold cross-validation of the ridge parameter over the vector-valued
// regression loss, using raw weights on each held-out fold. Ties break
// toward the larger lambda.
CvResult cv_lambda(const TransitionSample& sample,
                   const StateActionKernelConfig& k_cfg,
                   const StateKernelConfig& l_cfg,
                   const std::vector<double>& lambda_grid, int folds,
                   std::uint64_t rng_seed);

std::vector<double> default_lambda_grid(int count = 10, double lo = 1e-6,
                                        double hi = 1.0);

}  // namespace kdp
