#pragma once

#include <vector>

#include "kdp/types.hpp"

namespace kdp {

// Gaussian kernel on states, exp(-||x-y||^2 / (2 sigma^2)).
// Coordinates listed in periodic_dims use the chordal distance on a
// circle of period 2*pi (pendulum angle), keeping the kernel positive
// definite across the seam.
struct StateKernelConfig {
  double bandwidth = 1.0;
  std::vector<int> periodic_dims;

  void validate(Index dim = -1) const;
};

enum class ActionKernelKind {
  kDelta,     // Kronecker delta on discrete action ids
  kGaussian,  // Gaussian on real-valued actions
};

// Product kernel on (state, action) pairs:
//   K((x,a),(y,b)) = L_state(x,y) * k_A(a,b).
struct StateActionKernelConfig {
  StateKernelConfig state;
  ActionKernelKind action_kind = ActionKernelKind::kDelta;
  double action_bandwidth = 1.0;

  void validate(Index dim = -1) const;
};

// Squared state distance with optional periodic coordinates.
double state_sqdist(const Vec& x, const Vec& y,
                    const std::vector<int>& periodic_dims);

double eval_state_kernel(const Vec& x, const Vec& y,
                         const StateKernelConfig& cfg);

double eval_action_kernel(double a, double b,
                          const StateActionKernelConfig& cfg);

double eval_state_action_kernel(const Vec& x, double a, const Vec& y, double b,
                                const StateActionKernelConfig& cfg);

struct GramMatrix {
  Mat k;        // m x m
  Mat states;   // m x d, the points the matrix was built from
  Vec actions;  // m
};

// Gram matrix of the state-action kernel over m training pairs.
GramMatrix gram(const Mat& states, const Vec& actions,
                const StateActionKernelConfig& cfg);

// Cross state-kernel matrix, entry (i,j) = L(a.row(i), b.row(j)).
Mat state_cross_gram(const Mat& a, const Mat& b, const StateKernelConfig& cfg);

// Cross state-action kernel matrix between training pairs (rows) and
// query pairs (columns).
Mat pair_cross_gram(const Mat& train_states, const Vec& train_actions,
                    const Mat& query_states, const Vec& query_actions,
                    const StateActionKernelConfig& cfg);

// Mean over all points of the distance to their ceil(fraction*m)-th
// nearest neighbour. Zero-distance ties count as neighbours; an all-zero
// result raises DegenerateDataError.
double knn_bandwidth(const Mat& points, double fraction,
                     const std::vector<int>& periodic_dims = {});

// 1-d convenience overload (action grids).
double knn_bandwidth(const Vec& values, double fraction);

}  // namespace kdp
