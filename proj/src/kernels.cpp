#include "kdp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kdp {

void StateKernelConfig::validate(Index dim) const {
  if (!(bandwidth > 0.0)) {
    throw std::invalid_argument("state kernel bandwidth must be positive");
  }
  for (int p : periodic_dims) {
    if (p < 0 || (dim >= 0 && p >= dim)) {
      throw std::invalid_argument("periodic dimension index out of range");
    }
  }
}

void StateActionKernelConfig::validate(Index dim) const {
  state.validate(dim);
  if (action_kind == ActionKernelKind::kGaussian && !(action_bandwidth > 0.0)) {
    throw std::invalid_argument("action kernel bandwidth must be positive");
  }
}

double state_sqdist(const Vec& x, const Vec& y,
                    const std::vector<int>& periodic_dims) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("state dimension mismatch");
  }
  if (periodic_dims.empty()) {
    return (x - y).squaredNorm();
  }
  double s = (x - y).squaredNorm();
  for (int p : periodic_dims) {
    // Chordal squared distance on the unit circle. A Gaussian of the
    // wrapped difference is not positive definite, which lets gram
    // matrices go indefinite at wide bandwidths; the chordal form is the
    // Gaussian of the (cos, sin) embedding and stays positive definite
    // while matching raw^2 for small gaps.
    double raw = x[p] - y[p];
    s += (2.0 - 2.0 * std::cos(raw)) - raw * raw;
  }
  return s;
}

double eval_state_kernel(const Vec& x, const Vec& y,
                         const StateKernelConfig& cfg) {
  cfg.validate(x.size());
  double sq = state_sqdist(x, y, cfg.periodic_dims);
  return std::exp(-sq / (2.0 * cfg.bandwidth * cfg.bandwidth));
}

double eval_action_kernel(double a, double b,
                          const StateActionKernelConfig& cfg) {
  if (cfg.action_kind == ActionKernelKind::kDelta) {
    return a == b ? 1.0 : 0.0;
  }
  double d = a - b;
  return std::exp(-d * d / (2.0 * cfg.action_bandwidth * cfg.action_bandwidth));
}

double eval_state_action_kernel(const Vec& x, double a, const Vec& y, double b,
                                const StateActionKernelConfig& cfg) {
  cfg.validate(x.size());
  return eval_state_kernel(x, y, cfg.state) * eval_action_kernel(a, b, cfg);
}

GramMatrix gram(const Mat& states, const Vec& actions,
                const StateActionKernelConfig& cfg) {
  const Index m = states.rows();
  if (m < 1 || actions.size() != m) {
    throw std::invalid_argument("gram: need m >= 1 points with actions");
  }
  cfg.validate(states.cols());
  GramMatrix g;
  g.states = states;
  g.actions = actions;
  g.k = pair_cross_gram(states, actions, states, actions, cfg);
  // Entries are computed independently; enforce exact symmetry by
  // mirroring the lower triangle.
  g.k.triangularView<Eigen::StrictlyUpper>() = g.k.transpose();
  g.k.diagonal().setOnes();  // K(z,z) = 1 for the product convention
  return g;
}

Mat state_cross_gram(const Mat& a, const Mat& b, const StateKernelConfig& cfg) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("state dimension mismatch");
  }
  cfg.validate(a.cols());
  const double inv = -1.0 / (2.0 * cfg.bandwidth * cfg.bandwidth);
  Mat sq(a.rows(), b.rows());
  if (cfg.periodic_dims.empty()) {
    Vec an = a.rowwise().squaredNorm();
    Vec bn = b.rowwise().squaredNorm();
    sq = an.replicate(1, b.rows()) + bn.transpose().replicate(a.rows(), 1) -
         2.0 * a * b.transpose();
  } else {
    for (Index j = 0; j < b.rows(); ++j) {
      Vec bj = b.row(j);
      for (Index i = 0; i < a.rows(); ++i) {
        sq(i, j) = state_sqdist(a.row(i), bj, cfg.periodic_dims);
      }
    }
  }
  // The vectorized expansion can leave small negative residues.
  sq = sq.cwiseMax(0.0);
  return (sq * inv).array().exp().matrix();
}

Mat pair_cross_gram(const Mat& train_states, const Vec& train_actions,
                    const Mat& query_states, const Vec& query_actions,
                    const StateActionKernelConfig& cfg) {
  Mat k = state_cross_gram(train_states, query_states, cfg.state);
  if (cfg.action_kind == ActionKernelKind::kDelta) {
    for (Index j = 0; j < k.cols(); ++j) {
      for (Index i = 0; i < k.rows(); ++i) {
        if (train_actions[i] != query_actions[j]) k(i, j) = 0.0;
      }
    }
  } else {
    const double inv =
        -1.0 / (2.0 * cfg.action_bandwidth * cfg.action_bandwidth);
    for (Index j = 0; j < k.cols(); ++j) {
      for (Index i = 0; i < k.rows(); ++i) {
        double d = train_actions[i] - query_actions[j];
        k(i, j) *= std::exp(d * d * inv);
      }
    }
  }
  return k;
}

double knn_bandwidth(const Mat& points, double fraction,
                     const std::vector<int>& periodic_dims) {
  const Index m = points.rows();
  if (m < 2) {
    throw std::invalid_argument("knn_bandwidth: need at least 2 points");
  }
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw std::invalid_argument("knn_bandwidth: fraction must be in (0,1]");
  }
  Index k = static_cast<Index>(std::ceil(fraction * static_cast<double>(m)));
  k = std::min(k, m - 1);
  double total = 0.0;
  std::vector<double> dists(m - 1);
  for (Index i = 0; i < m; ++i) {
    Index n = 0;
    for (Index j = 0; j < m; ++j) {
      if (j == i) continue;
      dists[n++] =
          std::sqrt(state_sqdist(points.row(i), points.row(j), periodic_dims));
    }
    std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
    total += dists[k - 1];
  }
  double bw = total / static_cast<double>(m);
  if (!(bw > 0.0)) {
    throw DegenerateDataError(
        "knn_bandwidth: zero neighbour distance, point set is degenerate");
  }
  return bw;
}

double knn_bandwidth(const Vec& values, double fraction) {
  Mat pts = values;
  return knn_bandwidth(pts, fraction);
}

}  // namespace kdp
