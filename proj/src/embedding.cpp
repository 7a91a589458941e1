#include "kdp/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace kdp {

void TransitionSample::validate() const {
  if (states.rows() < 1) {
    throw std::invalid_argument("transition sample is empty");
  }
  if (actions.size() != states.rows() || next_states.rows() != states.rows() ||
      next_states.cols() != states.cols()) {
    throw std::invalid_argument("transition sample fields have mismatched sizes");
  }
}

IncompleteCholeskyResult incomplete_cholesky(const Mat& states,
                                             const Vec& actions,
                                             const StateActionKernelConfig& cfg,
                                             double tol, Index max_rank) {
  const Index m = states.rows();
  if (m < 1 || actions.size() != m) {
    throw std::invalid_argument("incomplete_cholesky: need m >= 1 points");
  }
  if (!(tol > 0.0)) {
    throw std::invalid_argument("incomplete_cholesky: tol must be positive");
  }
  cfg.validate(states.cols());
  max_rank = std::min(max_rank < 1 ? m : max_rank, m);

  Vec diag = Vec::Ones(m);  // K(z,z) = 1 for the product convention
  double trace = diag.sum();
  IncompleteCholeskyResult out;
  Index cap = std::min<Index>(64, max_rank);
  out.r.resize(cap, m);
  Index rank = 0;
  while (trace > tol && rank < max_rank) {
    Index p;
    diag.maxCoeff(&p);
    if (diag[p] <= 0.0) break;
    if (rank == cap) {
      cap = std::min(cap * 2, max_rank);
      out.r.conservativeResize(cap, m);
    }
    Vec krow = pair_cross_gram(states, actions, states.row(p),
                               actions.segment(p, 1), cfg)
                   .col(0);
    krow[p] = 1.0;
    if (rank > 0) {
      auto top = out.r.topRows(rank);
      krow.noalias() -= top.transpose() * top.col(p);
    }
    out.r.row(rank) = krow / std::sqrt(diag[p]);
    diag -= out.r.row(rank).transpose().cwiseAbs2();
    diag = diag.cwiseMax(0.0);
    diag[p] = 0.0;
    out.pivots.push_back(p);
    ++rank;
    trace = diag.sum();
  }
  out.r.conservativeResize(rank, m);
  out.residual_trace = trace;
  out.degenerate = (rank == 0);
  return out;
}

namespace {

Mat pivot_block(const IncompleteCholeskyResult& icd) {
  const Index l = icd.rank();
  Mat rp(l, l);
  for (Index j = 0; j < l; ++j) rp.col(j) = icd.r.col(icd.pivots[j]);
  return rp;  // upper triangular by pivot elimination order
}

Index norm_block_cols(Index m, Index n) {
  Index bs = static_cast<Index>(8 * 1024 * 1024 / std::max<Index>(m, 1));
  return std::clamp<Index>(bs, 32, std::max<Index>(n, 1));
}

}  // namespace

ConditionalEmbedding ConditionalEmbedding::fit(
    const TransitionSample& sample, const StateActionKernelConfig& k_cfg,
    const StateKernelConfig& l_cfg, double lambda) {
  sample.validate();
  k_cfg.validate(sample.dim());
  l_cfg.validate(sample.dim());
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("fit: lambda must be positive");
  }
  const Index m = sample.size();
  ConditionalEmbedding emb;
  emb.sample_ = sample;
  emb.k_cfg_ = k_cfg;
  emb.l_cfg_ = l_cfg;
  emb.lambda_ = lambda;

  Mat a = gram(sample.states, sample.actions, k_cfg).k;
  a.diagonal().array() += lambda * static_cast<double>(m);
  Eigen::LLT<Mat> llt(a);
  emb.w_ = llt.solve(Mat::Identity(m, m));
  // Inverse of a symmetric matrix; remove the solver's rounding skew.
  emb.w_ = ((emb.w_ + emb.w_.transpose()) * 0.5).eval();
  return emb;
}

ConditionalEmbedding ConditionalEmbedding::fit_sparse(
    const TransitionSample& sample, const StateActionKernelConfig& k_cfg,
    const StateKernelConfig& l_cfg, double lambda, double tol,
    Index max_rank) {
  sample.validate();
  k_cfg.validate(sample.dim());
  l_cfg.validate(sample.dim());
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("fit_sparse: lambda must be positive");
  }
  ConditionalEmbedding emb;
  emb.sample_ = sample;
  emb.k_cfg_ = k_cfg;
  emb.l_cfg_ = l_cfg;
  emb.lambda_ = lambda;
  emb.sparse_ = true;
  emb.icd_ = incomplete_cholesky(sample.states, sample.actions, k_cfg, tol,
                                 max_rank);
  if (emb.icd_.degenerate) {
    throw DegenerateDataError(
        "fit_sparse: incomplete Cholesky returned rank 0 (tol >= trace)");
  }
  emb.rp_ = pivot_block(emb.icd_);
  const Index l = emb.icd_.rank();
  Mat cap = emb.icd_.r * emb.icd_.r.transpose();
  cap.diagonal().array() += lambda * static_cast<double>(sample.size());
  emb.cap_llt_.compute(cap);
  (void)l;
  return emb;
}

const Mat& ConditionalEmbedding::weight_matrix() const {
  if (sparse_) {
    throw std::logic_error("weight_matrix: sparse embedding stores a factor");
  }
  return w_;
}

const IncompleteCholeskyResult& ConditionalEmbedding::factor() const {
  if (!sparse_) {
    throw std::logic_error("factor: dense embedding stores W");
  }
  return icd_;
}

Vec ConditionalEmbedding::kernel_column(const Vec& x, double a) const {
  Vec av(1);
  av[0] = a;
  return pair_cross_gram(sample_.states, sample_.actions, x.transpose(), av,
                         k_cfg_)
      .col(0);
}

Vec ConditionalEmbedding::pivot_column(const Vec& x, double a) const {
  const Index l = icd_.rank();
  Vec kp(l);
  for (Index j = 0; j < l; ++j) {
    Index p = icd_.pivots[j];
    kp[j] = eval_state_action_kernel(sample_.states.row(p).transpose(),
                                     sample_.actions[p], x, a, k_cfg_);
  }
  return rp_.transpose().triangularView<Eigen::Lower>().solve(kp);
}

Vec ConditionalEmbedding::raw_weights_from_column(const Vec& k) const {
  return w_ * k;
}

Vec ConditionalEmbedding::raw_weights(const Vec& x, double a) const {
  if (x.size() != sample_.dim()) {
    throw std::invalid_argument("raw_weights: state dimension mismatch");
  }
  if (sparse_) {
    Vec rq = pivot_column(x, a);
    return icd_.r.transpose() * cap_llt_.solve(rq);
  }
  return raw_weights_from_column(kernel_column(x, a));
}

Vec ConditionalEmbedding::normalized_weights(const Vec& x, double a) const {
  Vec alpha = raw_weights(x, a);
  double norm = alpha.lpNorm<1>();
  if (!(norm > 0.0)) {
    throw UndefinedQueryError(
        "normalized_weights: all raw weights are zero at the query");
  }
  return alpha / norm;
}

double ConditionalEmbedding::expect(const Vec& x, double a,
                                    const Vec& f) const {
  if (f.size() != sample_.size()) {
    throw std::invalid_argument("expect: f must have one value per sample");
  }
  return normalized_weights(x, a).dot(f);
}

double ConditionalEmbedding::expect_raw(const Vec& x, double a,
                                        const Vec& f) const {
  if (f.size() != sample_.size()) {
    throw std::invalid_argument("expect_raw: f must have one value per sample");
  }
  return raw_weights(x, a).dot(f);
}

Vec ConditionalEmbedding::project_values(const Vec& f) const {
  if (!sparse_) {
    throw std::logic_error("project_values: dense embedding has no factor");
  }
  return icd_.r * f;
}

double ConditionalEmbedding::expect_raw_projected(const Vec& x, double a,
                                                  const Vec& proj) const {
  Vec rq = pivot_column(x, a);
  return cap_llt_.solve(rq).dot(proj);
}

QueryPlan ConditionalEmbedding::plan_action_grid(
    const Mat& states, const std::vector<double>& actions) const {
  if (states.cols() != sample_.dim()) {
    throw std::invalid_argument("plan_action_grid: state dimension mismatch");
  }
  if (actions.empty()) {
    throw std::invalid_argument("plan_action_grid: empty action list");
  }
  const Index m = sample_.size();
  const Index n = states.rows();
  const Index na = static_cast<Index>(actions.size());

  QueryPlan plan;
  plan.emb_ = this;
  plan.norms_.resize(n, na);

  if (sparse_) {
    const Index l = icd_.rank();
    Mat pivot_states(l, sample_.dim());
    Vec pivot_actions(l);
    for (Index j = 0; j < l; ++j) {
      pivot_states.row(j) = sample_.states.row(icd_.pivots[j]);
      pivot_actions[j] = sample_.actions[icd_.pivots[j]];
    }
    plan.h_.resize(na);
    const Index bs = norm_block_cols(m, n);
    for (Index ai = 0; ai < na; ++ai) {
      Vec qa = Vec::Constant(n, actions[ai]);
      Mat kp = pair_cross_gram(pivot_states, pivot_actions, states, qa, k_cfg_);
      Mat g = rp_.transpose().triangularView<Eigen::Lower>().solve(kp);
      plan.h_[ai] = cap_llt_.solve(g);
      for (Index c0 = 0; c0 < n; c0 += bs) {
        Index nc = std::min(bs, n - c0);
        Mat block = icd_.r.transpose() * plan.h_[ai].middleCols(c0, nc);
        plan.norms_.col(ai).segment(c0, nc) =
            block.cwiseAbs().colwise().sum().transpose();
      }
    }
    return plan;
  }

  plan.sq_ = state_cross_gram(sample_.states, states, k_cfg_.state);
  plan.action_cols_.resize(m, na);
  for (Index ai = 0; ai < na; ++ai) {
    for (Index j = 0; j < m; ++j) {
      plan.action_cols_(j, ai) =
          eval_action_kernel(sample_.actions[j], actions[ai], k_cfg_);
    }
  }
  plan.delta_fast_ = (k_cfg_.action_kind == ActionKernelKind::kDelta);
  if (plan.delta_fast_) {
    plan.delta_idx_.resize(na);
    for (Index ai = 0; ai < na; ++ai) {
      for (Index j = 0; j < m; ++j) {
        if (sample_.actions[j] == actions[ai]) plan.delta_idx_[ai].push_back(j);
      }
    }
  }

  const Index bs = norm_block_cols(m, n);
  for (Index ai = 0; ai < na; ++ai) {
    if (plan.delta_fast_) {
      const auto& idx = plan.delta_idx_[ai];
      if (idx.empty()) {
        plan.norms_.col(ai).setZero();
        continue;
      }
      Mat wj = w_(Eigen::all, idx);
      Mat sj = plan.sq_(idx, Eigen::all);
      for (Index c0 = 0; c0 < n; c0 += bs) {
        Index nc = std::min(bs, n - c0);
        Mat block = wj * sj.middleCols(c0, nc);
        plan.norms_.col(ai).segment(c0, nc) =
            block.cwiseAbs().colwise().sum().transpose();
      }
    } else {
      for (Index c0 = 0; c0 < n; c0 += bs) {
        Index nc = std::min(bs, n - c0);
        Mat scaled =
            plan.action_cols_.col(ai).asDiagonal() * plan.sq_.middleCols(c0, nc);
        Mat block = w_ * scaled;
        plan.norms_.col(ai).segment(c0, nc) =
            block.cwiseAbs().colwise().sum().transpose();
      }
    }
  }
  return plan;
}

QueryPlan ConditionalEmbedding::plan_policy(const Mat& states,
                                            const Vec& action_per_row) const {
  if (states.cols() != sample_.dim()) {
    throw std::invalid_argument("plan_policy: state dimension mismatch");
  }
  if (action_per_row.size() != states.rows()) {
    throw std::invalid_argument("plan_policy: one action per state required");
  }
  const Index m = sample_.size();
  const Index n = states.rows();

  QueryPlan plan;
  plan.emb_ = this;
  plan.policy_mode_ = true;
  plan.norms_.resize(n, 1);

  if (sparse_) {
    const Index l = icd_.rank();
    Mat pivot_states(l, sample_.dim());
    Vec pivot_actions(l);
    for (Index j = 0; j < l; ++j) {
      pivot_states.row(j) = sample_.states.row(icd_.pivots[j]);
      pivot_actions[j] = sample_.actions[icd_.pivots[j]];
    }
    Mat kp = pair_cross_gram(pivot_states, pivot_actions, states,
                             action_per_row, k_cfg_);
    Mat g = rp_.transpose().triangularView<Eigen::Lower>().solve(kp);
    plan.h_.resize(1);
    plan.h_[0] = cap_llt_.solve(g);
    const Index bs = norm_block_cols(m, n);
    for (Index c0 = 0; c0 < n; c0 += bs) {
      Index nc = std::min(bs, n - c0);
      Mat block = icd_.r.transpose() * plan.h_[0].middleCols(c0, nc);
      plan.norms_.col(0).segment(c0, nc) =
          block.cwiseAbs().colwise().sum().transpose();
    }
    return plan;
  }

  plan.kq_ = pair_cross_gram(sample_.states, sample_.actions, states,
                             action_per_row, k_cfg_);
  const Index bs = norm_block_cols(m, n);
  for (Index c0 = 0; c0 < n; c0 += bs) {
    Index nc = std::min(bs, n - c0);
    Mat block = w_ * plan.kq_.middleCols(c0, nc);
    plan.norms_.col(0).segment(c0, nc) =
        block.cwiseAbs().colwise().sum().transpose();
  }
  return plan;
}

Mat QueryPlan::expect_all(const Vec& f) const {
  const ConditionalEmbedding& emb = *emb_;
  if (f.size() != emb.sample_.size()) {
    throw std::invalid_argument("expect_all: f must have one value per sample");
  }
  const Index n = norms_.rows();
  const Index na = norms_.cols();
  Mat e(n, na);

  if (emb.sparse_) {
    Vec u = emb.icd_.r * f;
    for (Index ai = 0; ai < na; ++ai) {
      e.col(ai) = h_[ai].transpose() * u;
    }
  } else {
    Vec t = emb.w_ * f;
    if (policy_mode_) {
      e.col(0) = kq_.transpose() * t;
    } else if (delta_fast_) {
      for (Index ai = 0; ai < na; ++ai) {
        const auto& idx = delta_idx_[ai];
        if (idx.empty()) {
          e.col(ai).setZero();
          continue;
        }
        e.col(ai) = sq_(idx, Eigen::all).transpose() * t(idx);
      }
    } else {
      for (Index ai = 0; ai < na; ++ai) {
        e.col(ai) = sq_.transpose() * action_cols_.col(ai).cwiseProduct(t);
      }
    }
  }

  for (Index ai = 0; ai < na; ++ai) {
    for (Index i = 0; i < n; ++i) {
      double norm = norms_(i, ai);
      if (!(norm > 0.0)) {
        throw UndefinedQueryError(
            "expect_all: all-zero raw weights at query state index " +
                std::to_string(i),
            i);
      }
      e(i, ai) /= norm;
    }
  }
  return e;
}

CvResult cv_lambda(const TransitionSample& sample,
                   const StateActionKernelConfig& k_cfg,
                   const StateKernelConfig& l_cfg,
                   const std::vector<double>& lambda_grid, int folds,
                   std::uint64_t rng_seed) {
  sample.validate();
  if (lambda_grid.empty()) {
    throw std::invalid_argument("cv_lambda: empty lambda grid");
  }
  for (double l : lambda_grid) {
    if (!(l > 0.0)) {
      throw std::invalid_argument("cv_lambda: lambda values must be positive");
    }
  }
  const Index m = sample.size();
  if (folds < 2 || folds > m) {
    throw std::invalid_argument("cv_lambda: folds must be in [2, m]");
  }

  CvResult result;
  result.grid = lambda_grid;
  std::sort(result.grid.begin(), result.grid.end());
  result.losses.assign(result.grid.size(), 0.0);

  std::vector<Index> order(m);
  std::iota(order.begin(), order.end(), Index(0));
  std::mt19937_64 rng(rng_seed);
  std::shuffle(order.begin(), order.end(), rng);

  for (int fold = 0; fold < folds; ++fold) {
    std::vector<Index> train, held;
    for (Index pos = 0; pos < m; ++pos) {
      (static_cast<int>(pos % folds) == fold ? held : train)
          .push_back(order[pos]);
    }
    const Index t = static_cast<Index>(train.size());

    Mat tr_states = sample.states(train, Eigen::all);
    Vec tr_actions = sample.actions(train);
    Mat tr_next = sample.next_states(train, Eigen::all);
    Mat ho_states = sample.states(held, Eigen::all);
    Vec ho_actions = sample.actions(held);
    Mat ho_next = sample.next_states(held, Eigen::all);

    Mat ktr = gram(tr_states, tr_actions, k_cfg).k;
    Mat kcross =
        pair_cross_gram(tr_states, tr_actions, ho_states, ho_actions, k_cfg);
    Mat ltt = state_cross_gram(tr_next, tr_next, l_cfg);
    ltt = ((ltt + ltt.transpose()) * 0.5).eval();
    ltt.diagonal().setOnes();
    Mat lth = state_cross_gram(tr_next, ho_next, l_cfg);

    for (std::size_t li = 0; li < result.grid.size(); ++li) {
      Mat a = ktr;
      a.diagonal().array() += result.grid[li] * static_cast<double>(t);
      Mat alpha = Eigen::LLT<Mat>(a).solve(kcross);
      double loss = static_cast<double>(held.size());
      loss -= 2.0 * alpha.cwiseProduct(lth).sum();
      loss += alpha.cwiseProduct(ltt * alpha).sum();
      result.losses[li] += loss;
    }
  }

  std::size_t best = 0;
  for (std::size_t li = 1; li < result.grid.size(); ++li) {
    if (result.losses[li] <= result.losses[best]) best = li;  // ties: larger
  }
  result.lambda = result.grid[best];
  return result;
}

std::vector<double> default_lambda_grid(int count, double lo, double hi) {
  if (count < 1 || !(lo > 0.0) || !(hi >= lo)) {
    throw std::invalid_argument("default_lambda_grid: bad parameters");
  }
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  double step = std::log(hi / lo) / static_cast<double>(count - 1);
  for (int i = 0; i < count; ++i) {
    grid[i] = lo * std::exp(step * i);
  }
  return grid;
}

}  // namespace kdp
