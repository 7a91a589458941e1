#include "kdp/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>

#include "kdp/csv.hpp"
#include "kdp/svg.hpp"

namespace kdp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

TransitionSample cv_subsample(const TransitionSample& sample,
                              const BenchOptions& opts, std::uint64_t seed) {
  const Index m = sample.size();
  if (opts.cv_max_points <= 0 || m <= opts.cv_max_points) return sample;
  std::vector<Index> order(m);
  std::iota(order.begin(), order.end(), Index(0));
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(opts.cv_max_points);
  TransitionSample cv_sample;
  cv_sample.states = sample.states(order, Eigen::all);
  cv_sample.actions = sample.actions(order);
  cv_sample.next_states = sample.next_states(order, Eigen::all);
  return cv_sample;
}

double select_lambda(const TransitionSample& sample,
                     const StateActionKernelConfig& kcfg,
                     const StateKernelConfig& lcfg, const BenchOptions& opts,
                     std::uint64_t seed) {
  if (opts.fixed_lambda > 0.0) return opts.fixed_lambda;
  TransitionSample cv_sample = cv_subsample(sample, opts, seed);
  return cv_lambda(cv_sample, kcfg, lcfg, opts.lambda_grid, opts.cv_folds, seed)
      .lambda;
}

// Joint selection of the input-kernel bandwidth scale and the ridge for
// the value-estimation runs. K-fold validation predicts a probe function
// of the next state (the reward) at held-out transitions through the
// normalized weights — the same path the value estimator uses — and
// keeps the (scale, lambda) pair with the lowest squared error. Ties in
// lambda break toward the stronger ridge. Scales kcfg in place.
double select_kernel_and_lambda(
    const TransitionSample& sample, StateActionKernelConfig& kcfg,
    const BenchOptions& opts, std::uint64_t seed,
    const std::function<double(const Vec&)>& probe) {
  if (opts.fixed_lambda > 0.0) return opts.fixed_lambda;
  TransitionSample cv = cv_subsample(sample, opts, seed);
  const Index m = cv.size();
  const int folds = opts.cv_folds;
  std::vector<double> grid = opts.lambda_grid;
  std::sort(grid.begin(), grid.end());

  Vec g(m);
  for (Index i = 0; i < m; ++i) {
    g[i] = probe(cv.next_states.row(i).transpose());
  }
  std::vector<Index> order(m);
  std::iota(order.begin(), order.end(), Index(0));
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  double best_loss = std::numeric_limits<double>::infinity();
  double best_lambda = grid.front();
  StateActionKernelConfig best = kcfg;
  for (double scale : opts.cv_bandwidth_scales) {
    StateActionKernelConfig cand = kcfg;
    cand.state.bandwidth *= scale;
    if (cand.action_kind == ActionKernelKind::kGaussian) {
      cand.action_bandwidth *= scale;
    }
    std::vector<double> losses(grid.size(), 0.0);
    for (int fold = 0; fold < folds; ++fold) {
      std::vector<Index> tr, he;
      for (Index pos = 0; pos < m; ++pos) {
        (pos % folds == fold ? he : tr).push_back(order[pos]);
      }
      Mat s_tr = cv.states(tr, Eigen::all);
      Vec a_tr = cv.actions(tr);
      Mat s_he = cv.states(he, Eigen::all);
      Vec a_he = cv.actions(he);
      Vec g_tr = g(tr);
      Vec g_he = g(he);
      Mat k_tr = gram(s_tr, a_tr, cand).k;
      Mat k_x = pair_cross_gram(s_tr, a_tr, s_he, a_he, cand);
      for (std::size_t li = 0; li < grid.size(); ++li) {
        Mat reg = k_tr;
        reg.diagonal().array() += grid[li] * static_cast<double>(tr.size());
        Mat alpha = reg.llt().solve(k_x);
        for (Index j = 0; j < alpha.cols(); ++j) {
          double denom = alpha.col(j).cwiseAbs().sum();
          if (denom <= 0.0) continue;  // unseen query under a delta action
          double pred = alpha.col(j).dot(g_tr) / denom;
          losses[li] += (pred - g_he[j]) * (pred - g_he[j]);
        }
      }
    }
    std::size_t best_li = 0;
    for (std::size_t li = 1; li < grid.size(); ++li) {
      if (losses[li] <= losses[best_li]) best_li = li;
    }
    if (losses[best_li] < best_loss) {
      best_loss = losses[best_li];
      best_lambda = grid[best_li];
      best = cand;
    }
  }
  kcfg = best;
  return best_lambda;
}

std::shared_ptr<const ConditionalEmbedding> fit_embedding(
    const TransitionSample& sample, const StateActionKernelConfig& kcfg,
    const StateKernelConfig& lcfg, double lambda, const BenchOptions& opts) {
  if (opts.sparse) {
    return std::make_shared<const ConditionalEmbedding>(
        ConditionalEmbedding::fit_sparse(sample, kcfg, lcfg, lambda,
                                         opts.cholesky_tol, opts.max_rank));
  }
  return std::make_shared<const ConditionalEmbedding>(
      ConditionalEmbedding::fit(sample, kcfg, lcfg, lambda));
}

double safe_knn_bandwidth(const Mat& points, double fraction,
                          const std::vector<int>& periodic, double fallback) {
  try {
    return knn_bandwidth(points, fraction, periodic);
  } catch (const DegenerateDataError&) {
    return fallback;
  }
}

Mat reshape_grid(const Vec& values, int side) {
  Mat grid(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) grid(y, x) = values[Index(y) * side + x];
  }
  return grid;
}

Eigen::MatrixXi reshape_grid_int(const Eigen::VectorXi& values, int side) {
  Eigen::MatrixXi grid(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) grid(y, x) = values[Index(y) * side + x];
  }
  return grid;
}

TransitionSample sample_mdp_under_policy(const TabularMDP& mdp,
                                         const Mat& coords,
                                         const Eigen::VectorXi& policy, int m,
                                         std::uint64_t seed) {
  const Index ns = mdp.num_states();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> state_dist(0, ns - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  TransitionSample sample;
  sample.states.resize(m, coords.cols());
  sample.actions.resize(m);
  sample.next_states.resize(m, coords.cols());
  for (int i = 0; i < m; ++i) {
    Index s = state_dist(rng);
    Index a = policy[s];
    double u = unif(rng);
    double acc = 0.0;
    Index next = ns - 1;
    for (Index t = 0; t < ns; ++t) {
      acc += mdp.transitions[a](s, t);
      if (u <= acc) {
        next = t;
        break;
      }
    }
    sample.states.row(i) = coords.row(s);
    sample.actions[i] = static_cast<double>(a);
    sample.next_states.row(i) = coords.row(next);
  }
  return sample;
}

}  // namespace

std::vector<SummaryRow> BenchRun::summary() const {
  std::map<std::pair<int, std::string>, std::vector<double>> groups;
  for (const BenchCell& cell : cells) {
    for (const auto& [metric, value] : cell.metrics) {
      groups[{cell.size, metric}].push_back(value);
    }
  }
  std::vector<SummaryRow> rows;
  for (const auto& [key, vals] : groups) {
    SummaryRow row;
    row.size = key.first;
    row.metric = key.second;
    double n = static_cast<double>(vals.size());
    row.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / n;
    double var = 0.0;
    for (double v : vals) var += (v - row.mean) * (v - row.mean);
    row.stderr_ = vals.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

double BenchRun::mean_metric(int size, const std::string& metric) const {
  for (const SummaryRow& row : summary()) {
    if (row.size == size && row.metric == metric) return row.mean;
  }
  throw std::invalid_argument("mean_metric: no such size/metric");
}

double BenchRun::stderr_metric(int size, const std::string& metric) const {
  for (const SummaryRow& row : summary()) {
    if (row.size == size && row.metric == metric) return row.stderr_;
  }
  throw std::invalid_argument("stderr_metric: no such size/metric");
}

BenchRun run_experiment1(const BenchOptions& opts) {
  if (opts.sizes.empty()) {
    throw std::invalid_argument("run_experiment1: sizes must be non-empty");
  }
  const GridworldSpec& spec = opts.grid_spec;
  TabularMDP mdp = gridworld_mdp(spec, opts.gamma);
  Mat coords = gridworld_state_coords(spec);
  ExactViResult star = exact_value_iteration(mdp, 1e-9);

  RewardFn reward = [spec](const Vec& x, double) {
    return gridworld_reward(spec, x[0], x[1]);
  };
  PlannerConfig pcfg;
  pcfg.gamma = opts.gamma;
  pcfg.max_iters = opts.max_iters;
  pcfg.threshold = opts.threshold;
  pcfg.actions = {0.0, 1.0, 2.0, 3.0};

  BenchRun run;
  run.experiment = "grid";
  for (int size : opts.sizes) {
    bool first_seed = true;
    for (std::uint64_t seed : opts.seeds) {
      TransitionSample sample = sample_mdp(mdp, coords, size, seed);
      StateActionKernelConfig kcfg;
      kcfg.state.bandwidth =
          safe_knn_bandwidth(sample.states, opts.knn_fraction, {}, 1.0);
      kcfg.action_kind = ActionKernelKind::kDelta;
      StateKernelConfig lcfg;
      lcfg.bandwidth = safe_knn_bandwidth(sample.next_states, opts.knn_fraction,
                                          {}, kcfg.state.bandwidth);

      double lambda = select_lambda(sample, kcfg, lcfg, opts, seed);
      auto t0 = Clock::now();
      auto emb = fit_embedding(sample, kcfg, lcfg, lambda, opts);
      double fit_s = seconds_since(t0);

      t0 = Clock::now();
      auto est = std::make_shared<const ValueEstimate>(
          value_iteration(emb, reward, pcfg));
      double plan_s = seconds_since(t0);

      GreedyPolicy greedy(est);
      Eigen::VectorXi policy = greedy.action_indices(coords);
      Vec v_pi = exact_policy_value(mdp, policy);
      Vec gap = star.values - v_pi;
      Vec v_hat = est->values_at(coords);
      Vec pred = (v_hat - v_pi).cwiseAbs();

      BenchCell cell;
      cell.size = size;
      cell.seed = seed;
      cell.metrics["value_gap_mean"] = gap.mean();
      cell.metrics["value_gap_sup"] = gap.cwiseAbs().maxCoeff();
      cell.metrics["value_pred_err_mean"] = pred.mean();
      cell.metrics["value_pred_err_sup"] = pred.maxCoeff();
      cell.metrics["lambda"] = lambda;
      cell.metrics["fit_seconds"] = fit_s;
      cell.metrics["plan_seconds"] = plan_s;
      cell.metrics["iterations"] = est->iterations();
      cell.metrics["per_sweep_seconds"] =
          plan_s / std::max(1, est->iterations());
      run.cells.push_back(cell);

      if (!opts.out_dir.empty() && first_seed) {
        std::filesystem::create_directories(opts.out_dir);
        std::string tag = "_" + std::to_string(size);
        save_value_heatmap_svg(opts.out_dir + "/grid_value_true" + tag + ".svg",
                               reshape_grid(v_pi, spec.side));
        save_value_heatmap_svg(opts.out_dir + "/grid_value_est" + tag + ".svg",
                               reshape_grid(v_hat, spec.side));
        save_policy_map_svg(opts.out_dir + "/grid_policy" + tag + ".svg",
                            reshape_grid_int(policy, spec.side));
        first_seed = false;
      }
    }
  }
  return run;
}

BenchRun run_experiment2(const BenchOptions& opts) {
  if (opts.sizes.empty()) {
    throw std::invalid_argument("run_experiment2: sizes must be non-empty");
  }
  const PendulumSpec& spec = opts.pendulum_spec;
  PendulumReference ref = pendulum_reference_value(
      spec, opts.reference_resolution, opts.gamma, opts.pendulum_actions);
  Mat eval_coords = ref.grid_coords(opts.eval_grid);
  Vec v_ref_eval = ref.read_grid(opts.eval_grid);
  Vec v_pi_eval(eval_coords.rows());

  RewardFn reward = [](const Vec& x, double) {
    return pendulum_reward(x[0], x[1]);
  };
  PlannerConfig pcfg;
  pcfg.gamma = opts.gamma;
  pcfg.max_iters = opts.max_iters;
  pcfg.threshold = opts.threshold;
  pcfg.actions = ref.torques;

  BenchRun run;
  run.experiment = "pendulum";
  for (int size : opts.sizes) {
    for (std::uint64_t seed : opts.seeds) {
      TransitionSample sample =
          pendulum_sample(spec, size, opts.pendulum_actions, seed);
      StateActionKernelConfig kcfg;
      kcfg.state.periodic_dims = {0};
      kcfg.state.bandwidth =
          safe_knn_bandwidth(sample.states, opts.knn_fraction, {0}, 1.0);
      kcfg.action_kind = ActionKernelKind::kGaussian;
      kcfg.action_bandwidth = safe_knn_bandwidth(
          Mat(sample.actions), opts.knn_fraction, {}, spec.torque_max / 2.0);
      StateKernelConfig lcfg;
      lcfg.periodic_dims = {0};
      lcfg.bandwidth = safe_knn_bandwidth(sample.next_states, opts.knn_fraction,
                                          {0}, kcfg.state.bandwidth);

      double lambda = select_lambda(sample, kcfg, lcfg, opts, seed);
      auto t0 = Clock::now();
      auto emb = fit_embedding(sample, kcfg, lcfg, lambda, opts);
      double fit_s = seconds_since(t0);

      t0 = Clock::now();
      auto est = std::make_shared<const ValueEstimate>(
          value_iteration(emb, reward, pcfg));
      double plan_s = seconds_since(t0);

      GreedyPolicy greedy(est);
      Eigen::VectorXi policy = greedy.action_indices(ref.coords);
      Vec v_pi = exact_policy_value(ref.mdp, policy);
      for (Index i = 0; i < eval_coords.rows(); ++i) {
        v_pi_eval[i] = v_pi[ref.state_index(eval_coords(i, 0), eval_coords(i, 1))];
      }
      Vec gap = v_ref_eval - v_pi_eval;
      Vec v_hat = est->values_at(eval_coords);
      Vec pred = (v_hat - v_ref_eval).cwiseAbs();

      BenchCell cell;
      cell.size = size;
      cell.seed = seed;
      cell.metrics["value_gap_mean"] = gap.mean();
      cell.metrics["value_gap_sup"] = gap.cwiseAbs().maxCoeff();
      cell.metrics["value_pred_err_mean"] = pred.mean();
      cell.metrics["value_pred_err_sup"] = pred.maxCoeff();
      cell.metrics["lambda"] = lambda;
      cell.metrics["fit_seconds"] = fit_s;
      cell.metrics["plan_seconds"] = plan_s;
      cell.metrics["iterations"] = est->iterations();
      cell.metrics["per_sweep_seconds"] =
          plan_s / std::max(1, est->iterations());
      run.cells.push_back(cell);
    }
  }
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    Mat grid(opts.eval_grid, opts.eval_grid);
    for (int ti = 0; ti < opts.eval_grid; ++ti) {
      for (int wi = 0; wi < opts.eval_grid; ++wi) {
        grid(wi, ti) = v_ref_eval[Index(ti) * opts.eval_grid + wi];
      }
    }
    save_value_heatmap_svg(opts.out_dir + "/pendulum_reference_value.svg",
                           grid);
    save_value_csv(opts.out_dir + "/pendulum_reference_value.csv", eval_coords,
                   v_ref_eval);
  }
  return run;
}

BenchRun run_value_estimation(const BenchOptions& opts, BenchEnv env) {
  if (opts.sizes.empty()) {
    throw std::invalid_argument("run_value_estimation: sizes must be non-empty");
  }
  BenchRun run;
  run.experiment = "value-estimation";

  if (env == BenchEnv::kGridworld) {
    const GridworldSpec& spec = opts.grid_spec;
    TabularMDP mdp = gridworld_mdp(spec, opts.gamma);
    Mat coords = gridworld_state_coords(spec);
    ExactViResult star = exact_value_iteration(mdp, 1e-9);
    Vec v_pi_ref = exact_policy_value(mdp, star.policy);
    const int n = spec.side;
    PolicyFn policy = [&star, n](const Vec& x) {
      long ix = std::clamp<long>(std::lround(x[0]), 0, n - 1);
      long iy = std::clamp<long>(std::lround(x[1]), 0, n - 1);
      return static_cast<double>(star.policy[iy * n + ix]);
    };
    RewardFn reward = [spec](const Vec& x, double) {
      return gridworld_reward(spec, x[0], x[1]);
    };
    PlannerConfig pcfg;
    pcfg.gamma = opts.gamma;
    pcfg.max_iters = opts.max_iters;
    pcfg.threshold = opts.threshold;
    pcfg.actions = {0.0, 1.0, 2.0, 3.0};

    for (int size : opts.sizes) {
      for (std::uint64_t seed : opts.seeds) {
        TransitionSample sample =
            sample_mdp_under_policy(mdp, coords, star.policy, size, seed);
        StateActionKernelConfig kcfg;
        kcfg.state.bandwidth =
            safe_knn_bandwidth(sample.states, opts.knn_fraction, {}, 1.0);
        kcfg.action_kind = ActionKernelKind::kDelta;
        StateKernelConfig lcfg;
        lcfg.bandwidth = safe_knn_bandwidth(
            sample.next_states, opts.knn_fraction, {}, kcfg.state.bandwidth);
        double lambda = select_kernel_and_lambda(
            sample, kcfg, opts, seed, [spec](const Vec& xp) {
              return gridworld_reward(spec, xp[0], xp[1]);
            });
        auto emb = fit_embedding(sample, kcfg, lcfg, lambda, opts);
        ValueEstimate est = evaluate_policy(emb, policy, reward, pcfg);
        Vec v_hat = est.values_at(coords);
        Vec err = (v_hat - v_pi_ref).cwiseAbs();

        BenchCell cell;
        cell.size = size;
        cell.seed = seed;
        cell.metrics["pred_err_mean"] = err.mean();
        cell.metrics["pred_err_sup"] = err.maxCoeff();
        cell.metrics["lambda"] = lambda;
        cell.metrics["state_bandwidth"] = kcfg.state.bandwidth;
        cell.metrics["iterations"] = est.iterations();
        run.cells.push_back(cell);
      }
    }
    return run;
  }

  const PendulumSpec& spec = opts.pendulum_spec;
  PendulumReference ref = pendulum_reference_value(
      spec, opts.reference_resolution, opts.gamma, opts.pendulum_actions);
  Vec v_pi_full = exact_policy_value(ref.mdp, ref.solution.policy);
  Mat eval_coords = ref.grid_coords(opts.eval_grid);
  Vec v_pi_eval(eval_coords.rows());
  for (Index i = 0; i < eval_coords.rows(); ++i) {
    v_pi_eval[i] = v_pi_full[ref.state_index(eval_coords(i, 0), eval_coords(i, 1))];
  }
  PolicyFn policy = [&ref](const Vec& x) {
    return ref.torques[ref.solution.policy[ref.state_index(x[0], x[1])]];
  };
  RewardFn reward = [](const Vec& x, double) {
    return pendulum_reward(x[0], x[1]);
  };
  PlannerConfig pcfg;
  pcfg.gamma = opts.gamma;
  pcfg.max_iters = opts.max_iters;
  pcfg.threshold = opts.threshold;
  pcfg.actions = ref.torques;

  for (int size : opts.sizes) {
    for (std::uint64_t seed : opts.seeds) {
      // Samples generated under the reference optimal policy, uniform
      // start states.
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> theta_dist(-3.14159265358979312,
                                                        3.14159265358979312);
      std::uniform_real_distribution<double> omega_dist(-spec.omega_max,
                                                        spec.omega_max);
      TransitionSample sample;
      sample.states.resize(size, 2);
      sample.actions.resize(size);
      sample.next_states.resize(size, 2);
      for (int i = 0; i < size; ++i) {
        double th = theta_dist(rng);
        double om = omega_dist(rng);
        Vec x(2);
        x << th, om;
        double u = policy(x);
        auto [tn, on] = pendulum_step(th, om, u, spec);
        sample.states(i, 0) = th;
        sample.states(i, 1) = om;
        sample.actions[i] = u;
        sample.next_states(i, 0) = tn;
        sample.next_states(i, 1) = on;
      }

      StateActionKernelConfig kcfg;
      kcfg.state.periodic_dims = {0};
      kcfg.state.bandwidth =
          safe_knn_bandwidth(sample.states, opts.knn_fraction, {0}, 1.0);
      kcfg.action_kind = ActionKernelKind::kGaussian;
      kcfg.action_bandwidth = safe_knn_bandwidth(
          Mat(sample.actions), opts.knn_fraction, {}, spec.torque_max / 2.0);
      StateKernelConfig lcfg;
      lcfg.periodic_dims = {0};
      lcfg.bandwidth = safe_knn_bandwidth(sample.next_states, opts.knn_fraction,
                                          {0}, kcfg.state.bandwidth);
      double lambda = select_kernel_and_lambda(
          sample, kcfg, opts, seed,
          [](const Vec& xp) { return pendulum_reward(xp[0], xp[1]); });
      auto emb = fit_embedding(sample, kcfg, lcfg, lambda, opts);
      ValueEstimate est = evaluate_policy(emb, policy, reward, pcfg);
      Vec v_hat = est.values_at(eval_coords);
      Vec err = (v_hat - v_pi_eval).cwiseAbs();

      BenchCell cell;
      cell.size = size;
      cell.seed = seed;
      cell.metrics["pred_err_mean"] = err.mean();
      cell.metrics["pred_err_sup"] = err.maxCoeff();
      cell.metrics["lambda"] = lambda;
      cell.metrics["state_bandwidth"] = kcfg.state.bandwidth;
      cell.metrics["iterations"] = est.iterations();
      run.cells.push_back(cell);
    }
  }
  return run;
}

void write_bench_csv(const std::string& path, const BenchRun& run) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.precision(17);
  out << "experiment,size,seed,metric,value\n";
  for (const BenchCell& cell : run.cells) {
    for (const auto& [metric, value] : cell.metrics) {
      out << run.experiment << "," << cell.size << "," << cell.seed << ","
          << metric << "," << value << "\n";
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

void write_summary_csv(const std::string& path, const BenchRun& run) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.precision(17);
  out << "experiment,size,metric,mean,stderr\n";
  for (const SummaryRow& row : run.summary()) {
    out << run.experiment << "," << row.size << "," << row.metric << ","
        << row.mean << "," << row.stderr_ << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace kdp
