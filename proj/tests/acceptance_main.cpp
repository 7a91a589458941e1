// Acceptance suite: one pass/fail line per criterion, nonzero exit if
// any fail. Each criterion states its tolerance inline.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kdp/bench.hpp"
#include "kdp/embedding.hpp"
#include "kdp/environments.hpp"
#include "kdp/kernels.hpp"
#include "kdp/oracle.hpp"
#include "kdp/planner.hpp"

using namespace kdp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Mat line_coords(int n) {
  Mat c(n, 1);
  for (int i = 0; i < n; ++i) c(i, 0) = i;
  return c;
}

TabularMDP random_mdp(int n, int na, double gamma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  TabularMDP mdp;
  mdp.gamma = gamma;
  mdp.rewards.resize(n, na);
  for (int a = 0; a < na; ++a) {
    Mat p(n, n);
    for (int x = 0; x < n; ++x) {
      for (int y = 0; y < n; ++y) p(x, y) = unif(rng) + 1e-3;
      p.row(x) /= p.row(x).sum();
      mdp.rewards(x, a) = unif(rng);
    }
    mdp.transitions.push_back(p);
  }
  return mdp;
}

std::shared_ptr<const ConditionalEmbedding> gridworld_embedding(
    const GridworldSpec& spec, int m, std::uint64_t seed, double bandwidth,
    double lambda) {
  TabularMDP mdp = gridworld_mdp(spec, 0.9);
  TransitionSample s = sample_mdp(mdp, gridworld_state_coords(spec), m, seed);
  StateActionKernelConfig kcfg;
  kcfg.state.bandwidth = bandwidth;
  StateKernelConfig lcfg;
  lcfg.bandwidth = bandwidth;
  return std::make_shared<const ConditionalEmbedding>(
      ConditionalEmbedding::fit(s, kcfg, lcfg, lambda));
}

RewardFn gridworld_reward_fn(const GridworldSpec& spec) {
  return [spec](const Vec& x, double) {
    return gridworld_reward(spec, x[0], x[1]);
  };
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// --- criterion 1: one-sweep sup-norm contraction ratio <= gamma ---
bool criterion_contraction(std::string& detail) {
  auto t0 = Clock::now();
  GridworldSpec spec = GridworldSpec::with_side(10);
  auto emb = gridworld_embedding(spec, 500, 0, 1.5, 1e-3);
  PlannerConfig cfg;
  cfg.gamma = 0.9;
  cfg.threshold = 1e-6;
  cfg.actions = {0.0, 1.0, 2.0, 3.0};
  double ratio = contraction_check(emb, gridworld_reward_fn(spec), cfg, 1000, 1);
  double secs = seconds_since(t0);
  detail = "max ratio " + fmt(ratio) + " over 1000 pairs, " + fmt(secs) + "s";
  return ratio <= 0.9 + 1e-9 && secs < 30.0;
}

// --- criterion 2: sweep residuals e_k <= gamma^k e_0 ---
bool trace_is_geometric(const ValueEstimate& est, double gamma) {
  const std::vector<double>& e = est.sweep_residuals();
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (e[k] > std::pow(gamma, double(k)) * e[0] * (1.0 + 1e-9)) return false;
  }
  return true;
}

bool criterion_geometric(std::string& detail) {
  GridworldSpec spec = GridworldSpec::with_side(10);
  auto emb = gridworld_embedding(spec, 400, 3, 1.5, 1e-3);
  PlannerConfig cfg;
  cfg.gamma = 0.9;
  cfg.threshold = 1e-8;
  cfg.max_iters = 2000;
  cfg.actions = {0.0, 1.0, 2.0, 3.0};
  ValueEstimate grid_run = value_iteration(emb, gridworld_reward_fn(spec), cfg);

  PendulumSpec pspec;
  TransitionSample ps = pendulum_sample(pspec, 400, 15, 3);
  StateActionKernelConfig pk;
  pk.state.periodic_dims = {0};
  pk.state.bandwidth = knn_bandwidth(ps.states, 0.25, {0});
  pk.action_kind = ActionKernelKind::kGaussian;
  pk.action_bandwidth = knn_bandwidth(Mat(ps.actions), 0.25, {});
  StateKernelConfig pl;
  pl.periodic_dims = {0};
  pl.bandwidth = knn_bandwidth(ps.next_states, 0.25, {0});
  auto pemb = std::make_shared<const ConditionalEmbedding>(
      ConditionalEmbedding::fit(ps, pk, pl, 1e-3));
  PlannerConfig pcfg = cfg;
  pcfg.actions = pendulum_torque_grid(pspec, 15);
  ValueEstimate pend_run = value_iteration(
      pemb, [](const Vec& x, double) { return pendulum_reward(x[0], x[1]); },
      pcfg);

  bool ok = trace_is_geometric(grid_run, 0.9) && trace_is_geometric(pend_run, 0.9);
  detail = "gridworld " + std::to_string(grid_run.iterations()) +
           " sweeps, pendulum " + std::to_string(pend_run.iterations()) +
           " sweeps";
  return ok;
}

// --- criterion 3: exhaustive 5x5 gridworld reaches the oracle ---
bool criterion_oracle_equivalence(std::string& detail) {
  auto t0 = Clock::now();
  GridworldSpec spec = GridworldSpec::with_side(5);
  TabularMDP mdp = gridworld_mdp(spec, 0.9);
  Mat coords = gridworld_state_coords(spec);
  TransitionSample s = exhaustive_sample(mdp, coords, 200);  // m = 20000

  StateActionKernelConfig kcfg;
  kcfg.state.bandwidth = 0.1;
  StateKernelConfig lcfg;
  lcfg.bandwidth = 0.1;
  auto emb = std::make_shared<const ConditionalEmbedding>(
      ConditionalEmbedding::fit_sparse(s, kcfg, lcfg, 1e-8, 1e-10, 0));

  PlannerConfig cfg;
  cfg.gamma = 0.9;
  cfg.threshold = 1e-9;
  cfg.max_iters = 5000;
  cfg.actions = {0.0, 1.0, 2.0, 3.0};
  auto est = std::make_shared<const ValueEstimate>(
      value_iteration(emb, gridworld_reward_fn(spec), cfg));

  ExactViResult star = exact_value_iteration(mdp, 1e-12);
  Mat qs = q_star(mdp, star.values);
  double verr = (est->values_at(coords) - star.values).cwiseAbs().maxCoeff();
  Eigen::VectorXi policy = GreedyPolicy(est).action_indices(coords);
  int mismatches = 0;
  for (Index x = 0; x < 25; ++x) {
    Vec row = qs.row(x);
    std::sort(row.data(), row.data() + row.size());
    if (row[3] - row[2] > 1e-2 && policy[x] != star.policy[x]) ++mismatches;
  }
  double secs = seconds_since(t0);
  detail = "sup value error " + fmt(verr) + ", policy mismatches " +
           std::to_string(mismatches) + ", " + fmt(secs) + "s";
  return verr <= 1e-2 && mismatches == 0 && secs < 60.0;
}

// --- criterion 4: greedy-policy suboptimality bound, 5000 trials ---
bool criterion_suboptimality_bound(std::string& detail) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  int failures = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 50; ++trial) {
    TabularMDP mdp = random_mdp(6, 3, 0.9, 100 + trial);
    ExactViResult star = exact_value_iteration(mdp, 1e-12);
    Mat qs = q_star(mdp, star.values);
    for (int p = 0; p < 100; ++p) {
      Mat q = qs;
      for (Index i = 0; i < q.size(); ++i) q(i) += 0.5 * unif(rng);
      auto [lhs, rhs] = greedy_suboptimality_bound(mdp, q);
      worst_margin = std::min(worst_margin, rhs - lhs);
      if (lhs > rhs + 1e-12) ++failures;
    }
  }
  detail = std::to_string(5000 - failures) +
           "/5000 trials, smallest margin " + fmt(worst_margin);
  return failures == 0;
}

// --- criterion 5: expectation error trend under lambda_m = m^{-1/4} ---
bool criterion_consistency(std::string& detail) {
  TabularMDP mdp = random_mdp(10, 2, 0.9, 7);
  Mat coords = line_coords(10);
  Vec f_states(10);
  std::mt19937_64 frng(5);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int i = 0; i < 10; ++i) f_states[i] = unif(frng);

  StateActionKernelConfig kcfg;
  kcfg.state.bandwidth = 0.25;
  StateKernelConfig lcfg;
  lcfg.bandwidth = 0.25;

  std::vector<double> means;
  for (int m : {100, 400, 1600}) {
    double lambda = std::pow(double(m), -0.25);
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      TransitionSample s = sample_mdp(mdp, coords, m, seed);
      ConditionalEmbedding emb =
          ConditionalEmbedding::fit(s, kcfg, lcfg, lambda);
      Vec f(s.size());
      for (Index i = 0; i < s.size(); ++i) {
        f[i] = f_states[std::lround(s.next_states(i, 0))];
      }
      double sup = 0.0;
      for (int x = 0; x < 10; ++x) {
        for (int a = 0; a < 2; ++a) {
          double truth = mdp.transitions[a].row(x).dot(f_states);
          double err;
          try {
            err = std::abs(emb.expect(vec1(x), a, f) - truth);
          } catch (const UndefinedQueryError&) {
            err = f_states.cwiseAbs().maxCoeff();  // uncovered pair
          }
          sup = std::max(sup, err);
        }
      }
      total += sup;
    }
    means.push_back(total / 10.0);
  }
  detail = "mean sup errors " + fmt(means[0]) + " -> " + fmt(means[1]) +
           " -> " + fmt(means[2]);
  return means[1] <= means[0] + 1e-12 && means[2] <= means[1] + 1e-12;
}

// --- criterion 6: experiment 1 gap improves from 1000 to 5000 samples ---
bool criterion_experiment1(std::string& detail) {
  auto t0 = Clock::now();
  BenchOptions opts;
  opts.sizes = {1000, 5000};
  opts.threshold = 1e-4;
  BenchRun run = run_experiment1(opts);
  double g1000 = run.mean_metric(1000, "value_gap_mean");
  double g5000 = run.mean_metric(5000, "value_gap_mean");
  double secs = seconds_since(t0);
  detail = "mean gap " + fmt(g1000) + " (m=1000) vs " + fmt(g5000) +
           " (m=5000), " + fmt(secs) + "s";
  return g5000 < g1000 && secs < 1800.0;
}

// --- criterion 7: experiment 2 trends over {100, 200, 400, 800} ---
bool trend_non_increasing(const BenchRun& run, const std::vector<int>& sizes,
                          const std::string& metric, std::string& note) {
  int inversions = 0;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    double a = run.mean_metric(sizes[i], metric);
    double b = run.mean_metric(sizes[i + 1], metric);
    if (b > a) {
      double se = std::hypot(run.stderr_metric(sizes[i], metric),
                             run.stderr_metric(sizes[i + 1], metric));
      if (b - a > se) return false;  // inversion beyond one standard error
      ++inversions;
    }
    note += (i ? " -> " : metric + ": ") + fmt(b);
  }
  return inversions <= 1;
}

bool criterion_experiment2(std::string& detail) {
  auto t0 = Clock::now();
  BenchOptions opts;
  opts.sizes = {100, 200, 400, 800};
  opts.threshold = 1e-4;
  BenchRun run = run_experiment2(opts);
  // prediction error comes from the value-estimation pipeline (samples
  // drawn under the reference policy, bandwidth and ridge validated)
  BenchRun est_run = run_value_estimation(opts, BenchEnv::kPendulum);
  std::string note_gap, note_pred;
  bool gap_ok = trend_non_increasing(run, opts.sizes, "value_gap_mean", note_gap);
  bool pred_ok =
      trend_non_increasing(est_run, opts.sizes, "pred_err_mean", note_pred);
  double secs = seconds_since(t0);
  detail = note_gap + "; " + note_pred + "; " + fmt(secs) + "s";
  return gap_ok && pred_ok && secs < 1800.0;
}

// --- criterion 8: per-sweep cost scales like m^2 at fixed |A|, kappa ---
bool criterion_complexity(std::string& detail) {
  GridworldSpec spec = GridworldSpec::with_side(50);
  TabularMDP mdp = gridworld_mdp(spec, 0.9);
  Mat coords = gridworld_state_coords(spec);
  const int sweeps = 50;
  std::vector<double> logs_m, logs_t;
  std::string note;
  for (int m : {250, 500, 1000, 2000}) {
    TransitionSample s = sample_mdp(mdp, coords, m, 17);
    StateActionKernelConfig kcfg;
    kcfg.state.bandwidth = 2.0;
    StateKernelConfig lcfg;
    lcfg.bandwidth = 2.0;
    ConditionalEmbedding emb = ConditionalEmbedding::fit(s, kcfg, lcfg, 1e-3);

    std::vector<double> actions = {0.0, 1.0, 2.0, 3.0};
    QueryPlan plan = emb.plan_action_grid(s.next_states, actions);
    Mat rewards(m, 4);
    for (int ai = 0; ai < 4; ++ai) {
      for (int i = 0; i < m; ++i) {
        rewards(i, ai) = gridworld_reward(spec, s.next_states(i, 0),
                                          s.next_states(i, 1));
      }
    }
    Vec v = Vec::Zero(m);
    auto t0 = Clock::now();
    for (int k = 0; k < sweeps; ++k) {
      v = (rewards + 0.9 * plan.expect_all(v)).rowwise().maxCoeff();
    }
    double per_sweep = seconds_since(t0) / sweeps;
    logs_m.push_back(std::log(double(m)));
    logs_t.push_back(std::log(per_sweep));
    note += (note.empty() ? "" : ", ") + fmt(per_sweep) + "s";
  }
  // least-squares slope of log t against log m
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < logs_m.size(); ++i) {
    mx += logs_m[i];
    my += logs_t[i];
  }
  mx /= logs_m.size();
  my /= logs_t.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < logs_m.size(); ++i) {
    num += (logs_m[i] - mx) * (logs_t[i] - my);
    den += (logs_m[i] - mx) * (logs_m[i] - mx);
  }
  double slope = num / den;
  detail = "per-sweep " + note + "; log-log slope " + fmt(slope);
  return slope >= 1.7 && slope <= 2.3;
}

// --- criterion 9: low-rank path accuracy and per-expectation cost ---
bool criterion_sparse(std::string& detail) {
  PendulumSpec spec;
  const int actions = 15;
  TransitionSample s = pendulum_sample(spec, 2000, actions, 11);
  StateActionKernelConfig pk;
  pk.state.periodic_dims = {0};
  pk.state.bandwidth = knn_bandwidth(s.states, 0.25, {0});
  pk.action_kind = ActionKernelKind::kGaussian;
  pk.action_bandwidth = knn_bandwidth(Mat(s.actions), 0.25, {});
  StateKernelConfig pl;
  pl.periodic_dims = {0};
  pl.bandwidth = knn_bandwidth(s.next_states, 0.25, {0});
  double lambda = 1e-3;

  auto dense = std::make_shared<const ConditionalEmbedding>(
      ConditionalEmbedding::fit(s, pk, pl, lambda));
  auto sparse = std::make_shared<const ConditionalEmbedding>(
      ConditionalEmbedding::fit_sparse(s, pk, pl, lambda, 1e-6, 0));

  PlannerConfig cfg;
  cfg.gamma = 0.9;
  cfg.threshold = 1e-6;
  cfg.max_iters = 2000;
  cfg.actions = pendulum_torque_grid(spec, actions);
  RewardFn reward = [](const Vec& x, double) {
    return pendulum_reward(x[0], x[1]);
  };
  ValueEstimate vd = value_iteration(dense, reward, cfg);
  ValueEstimate vs = value_iteration(sparse, reward, cfg);

  const double pi = 3.14159265358979312;
  Mat grid(25 * 25, 2);
  for (int ti = 0; ti < 25; ++ti) {
    for (int wi = 0; wi < 25; ++wi) {
      grid(ti * 25 + wi, 0) = -pi + 2.0 * pi * (ti + 0.5) / 25.0;
      grid(ti * 25 + wi, 1) =
          -spec.omega_max + 2.0 * spec.omega_max * (wi + 0.5) / 25.0;
    }
  }
  double sup = (vd.values_at(grid) - vs.values_at(grid)).cwiseAbs().maxCoeff();

  // per-raw-expectation time at fixed rank, m = 2000 vs 8000
  auto time_per_expect = [&](int m) {
    TransitionSample big = pendulum_sample(spec, m, actions, 23);
    ConditionalEmbedding e =
        ConditionalEmbedding::fit_sparse(big, pk, pl, lambda, 1e-12, 50);
    Vec f(m);
    for (int i = 0; i < m; ++i) {
      f[i] = pendulum_reward(big.next_states(i, 0), big.next_states(i, 1));
    }
    Vec proj = e.project_values(f);
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> ut(-pi, pi);
    std::uniform_real_distribution<double> uw(-spec.omega_max, spec.omega_max);
    const int reps = 20000;
    double sink = 0.0;
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) {
      Vec x(2);
      x << ut(rng), uw(rng);
      sink += e.expect_raw_projected(x, 0.0, proj);
    }
    double t = seconds_since(t0) / reps;
    if (!std::isfinite(sink)) t = -1.0;
    return t;
  };
  double t2000 = time_per_expect(2000);
  double t8000 = time_per_expect(8000);
  double growth = t8000 / t2000;
  detail = "sup dense-sparse diff " + fmt(sup) + " (ranks " +
           std::to_string(int(sparse->rank())) + "), per-expectation " +
           fmt(t2000) + "s vs " + fmt(t8000) + "s (x" + fmt(growth) +
           " for 4x data)";
  return sup <= 1e-2 && growth < 4.0 && t2000 > 0.0 && t8000 > 0.0;
}

// --- criterion 10: normalization and boundedness over 1e4 queries ---
bool criterion_properties(std::string& detail) {
  int violations = 0;

  GridworldSpec spec = GridworldSpec::with_side(10);
  auto gemb = gridworld_embedding(spec, 400, 19, 1.5, 1e-3);
  std::mt19937_64 rng(73);
  std::uniform_real_distribution<double> ug(0.0, 9.0);
  std::uniform_int_distribution<int> ua(0, 3);
  Vec gf(gemb->sample().size());
  for (Index i = 0; i < gf.size(); ++i) gf[i] = std::sin(0.3 * double(i));
  double gmax = gf.cwiseAbs().maxCoeff();
  for (int q = 0; q < 5000; ++q) {
    Vec x(2);
    x << ug(rng), ug(rng);
    double a = ua(rng);
    Vec norm = gemb->normalized_weights(x, a);
    if (std::abs(norm.cwiseAbs().sum() - 1.0) > 1e-12) ++violations;
    if (std::abs(gemb->expect(x, a, gf)) > gmax + 1e-12) ++violations;
  }

  PendulumSpec pspec;
  TransitionSample ps = pendulum_sample(pspec, 400, 15, 31);
  StateActionKernelConfig pk;
  pk.state.periodic_dims = {0};
  pk.state.bandwidth = knn_bandwidth(ps.states, 0.25, {0});
  pk.action_kind = ActionKernelKind::kGaussian;
  pk.action_bandwidth = knn_bandwidth(Mat(ps.actions), 0.25, {});
  StateKernelConfig pl;
  pl.periodic_dims = {0};
  pl.bandwidth = knn_bandwidth(ps.next_states, 0.25, {0});
  ConditionalEmbedding pemb = ConditionalEmbedding::fit(ps, pk, pl, 1e-3);
  const double pi = 3.14159265358979312;
  std::uniform_real_distribution<double> ut(-pi, pi);
  std::uniform_real_distribution<double> uw(-pspec.omega_max, pspec.omega_max);
  std::uniform_real_distribution<double> utq(-pspec.torque_max,
                                             pspec.torque_max);
  Vec pf(ps.size());
  for (Index i = 0; i < pf.size(); ++i) pf[i] = std::cos(0.7 * double(i));
  double pmax = pf.cwiseAbs().maxCoeff();
  for (int q = 0; q < 5000; ++q) {
    Vec x(2);
    x << ut(rng), uw(rng);
    double a = utq(rng);
    Vec norm = pemb.normalized_weights(x, a);
    if (std::abs(norm.cwiseAbs().sum() - 1.0) > 1e-12) ++violations;
    if (std::abs(pemb.expect(x, a, pf)) > pmax + 1e-12) ++violations;
  }

  detail = std::to_string(violations) + " violations over 10000 queries";
  return violations == 0;
}

struct Criterion {
  int id;
  std::string name;
  std::function<bool(std::string&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> criteria = {
      {1, "one-sweep sup-norm contraction ratio <= 0.9 + 1e-9",
       criterion_contraction},
      {2, "geometric decay of value-iteration sweep residuals",
       criterion_geometric},
      {3, "exhaustive 5x5 gridworld matches the exact oracle",
       criterion_oracle_equivalence},
      {4, "greedy-policy suboptimality bound on 5000 random trials",
       criterion_suboptimality_bound},
      {5, "expectation error non-increasing with sample size",
       criterion_consistency},
      {6, "gridworld policy gap improves from 1000 to 5000 samples",
       criterion_experiment1},
      {7, "pendulum gap and prediction-error trends over sample size",
       criterion_experiment2},
      {8, "per-sweep planner cost scales quadratically in m",
       criterion_complexity},
      {9, "low-rank path: accuracy and O(rank) expectations",
       criterion_sparse},
      {10, "weight normalization and expectation boundedness",
       criterion_properties},
  };

  // optional arguments select a subset of criteria by number
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), c.id) == selected.end()) {
      continue;
    }
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    if (!ok) ++failures;
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << "criterion " << c.id << ": "
              << c.name << " (" << detail << ")\n"
              << std::flush;
  }
  if (failures > 0) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << (selected.empty() ? "all 10 criteria passed\n"
                                 : "selected criteria passed\n");
  return 0;
}
