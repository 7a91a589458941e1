#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kdp/embedding.hpp"
#include "kdp/environments.hpp"
#include "kdp/planner.hpp"
#include "kdp/types.hpp"

namespace kdp {

struct BenchCell {
  int size = 0;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
};

struct SummaryRow {
  int size = 0;
  std::string metric;
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct BenchRun {
  std::string experiment;
  std::vector<BenchCell> cells;

  std::vector<SummaryRow> summary() const;
  double mean_metric(int size, const std::string& metric) const;
  double stderr_metric(int size, const std::string& metric) const;
};

struct BenchOptions {
  std::vector<int> sizes;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  double gamma = 0.9;
  double threshold = 1e-4;
  int max_iters = 1000;

  std::vector<double> lambda_grid = default_lambda_grid();
  int cv_folds = 2;
  int cv_max_points = 800;  // CV runs on a subsample this large
  double fixed_lambda = 0.0;  // > 0 skips cross-validation
  double knn_fraction = 0.25;
  // candidate multipliers of the heuristic bandwidth, cross-validated
  // jointly with the ridge in the value-estimation runs
  std::vector<double> cv_bandwidth_scales = {1.0, 0.5, 0.25, 0.125, 0.0625};

  GridworldSpec grid_spec = GridworldSpec::with_side(50);
  PendulumSpec pendulum_spec;
  int pendulum_actions = 25;
  int reference_resolution = 50;
  int eval_grid = 25;

  bool sparse = false;
  double cholesky_tol = 1e-6;
  Index max_rank = 0;  // 0 = unlimited

  std::string out_dir;  // empty = no files written
};

// Experiment 1 pipeline: sample the stochastic gridworld, select lambda,
// fit, value-iterate, extract the greedy policy and score it exactly
// against the tabular oracle.
BenchRun run_experiment1(const BenchOptions& opts);

// Experiment 2 pipeline: pendulum swing-up with knn bandwidths, a torque
// grid, and the fine-grid dynamic-programming reference.
BenchRun run_experiment2(const BenchOptions& opts);

enum class BenchEnv { kGridworld, kPendulum };

// Value-estimation pipeline: samples generated under the reference
// optimal policy, policy evaluation, prediction error against the
// reference value.
BenchRun run_value_estimation(const BenchOptions& opts, BenchEnv env);

void write_bench_csv(const std::string& path, const BenchRun& run);
void write_summary_csv(const std::string& path, const BenchRun& run);

}  // namespace kdp
