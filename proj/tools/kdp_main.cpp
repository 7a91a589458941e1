#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kdp/bench.hpp"
#include "kdp/config.hpp"
#include "kdp/csv.hpp"
#include "kdp/embedding.hpp"
#include "kdp/environments.hpp"
#include "kdp/oracle.hpp"
#include "kdp/planner.hpp"
#include "kdp/svg.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

kdp::GridworldSpec grid_spec_from(const kdp::RunConfig& cfg) {
  kdp::GridworldSpec spec = kdp::GridworldSpec::with_side(
      cfg.get_int("env.grid_side"));
  spec.success_prob = cfg.get_double("env.grid_success_prob");
  double bw = cfg.get_double("env.grid_reward_bandwidth");
  if (bw > 0.0) spec.reward_bandwidth = bw;
  spec.validate();
  return spec;
}

kdp::PendulumSpec pendulum_spec_from(const kdp::RunConfig& cfg) {
  kdp::PendulumSpec spec;
  spec.torque_max = cfg.get_double("env.pendulum_torque_max");
  spec.omega_max = cfg.get_double("env.pendulum_omega_max");
  spec.dt = cfg.get_double("env.pendulum_dt");
  spec.mass = cfg.get_double("env.pendulum_mass");
  spec.length = cfg.get_double("env.pendulum_length");
  spec.gravity = cfg.get_double("env.pendulum_gravity");
  spec.friction = cfg.get_double("env.pendulum_friction");
  spec.validate();
  return spec;
}

// planner.actions holds either a single count k (ids 0..k-1) or an
// explicit comma list of action values.
std::vector<double> grid_actions_from(const kdp::RunConfig& cfg) {
  std::vector<double> raw = cfg.get_list("planner.actions");
  if (raw.size() == 1 && raw[0] == std::floor(raw[0]) && raw[0] >= 1.0) {
    std::vector<double> actions(static_cast<std::size_t>(raw[0]));
    std::iota(actions.begin(), actions.end(), 0.0);
    return actions;
  }
  return raw;
}

std::vector<double> lambda_grid_from(const kdp::RunConfig& cfg) {
  return kdp::default_lambda_grid(cfg.get_int("cv.lambda_count"),
                                  cfg.get_double("cv.lambda_min"),
                                  cfg.get_double("cv.lambda_max"));
}

double pick_lambda(const kdp::RunConfig& cfg,
                   const kdp::TransitionSample& sample,
                   const kdp::StateActionKernelConfig& kcfg,
                   const kdp::StateKernelConfig& lcfg, std::uint64_t seed) {
  double fixed = cfg.get_double("cv.lambda");
  if (fixed > 0.0) return fixed;
  kdp::TransitionSample cv_sample = sample;
  int cap = cfg.get_int("cv.max_points");
  if (cap > 0 && sample.size() > cap) {
    std::vector<kdp::Index> order(sample.size());
    std::iota(order.begin(), order.end(), kdp::Index(0));
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(cap);
    cv_sample.states = sample.states(order, Eigen::all);
    cv_sample.actions = sample.actions(order);
    cv_sample.next_states = sample.next_states(order, Eigen::all);
  }
  return kdp::cv_lambda(cv_sample, kcfg, lcfg, lambda_grid_from(cfg),
                        cfg.get_int("cv.folds"), seed)
      .lambda;
}

struct KernelChoice {
  kdp::StateActionKernelConfig kcfg;
  kdp::StateKernelConfig lcfg;
};

KernelChoice kernels_from(const kdp::RunConfig& cfg, const std::string& env,
                          const kdp::TransitionSample& sample) {
  KernelChoice kc;
  if (env == "pendulum") {
    kc.kcfg.state.periodic_dims = {0};
    kc.lcfg.periodic_dims = {0};
  }
  const std::string& kind = cfg.get_string("kernel.action_kind");
  kc.kcfg.action_kind = kind == "delta" ? kdp::ActionKernelKind::kDelta
                                        : kdp::ActionKernelKind::kGaussian;
  kc.kcfg.action_bandwidth = cfg.get_double("kernel.action_bandwidth");
  if (cfg.get_string("kernel.bandwidth_heuristic") == "knn") {
    double frac = cfg.get_double("kernel.knn_fraction");
    kc.kcfg.state.bandwidth = kdp::knn_bandwidth(
        sample.states, frac, kc.kcfg.state.periodic_dims);
    kc.lcfg.bandwidth = kdp::knn_bandwidth(sample.next_states, frac,
                                           kc.lcfg.periodic_dims);
    if (kc.kcfg.action_kind == kdp::ActionKernelKind::kGaussian) {
      kc.kcfg.action_bandwidth =
          kdp::knn_bandwidth(kdp::Mat(sample.actions), frac, {});
    }
  } else {
    kc.kcfg.state.bandwidth = cfg.get_double("kernel.state_bandwidth");
    kc.lcfg.bandwidth = cfg.get_double("kernel.state_bandwidth");
  }
  return kc;
}

std::shared_ptr<const kdp::ConditionalEmbedding> fit_from(
    const kdp::RunConfig& cfg, const kdp::TransitionSample& sample,
    const KernelChoice& kc, double lambda) {
  if (cfg.get_bool("embedding.sparse")) {
    return std::make_shared<const kdp::ConditionalEmbedding>(
        kdp::ConditionalEmbedding::fit_sparse(
            sample, kc.kcfg, kc.lcfg, lambda,
            cfg.get_double("embedding.cholesky_tol"),
            cfg.get_int("embedding.max_rank")));
  }
  return std::make_shared<const kdp::ConditionalEmbedding>(
      kdp::ConditionalEmbedding::fit(sample, kc.kcfg, kc.lcfg, lambda));
}

kdp::PlannerConfig planner_from(const kdp::RunConfig& cfg,
                                const std::string& env,
                                const kdp::PendulumSpec& pspec) {
  kdp::PlannerConfig pcfg;
  pcfg.gamma = cfg.get_double("planner.gamma");
  pcfg.max_iters = cfg.get_int("planner.max_iters");
  pcfg.threshold = cfg.get_double("planner.threshold");
  if (env == "pendulum") {
    pcfg.actions =
        kdp::pendulum_torque_grid(pspec, cfg.get_int("env.pendulum_actions"));
  } else {
    pcfg.actions = grid_actions_from(cfg);
  }
  pcfg.validate();
  return pcfg;
}

// Evaluation grid of (theta, omega) cell centers for pendulum outputs.
kdp::Mat pendulum_eval_coords(const kdp::PendulumSpec& spec, int res) {
  kdp::Mat coords(kdp::Index(res) * res, 2);
  const double pi = 3.14159265358979312;
  for (int ti = 0; ti < res; ++ti) {
    double theta = -pi + (2.0 * pi) * (ti + 0.5) / res;
    for (int wi = 0; wi < res; ++wi) {
      double omega = -spec.omega_max +
                     2.0 * spec.omega_max * (wi + 0.5) / res;
      coords(kdp::Index(ti) * res + wi, 0) = theta;
      coords(kdp::Index(ti) * res + wi, 1) = omega;
    }
  }
  return coords;
}

int cmd_sample(const kdp::RunConfig& cfg, const std::string& env, int m,
               std::uint64_t seed, const std::string& out) {
  if (env != "gridworld" && env != "pendulum") {
    throw std::invalid_argument("unknown environment: '" + env + "'");
  }
  if (m < 1) throw std::invalid_argument("--m must be >= 1");
  kdp::TransitionSample sample;
  if (env == "gridworld") {
    kdp::GridworldSpec spec = grid_spec_from(cfg);
    kdp::TabularMDP mdp =
        kdp::gridworld_mdp(spec, cfg.get_double("planner.gamma"));
    sample = kdp::gridworld_sample(mdp, spec, m, seed);
  } else {
    sample = kdp::pendulum_sample(pendulum_spec_from(cfg), m,
                                  cfg.get_int("env.pendulum_actions"), seed);
  }
  kdp::save_transitions_csv(out, sample);
  std::cout << "wrote " << m << " transitions to " << out << "\n";
  return kExitOk;
}

int cmd_plan(const kdp::RunConfig& cfg, const std::string& data,
             const std::string& out_dir, std::uint64_t seed) {
  const std::string& env = cfg.get_string("env.name");
  kdp::TransitionSample sample = kdp::load_transitions_csv(data);
  kdp::PendulumSpec pspec = pendulum_spec_from(cfg);
  KernelChoice kc = kernels_from(cfg, env, sample);
  double lambda = pick_lambda(cfg, sample, kc.kcfg, kc.lcfg, seed);
  auto emb = fit_from(cfg, sample, kc, lambda);
  kdp::PlannerConfig pcfg = planner_from(cfg, env, pspec);

  kdp::RewardFn reward;
  kdp::GridworldSpec gspec = grid_spec_from(cfg);
  if (env == "gridworld") {
    reward = [gspec](const kdp::Vec& x, double) {
      return kdp::gridworld_reward(gspec, x[0], x[1]);
    };
  } else {
    reward = [](const kdp::Vec& x, double) {
      return kdp::pendulum_reward(x[0], x[1]);
    };
  }

  auto est = std::make_shared<const kdp::ValueEstimate>(
      kdp::value_iteration(emb, reward, pcfg));
  kdp::GreedyPolicy greedy(est);

  kdp::Mat coords = env == "gridworld"
                        ? kdp::gridworld_state_coords(gspec)
                        : pendulum_eval_coords(
                              pspec, cfg.get_int("bench.eval_grid"));
  kdp::Vec values = est->values_at(coords);
  Eigen::VectorXi policy = greedy.action_indices(coords);

  std::filesystem::create_directories(out_dir);
  kdp::save_value_csv(out_dir + "/value.csv", coords, values);
  kdp::save_policy_csv(out_dir + "/policy.csv", coords, policy);
  int side = env == "gridworld" ? gspec.side : cfg.get_int("bench.eval_grid");
  kdp::Mat value_grid(side, side);
  Eigen::MatrixXi policy_grid(side, side);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      // gridworld rows are y-major; pendulum rows are theta-major with
      // omega varying fastest, so omega indexes the picture row either way
      kdp::Index s = env == "gridworld" ? kdp::Index(r) * side + c
                                        : kdp::Index(c) * side + r;
      value_grid(r, c) = values[s];
      policy_grid(r, c) = policy[s];
    }
  }
  kdp::save_value_heatmap_svg(out_dir + "/value.svg", value_grid);
  kdp::save_policy_map_svg(out_dir + "/policy.svg", policy_grid);

  std::cout << "lambda=" << lambda << " iterations=" << est->iterations()
            << " residual=" << est->final_error();
  if (env == "gridworld") {
    kdp::TabularMDP mdp = kdp::gridworld_mdp(gspec, pcfg.gamma);
    kdp::ExactViResult star = kdp::exact_value_iteration(mdp, 1e-12);
    double gap = (star.values - kdp::exact_policy_value(mdp, policy))
                     .cwiseAbs()
                     .maxCoeff();
    double value_err = (values - star.values).cwiseAbs().maxCoeff();
    std::cout << " gap_to_oracle=" << gap << " value_err=" << value_err;
  }
  std::cout << "\n";
  return kExitOk;
}

int cmd_eval(const kdp::RunConfig& cfg, const std::string& data,
             const std::string& policy_path, const std::string& out_dir,
             std::uint64_t seed) {
  const std::string& env = cfg.get_string("env.name");
  kdp::TransitionSample sample = kdp::load_transitions_csv(data);
  auto [pol_coords, pol_actions] = kdp::load_coord_value_csv(policy_path);
  if (pol_coords.rows() == 0) {
    throw std::invalid_argument("policy file has no rows: " + policy_path);
  }
  kdp::PendulumSpec pspec = pendulum_spec_from(cfg);
  KernelChoice kc = kernels_from(cfg, env, sample);
  double lambda = pick_lambda(cfg, sample, kc.kcfg, kc.lcfg, seed);
  auto emb = fit_from(cfg, sample, kc, lambda);
  kdp::PlannerConfig pcfg = planner_from(cfg, env, pspec);

  // Policy CSV rows hold an action index into the planner action list;
  // lookup snaps a query state to the nearest tabulated coordinate.
  std::vector<double> actions = pcfg.actions;
  kdp::Mat pc = pol_coords;
  kdp::Vec pa = pol_actions;
  kdp::PolicyFn policy = [pc, pa, actions](const kdp::Vec& x) {
    kdp::Index best = 0;
    double best_d = (pc.row(0).transpose() - x).squaredNorm();
    for (kdp::Index i = 1; i < pc.rows(); ++i) {
      double d = (pc.row(i).transpose() - x).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    long idx = std::lround(pa[best]);
    if (idx < 0 || idx >= static_cast<long>(actions.size())) {
      throw std::invalid_argument("policy file action index out of range: " +
                                  std::to_string(idx));
    }
    return actions[idx];
  };

  kdp::RewardFn reward;
  kdp::GridworldSpec gspec = grid_spec_from(cfg);
  if (env == "gridworld") {
    reward = [gspec](const kdp::Vec& x, double) {
      return kdp::gridworld_reward(gspec, x[0], x[1]);
    };
  } else {
    reward = [](const kdp::Vec& x, double) {
      return kdp::pendulum_reward(x[0], x[1]);
    };
  }

  kdp::ValueEstimate est = kdp::evaluate_policy(emb, policy, reward, pcfg);
  kdp::Mat coords = env == "gridworld"
                        ? kdp::gridworld_state_coords(gspec)
                        : pendulum_eval_coords(
                              pspec, cfg.get_int("bench.eval_grid"));
  kdp::Vec values = est.values_at(coords);

  std::filesystem::create_directories(out_dir);
  kdp::save_value_csv(out_dir + "/value.csv", coords, values);
  int side = env == "gridworld" ? gspec.side : cfg.get_int("bench.eval_grid");
  kdp::Mat value_grid(side, side);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      kdp::Index s = env == "gridworld" ? kdp::Index(r) * side + c
                                        : kdp::Index(c) * side + r;
      value_grid(r, c) = values[s];
    }
  }
  kdp::save_value_heatmap_svg(out_dir + "/value.svg", value_grid);

  std::cout << "lambda=" << lambda << " iterations=" << est.iterations()
            << " residual=" << est.final_error() << "\n";
  return kExitOk;
}

int cmd_bench(const kdp::RunConfig& cfg, const std::string& experiment,
              const std::string& out_dir, std::uint64_t seed) {
  if (experiment != "grid" && experiment != "pendulum" &&
      experiment != "value-estimation") {
    throw std::invalid_argument(
        "unknown experiment: '" + experiment +
        "' (expected grid | pendulum | value-estimation)");
  }
  kdp::BenchOptions opts;
  for (double s : cfg.get_list("bench.sizes")) {
    opts.sizes.push_back(static_cast<int>(s));
  }
  opts.seeds.clear();
  for (int i = 0; i < cfg.get_int("bench.seeds"); ++i) {
    opts.seeds.push_back(seed + static_cast<std::uint64_t>(i));
  }
  opts.gamma = cfg.get_double("planner.gamma");
  opts.threshold = cfg.get_double("planner.threshold");
  opts.max_iters = cfg.get_int("planner.max_iters");
  opts.lambda_grid = lambda_grid_from(cfg);
  opts.cv_folds = cfg.get_int("cv.folds");
  opts.cv_max_points = cfg.get_int("cv.max_points");
  opts.fixed_lambda = cfg.get_double("cv.lambda");
  opts.knn_fraction = cfg.get_double("kernel.knn_fraction");
  opts.grid_spec = grid_spec_from(cfg);
  opts.pendulum_spec = pendulum_spec_from(cfg);
  opts.pendulum_actions = cfg.get_int("env.pendulum_actions");
  opts.reference_resolution = cfg.get_int("bench.reference_resolution");
  opts.eval_grid = cfg.get_int("bench.eval_grid");
  opts.sparse = cfg.get_bool("embedding.sparse");
  opts.cholesky_tol = cfg.get_double("embedding.cholesky_tol");
  opts.max_rank = cfg.get_int("embedding.max_rank");
  opts.out_dir = out_dir;

  kdp::BenchRun run;
  if (experiment == "grid") {
    run = kdp::run_experiment1(opts);
  } else if (experiment == "pendulum") {
    run = kdp::run_experiment2(opts);
  } else {
    run = kdp::run_value_estimation(
        opts, cfg.get_string("env.name") == "pendulum"
                  ? kdp::BenchEnv::kPendulum
                  : kdp::BenchEnv::kGridworld);
  }
  std::filesystem::create_directories(out_dir);
  kdp::write_bench_csv(out_dir + "/cells.csv", run);
  kdp::write_summary_csv(out_dir + "/summary.csv", run);
  std::cout << "experiment=" << run.experiment
            << " cells=" << run.cells.size() << " out=" << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel-embedding transition models and approximate dynamic "
               "programming"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--config", config_path, "run configuration file");
  app.add_option("--seed", seed, "base random seed");
  app.add_option("--threads", threads, "worker threads (0 = all cores)");

  std::string env = "gridworld";
  int m = 0;
  std::string out;
  CLI::App* sc_sample = app.add_subcommand("sample", "draw a transition sample");
  sc_sample->fallthrough();
  sc_sample->add_option("--env", env, "gridworld | pendulum");
  sc_sample->add_option("--m", m, "sample size")->required();
  sc_sample->add_option("--out", out, "output CSV path")->required();

  std::string data;
  std::string out_dir = ".";
  CLI::App* sc_plan =
      app.add_subcommand("plan", "fit an embedding and run value iteration");
  sc_plan->fallthrough();
  sc_plan->add_option("--data", data, "transition CSV")->required();
  sc_plan->add_option("--out", out_dir, "output directory");

  std::string policy_path;
  std::string eval_data;
  std::string eval_out = ".";
  CLI::App* sc_eval =
      app.add_subcommand("eval", "fit an embedding and evaluate a policy");
  sc_eval->fallthrough();
  sc_eval->add_option("--data", eval_data, "transition CSV")->required();
  sc_eval->add_option("--policy", policy_path, "policy CSV (coords + action index)")
      ->required();
  sc_eval->add_option("--out", eval_out, "output directory");

  std::string experiment;
  std::string bench_out = ".";
  CLI::App* sc_bench = app.add_subcommand("bench", "run an experiment sweep");
  sc_bench->fallthrough();
  sc_bench->add_option("--experiment", experiment,
                       "grid | pendulum | value-estimation")
      ->required();
  sc_bench->add_option("--out-dir", bench_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    kdp::RunConfig cfg =
        config_path.empty() ? kdp::RunConfig() : kdp::RunConfig::load(config_path);
    if (config_path.empty()) cfg.validate();
    if (sc_sample->parsed()) {
      bool env_given = sc_sample->count("--env") > 0;
      return cmd_sample(cfg, env_given ? env : cfg.get_string("env.name"), m,
                        seed, out);
    }
    if (sc_plan->parsed()) return cmd_plan(cfg, data, out_dir, seed);
    if (sc_eval->parsed()) {
      return cmd_eval(cfg, eval_data, policy_path, eval_out, seed);
    }
    return cmd_bench(cfg, experiment, bench_out, seed);
  } catch (const kdp::UndefinedQueryError& e) {
    std::cerr << "error (numerical): " << e.what() << "\n";
    return kExitNumerical;
  } catch (const kdp::DegenerateDataError& e) {
    std::cerr << "error (numerical): " << e.what() << "\n";
    return kExitNumerical;
  } catch (const kdp::IoError& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
