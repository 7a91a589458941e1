#include "kdp/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace kdp {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

using Schema = std::map<std::string, std::pair<std::string, std::string>>;

const Schema& schema_map() {
  static const Schema s = {
      {"kernel.state_bandwidth", {"1.0", "Gaussian bandwidth on states"}},
      {"kernel.action_bandwidth",
       {"1.0", "Gaussian bandwidth on real-valued actions"}},
      {"kernel.action_kind", {"delta", "action kernel: delta | gaussian"}},
      {"kernel.bandwidth_heuristic",
       {"fixed", "state bandwidth source: fixed | knn"}},
      {"kernel.knn_fraction",
       {"0.25", "neighbour index fraction for the knn heuristic"}},
      {"planner.gamma", {"0.9", "discount factor in [0,1)"}},
      {"planner.max_iters", {"1000", "max value-iteration sweeps"}},
      {"planner.threshold", {"1e-6", "sup-norm stopping threshold"}},
      {"planner.actions",
       {"4", "action count (ids 0..k-1) or explicit comma list"}},
      {"cv.folds", {"2", "cross-validation folds (>= 2)"}},
      {"cv.lambda", {"0", "fixed ridge parameter; 0 = cross-validate"}},
      {"cv.lambda_min", {"1e-6", "smallest grid value"}},
      {"cv.lambda_max", {"1.0", "largest grid value"}},
      {"cv.lambda_count", {"10", "log-spaced grid size"}},
      {"cv.max_points",
       {"800", "subsample cap for cross-validation; 0 = full sample"}},
      {"embedding.sparse",
       {"false", "use the incomplete-Cholesky low-rank path"}},
      {"embedding.cholesky_tol", {"1e-6", "residual-trace stopping tolerance"}},
      {"embedding.max_rank", {"0", "low-rank cap; 0 = unlimited"}},
      {"env.name", {"gridworld", "environment: gridworld | pendulum"}},
      {"env.grid_side", {"50", "gridworld side length"}},
      {"env.grid_success_prob", {"0.8", "gridworld action success rate"}},
      {"env.grid_reward_bandwidth",
       {"0", "gridworld reward bandwidth; 0 = side/10"}},
      {"env.pendulum_torque_max", {"5.0", "torque bound (N m)"}},
      {"env.pendulum_omega_max", {"7.0", "angular velocity bound"}},
      {"env.pendulum_dt", {"0.1", "Euler time step"}},
      {"env.pendulum_mass", {"1.0", "pendulum mass (kg)"}},
      {"env.pendulum_length", {"1.0", "pendulum length (m)"}},
      {"env.pendulum_gravity", {"9.81", "gravity (m/s^2)"}},
      {"env.pendulum_friction", {"0.05", "viscous friction coefficient"}},
      {"env.pendulum_actions", {"25", "torque grid size"}},
      {"bench.sizes", {"1000,5000", "sample sizes, comma list"}},
      {"bench.seeds", {"10", "number of seeds (0..k-1)"}},
      {"bench.reference_resolution",
       {"50", "pendulum reference grid resolution per dimension"}},
      {"bench.eval_grid", {"25", "evaluation grid resolution per dimension"}},
  };
  return s;
}

}  // namespace

const Schema& RunConfig::schema() { return schema_map(); }

RunConfig::RunConfig() {
  for (const auto& [key, def] : schema_map()) values_[key] = def.first;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!schema_map().count(key)) {
    throw std::invalid_argument("unknown configuration key: " + key);
  }
  values_[key] = value;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open configuration file: " + path);
  RunConfig cfg;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ": missing '=' at line " +
                                  std::to_string(lineno));
    }
    cfg.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

double RunConfig::get_double(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw std::invalid_argument("unknown configuration key: " + key);
  }
  try {
    std::size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("configuration key " + key +
                                " is not a number: '" + it->second + "'");
  }
}

int RunConfig::get_int(const std::string& key) const {
  double v = get_double(key);
  int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    throw std::invalid_argument("configuration key " + key +
                                " is not an integer");
  }
  return i;
}

const std::string& RunConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw std::invalid_argument("unknown configuration key: " + key);
  }
  return it->second;
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get_string(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("configuration key " + key +
                              " is not a boolean: '" + v + "'");
}

std::vector<double> RunConfig::get_list(const std::string& key) const {
  const std::string& v = get_string(key);
  std::vector<double> out;
  std::stringstream ss(v);
  std::string field;
  while (std::getline(ss, field, ',')) {
    field = trim(field);
    if (field.empty()) continue;
    try {
      out.push_back(std::stod(field));
    } catch (const std::exception&) {
      throw std::invalid_argument("configuration key " + key +
                                  " has a malformed list entry: '" + field +
                                  "'");
    }
  }
  if (out.empty()) {
    throw std::invalid_argument("configuration key " + key +
                                " is an empty list");
  }
  return out;
}

void RunConfig::validate() const {
  auto positive = [&](const std::string& key) {
    if (!(get_double(key) > 0.0)) {
      throw std::invalid_argument("configuration key " + key +
                                  " must be positive");
    }
  };
  positive("kernel.state_bandwidth");
  positive("kernel.action_bandwidth");
  positive("planner.threshold");
  positive("env.pendulum_torque_max");
  positive("env.pendulum_omega_max");
  positive("env.pendulum_dt");
  positive("env.pendulum_mass");
  positive("env.pendulum_length");
  positive("env.pendulum_gravity");
  positive("embedding.cholesky_tol");

  double gamma = get_double("planner.gamma");
  if (!(gamma >= 0.0) || gamma >= 1.0) {
    throw std::invalid_argument("planner.gamma must be in [0,1)");
  }
  if (get_int("planner.max_iters") < 1) {
    throw std::invalid_argument("planner.max_iters must be >= 1");
  }
  double frac = get_double("kernel.knn_fraction");
  if (!(frac > 0.0) || frac > 1.0) {
    throw std::invalid_argument("kernel.knn_fraction must be in (0,1]");
  }
  const std::string& kind = get_string("kernel.action_kind");
  if (kind != "delta" && kind != "gaussian") {
    throw std::invalid_argument("kernel.action_kind must be delta or gaussian");
  }
  const std::string& heur = get_string("kernel.bandwidth_heuristic");
  if (heur != "fixed" && heur != "knn") {
    throw std::invalid_argument(
        "kernel.bandwidth_heuristic must be fixed or knn");
  }
  const std::string& env = get_string("env.name");
  if (env != "gridworld" && env != "pendulum") {
    throw std::invalid_argument("env.name must be gridworld or pendulum, got '" +
                                env + "'");
  }
  if (get_int("cv.folds") < 2) {
    throw std::invalid_argument("cv.folds must be >= 2");
  }
  if (get_double("cv.lambda") < 0.0) {
    throw std::invalid_argument("cv.lambda must be >= 0");
  }
  if (get_int("cv.lambda_count") < 1) {
    throw std::invalid_argument("cv.lambda_count must be >= 1");
  }
  if (get_int("env.grid_side") < 2) {
    throw std::invalid_argument("env.grid_side must be >= 2");
  }
  double ps = get_double("env.grid_success_prob");
  if (!(ps > 0.0) || ps > 1.0) {
    throw std::invalid_argument("env.grid_success_prob must be in (0,1]");
  }
  if (get_int("env.pendulum_actions") < 1) {
    throw std::invalid_argument("env.pendulum_actions must be >= 1");
  }
  if (get_int("bench.reference_resolution") < 25) {
    throw std::invalid_argument("bench.reference_resolution must be >= 25");
  }
  if (get_int("bench.eval_grid") < 1) {
    throw std::invalid_argument("bench.eval_grid must be >= 1");
  }
  if (get_int("bench.seeds") < 1) {
    throw std::invalid_argument("bench.seeds must be >= 1");
  }
  get_list("bench.sizes");
  get_list("planner.actions");
  bool fixed_reward_bw = get_double("env.grid_reward_bandwidth") < 0.0;
  if (fixed_reward_bw) {
    throw std::invalid_argument("env.grid_reward_bandwidth must be >= 0");
  }
}

}  // namespace kdp
