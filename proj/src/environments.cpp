#include "kdp/environments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace kdp {

namespace {

constexpr double kPi = std::numbers::pi;

constexpr int kDx[4] = {0, 1, 0, -1};  // north, east, south, west
constexpr int kDy[4] = {1, 0, -1, 0};

double wrap_angle(double theta) {
  double w = std::remainder(theta, 2.0 * kPi);
  return w;  // in (-pi, pi]
}

}  // namespace

GridworldSpec GridworldSpec::with_side(int n) {
  GridworldSpec spec;
  spec.side = n;
  spec.reward_bandwidth = static_cast<double>(n) / 10.0;
  return spec;
}

void GridworldSpec::validate() const {
  if (side < 2) throw std::invalid_argument("gridworld: side must be >= 2");
  if (!(success_prob > 0.0) || success_prob > 1.0) {
    throw std::invalid_argument("gridworld: success_prob must be in (0,1]");
  }
  if (!(reward_bandwidth > 0.0)) {
    throw std::invalid_argument("gridworld: reward bandwidth must be positive");
  }
}

double gridworld_reward(const GridworldSpec& spec, double x, double y) {
  double cx = (spec.side - 1) / 2.0;
  double cy = (spec.side - 1) / 2.0;
  double sq = (x - cx) * (x - cx) + (y - cy) * (y - cy);
  return std::exp(-sq / (2.0 * spec.reward_bandwidth * spec.reward_bandwidth));
}

Mat gridworld_state_coords(const GridworldSpec& spec) {
  spec.validate();
  const int n = spec.side;
  Mat coords(n * n, 2);
  for (int s = 0; s < n * n; ++s) {
    coords(s, 0) = s % n;  // x
    coords(s, 1) = s / n;  // y
  }
  return coords;
}

TabularMDP gridworld_mdp(const GridworldSpec& spec, double gamma) {
  spec.validate();
  const int n = spec.side;
  const Index ns = Index(n) * n;
  TabularMDP mdp;
  mdp.gamma = gamma;
  mdp.rewards.resize(ns, 4);
  mdp.transitions.assign(4, Mat::Zero(ns, ns));

  const double noise = (1.0 - spec.success_prob) / 4.0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      Index s = Index(y) * n + x;
      double r = gridworld_reward(spec, x, y);
      for (int a = 0; a < 4; ++a) {
        mdp.rewards(s, a) = r;
        for (int e = 0; e < 4; ++e) {
          double p = noise + (e == a ? spec.success_prob : 0.0);
          int tx = x + kDx[e];
          int ty = y + kDy[e];
          Index target = s;  // blocked moves stay in place
          if (tx >= 0 && tx < n && ty >= 0 && ty < n) {
            target = Index(ty) * n + tx;
          }
          mdp.transitions[a](s, target) += p;
        }
      }
    }
  }
  return mdp;
}

TransitionSample sample_mdp(const TabularMDP& mdp, const Mat& coords, int m,
                            std::uint64_t seed) {
  mdp.validate();
  if (m < 1) throw std::invalid_argument("sample_mdp: m must be >= 1");
  if (coords.rows() != mdp.num_states()) {
    throw std::invalid_argument("sample_mdp: one coordinate row per state");
  }
  const Index ns = mdp.num_states();
  const Index na = mdp.num_actions();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> state_dist(0, ns - 1);
  std::uniform_int_distribution<Index> action_dist(0, na - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  TransitionSample sample;
  sample.states.resize(m, coords.cols());
  sample.actions.resize(m);
  sample.next_states.resize(m, coords.cols());
  for (int i = 0; i < m; ++i) {
    Index s = state_dist(rng);
    Index a = action_dist(rng);
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

TransitionSample exhaustive_sample(const TabularMDP& mdp, const Mat& coords,
                                   int per_pair) {
  mdp.validate();
  if (per_pair < 1) {
    throw std::invalid_argument("exhaustive_sample: per_pair must be >= 1");
  }
  if (coords.rows() != mdp.num_states()) {
    throw std::invalid_argument("exhaustive_sample: one coordinate row per state");
  }
  const Index ns = mdp.num_states();
  const Index na = mdp.num_actions();
  std::vector<std::array<Index, 3>> triples;
  for (Index a = 0; a < na; ++a) {
    for (Index s = 0; s < ns; ++s) {
      for (Index t = 0; t < ns; ++t) {
        long count = std::lround(mdp.transitions[a](s, t) * per_pair);
        for (long c = 0; c < count; ++c) triples.push_back({s, a, t});
      }
    }
  }
  TransitionSample sample;
  sample.states.resize(Index(triples.size()), coords.cols());
  sample.actions.resize(Index(triples.size()));
  sample.next_states.resize(Index(triples.size()), coords.cols());
  for (Index i = 0; i < Index(triples.size()); ++i) {
    sample.states.row(i) = coords.row(triples[i][0]);
    sample.actions[i] = static_cast<double>(triples[i][1]);
    sample.next_states.row(i) = coords.row(triples[i][2]);
  }
  return sample;
}

TransitionSample gridworld_sample(const TabularMDP& mdp,
                                  const GridworldSpec& spec, int m,
                                  std::uint64_t seed) {
  return sample_mdp(mdp, gridworld_state_coords(spec), m, seed);
}

void PendulumSpec::validate() const {
  if (!(torque_max > 0.0) || !(omega_max > 0.0) || !(dt > 0.0) ||
      !(mass > 0.0) || !(length > 0.0) || !(gravity > 0.0) ||
      !(friction >= 0.0)) {
    throw std::invalid_argument("pendulum: nonpositive physical parameter");
  }
}

std::pair<double, double> pendulum_step(double theta, double omega,
                                        double torque,
                                        const PendulumSpec& spec) {
  spec.validate();
  if (!std::isfinite(theta) || !std::isfinite(omega) ||
      !std::isfinite(torque)) {
    throw std::invalid_argument("pendulum_step: non-finite input");
  }
  double u = std::clamp(torque, -spec.torque_max, spec.torque_max);
  double inertia = spec.mass * spec.length * spec.length;
  double accel = (u - spec.friction * omega +
                  spec.mass * spec.gravity * spec.length * std::sin(theta)) /
                 inertia;
  double theta_next = wrap_angle(theta + spec.dt * omega);
  double omega_next =
      std::clamp(omega + spec.dt * accel, -spec.omega_max, spec.omega_max);
  return {theta_next, omega_next};
}

double pendulum_reward(double theta, double omega) {
  return std::exp(-theta * theta - 0.2 * omega * omega);
}

std::vector<double> pendulum_torque_grid(const PendulumSpec& spec, int count) {
  spec.validate();
  if (count < 1) {
    throw std::invalid_argument("pendulum_torque_grid: count must be >= 1");
  }
  std::vector<double> torques(count);
  if (count == 1) {
    torques[0] = 0.0;
    return torques;
  }
  for (int i = 0; i < count; ++i) {
    torques[i] = -spec.torque_max +
                 2.0 * spec.torque_max * i / static_cast<double>(count - 1);
  }
  return torques;
}

TransitionSample pendulum_sample(const PendulumSpec& spec, int m,
                                 int action_count, std::uint64_t seed) {
  spec.validate();
  if (m < 1) throw std::invalid_argument("pendulum_sample: m must be >= 1");
  std::vector<double> torques = pendulum_torque_grid(spec, action_count);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> theta_dist(-kPi, kPi);
  std::uniform_real_distribution<double> omega_dist(-spec.omega_max,
                                                    spec.omega_max);
  std::uniform_int_distribution<int> torque_dist(0, action_count - 1);

  TransitionSample sample;
  sample.states.resize(m, 2);
  sample.actions.resize(m);
  sample.next_states.resize(m, 2);
  for (int i = 0; i < m; ++i) {
    double theta = theta_dist(rng);
    double omega = omega_dist(rng);
    double u = torques[torque_dist(rng)];
    auto [tn, on] = pendulum_step(theta, omega, u, spec);
    sample.states(i, 0) = theta;
    sample.states(i, 1) = omega;
    sample.actions[i] = u;
    sample.next_states(i, 0) = tn;
    sample.next_states(i, 1) = on;
  }
  return sample;
}

Index PendulumReference::state_index(double theta, double omega) const {
  const int res = resolution;
  const double th_step = 2.0 * kPi / res;
  const double om_step = 2.0 * spec.omega_max / res;
  long ti = static_cast<long>(std::floor((wrap_angle(theta) + kPi) / th_step));
  ti = ((ti % res) + res) % res;  // angle is periodic
  long wi = static_cast<long>(std::floor((omega + spec.omega_max) / om_step));
  wi = std::clamp<long>(wi, 0, res - 1);
  return static_cast<Index>(ti) * res + wi;
}

Vec PendulumReference::read_grid(int eval_res) const {
  Mat g = grid_coords(eval_res);
  Vec out(g.rows());
  for (Index i = 0; i < g.rows(); ++i) {
    out[i] = solution.values[state_index(g(i, 0), g(i, 1))];
  }
  return out;
}

Mat PendulumReference::grid_coords(int eval_res) const {
  if (eval_res < 1) {
    throw std::invalid_argument("grid_coords: eval_res must be >= 1");
  }
  Mat g(Index(eval_res) * eval_res, 2);
  const double th_step = 2.0 * kPi / eval_res;
  const double om_step = 2.0 * spec.omega_max / eval_res;
  for (int ti = 0; ti < eval_res; ++ti) {
    for (int wi = 0; wi < eval_res; ++wi) {
      Index s = Index(ti) * eval_res + wi;
      g(s, 0) = -kPi + (ti + 0.5) * th_step;
      g(s, 1) = -spec.omega_max + (wi + 0.5) * om_step;
    }
  }
  return g;
}

PendulumReference pendulum_reference_value(const PendulumSpec& spec,
                                           int resolution, double gamma,
                                           int action_count) {
  spec.validate();
  if (resolution < 25) {
    throw std::invalid_argument(
        "pendulum_reference_value: resolution must be >= 25");
  }
  PendulumReference ref;
  ref.spec = spec;
  ref.resolution = resolution;
  ref.torques = pendulum_torque_grid(spec, action_count);
  ref.coords = ref.grid_coords(resolution);

  const Index ns = ref.coords.rows();
  const Index na = static_cast<Index>(ref.torques.size());
  ref.mdp.gamma = gamma;
  ref.mdp.successors.resize(ns, na);
  ref.mdp.rewards.resize(ns, na);
  for (Index s = 0; s < ns; ++s) {
    double theta = ref.coords(s, 0);
    double omega = ref.coords(s, 1);
    double r = pendulum_reward(theta, omega);
    for (Index a = 0; a < na; ++a) {
      ref.mdp.rewards(s, a) = r;
      auto [tn, on] = pendulum_step(theta, omega, ref.torques[a], spec);
      ref.mdp.successors(s, a) = static_cast<int>(ref.state_index(tn, on));
    }
  }
  ref.solution = exact_value_iteration(ref.mdp, gamma > 0.0 ? 1e-9 : 1e-6);
  return ref;
}

}  // namespace kdp
