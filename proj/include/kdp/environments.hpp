#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "kdp/embedding.hpp"
#include "kdp/oracle.hpp"
#include "kdp/types.hpp"

namespace kdp {

// 2-d navigation room with a Gaussian reward at the center. Actions
// north/east/south/west; an action executes as chosen with probability
// success_prob and as a uniformly random direction otherwise.
struct GridworldSpec {
  int side = 50;
  double reward_bandwidth = 5.0;  // side / 10 by default
  double success_prob = 0.8;

  static GridworldSpec with_side(int n);
  void validate() const;
};

inline constexpr int kGridActionNorth = 0;
inline constexpr int kGridActionEast = 1;
inline constexpr int kGridActionSouth = 2;
inline constexpr int kGridActionWest = 3;

TabularMDP gridworld_mdp(const GridworldSpec& spec, double gamma);

// State coordinates (x, y) per state index, row s = (s % n, s / n).
Mat gridworld_state_coords(const GridworldSpec& spec);

double gridworld_reward(const GridworldSpec& spec, double x, double y);

// m i.i.d. triples with (state, action) uniform and next state drawn
// from the MDP rows; coords maps state indices to state vectors.
TransitionSample sample_mdp(const TabularMDP& mdp, const Mat& coords, int m,
                            std::uint64_t seed);

// Deterministically allocated sample with per-pair successor counts
// equal to round(P * per_pair): the empirical transition frequencies
// match the MDP exactly when the probabilities are multiples of
// 1/per_pair.
TransitionSample exhaustive_sample(const TabularMDP& mdp, const Mat& coords,
                                   int per_pair);

TransitionSample gridworld_sample(const TabularMDP& mdp,
                                  const GridworldSpec& spec, int m,
                                  std::uint64_t seed);

// Under-actuated pendulum, angle theta measured from upright so the
// reward exp(-theta^2 - 0.2 omega^2) peaks at the inverted position.
struct PendulumSpec {
  double torque_max = 5.0;
  double omega_max = 7.0;
  double dt = 0.1;
  double mass = 1.0;
  double length = 1.0;
  double gravity = 9.81;
  double friction = 0.05;

  void validate() const;
};

// One Euler step; theta wrapped to [-pi, pi], omega clamped.
std::pair<double, double> pendulum_step(double theta, double omega,
                                        double torque,
                                        const PendulumSpec& spec);

double pendulum_reward(double theta, double omega);

// Evenly spaced torques over [-torque_max, torque_max], both endpoints
// included.
std::vector<double> pendulum_torque_grid(const PendulumSpec& spec, int count);

TransitionSample pendulum_sample(const PendulumSpec& spec, int m,
                                 int action_count, std::uint64_t seed);

// Fine-grid dynamic-programming reference for the deterministic
// pendulum dynamics.
struct PendulumReference {
  PendulumSpec spec;
  int resolution = 0;
  std::vector<double> torques;
  DeterministicMDP mdp;
  Mat coords;  // state index -> (theta, omega) cell center
  ExactViResult solution;

  Index state_index(double theta, double omega) const;  // nearest cell
  // Reference values read off at an eval_res x eval_res grid of cell
  // centers, row-major over (theta, omega).
  Vec read_grid(int eval_res) const;
  Mat grid_coords(int eval_res) const;
};

PendulumReference pendulum_reference_value(const PendulumSpec& spec,
                                           int resolution, double gamma,
                                           int action_count);

}  // namespace kdp
