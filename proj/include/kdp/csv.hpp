#pragma once

#include <string>
#include <vector>

#include "kdp/embedding.hpp"
#include "kdp/oracle.hpp"
#include "kdp/types.hpp"

namespace kdp {

// Transition CSV: header x_0..x_{d-1}, a, xp_0..xp_{d-1}; one row per
// triple, '.' decimal separator. Malformed rows raise
// std::invalid_argument naming the line number.
void save_transitions_csv(const std::string& path,
                          const TransitionSample& sample);
TransitionSample load_transitions_csv(const std::string& path);

// Tabular MDP triple files: transitions.csv (a,x,xp,prob) and
// rewards.csv (x,a,r); gamma travels in the run configuration.
void save_tabular_mdp(const std::string& transitions_path,
                      const std::string& rewards_path, const TabularMDP& mdp);
TabularMDP load_tabular_mdp(const std::string& transitions_path,
                            const std::string& rewards_path, double gamma);

// State coordinates plus one value column.
void save_value_csv(const std::string& path, const Mat& coords,
                    const Vec& values);
// State coordinates plus one action-index column.
void save_policy_csv(const std::string& path, const Mat& coords,
                     const Eigen::VectorXi& actions);
// Loads coords (all but last column) and the last column.
std::pair<Mat, Vec> load_coord_value_csv(const std::string& path);

}  // namespace kdp
