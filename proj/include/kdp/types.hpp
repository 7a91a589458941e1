#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace kdp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

// Data that cannot support the requested computation (e.g. a bandwidth
// heuristic on a point set with zero spread).
class DegenerateDataError : public std::runtime_error {
 public:
  explicit DegenerateDataError(const std::string& msg)
      : std::runtime_error(msg) {}
};

// Query with all-zero raw embedding weights: the normalized estimator is
// undefined there. sample_index is >= 0 when the query was one of the
// sampled next-states inside a planner sweep.
class UndefinedQueryError : public std::runtime_error {
 public:
  explicit UndefinedQueryError(const std::string& msg, long sample_index = -1)
      : std::runtime_error(msg), sample_index_(sample_index) {}
  long sample_index() const { return sample_index_; }

 private:
  long sample_index_;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace kdp
