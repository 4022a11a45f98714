#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace kmtrack {

/// Iterate/state vector in R^m.
using Point = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Throws if any entry of x is NaN or infinite. `who` names the producing map
/// in the error message.
inline void require_finite(const Point& x, const std::string& who) {
  if (!x.allFinite()) {
    throw std::runtime_error("non-finite output from " + who);
  }
}

inline void require_same_dim(const Point& x, const Point& y, const std::string& where) {
  if (x.size() != y.size()) {
    throw std::invalid_argument(where + ": dimension mismatch (" +
                                std::to_string(x.size()) + " vs " +
                                std::to_string(y.size()) + ")");
  }
}

/// Relative closeness with an absolute floor of 1.
inline bool approx_equal(double a, double b, double rel_tol = 1e-9) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= rel_tol * scale;
}

}  // namespace kmtrack
