#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mtnetopt {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Projection solver failure; carries the last iterate and KKT residual.
struct ProjectionFailure : NumericalError {
  ProjectionFailure(const std::string& what, Eigen::VectorXd iterate,
                    double residual)
      : NumericalError(what),
        last_iterate(std::move(iterate)),
        kkt_residual(residual) {}
  Eigen::VectorXd last_iterate;
  double kkt_residual = 0.0;
};

}  // namespace mtnetopt
