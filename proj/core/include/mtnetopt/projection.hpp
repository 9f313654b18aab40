#pragma once

#include <functional>

#include "mtnetopt/errors.hpp"

#include <Eigen/Dense>

namespace mtnetopt {

/// Componentwise max(v, floor). The nonnegative orthant is floor = 0; rate
/// components use the positive rate floor.
Eigen::VectorXd project_nonneg(const Eigen::VectorXd& v, double floor = 0.0);

/// Convex constraint set given by residual/gradient callbacks:
/// residuals(x)[i] <= 0, gradients(x) row i = grad of residual i.
struct ConstraintSet {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residuals;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> gradients;
  int count = 0;
};

struct ConvexProjection {
  Eigen::VectorXd point;
  Eigen::VectorXd multipliers;
  int iterations = 0;
};

/// Euclidean projection min 1/2||x - v||^2 s.t. residuals(x) <= 0, solved by
/// dual ascent on the KKT system to `tol` (default 1e-9). Returns the point
/// and the KKT multipliers, from which reflection terms are reconstructed as
/// z = (projection - input)/dt. Throws ProjectionFailure on non-convergence.
ConvexProjection project_convex(const Eigen::VectorXd& v,
                                const ConstraintSet& constraints,
                                double tol = 1e-9, int max_iter = 100000);

}  // namespace mtnetopt
