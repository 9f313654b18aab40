#include "mtnetopt/projection.hpp"

#include <cmath>

namespace mtnetopt {

Eigen::VectorXd project_nonneg(const Eigen::VectorXd& v, double floor) {
  return v.cwiseMax(floor);
}

ConvexProjection project_convex(const Eigen::VectorXd& v,
                                const ConstraintSet& constraints, double tol,
                                int max_iter) {
  const int m = constraints.count;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd x = v;

  if (m == 0) return {x, lambda, 0};

  // Dual ascent: x(lambda) = argmin_x 1/2||x-v||^2 + lambda^T w(x), found by
  // the fixed point x = v - J(x)^T lambda; lambda <- max(0, lambda + s w(x)).
  // The step is scaled by the largest row norm of J (Lipschitz estimate).
  for (int it = 0; it < max_iter; ++it) {
    // inner fixed point for x given lambda (exact for affine constraints)
    for (int inner = 0; inner < 50; ++inner) {
      const Eigen::MatrixXd J = constraints.gradients(x);
      const Eigen::VectorXd x_next = v - J.transpose() * lambda;
      const double moved = (x_next - x).norm();
      x = x_next;
      if (moved <= 0.1 * tol) break;
    }
    const Eigen::VectorXd w = constraints.residuals(x);
    const Eigen::MatrixXd J = constraints.gradients(x);

    double row_norm_sq = 1e-12;
    for (int i = 0; i < m; ++i)
      row_norm_sq = std::max(row_norm_sq, J.row(i).squaredNorm());
    const double step = 1.0 / row_norm_sq;

    // KKT residual: stationarity + complementarity + primal feasibility
    double kkt = (x - v + J.transpose() * lambda).lpNorm<Eigen::Infinity>();
    for (int i = 0; i < m; ++i) {
      kkt = std::max(kkt, std::abs(lambda[i] * w[i]));
      kkt = std::max(kkt, w[i]);  // violation
      kkt = std::max(kkt, -lambda[i]);
    }
    if (kkt <= tol) return {x, lambda, it};

    lambda = (lambda + step * w).cwiseMax(0.0);
  }

  const Eigen::VectorXd w = constraints.residuals(x);
  const Eigen::MatrixXd J = constraints.gradients(x);
  double kkt = (x - v + J.transpose() * lambda).lpNorm<Eigen::Infinity>();
  for (int i = 0; i < m; ++i) {
    kkt = std::max(kkt, std::abs(lambda[i] * w[i]));
    kkt = std::max(kkt, w[i]);
  }
  throw ProjectionFailure("project_convex: dual ascent did not converge", x, kkt);
}

}  // namespace mtnetopt
