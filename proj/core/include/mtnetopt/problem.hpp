#pragma once

#include <vector>

#include "mtnetopt/topology.hpp"

#include <Eigen/Dense>

namespace mtnetopt {

/// One MUD MAC constraint: a nonempty subset S of the inbound links of a
/// receiving node m.
struct MacConstraint {
  int receiver = 0;
  std::vector<int> link_idx;  // 0-based link indices in S
};

/// Rates are kept above a strictly positive floor so the log barrier stays
/// finite under projection.
constexpr double kRateFloor = 1e-6;

/// Problem 4 instance: proportional-fair utility sum log r_j - V) sum p_k
/// over the MUD MAC region, flow balance substituted through the routes.
struct RelayProblem {
  Topology topo;
  double V = 1.0;
  double r_floor = kRateFloor;

  std::vector<MacConstraint> constraints;  // all (m, S), size W
  // n_count(j, i): number of links in S_j that carry flow i.
  Eigen::MatrixXd n_count;

  std::size_t num_links() const { return topo.num_links(); }
  std::size_t num_flows() const { return topo.num_flows(); }
  std::size_t num_constraints() const { return constraints.size(); }
  // inner variable dimension: powers + multipliers
  std::size_t dim_x() const { return num_links() + num_constraints(); }

  /// Enumerates all 2^|L+(m)|-1 subsets per receiver. Receivers with more
  /// than 12 inbound links are rejected.
  static RelayProblem build(const Topology& topo, double V);
};

struct PrimalDualPoint {
  Eigen::VectorXd p;       // per-link powers >= 0
  Eigen::VectorXd lambda;  // per-constraint multipliers >= 0
  Eigen::VectorXd r;       // per-flow rates >= r_floor

  Eigen::VectorXd x() const;  // stacked (p, lambda)
  static PrimalDualPoint from_x(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& r, std::size_t n_links);
};

/// Effective squared channel per link, |h_k|^2 = gain * (h_l_k)^2 * |h_s_k|^2,
/// together with the partials used by the compensation estimators. The
/// Lagrangian depends on h only through H, and h^s-derivatives are taken with
/// respect to the magnitudes |h_s_k|.
struct EffectiveChannel {
  Eigen::VectorXd H;       // |h_k|^2, > 0
  Eigen::VectorXd dH_dm;   // d H_k / d |h_s_k|
  Eigen::VectorXd dH_dhl;  // d H_k / d h_l_k

  // Optional per-constraint gains (row j used by constraint j), for the
  // scenario-approximation solves where each MAC constraint is calibrated on
  // its own fading sample. Channel partials stay on the base H.
  Eigen::MatrixXd H_per_constraint;

  double gain_for(std::size_t j, int k) const {
    return H_per_constraint.size()
               ? H_per_constraint(static_cast<Eigen::Index>(j), k)
               : H[k];
  }

  static EffectiveChannel from_parts(const OuFading& fading,
                                     const PathLoss& pl, double gain);
  /// For tests and synthetic instances: H given directly with unit coupling
  /// (dH_dm = dH_dhl = H-consistent partials assuming m = hl = 1, gain = H).
  static EffectiveChannel from_gains(const Eigen::VectorXd& H);
};

/// MAC residuals g_j = sum_{k in S_j} c_k(r) - log(1 + sum_{k in S_j} H_k p_k).
/// Feasible iff all g <= 0.
Eigen::VectorXd mac_residuals(const Eigen::VectorXd& r, const Eigen::VectorXd& p,
                              const EffectiveChannel& h,
                              const RelayProblem& problem);

/// sum_j log r_j - V * sum_k p_k. Throws std::domain_error if any r_j <= 0.
double objective(const Eigen::VectorXd& p, const Eigen::VectorXd& r,
                 const RelayProblem& problem);

struct LagrangianEval {
  double L = 0.0;
  Eigen::VectorXd dL_dp;
  Eigen::VectorXd g;      // constraint residuals; dL/dlambda = -g
  Eigen::VectorXd dL_dr;  // gradient of the flow-substituted Lagrangian
};

/// Lagrangian of Problem 4 with flow balance substituted, and its analytic
/// first derivatives.
LagrangianEval lagrangian_and_grads(const PrimalDualPoint& point,
                                    const EffectiveChannel& h,
                                    const RelayProblem& problem);

/// Analytic Jacobian blocks of the inner KKT map
///   G(p, lambda; r, h) = [dL/dp ; {lambda_j g_j}]
/// and the pieces of the outer estimator K = dL1/dr.
struct KktDerivatives {
  Eigen::MatrixXd G_x;    // (N+W) x (N+W), wrt (p, lambda)
  Eigen::MatrixXd G_hs;   // (N+W) x N, wrt |h_s| magnitudes
  Eigen::MatrixXd G_hl;   // (N+W) x N, wrt h_l
  Eigen::MatrixXd G_y;    // (N+W) x F, wrt r
  Eigen::MatrixXd K_r;    // F x F, dK/dr at fixed (p, lambda) = -diag(1/r^2)
  Eigen::MatrixXd K_x;    // F x (N+W), dK/d(p,lambda) = [0 | -n_count^T]
};

KktDerivatives second_derivatives(const PrimalDualPoint& point,
                                  const EffectiveChannel& h,
                                  const RelayProblem& problem);

/// The primal-dual iteration map G(x) = (dL/dp, g) and its Jacobians. The
/// multiplier rows here are the raw residuals (dual ascent direction), as
/// opposed to the complementarity rows {lambda_j g_j} of the KKT map; the
/// iteration form is what the mean dynamic systems linearize.
Eigen::VectorXd iteration_map(const PrimalDualPoint& point,
                              const EffectiveChannel& h,
                              const RelayProblem& problem);

struct IterationJacobians {
  Eigen::MatrixXd M_x;   // (N+W) x (N+W): [[Lpp, Lplam], [-Lplam^T, 0]]
  Eigen::MatrixXd M_hs;  // (N+W) x N, wrt |h_s| magnitudes
  Eigen::MatrixXd M_y;   // (N+W) x F
};

IterationJacobians iteration_jacobians(const PrimalDualPoint& point,
                                       const EffectiveChannel& h,
                                       const RelayProblem& problem);

/// Outer-map sensitivities with the inner stationary point substituted:
///   That_y  = K_r + K_x * dxhat/dr,    dxhat/dr  = -(G_x+delta I)^-1 G_y
///   That_hl = K_x * dxhat/dh^l,        dxhat/dh^l = -(G_x+delta I)^-1 G_hl
/// Multipliers at or below active_tol are dropped from the solve.
struct OuterSensitivities {
  Eigen::MatrixXd That_y;   // F x F
  Eigen::MatrixXd That_hl;  // F x N
};

OuterSensitivities outer_sensitivities(const PrimalDualPoint& point,
                                       const EffectiveChannel& h,
                                       const RelayProblem& problem,
                                       double tikhonov_delta,
                                       double active_tol);

/// Solves (G_x_reduced + delta I) u = rhs_reduced where the reduction keeps
/// all power rows and multipliers above active_tol; inactive components of u
/// are zero. Throws NumericalError on a conditioning failure.
Eigen::MatrixXd solve_kkt_system(const KktDerivatives& d,
                                 const Eigen::VectorXd& lambda,
                                 const Eigen::MatrixXd& rhs, double delta,
                                 double active_tol);

}  // namespace mtnetopt
