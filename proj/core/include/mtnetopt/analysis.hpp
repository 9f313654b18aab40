#pragma once

#include <functional>
#include <vector>

#include "mtnetopt/oracle.hpp"
#include "mtnetopt/problem.hpp"
#include "mtnetopt/solver.hpp"

#include <Eigen/Dense>

namespace mtnetopt {

/// Convergence-rate parameters and norm/Lipschitz bounds feeding the
/// stability condition and the tracking-error bound.
struct StabilityParams {
  double alpha_x = 0.0;
  double alpha_y = 0.0;
  double alpha = 0.0;   // joint-map definiteness
  double l_x = 0.0;     // ||K_x x|| <= l_x ||x||
  double l_y = 0.0;     // Lipschitz constant of K in y
  double v_H = 0.0;     // ||G_x^-1 G_hs||
  double v_y = 0.0;     // ||G_x^-1 G_y||
  double varpi = 0.0;   // Lipschitz constant of dpsi/dh_l
  double sigma_bar = 0.0;  // time-averaged tr cov K
  int N = 0;            // CSI dimension
};

/// Local convergence rates at a point. alpha_x_sym is the literal
/// -lambda_max(1/2 (M_L + M_L^T)); with multiplier rows present the symmetric
/// part has an exactly zero lower-right block, so this value is 0 at every
/// KKT point. The primal-block rate and the spectral abscissa are reported
/// alongside as the meaningful positive rates.
struct LocalRates {
  double alpha_x_sym = 0.0;
  double alpha_x_primal = 0.0;
  double alpha_x_abscissa = 0.0;
  double alpha_y = 0.0;
  double alpha_joint = 0.0;
};

LocalRates local_rates(const PrimalDualPoint& point, const EffectiveChannel& h,
                       const RelayProblem& problem);

/// A state snapshot for parameter estimation over a confident domain.
struct StateSample {
  PrimalDualPoint point;
  EffectiveChannel chan;
  Eigen::VectorXd h_l;
};

enum class AlphaMode { Symmetric, PrimalBlock, Abscissa };

struct EstimateConfig {
  AlphaMode alpha_mode = AlphaMode::Symmetric;
  int covariance_samples = 2048;
  int reduced_outer_samples = 256;  // SAA size for psi/varpi estimation
  double fd_step_hl = 1e-4;
  double tikhonov_delta = 1e-8;
  double active_set_tol = 1e-6;
};

/// Sample infima/suprema of the local quantities over the given states.
/// varpi and sigma_bar are estimated at the first and last distinct h_l.
StabilityParams estimate_params(const RelayProblem& problem,
                                const std::vector<StateSample>& samples,
                                double gain, const EstimateConfig& cfg,
                                const OracleConfig& oracle_cfg,
                                std::uint64_t seed);

struct StabilityVerdict {
  double margin = 0.0;
  bool stable = false;
};

/// Sufficient stability condition:
///   margin = alpha N_s (8 alpha_x - (a_H tau / (N_s gamma)) v_H^2)
///            - 2 l_x^2 - 2 l_y^2 v_y^2 > 0.
StabilityVerdict stability_condition(const StabilityParams& params, double a_H,
                                     double tau, int N_s, double gamma);

/// The 5x5 symmetric drift matrix of the upper-bound quadratic form.
struct DriftMatrixA {
  Eigen::Matrix<double, 5, 5> A;
  std::array<double, 5> leading_minors() const;
};

DriftMatrixA drift_matrix(const StabilityParams& params, double a_H, double tau,
                          int N_s, double gamma);

struct ErrorBound {
  double rho = 0.0;       // |det(N_s A)|
  double eta = 0.0;       // 2^{3/2} ||N_s A||_F
  double C_b = 0.0;
  double C = 0.0;
  double bound = 0.0;     // (eta/rho) (tau sigma_bar + C)
};

/// Tracking-error upper bound; requires the stability verdict to hold,
/// otherwise throws NumericalError pointing at stability_condition.
ErrorBound error_bound(const StabilityParams& params, double a_H,
                       double epsilon, double tau, int N_s, double gamma);

/// Closed-form determinant of N_s A (matches |det| under stability).
double rho_closed_form(const StabilityParams& params, double a_H, double tau,
                       int N_s, double gamma);

/// Empirical covariance of the outer estimator K(xhat(y,h), y; h) over
/// stationary fading draws, with the boundary mask on components of y at the
/// rate floor with nonzero drift. Returns the (optionally masked) covariance.
struct EstimatorCovariance {
  Eigen::MatrixXd sigma;
  double trace = 0.0;
};
EstimatorCovariance estimator_covariance(const Eigen::VectorXd& r,
                                         const Eigen::VectorXd& h_l,
                                         double gain, int samples,
                                         const RelayProblem& problem,
                                         const OracleConfig& cfg,
                                         std::uint64_t seed,
                                         bool boundary_mask = true);

/// Symmetrized square root with negative eigenvalues clipped at zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);

/// Sensitivity of y* to h_l by central differences on the SAA oracle with
/// common random numbers; column e = d y* / d h_l_e.
Eigen::MatrixXd psi_hl_jacobian(const Eigen::VectorXd& h_l, double gain,
                                const RelayProblem& problem,
                                const OracleConfig& cfg, double step,
                                std::uint64_t seed);

/// Reflected mean continuous-time dynamics (projected Euler):
///   x' = P_X[x + G(x, y, h) dt],  y' = P_Y[y + kbar(y, h_l) dt].
struct MctsResult {
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> y;
};

MctsResult integrate_mcts(const Eigen::VectorXd& x0, const Eigen::VectorXd& y0,
                          const std::vector<EffectiveChannel>& channel_path,
                          const std::vector<EffectiveChannel>& kbar_samples,
                          const RelayProblem& problem, const OracleConfig& cfg,
                          double dt);

/// Virtual stochastic dynamic system over the joint error state
/// u = (xt_c, yt_c, xt_c^e, yt_c^e, ht_s). Euler-Maruyama with reflection by
/// projection of the reconstructed MCTS states. Problem matrices are
/// evaluated at the virtual CSI through clamped fading magnitudes
/// max(|ht_s_j|, mag_floor).
struct VsdsOptions {
  double dt = 0.01;
  long steps = 2000;
  bool diffusion = true;
  bool h_l_moving = false;       // H_L = 0 when false
  double a_H = 10.0;
  double tau = 1e-3;
  int N_s = 30;
  double gamma = 0.05;
  int kbar_samples = 128;
  int sigma_samples = 2048;
  double mag_floor = 0.3;
  long burn_in = 0;
  std::function<Eigen::VectorXd(double)> H_L;  // diagonal, used when moving
};

struct VsdsResult {
  std::vector<double> norm_xt;
  std::vector<double> norm_yt;
  std::vector<double> norm_xte;
  std::vector<double> norm_yte;
  std::vector<double> norm_hs;
  double mean_sq_u = 0.0;  // time-average of ||u||^2 after burn-in
  Eigen::VectorXd final_u;
};

struct VsdsInit {
  Eigen::VectorXd xt_c;   // N_x
  Eigen::VectorXd yt_c;   // N_y
  Eigen::VectorXd xt_ce;  // N_x
  Eigen::VectorXd yt_ce;  // N_y
  Eigen::VectorXd ht_s;   // N
};

VsdsResult integrate_vsds(const VsdsInit& init, const Eigen::VectorXd& h_l,
                          double gain, const RelayProblem& problem,
                          const OracleConfig& cfg, const VsdsOptions& opt,
                          std::uint64_t seed);

/// Theorem-8-style sufficient conditions for the compensated algorithm,
/// evaluated from empirically estimated Lipschitz constants.
struct CompensationConditions {
  double cond_outer = 0.0;  // alpha_y gamma - eps tau Lyh
  double cond_inner = 0.0;
  bool ok = false;
};
CompensationConditions compensation_conditions(double alpha_x, double alpha_y,
                                               double gamma, double eps,
                                               double tau, int N_s, double a_H,
                                               double L_xh, double L_xy,
                                               double L_yh, double beta_yh,
                                               double l_y);

}  // namespace mtnetopt
