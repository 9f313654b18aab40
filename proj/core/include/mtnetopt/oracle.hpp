#pragma once

#include <optional>
#include <vector>

#include "mtnetopt/channel.hpp"
#include "mtnetopt/problem.hpp"

#include <Eigen/Dense>

namespace mtnetopt {

struct OracleConfig {
  double inner_tol = 1e-10;   // fixed-point residual ||x - P[x + G(x)]||
  double outer_tol = 1e-8;    // fixed-point residual in y
  int outer_samples = 4096;   // Monte-Carlo samples for the conditional mean
  int max_iter = 200000;
  double cache_tol = 1e-4;    // recompute y* when ||dh_l|| exceeds this
  double burn_in_frac = 0.1;
  double tikhonov_delta = 1e-8;
  double active_set_tol = 1e-6;
};

/// High-accuracy solve of the inner power-control problem for frozen (r, h):
/// damped projected primal-dual iteration with a semismooth Newton polish,
/// deterministic. Returns xhat = (phat, lambdahat).
PrimalDualPoint solve_inner(const Eigen::VectorXd& r, const EffectiveChannel& h,
                            const RelayProblem& problem, const OracleConfig& cfg,
                            const Eigen::VectorXd* warm_x = nullptr);

/// Unit-step fixed-point residual ||x - P[x + G(x)]|| of the inner map.
double inner_residual(const PrimalDualPoint& point, const EffectiveChannel& h,
                      const RelayProblem& problem);

/// A fixed set of stationary fading draws over the given path loss; the
/// sample-average approximation of the conditional expectation.
std::vector<EffectiveChannel> stationary_channel_samples(
    const Eigen::VectorXd& h_l, double gain, int count, std::uint64_t seed);

/// Averaged outer estimator kbar(y) = (1/M) sum_m K(xhat(y, h_m), y; h_m).
/// Warm-start caches are per-sample and owned by the caller.
Eigen::VectorXd k_bar(const Eigen::VectorXd& r,
                      const std::vector<EffectiveChannel>& samples,
                      const RelayProblem& problem, const OracleConfig& cfg,
                      std::vector<Eigen::VectorXd>* warm);

struct OuterSolve {
  Eigen::VectorXd r;                    // y*
  std::vector<Eigen::VectorXd> warm_x;  // per-sample inner warm starts
};

/// Sample-average approximation of the outer problem: projected ascent on
/// kbar to the fixed point, deterministic for a fixed seed.
OuterSolve solve_outer(const std::vector<EffectiveChannel>& samples,
                       const RelayProblem& problem, const OracleConfig& cfg,
                       const Eigen::VectorXd* warm_r = nullptr);

/// Convenience: draws the SAA sample set from (h_l, gain, seed) and solves.
OuterSolve solve_outer_hl(const Eigen::VectorXd& h_l, double gain,
                          const RelayProblem& problem, const OracleConfig& cfg,
                          std::uint64_t seed);

/// One frame-boundary snapshot of a trajectory for Def.-5 style errors.
struct FrameSample {
  double t_sec = 0.0;
  Eigen::VectorXd x;    // iterate at the frame-end slot
  Eigen::VectorXd r;    // post-update long-term variable
  EffectiveChannel chan;
  Eigen::VectorXd h_l;
};

struct TrackingErrors {
  double e_x = 0.0;
  double e_y = 0.0;
  std::vector<double> e_x_inst;  // one per retained frame
  std::vector<double> e_y_inst;
};

/// Mean-square tracking errors against the oracle's moving targets, averaged
/// over frames after burn-in. y* is cached per h_l and recomputed when the
/// path loss has moved by more than cache_tol; the SAA seed is common across
/// recomputations.
TrackingErrors tracking_errors(const std::vector<FrameSample>& trajectory,
                               const RelayProblem& problem,
                               const OracleConfig& cfg, double gain,
                               std::uint64_t saa_seed, bool static_hs = false);

enum class SensitivityTarget { Inner, Outer };

/// Central finite difference of xhat (along a |h_s| magnitude direction) or
/// y* (along an h_l direction). The outer target uses common random numbers.
Eigen::VectorXd fd_sensitivity(SensitivityTarget target,
                               const Eigen::VectorXd& r_or_unused,
                               const Eigen::VectorXd& magnitudes,
                               const Eigen::VectorXd& h_l, double gain,
                               const Eigen::VectorXd& direction, double step,
                               const RelayProblem& problem,
                               const OracleConfig& cfg, std::uint64_t seed);

/// Effective channel from explicit fading magnitudes.
EffectiveChannel channel_from_magnitudes(const Eigen::VectorXd& magnitudes,
                                         const Eigen::VectorXd& h_l,
                                         double gain);

}  // namespace mtnetopt
