#pragma once

#include <deque>
#include <optional>

#include "mtnetopt/channel.hpp"
#include "mtnetopt/oracle.hpp"
#include "mtnetopt/problem.hpp"

#include <Eigen/Dense>

namespace mtnetopt {

enum class ScheduleKind { Constant, Diminishing };

/// Step sizes: gamma for the inner (per-slot) update, mu for the outer
/// (per-frame) update. Diminishing uses mu_n = mu0 / n, which satisfies
/// sum mu = inf and sum mu^2 < inf by construction.
struct StepSchedule {
  ScheduleKind kind = ScheduleKind::Constant;
  double gamma = 0.05;
  double mu0 = 0.05;

  double mu(long frame) const {
    if (kind == ScheduleKind::Diminishing)
      return mu0 / static_cast<double>(std::max<long>(frame, 1));
    return mu0;
  }
};

/// Frame/slot bookkeeping: n_f = floor(n_s / N_s).
struct FrameClock {
  double tau = 1e-3;  // frame duration, seconds
  int N_s = 30;       // slots per frame
  long n_s = 0;
  long n_f = 0;

  void tick_slot() {
    ++n_s;
    n_f = n_s / N_s;
  }
  double slot_dt() const { return tau / N_s; }
};

struct CompensationConfig {
  bool enabled = true;
  double tikhonov_delta = 1e-8;
  double active_set_tol = 1e-6;
};

enum class AlgorithmVariant { PrimalDual, ProjectedGradient };

/// Optional diagonal scaling (Gamma_x, Gamma_y); identity by default.
struct ScalingConfig {
  Eigen::VectorXd diag_p;       // empty -> identity
  Eigen::VectorXd diag_lambda;  // empty -> identity
  Eigen::VectorXd diag_r;       // empty -> identity
};

/// One inner (per-slot) primal-dual step:
///   p'      = P+[p + gamma dL/dp + Psi_p]
///   lambda' = P+[lambda + gamma g + Psi_lambda]   (dual ascent on violation)
PrimalDualPoint inner_step(const PrimalDualPoint& point,
                           const EffectiveChannel& h,
                           const RelayProblem& problem, double gamma,
                           const Eigen::VectorXd& psi_p,
                           const Eigen::VectorXd& psi_lambda,
                           const ScalingConfig& scaling = {});

/// One outer (per-frame) step: r' = P_{>= r_floor}[r + mu dL1/dr + Psi_r],
/// where dL1/dr is evaluated at the current inner iterate (the biased
/// stochastic estimator K).
Eigen::VectorXd outer_step(const PrimalDualPoint& point,
                           const EffectiveChannel& h,
                           const RelayProblem& problem, double mu,
                           const Eigen::VectorXd& psi_r,
                           const ScalingConfig& scaling = {});

/// Short-term compensation (Psi_p, Psi_lambda): solves
///   (G_x + delta I) u = -(G_hs dm + G_y dy)
/// on the active multiplier set. Linear in (dm, dy); zero when both are zero.
struct CompensationX {
  Eigen::VectorXd psi_p;
  Eigen::VectorXd psi_lambda;
};
CompensationX compensation_x(const PrimalDualPoint& point,
                             const EffectiveChannel& h,
                             const RelayProblem& problem,
                             const Eigen::VectorXd& delta_m,
                             const Eigen::VectorXd& delta_r,
                             const CompensationConfig& comp);

/// Long-term compensation Psi_r = -(That_y + delta I)^-1 That_hl dh_l,
/// using the single-sample sensitivities at the current (x, h).
Eigen::VectorXd compensation_y(const PrimalDualPoint& point,
                               const EffectiveChannel& h,
                               const RelayProblem& problem,
                               const Eigen::VectorXd& delta_hl,
                               const CompensationConfig& comp);

struct SolverConfig {
  AlgorithmVariant algorithm = AlgorithmVariant::PrimalDual;
  StepSchedule schedule;
  CompensationConfig comp;
  ScalingConfig scaling;
  int latency_frames = 0;  // outer update's view of (x, h) is delayed
};

/// Sequential two-timescale trajectory state over one channel realization.
struct TrajectoryState {
  PrimalDualPoint point;
  FrameClock clock;
  // previous frame-boundary values for the compensation differences
  Eigen::VectorXd prev_m;    // |h_s| magnitudes
  Eigen::VectorXd prev_hl;
  Eigen::VectorXd prev_r;
  long comp_failures = 0;

  // Signaling latency: the outer update sees (x, h) from latency_frames ago.
  struct OuterView {
    Eigen::VectorXd x;
    EffectiveChannel chan;
    Eigen::VectorXd h_l;
  };
  std::deque<OuterView> history;
  Eigen::VectorXd prev_hl_view;

  static TrajectoryState init(const RelayProblem& problem,
                              const FrameClock& clock);
};

struct FrameResult {
  EffectiveChannel chan;   // CSI the frame ran against
  Eigen::VectorXd h_l;
  Eigen::VectorXd x_end;   // iterate after the N_s inner steps
  Eigen::VectorXd r_applied;  // long-term variable in force during the frame
  Eigen::VectorXd r_post;     // after the outer update
  int inner_steps = 0;
  int outer_steps = 0;
};

/// Runs one frame: samples CSI at the boundary, applies the compensation
/// deltas on the first slot, performs N_s inner steps and one outer step.
/// A conditioning failure in a compensation solve falls back to zero
/// compensation for that boundary and increments comp_failures.
FrameResult run_frame(TrajectoryState& state, ChannelProcess& channel,
                      const RelayProblem& problem, const SolverConfig& cfg);

}  // namespace mtnetopt
