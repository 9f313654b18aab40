#include "mtnetopt/solver.hpp"

#include <cmath>

#include "mtnetopt/errors.hpp"
#include "mtnetopt/projection.hpp"

namespace mtnetopt {

namespace {

Eigen::VectorXd scaled(const Eigen::VectorXd& v, const Eigen::VectorXd& diag) {
  if (diag.size() == 0) return v;
  return diag.cwiseProduct(v);
}

}  // namespace

PrimalDualPoint inner_step(const PrimalDualPoint& point,
                           const EffectiveChannel& h,
                           const RelayProblem& problem, double gamma,
                           const Eigen::VectorXd& psi_p,
                           const Eigen::VectorXd& psi_lambda,
                           const ScalingConfig& scaling) {
  const LagrangianEval ev = lagrangian_and_grads(point, h, problem);
  PrimalDualPoint out = point;
  Eigen::VectorXd dp = gamma * scaled(ev.dL_dp, scaling.diag_p);
  Eigen::VectorXd dl = gamma * scaled(ev.g, scaling.diag_lambda);
  if (psi_p.size()) dp += psi_p;
  if (psi_lambda.size()) dl += psi_lambda;
  out.p = project_nonneg(point.p + dp);
  out.lambda = project_nonneg(point.lambda + dl);
  return out;
}

Eigen::VectorXd outer_step(const PrimalDualPoint& point,
                           const EffectiveChannel& h,
                           const RelayProblem& problem, double mu,
                           const Eigen::VectorXd& psi_r,
                           const ScalingConfig& scaling) {
  const LagrangianEval ev = lagrangian_and_grads(point, h, problem);
  Eigen::VectorXd dr = mu * scaled(ev.dL_dr, scaling.diag_r);
  if (psi_r.size()) dr += psi_r;
  return project_nonneg(point.r + dr, problem.r_floor);
}

CompensationX compensation_x(const PrimalDualPoint& point,
                             const EffectiveChannel& h,
                             const RelayProblem& problem,
                             const Eigen::VectorXd& delta_m,
                             const Eigen::VectorXd& delta_r,
                             const CompensationConfig& comp) {
  const std::size_t N = problem.num_links();
  const std::size_t W = problem.num_constraints();
  CompensationX out;
  out.psi_p = Eigen::VectorXd::Zero(N);
  out.psi_lambda = Eigen::VectorXd::Zero(W);
  if (delta_m.isZero(0.0) && delta_r.isZero(0.0)) return out;

  const KktDerivatives d = second_derivatives(point, h, problem);
  const Eigen::VectorXd rhs = -(d.G_hs * delta_m + d.G_y * delta_r);
  const Eigen::MatrixXd u = solve_kkt_system(
      d, point.lambda, rhs, comp.tikhonov_delta, comp.active_set_tol);
  out.psi_p = u.topRows(N);
  out.psi_lambda = u.bottomRows(W);
  return out;
}

Eigen::VectorXd compensation_y(const PrimalDualPoint& point,
                               const EffectiveChannel& h,
                               const RelayProblem& problem,
                               const Eigen::VectorXd& delta_hl,
                               const CompensationConfig& comp) {
  const std::size_t F = problem.num_flows();
  if (delta_hl.isZero(0.0)) return Eigen::VectorXd::Zero(F);

  const OuterSensitivities s = outer_sensitivities(
      point, h, problem, comp.tikhonov_delta, comp.active_set_tol);
  Eigen::MatrixXd A = s.That_y;
  A.diagonal().array() += comp.tikhonov_delta;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible())
    throw NumericalError("compensation_y: That_y singular after damping");
  const Eigen::VectorXd psi = -lu.solve(s.That_hl * delta_hl);
  if (!psi.allFinite())
    throw NumericalError("compensation_y: non-finite result");
  return psi;
}

TrajectoryState TrajectoryState::init(const RelayProblem& problem,
                                      const FrameClock& clock) {
  TrajectoryState st;
  st.clock = clock;
  st.point.p = Eigen::VectorXd::Ones(problem.num_links());
  st.point.lambda = Eigen::VectorXd::Constant(problem.num_constraints(),
                                              std::max(problem.V, 1.0));
  st.point.r = Eigen::VectorXd::Constant(problem.num_flows(), 0.5);
  return st;
}

FrameResult run_frame(TrajectoryState& state, ChannelProcess& channel,
                      const RelayProblem& problem, const SolverConfig& cfg) {
  // CSI is acquired at the frame boundary and held for the frame.
  channel.advance(state.clock.tau);
  const EffectiveChannel chan =
      EffectiveChannel::from_parts(channel.fading(), channel.path_loss(),
                                   channel.params().snr_gain());
  const std::size_t N = problem.num_links();
  Eigen::VectorXd m(N), hl(N);
  for (std::size_t k = 0; k < N; ++k) {
    m[k] = std::abs(channel.fading().h_s[k]);
    hl[k] = channel.path_loss().h_l[k];
  }

  Eigen::VectorXd delta_m = Eigen::VectorXd::Zero(N);
  Eigen::VectorXd delta_r = Eigen::VectorXd::Zero(problem.num_flows());
  const bool have_prev = state.prev_m.size() > 0;
  if (have_prev) {
    delta_m = m - state.prev_m;
    delta_r = state.point.r - state.prev_r;
  }
  const Eigen::VectorXd r_applied = state.point.r;

  FrameResult res;
  res.chan = chan;
  res.h_l = hl;
  res.r_applied = r_applied;

  const double gamma = cfg.schedule.gamma;
  for (int s = 0; s < state.clock.N_s; ++s) {
    Eigen::VectorXd psi_p, psi_lambda;
    if (s == 0 && cfg.comp.enabled && have_prev) {
      // The full correction is applied on the first slot of the frame.
      try {
        const CompensationX cx = compensation_x(state.point, chan, problem,
                                                delta_m, delta_r, cfg.comp);
        psi_p = cx.psi_p;
        psi_lambda = cx.psi_lambda;
      } catch (const NumericalError&) {
        ++state.comp_failures;  // fall back to zero compensation
      }
    }
    state.point =
        inner_step(state.point, chan, problem, gamma, psi_p, psi_lambda,
                   cfg.scaling);
    state.clock.tick_slot();
    ++res.inner_steps;
  }
  res.x_end = state.point.x();

  // Outer update. With signaling latency the update's view of the global
  // quantities (x, h) lags by latency_frames; metric evaluation never lags.
  state.history.push_back({state.point.x(), chan, hl});
  const std::size_t want =
      static_cast<std::size_t>(std::max(cfg.latency_frames, 0)) + 1;
  while (state.history.size() > want) state.history.pop_front();
  const TrajectoryState::OuterView& view = state.history.front();
  PrimalDualPoint view_point =
      PrimalDualPoint::from_x(view.x, state.point.r, problem.num_links());

  Eigen::VectorXd psi_r;
  if (cfg.comp.enabled && state.prev_hl_view.size() > 0) {
    const Eigen::VectorXd delta_hl_view = view.h_l - state.prev_hl_view;
    try {
      psi_r = compensation_y(view_point, view.chan, problem, delta_hl_view,
                             cfg.comp);
    } catch (const NumericalError&) {
      ++state.comp_failures;
    }
  }
  state.point.r = outer_step(view_point, view.chan, problem,
                             cfg.schedule.mu(state.clock.n_f), psi_r,
                             cfg.scaling);
  ++res.outer_steps;
  res.r_post = state.point.r;

  state.prev_hl_view = view.h_l;
  state.prev_m = m;
  state.prev_hl = hl;
  state.prev_r = r_applied;
  return res;
}

}  // namespace mtnetopt
