#include "mtnetopt/oracle.hpp"

#include <cmath>

#include "mtnetopt/errors.hpp"
#include "mtnetopt/projection.hpp"
#include "mtnetopt/rng.hpp"

namespace mtnetopt {

namespace {

double fp_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& G) {
  return (x - (x + G).cwiseMax(0.0)).norm();
}

}  // namespace

double inner_residual(const PrimalDualPoint& point, const EffectiveChannel& h,
                      const RelayProblem& problem) {
  const Eigen::VectorXd x = point.x();
  return fp_residual(x, iteration_map(point, h, problem));
}

PrimalDualPoint solve_inner(const Eigen::VectorXd& r, const EffectiveChannel& h,
                            const RelayProblem& problem, const OracleConfig& cfg,
                            const Eigen::VectorXd* warm_x) {
  const std::size_t N = problem.num_links();
  const std::size_t D = problem.dim_x();

  Eigen::VectorXd x;
  if (warm_x && warm_x->size() == static_cast<Eigen::Index>(D)) {
    x = warm_x->cwiseMax(0.0);
  } else {
    x = Eigen::VectorXd::Ones(D);
    x.tail(D - N).setConstant(std::max(problem.V, 1.0));
  }

  PrimalDualPoint pt = PrimalDualPoint::from_x(x, r, N);
  Eigen::VectorXd G = iteration_map(pt, h, problem);
  double res = fp_residual(x, G);

  double step = 0.2 / (1.0 + h.H.maxCoeff());
  double best = res;
  int since_best = 0;

  for (int it = 0; it < cfg.max_iter; ++it) {
    if (res <= cfg.inner_tol) break;

    // Semismooth Newton polish once the damped phase is near the solution.
    if (res < 1e-3) {
      bool newton_done = false;
      for (int nit = 0; nit < 50 && !newton_done; ++nit) {
        pt = PrimalDualPoint::from_x(x, r, N);
        G = iteration_map(pt, h, problem);
        res = fp_residual(x, G);
        if (res <= cfg.inner_tol) {
          newton_done = true;
          break;
        }
        const Eigen::MatrixXd Jg = iteration_jacobians(pt, h, problem).M_x;
        // F(x) = x - max(x + G, 0); rows switch on the active pattern.
        Eigen::VectorXd F(D);
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(D, D);
        const Eigen::VectorXd z = x + G;
        for (std::size_t i = 0; i < D; ++i) {
          if (z[i] > 0.0) {
            F[i] = -G[i];
            J.row(i) = -Jg.row(i);
          } else {
            F[i] = x[i];
            J(i, i) = 1.0;
          }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible()) break;  // fall back to damped iterations
        const Eigen::VectorXd dx = lu.solve(-F);
        if (!dx.allFinite()) break;
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 25; ++ls) {
          Eigen::VectorXd x_try = (x + t * dx).cwiseMax(0.0);
          PrimalDualPoint pt_try = PrimalDualPoint::from_x(x_try, r, N);
          const Eigen::VectorXd G_try = iteration_map(pt_try, h, problem);
          const double res_try = fp_residual(x_try, G_try);
          if (res_try < res) {
            x = x_try;
            res = res_try;
            accepted = true;
            break;
          }
          t *= 0.5;
        }
        if (!accepted) break;
      }
      if (res <= cfg.inner_tol) break;
    }

    x = (x + step * G).cwiseMax(0.0);
    pt = PrimalDualPoint::from_x(x, r, N);
    G = iteration_map(pt, h, problem);
    res = fp_residual(x, G);

    if (res < best) {
      best = res;
      since_best = 0;
    } else if (++since_best > 400) {
      step *= 0.5;
      since_best = 0;
      if (step < 1e-12)
        throw NumericalError("solve_inner: step collapsed, residual " +
                             std::to_string(res));
    }
  }

  if (res > cfg.inner_tol)
    throw NumericalError("solve_inner: max_iter exceeded, residual " +
                         std::to_string(res));
  return PrimalDualPoint::from_x(x, r, N);
}

EffectiveChannel channel_from_magnitudes(const Eigen::VectorXd& magnitudes,
                                         const Eigen::VectorXd& h_l,
                                         double gain) {
  const std::size_t n = magnitudes.size();
  EffectiveChannel ch;
  ch.H.resize(n);
  ch.dH_dm.resize(n);
  ch.dH_dhl.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double m = magnitudes[k];
    const double hl = h_l[k];
    ch.H[k] = gain * hl * hl * m * m;
    ch.dH_dm[k] = 2.0 * gain * hl * hl * m;
    ch.dH_dhl[k] = 2.0 * gain * hl * m * m;
  }
  return ch;
}

std::vector<EffectiveChannel> stationary_channel_samples(
    const Eigen::VectorXd& h_l, double gain, int count, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<EffectiveChannel> out;
  out.reserve(count);
  const std::size_t n = h_l.size();
  for (int m = 0; m < count; ++m) {
    Eigen::VectorXd mag(n);
    for (std::size_t k = 0; k < n; ++k) mag[k] = std::abs(rng.complex_gaussian());
    out.push_back(channel_from_magnitudes(mag, h_l, gain));
  }
  return out;
}

Eigen::VectorXd k_bar(const Eigen::VectorXd& r,
                      const std::vector<EffectiveChannel>& samples,
                      const RelayProblem& problem, const OracleConfig& cfg,
                      std::vector<Eigen::VectorXd>* warm) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(problem.num_flows());
  for (std::size_t m = 0; m < samples.size(); ++m) {
    const Eigen::VectorXd* w =
        (warm && m < warm->size() && (*warm)[m].size() > 0) ? &(*warm)[m] : nullptr;
    const PrimalDualPoint xh = solve_inner(r, samples[m], problem, cfg, w);
    if (warm) {
      if (warm->size() < samples.size()) warm->resize(samples.size());
      (*warm)[m] = xh.x();
    }
    const LagrangianEval ev = lagrangian_and_grads(xh, samples[m], problem);
    acc += ev.dL_dr;
  }
  return acc / static_cast<double>(samples.size());
}

namespace {

Eigen::MatrixXd k_bar_jacobian(const Eigen::VectorXd& r,
                               const std::vector<EffectiveChannel>& samples,
                               const RelayProblem& problem,
                               const OracleConfig& cfg,
                               std::vector<Eigen::VectorXd>* warm) {
  const std::size_t F = problem.num_flows();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(F, F);
  for (std::size_t m = 0; m < samples.size(); ++m) {
    const Eigen::VectorXd* w =
        (warm && m < warm->size() && (*warm)[m].size() > 0) ? &(*warm)[m] : nullptr;
    const PrimalDualPoint xh = solve_inner(r, samples[m], problem, cfg, w);
    if (warm) (*warm)[m] = xh.x();
    const OuterSensitivities s = outer_sensitivities(
        xh, samples[m], problem, cfg.tikhonov_delta, cfg.active_set_tol);
    acc += s.That_y;
  }
  return acc / static_cast<double>(samples.size());
}

}  // namespace

OuterSolve solve_outer(const std::vector<EffectiveChannel>& samples,
                       const RelayProblem& problem, const OracleConfig& cfg,
                       const Eigen::VectorXd* warm_r) {
  const std::size_t F = problem.num_flows();
  Eigen::VectorXd y = (warm_r && warm_r->size() == static_cast<Eigen::Index>(F))
                          ? warm_r->cwiseMax(problem.r_floor)
                          : Eigen::VectorXd::Constant(F, 0.5);
  OuterSolve out;
  out.warm_x.resize(samples.size());

  Eigen::VectorXd kb = k_bar(y, samples, problem, cfg, &out.warm_x);
  auto residual = [&](const Eigen::VectorXd& yy, const Eigen::VectorXd& k) {
    return (yy - (yy + k).cwiseMax(problem.r_floor)).norm();
  };
  double res = residual(y, kb);

  double step = 0.05;
  double best = res;
  int since_best = 0;
  const int outer_max = std::max(1000, cfg.max_iter / 100);

  for (int it = 0; it < outer_max; ++it) {
    if (res <= cfg.outer_tol) break;

    if (res < 1e-2) {
      // Newton on F(y) = y - P[y + kbar(y)] with the active-pattern rows.
      for (int nit = 0; nit < 30; ++nit) {
        kb = k_bar(y, samples, problem, cfg, &out.warm_x);
        res = residual(y, kb);
        if (res <= cfg.outer_tol) break;
        const Eigen::MatrixXd Ky =
            k_bar_jacobian(y, samples, problem, cfg, &out.warm_x);
        Eigen::VectorXd Fv(F);
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(F, F);
        const Eigen::VectorXd z = y + kb;
        for (std::size_t i = 0; i < F; ++i) {
          if (z[i] > problem.r_floor) {
            Fv[i] = -kb[i];
            J.row(i) = -Ky.row(i);
          } else {
            Fv[i] = y[i] - problem.r_floor;
            J(i, i) = 1.0;
          }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible()) break;
        Eigen::VectorXd dy = lu.solve(-Fv);
        if (!dy.allFinite()) break;
        double t = 1.0;
        bool ok = false;
        for (int ls = 0; ls < 20; ++ls) {
          Eigen::VectorXd y_try = (y + t * dy).cwiseMax(problem.r_floor);
          const Eigen::VectorXd k_try =
              k_bar(y_try, samples, problem, cfg, &out.warm_x);
          const double r_try = residual(y_try, k_try);
          if (r_try < res) {
            y = y_try;
            kb = k_try;
            res = r_try;
            ok = true;
            break;
          }
          t *= 0.5;
        }
        if (!ok) break;
      }
      if (res <= cfg.outer_tol) break;
    }

    y = (y + step * kb).cwiseMax(problem.r_floor);
    kb = k_bar(y, samples, problem, cfg, &out.warm_x);
    res = residual(y, kb);
    if (res < best) {
      best = res;
      since_best = 0;
    } else if (++since_best > 40) {
      step *= 0.5;
      since_best = 0;
      if (step < 1e-10)
        throw NumericalError("solve_outer: step collapsed, residual " +
                             std::to_string(res));
    }
  }
  if (res > cfg.outer_tol)
    throw NumericalError("solve_outer: max_iter exceeded, residual " +
                         std::to_string(res));
  out.r = y;
  return out;
}

OuterSolve solve_outer_hl(const Eigen::VectorXd& h_l, double gain,
                          const RelayProblem& problem, const OracleConfig& cfg,
                          std::uint64_t seed) {
  const auto samples =
      stationary_channel_samples(h_l, gain, cfg.outer_samples, seed);
  return solve_outer(samples, problem, cfg);
}

TrackingErrors tracking_errors(const std::vector<FrameSample>& trajectory,
                               const RelayProblem& problem,
                               const OracleConfig& cfg, double gain,
                               std::uint64_t saa_seed, bool static_hs) {
  const std::size_t n = trajectory.size();
  const std::size_t burn = static_cast<std::size_t>(cfg.burn_in_frac * n);
  if (n == 0 || burn >= n)
    throw std::invalid_argument("tracking_errors: trajectory shorter than burn-in");

  TrackingErrors out;
  Eigen::VectorXd cached_hl;
  Eigen::VectorXd cached_ystar;
  Eigen::VectorXd warm_x;
  Eigen::VectorXd warm_y;

  for (std::size_t i = burn; i < n; ++i) {
    const FrameSample& fs = trajectory[i];

    if (cached_hl.size() == 0 || (fs.h_l - cached_hl).norm() > cfg.cache_tol) {
      OuterSolve sol;
      if (static_hs) {
        // degenerate SAA: the frozen fading of this frame is the sample
        sol = solve_outer({fs.chan}, problem, cfg,
                          warm_y.size() ? &warm_y : nullptr);
      } else {
        const auto samples = stationary_channel_samples(
            fs.h_l, gain, cfg.outer_samples, saa_seed);
        sol = solve_outer(samples, problem, cfg,
                          warm_y.size() ? &warm_y : nullptr);
      }
      cached_ystar = sol.r;
      warm_y = sol.r;
      cached_hl = fs.h_l;
    }

    const PrimalDualPoint xh =
        solve_inner(fs.r, fs.chan, problem, cfg, warm_x.size() ? &warm_x : nullptr);
    warm_x = xh.x();

    const double ex = (fs.x - xh.x()).squaredNorm();
    const double ey = (fs.r - cached_ystar).squaredNorm();
    out.e_x_inst.push_back(ex);
    out.e_y_inst.push_back(ey);
    out.e_x += ex;
    out.e_y += ey;
  }
  const double count = static_cast<double>(n - burn);
  out.e_x /= count;
  out.e_y /= count;
  return out;
}

Eigen::VectorXd fd_sensitivity(SensitivityTarget target,
                               const Eigen::VectorXd& r,
                               const Eigen::VectorXd& magnitudes,
                               const Eigen::VectorXd& h_l, double gain,
                               const Eigen::VectorXd& direction, double step,
                               const RelayProblem& problem,
                               const OracleConfig& cfg, std::uint64_t seed) {
  if (direction.norm() == 0.0) {
    const std::size_t dim =
        target == SensitivityTarget::Inner ? problem.dim_x() : problem.num_flows();
    return Eigen::VectorXd::Zero(dim);
  }
  if (target == SensitivityTarget::Inner) {
    const EffectiveChannel hp =
        channel_from_magnitudes(magnitudes + step * direction, h_l, gain);
    const EffectiveChannel hm =
        channel_from_magnitudes(magnitudes - step * direction, h_l, gain);
    const PrimalDualPoint xp = solve_inner(r, hp, problem, cfg);
    const PrimalDualPoint xm = solve_inner(r, hm, problem, cfg);
    return (xp.x() - xm.x()) / (2.0 * step);
  }
  // Outer: common random numbers across the +/- solves.
  const Eigen::VectorXd hl_p = h_l + step * direction;
  const Eigen::VectorXd hl_m = h_l - step * direction;
  const OuterSolve sp = solve_outer_hl(hl_p, gain, problem, cfg, seed);
  const OuterSolve sm = solve_outer_hl(hl_m, gain, problem, cfg, seed);
  return (sp.r - sm.r) / (2.0 * step);
}

}  // namespace mtnetopt
