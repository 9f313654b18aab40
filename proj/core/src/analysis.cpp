#include "mtnetopt/analysis.hpp"

#include <cmath>

#include "mtnetopt/errors.hpp"
#include "mtnetopt/rng.hpp"

namespace mtnetopt {

namespace {

double lambda_max_sym(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  return es.eigenvalues().maxCoeff();
}

double spectral_abscissa(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  return es.eigenvalues().real().maxCoeff();
}

double spectral_norm(const Eigen::MatrixXd& m) {
  return std::sqrt(lambda_max_sym(m.transpose() * m));
}

}  // namespace

LocalRates local_rates(const PrimalDualPoint& point, const EffectiveChannel& h,
                       const RelayProblem& problem) {
  const std::size_t N = problem.num_links();
  const IterationJacobians mj = iteration_jacobians(point, h, problem);
  const KktDerivatives kd = second_derivatives(point, h, problem);

  LocalRates lr;
  lr.alpha_x_sym = -lambda_max_sym(mj.M_x);
  lr.alpha_x_primal = -lambda_max_sym(mj.M_x.topLeftCorner(N, N));
  lr.alpha_x_abscissa = -spectral_abscissa(mj.M_x);
  lr.alpha_y = -lambda_max_sym(kd.K_r);

  const std::size_t D = problem.dim_x();
  const std::size_t F = problem.num_flows();
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(D + F, D + F);
  joint.topLeftCorner(D, D) = mj.M_x;
  joint.topRightCorner(D, F) = mj.M_y;
  joint.bottomLeftCorner(F, D) = kd.K_x;
  joint.bottomRightCorner(F, F) = kd.K_r;
  lr.alpha_joint = -lambda_max_sym(joint);
  return lr;
}

StabilityParams estimate_params(const RelayProblem& problem,
                                const std::vector<StateSample>& samples,
                                double gain, const EstimateConfig& cfg,
                                const OracleConfig& oracle_cfg,
                                std::uint64_t seed) {
  if (samples.empty())
    throw std::invalid_argument("estimate_params: empty sample");

  StabilityParams out;
  out.N = static_cast<int>(problem.num_links());
  double inf_ax = std::numeric_limits<double>::infinity();
  double inf_ay = std::numeric_limits<double>::infinity();
  double inf_a = std::numeric_limits<double>::infinity();
  double sup_vH = 0.0, sup_vy = 0.0, sup_lx = 0.0, sup_ly = 0.0;

  for (const StateSample& s : samples) {
    const LocalRates lr = local_rates(s.point, s.chan, problem);
    double ax = lr.alpha_x_sym;
    if (cfg.alpha_mode == AlphaMode::PrimalBlock) ax = lr.alpha_x_primal;
    if (cfg.alpha_mode == AlphaMode::Abscissa) ax = lr.alpha_x_abscissa;
    inf_ax = std::min(inf_ax, ax);
    inf_ay = std::min(inf_ay, lr.alpha_y);
    inf_a = std::min(inf_a, lr.alpha_joint);

    const KktDerivatives d = second_derivatives(s.point, s.chan, problem);
    const Eigen::MatrixXd phi_h = solve_kkt_system(
        d, s.point.lambda, d.G_hs, cfg.tikhonov_delta, cfg.active_set_tol);
    const Eigen::MatrixXd phi_y = solve_kkt_system(
        d, s.point.lambda, d.G_y, cfg.tikhonov_delta, cfg.active_set_tol);
    sup_vH = std::max(sup_vH, spectral_norm(phi_h));
    sup_vy = std::max(sup_vy, spectral_norm(phi_y));

    // ||K_x x|| <= l_x ||x||: the sup ratio is the spectral norm of K_x.
    sup_lx = std::max(sup_lx, spectral_norm(d.K_x));
    // Lipschitz of K in y: K_i = 1/r_i - ..., ratio sup 1/r^2 over the domain.
    sup_ly = std::max(sup_ly, s.point.r.cwiseAbs2().cwiseInverse().maxCoeff());
  }
  out.alpha_x = inf_ax;
  out.alpha_y = inf_ay;
  out.alpha = inf_a;
  out.v_H = sup_vH;
  out.v_y = sup_vy;
  out.l_x = sup_lx;
  out.l_y = sup_ly;

  // varpi: Lipschitz constant of psi_hl, from FD second differences at the
  // first and last sampled h_l (reduced SAA size, common random numbers).
  OracleConfig red = oracle_cfg;
  red.outer_samples = cfg.reduced_outer_samples;
  const Eigen::VectorXd& hl0 = samples.front().h_l;
  const Eigen::VectorXd& hl1 = samples.back().h_l;
  const Eigen::MatrixXd j0 =
      psi_hl_jacobian(hl0, gain, problem, red, cfg.fd_step_hl, seed);
  Eigen::VectorXd hl_pert = hl0;
  double sep = (hl1 - hl0).norm();
  if (sep < 1e-8) {
    hl_pert = hl0 * 1.01;
    sep = (hl_pert - hl0).norm();
  } else {
    hl_pert = hl1;
  }
  const Eigen::MatrixXd j1 =
      psi_hl_jacobian(hl_pert, gain, problem, red, cfg.fd_step_hl, seed);
  out.varpi = (j1 - j0).norm() / sep;

  // sigma_bar: average trace of the estimator covariance at y*(h_l).
  OuterSolve ys = solve_outer_hl(hl0, gain, problem, red, seed);
  const EstimatorCovariance cov =
      estimator_covariance(ys.r, hl0, gain, cfg.covariance_samples, problem,
                           oracle_cfg, derive_seed(seed, 77));
  out.sigma_bar = cov.trace;
  return out;
}

StabilityVerdict stability_condition(const StabilityParams& params, double a_H,
                                     double tau, int N_s, double gamma) {
  StabilityVerdict v;
  v.margin = params.alpha * N_s *
                 (8.0 * params.alpha_x -
                  (a_H * tau / (N_s * gamma)) * params.v_H * params.v_H) -
             2.0 * params.l_x * params.l_x -
             2.0 * params.l_y * params.l_y * params.v_y * params.v_y;
  v.stable = v.margin > 0.0;
  return v;
}

DriftMatrixA drift_matrix(const StabilityParams& params, double a_H, double tau,
                          int N_s, double gamma) {
  DriftMatrixA d;
  d.A.setZero();
  const double ns = static_cast<double>(N_s);
  d.A(0, 0) = params.alpha / ns;
  d.A(1, 1) = params.alpha / ns;
  d.A(2, 2) = params.alpha_x;
  d.A(3, 3) = params.alpha_y / ns;
  d.A(4, 4) = 0.5 * a_H * tau / (ns * gamma);
  d.A(1, 2) = d.A(2, 1) = -params.l_x / (2.0 * ns);
  d.A(2, 3) = d.A(3, 2) = -params.v_y * params.l_y / (2.0 * ns);
  d.A(2, 4) = d.A(4, 2) = -params.v_H * a_H * tau / (4.0 * ns * gamma);
  return d;
}

std::array<double, 5> DriftMatrixA::leading_minors() const {
  std::array<double, 5> m{};
  for (int k = 1; k <= 5; ++k)
    m[k - 1] = A.topLeftCorner(k, k).determinant();
  return m;
}

double rho_closed_form(const StabilityParams& params, double a_H, double tau,
                       int N_s, double gamma) {
  const double ns = static_cast<double>(N_s);
  return (params.alpha * a_H * tau / (16.0 * gamma)) *
         (8.0 * ns * params.alpha * params.alpha_x * params.alpha_y -
          params.alpha * params.alpha_y * (a_H * tau / gamma) * params.v_H *
              params.v_H -
          2.0 * params.alpha_y * params.l_x * params.l_x -
          2.0 * params.alpha * params.l_y * params.l_y * params.v_y *
              params.v_y);
}

ErrorBound error_bound(const StabilityParams& params, double a_H,
                       double epsilon, double tau, int N_s, double gamma) {
  const StabilityVerdict v = stability_condition(params, a_H, tau, N_s, gamma);
  if (!v.stable)
    throw NumericalError(
        "error_bound: stability condition violated (margin = " +
        std::to_string(v.margin) + "); check stability_condition first");

  const double ns = static_cast<double>(N_s);
  const DriftMatrixA d = drift_matrix(params, a_H, tau, N_s, gamma);
  const Eigen::Matrix<double, 5, 5> A0 = ns * d.A;

  ErrorBound b;
  b.rho = std::abs(A0.determinant());
  b.eta = std::pow(2.0, 1.5) * A0.norm();  // Frobenius

  const double ax = params.alpha_x, ay = params.alpha_y, al = params.alpha;
  const double lx = params.l_x, ly = params.l_y, vH = params.v_H,
               vy = params.v_y;
  const double num = 4.0 * al * ax / ns - lx * lx / (ns * ns) -
                     ly * ly * vy * vy / (ns * ns);
  const double den = al * (8.0 * ax - (a_H * tau / (ns * gamma)) * vH * vH) / ns -
                     2.0 * lx * lx / (ns * ns) -
                     2.0 * ly * ly * vy * vy / (ns * ns);
  const double scale = epsilon * params.varpi * tau / (ns * gamma);
  b.C_b = scale * scale * num / den;
  b.C = (a_H * tau / gamma) * params.N * (1.0 + vH * vH) + 4.0 * b.C_b;
  b.bound = (b.eta / b.rho) * (tau * params.sigma_bar + b.C);
  return b;
}

EstimatorCovariance estimator_covariance(const Eigen::VectorXd& r,
                                         const Eigen::VectorXd& h_l,
                                         double gain, int samples,
                                         const RelayProblem& problem,
                                         const OracleConfig& cfg,
                                         std::uint64_t seed,
                                         bool boundary_mask) {
  const std::size_t F = problem.num_flows();
  const auto chans = stationary_channel_samples(h_l, gain, samples, seed);

  Eigen::MatrixXd ks(F, samples);
  Eigen::VectorXd warm;
  for (int m = 0; m < samples; ++m) {
    const PrimalDualPoint xh =
        solve_inner(r, chans[m], problem, cfg, warm.size() ? &warm : nullptr);
    warm = xh.x();
    ks.col(m) = lagrangian_and_grads(xh, chans[m], problem).dL_dr;
  }
  const Eigen::VectorXd mean = ks.rowwise().mean();
  Eigen::MatrixXd centered = ks.colwise() - mean;
  Eigen::MatrixXd sigma =
      centered * centered.transpose() / std::max(samples - 1, 1);
  sigma = 0.5 * (sigma + sigma.transpose());

  if (boundary_mask) {
    // Case i of the boundary remark: zero diffusion on components of y at the
    // floor with nonzero drift.
    for (std::size_t i = 0; i < F; ++i) {
      if (r[i] <= problem.r_floor + 1e-12 && std::abs(mean[i]) > 1e-8) {
        sigma.row(i).setZero();
        sigma.col(i).setZero();
      }
    }
  }
  EstimatorCovariance out;
  out.sigma = sigma;
  out.trace = sigma.trace();
  return out;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd psi_hl_jacobian(const Eigen::VectorXd& h_l, double gain,
                                const RelayProblem& problem,
                                const OracleConfig& cfg, double step,
                                std::uint64_t seed) {
  const std::size_t N = h_l.size();
  const std::size_t F = problem.num_flows();
  Eigen::MatrixXd j(F, N);
  for (std::size_t e = 0; e < N; ++e) {
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(N);
    dir[e] = 1.0;
    j.col(e) = fd_sensitivity(SensitivityTarget::Outer, Eigen::VectorXd(),
                              Eigen::VectorXd(), h_l, gain, dir, step, problem,
                              cfg, seed);
  }
  return j;
}

MctsResult integrate_mcts(const Eigen::VectorXd& x0, const Eigen::VectorXd& y0,
                          const std::vector<EffectiveChannel>& channel_path,
                          const std::vector<EffectiveChannel>& kbar_samples,
                          const RelayProblem& problem, const OracleConfig& cfg,
                          double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate_mcts: dt must be > 0");
  const std::size_t N = problem.num_links();

  MctsResult res;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd y = y0;
  res.x.push_back(x);
  res.y.push_back(y);
  std::vector<Eigen::VectorXd> warm(kbar_samples.size());

  for (const EffectiveChannel& chan : channel_path) {
    PrimalDualPoint pt = PrimalDualPoint::from_x(x, y, N);
    const Eigen::VectorXd G = iteration_map(pt, chan, problem);
    const Eigen::VectorXd kb = k_bar(y, kbar_samples, problem, cfg, &warm);
    x = (x + dt * G).cwiseMax(0.0);
    y = (y + dt * kb).cwiseMax(problem.r_floor);
    res.x.push_back(x);
    res.y.push_back(y);
  }
  return res;
}

VsdsResult integrate_vsds(const VsdsInit& init, const Eigen::VectorXd& h_l,
                          double gain, const RelayProblem& problem,
                          const OracleConfig& cfg, const VsdsOptions& opt,
                          std::uint64_t seed) {
  const std::size_t Nx = problem.dim_x();
  const std::size_t Ny = problem.num_flows();
  const std::size_t N = problem.num_links();
  const double kappa = opt.a_H * opt.tau / (opt.N_s * opt.gamma);
  const double ns = static_cast<double>(opt.N_s);

  RngStream noise(derive_seed(seed, 3));

  // y*(h_l) and the SAA machinery; h_l is static unless H_L is provided.
  OracleConfig red = cfg;
  red.outer_samples = opt.kbar_samples;
  Eigen::VectorXd hl = h_l;
  OuterSolve ys = solve_outer_hl(hl, gain, problem, red, derive_seed(seed, 4));
  auto kb_samples =
      stationary_channel_samples(hl, gain, opt.kbar_samples, derive_seed(seed, 5));
  std::vector<Eigen::VectorXd> kb_warm(kb_samples.size());

  // Diffusion amplitude of the outer estimator at y*.
  Eigen::MatrixXd sigma_sqrt = Eigen::MatrixXd::Zero(Ny, Ny);
  if (opt.diffusion) {
    const EstimatorCovariance cov =
        estimator_covariance(ys.r, hl, gain, opt.sigma_samples, problem, cfg,
                             derive_seed(seed, 6));
    sigma_sqrt = psd_sqrt(cov.sigma);
  }

  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(Ny, N);
  if (opt.h_l_moving)
    psi = psi_hl_jacobian(hl, gain, problem, red, 1e-4, derive_seed(seed, 7));

  Eigen::VectorXd xt = init.xt_c, yt = init.yt_c, xte = init.xt_ce,
                  yte = init.yt_ce, hs = init.ht_s;

  VsdsResult res;
  double acc_u2 = 0.0;
  long counted = 0;
  Eigen::VectorXd warm_xhat;

  for (long step = 0; step < opt.steps; ++step) {
    // Reconstruct the MCTS states around the moving targets.
    Eigen::VectorXd y_c = (ys.r + yte).cwiseMax(problem.r_floor);
    yte = y_c - ys.r;  // fold the reflection back into the error state

    Eigen::VectorXd mags(N);
    for (std::size_t k = 0; k < N; ++k)
      mags[k] = std::max(std::abs(hs[k]), opt.mag_floor);
    const EffectiveChannel chan = channel_from_magnitudes(mags, hl, gain);

    const PrimalDualPoint xhat = solve_inner(
        y_c, chan, problem, cfg, warm_xhat.size() ? &warm_xhat : nullptr);
    warm_xhat = xhat.x();
    Eigen::VectorXd x_c = (xhat.x() + xte).cwiseMax(0.0);
    xte = x_c - xhat.x();

    const PrimalDualPoint pt_c = PrimalDualPoint::from_x(x_c, y_c, N);
    const IterationJacobians mj = iteration_jacobians(pt_c, chan, problem);
    const KktDerivatives kd = second_derivatives(xhat, chan, problem);
    const Eigen::VectorXd G_val = iteration_map(pt_c, chan, problem);
    const Eigen::VectorXd kb = k_bar(y_c, kb_samples, problem, red, &kb_warm);

    // Sensitivities of the moving partial equilibrium.
    const Eigen::MatrixXd phi_h =
        solve_kkt_system(kd, xhat.lambda, kd.G_hs, cfg.tikhonov_delta,
                         cfg.active_set_tol);
    const Eigen::MatrixXd phi_y =
        solve_kkt_system(kd, xhat.lambda, kd.G_y, cfg.tikhonov_delta,
                         cfg.active_set_tol);

    // K linearized at (xhat, y_c).
    const Eigen::MatrixXd K_x = kd.K_x;
    const Eigen::MatrixXd K_y = kd.K_r;

    Eigen::VectorXd d_xt = mj.M_x * xt + mj.M_y * yt;
    Eigen::VectorXd d_yt = (K_x * (xt + xte) + K_y * yt) / ns;
    Eigen::VectorXd d_xte = G_val - 0.5 * kappa * (phi_h * hs) + phi_y * (kb / ns);
    Eigen::VectorXd d_yte = kb / ns;
    if (opt.h_l_moving && opt.H_L) {
      const Eigen::VectorXd HL = opt.H_L(step * opt.dt);
      d_yte += (opt.tau / (ns * opt.gamma)) * (psi * HL);
    }
    Eigen::VectorXd d_hs = -0.5 * kappa * hs;

    xt += opt.dt * d_xt;
    yt += opt.dt * d_yt;
    xte += opt.dt * d_xte;
    yte += opt.dt * d_yte;
    hs += opt.dt * d_hs;

    if (opt.diffusion) {
      const double sdt = std::sqrt(opt.dt);
      Eigen::VectorXd xi_y(Ny), xi_h(N);
      for (Eigen::Index i = 0; i < xi_y.size(); ++i) xi_y[i] = noise.gaussian();
      for (Eigen::Index i = 0; i < xi_h.size(); ++i) xi_h[i] = noise.gaussian();
      yt += sdt * std::sqrt(opt.tau / ns) * (sigma_sqrt * xi_y);
      xte += sdt * std::sqrt(kappa) * (phi_h * xi_h);
      hs += sdt * std::sqrt(kappa) * xi_h;
    }

    res.norm_xt.push_back(xt.norm());
    res.norm_yt.push_back(yt.norm());
    res.norm_xte.push_back(xte.norm());
    res.norm_yte.push_back(yte.norm());
    res.norm_hs.push_back(hs.norm());
    if (step >= opt.burn_in) {
      acc_u2 += xt.squaredNorm() + yt.squaredNorm() + xte.squaredNorm() +
                yte.squaredNorm() + hs.squaredNorm();
      ++counted;
    }
  }
  res.mean_sq_u = counted ? acc_u2 / counted : 0.0;
  Eigen::VectorXd u(2 * Nx + 2 * Ny + N);
  u << xt, yt, xte, yte, hs;
  res.final_u = u;
  return res;
}

CompensationConditions compensation_conditions(double alpha_x, double alpha_y,
                                               double gamma, double eps,
                                               double tau, int N_s, double a_H,
                                               double L_xh, double L_xy,
                                               double L_yh, double beta_yh,
                                               double l_y) {
  CompensationConditions c;
  c.cond_outer = alpha_y * gamma - eps * tau * L_yh;
  const double ns = static_cast<double>(N_s);
  double bias_term = 0.0;
  if (c.cond_outer > 0.0)
    bias_term = L_xy * (l_y / ns) * (eps * tau * beta_yh / c.cond_outer);
  c.cond_inner = alpha_x - (a_H * tau / (std::sqrt(2.0 * M_PI) * ns * gamma)) * L_xh -
                 bias_term - (a_H * tau / (ns * gamma)) * L_xh * L_xh;
  c.ok = c.cond_outer > 0.0 && c.cond_inner > 0.0;
  return c;
}

}  // namespace mtnetopt
