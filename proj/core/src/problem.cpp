#include "mtnetopt/problem.hpp"

#include <cmath>

#include "mtnetopt/errors.hpp"

namespace mtnetopt {

RelayProblem RelayProblem::build(const Topology& topo, double V) {
  RelayProblem pr;
  pr.topo = topo;
  pr.V = V;

  for (const Node& n : topo.nodes) {
    if (n.role == NodeRole::User) continue;
    const auto it = topo.l_plus.find(n.id);
    if (it == topo.l_plus.end() || it->second.empty()) continue;
    std::vector<int> inbound;
    for (int lid : it->second) inbound.push_back(topo.link_index(lid));
    if (inbound.size() > 12)
      throw ConfigError("receiver " + std::to_string(n.id) +
                        " has more than 12 inbound links; subset enumeration refused");
    const std::size_t n_in = inbound.size();
    for (std::size_t mask = 1; mask < (1u << n_in); ++mask) {
      MacConstraint c;
      c.receiver = n.id;
      for (std::size_t b = 0; b < n_in; ++b)
        if (mask & (1u << b)) c.link_idx.push_back(inbound[b]);
      pr.constraints.push_back(std::move(c));
    }
  }

  const std::size_t W = pr.constraints.size();
  const std::size_t F = topo.num_flows();
  pr.n_count = Eigen::MatrixXd::Zero(W, F);
  for (std::size_t j = 0; j < W; ++j) {
    for (int k : pr.constraints[j].link_idx) {
      const auto it = topo.routes.find(topo.links[k].id);
      if (it == topo.routes.end()) continue;
      for (int fid : it->second) pr.n_count(j, topo.flow_index(fid)) += 1.0;
    }
  }
  return pr;
}

Eigen::VectorXd PrimalDualPoint::x() const {
  Eigen::VectorXd v(p.size() + lambda.size());
  v << p, lambda;
  return v;
}

PrimalDualPoint PrimalDualPoint::from_x(const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& r,
                                        std::size_t n_links) {
  PrimalDualPoint pt;
  pt.p = x.head(n_links);
  pt.lambda = x.tail(x.size() - n_links);
  pt.r = r;
  return pt;
}

EffectiveChannel EffectiveChannel::from_parts(const OuFading& fading,
                                              const PathLoss& pl, double gain) {
  if (fading.h_s.size() != pl.h_l.size())
    throw std::invalid_argument("EffectiveChannel: length mismatch");
  const std::size_t n = fading.h_s.size();
  EffectiveChannel ch;
  ch.H.resize(n);
  ch.dH_dm.resize(n);
  ch.dH_dhl.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double m = std::abs(fading.h_s[k]);
    const double hl = pl.h_l[k];
    ch.H[k] = gain * hl * hl * m * m;
    ch.dH_dm[k] = 2.0 * gain * hl * hl * m;
    ch.dH_dhl[k] = 2.0 * gain * hl * m * m;
  }
  return ch;
}

EffectiveChannel EffectiveChannel::from_gains(const Eigen::VectorXd& H) {
  // H = gain * hl^2 * m^2 with hl = m = 1.
  EffectiveChannel ch;
  ch.H = H;
  ch.dH_dm = 2.0 * H;
  ch.dH_dhl = 2.0 * H;
  return ch;
}

Eigen::VectorXd mac_residuals(const Eigen::VectorXd& r, const Eigen::VectorXd& p,
                              const EffectiveChannel& h,
                              const RelayProblem& problem) {
  const std::size_t W = problem.num_constraints();
  Eigen::VectorXd g(W);
  const Eigen::VectorXd csum = problem.n_count * r;
  for (std::size_t j = 0; j < W; ++j) {
    double q = 1.0;
    for (int k : problem.constraints[j].link_idx) q += h.gain_for(j, k) * p[k];
    g[j] = csum[j] - std::log(q);
  }
  return g;
}

double objective(const Eigen::VectorXd& p, const Eigen::VectorXd& r,
                 const RelayProblem& problem) {
  double u = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (!(r[i] > 0.0)) throw std::domain_error("objective: r must be > 0");
    u += std::log(r[i]);
  }
  return u - problem.V * p.sum();
}

LagrangianEval lagrangian_and_grads(const PrimalDualPoint& point,
                                    const EffectiveChannel& h,
                                    const RelayProblem& problem) {
  const std::size_t N = problem.num_links();
  const std::size_t W = problem.num_constraints();
  const std::size_t F = problem.num_flows();

  for (Eigen::Index i = 0; i < point.r.size(); ++i)
    if (!(point.r[i] > 0.0))
      throw std::domain_error("lagrangian: r must be > 0");

  LagrangianEval ev;
  ev.dL_dp = Eigen::VectorXd::Constant(N, -problem.V);
  ev.g = mac_residuals(point.r, point.p, h, problem);
  ev.dL_dr = Eigen::VectorXd::Zero(F);

  double L = objective(point.p, point.r, problem);
  for (std::size_t j = 0; j < W; ++j) {
    L -= point.lambda[j] * ev.g[j];
    double q = 1.0;
    for (int k : problem.constraints[j].link_idx) q += h.gain_for(j, k) * point.p[k];
    for (int k : problem.constraints[j].link_idx)
      ev.dL_dp[k] += point.lambda[j] * h.gain_for(j, k) / q;
  }
  ev.L = L;
  for (std::size_t i = 0; i < F; ++i) {
    double s = 1.0 / point.r[i];
    for (std::size_t j = 0; j < W; ++j)
      s -= point.lambda[j] * problem.n_count(j, i);
    ev.dL_dr[i] = s;
  }
  return ev;
}

KktDerivatives second_derivatives(const PrimalDualPoint& point,
                                  const EffectiveChannel& h,
                                  const RelayProblem& problem) {
  const std::size_t N = problem.num_links();
  const std::size_t W = problem.num_constraints();
  const std::size_t F = problem.num_flows();
  const std::size_t D = N + W;

  KktDerivatives d;
  d.G_x = Eigen::MatrixXd::Zero(D, D);
  d.G_hs = Eigen::MatrixXd::Zero(D, N);
  d.G_hl = Eigen::MatrixXd::Zero(D, N);
  d.G_y = Eigen::MatrixXd::Zero(D, F);

  const Eigen::VectorXd g = mac_residuals(point.r, point.p, h, problem);

  for (std::size_t j = 0; j < W; ++j) {
    const auto& S = problem.constraints[j].link_idx;
    double q = 1.0;
    for (int k : S) q += h.gain_for(j, k) * point.p[k];
    const double lam = point.lambda[j];

    // d(dL/dp)/dp and d(dL/dp)/dlambda_j
    for (int k : S) {
      for (int l : S)
        d.G_x(k, l) -= lam * h.gain_for(j, k) * h.gain_for(j, l) / (q * q);
      d.G_x(k, N + j) = h.gain_for(j, k) / q;
    }
    // rows of {lambda_j g_j}
    for (int k : S) d.G_x(N + j, k) = -lam * h.gain_for(j, k) / q;
    d.G_x(N + j, N + j) = g[j];

    // channel partials enter through H_e for e in S
    for (int e : S) {
      // d(dL/dp_k)/dH_e = lam * (1{k=e}/q - H_k p_e / q^2) for k in S
      for (int k : S) {
        const double dd =
            lam * (((k == e) ? 1.0 : 0.0) / q - h.H[k] * point.p[e] / (q * q));
        d.G_hs(k, e) += dd * h.dH_dm[e];
        d.G_hl(k, e) += dd * h.dH_dhl[e];
      }
      // d(lambda_j g_j)/dH_e = -lam * p_e / q
      const double dg = -lam * point.p[e] / q;
      d.G_hs(N + j, e) += dg * h.dH_dm[e];
      d.G_hl(N + j, e) += dg * h.dH_dhl[e];
    }

    // d(lambda_j g_j)/dr_i = lam * n_count(j, i)
    for (std::size_t i = 0; i < F; ++i)
      d.G_y(N + j, i) = lam * problem.n_count(j, i);
  }

  d.K_r = Eigen::MatrixXd::Zero(F, F);
  for (std::size_t i = 0; i < F; ++i)
    d.K_r(i, i) = -1.0 / (point.r[i] * point.r[i]);
  d.K_x = Eigen::MatrixXd::Zero(F, D);
  d.K_x.rightCols(W) = -problem.n_count.transpose();
  return d;
}

Eigen::VectorXd iteration_map(const PrimalDualPoint& point,
                              const EffectiveChannel& h,
                              const RelayProblem& problem) {
  const LagrangianEval ev = lagrangian_and_grads(point, h, problem);
  Eigen::VectorXd G(problem.dim_x());
  G << ev.dL_dp, ev.g;
  return G;
}

IterationJacobians iteration_jacobians(const PrimalDualPoint& point,
                                       const EffectiveChannel& h,
                                       const RelayProblem& problem) {
  const std::size_t N = problem.num_links();
  const std::size_t W = problem.num_constraints();
  const std::size_t F = problem.num_flows();
  const std::size_t D = N + W;

  IterationJacobians m;
  m.M_x = Eigen::MatrixXd::Zero(D, D);
  m.M_hs = Eigen::MatrixXd::Zero(D, N);
  m.M_y = Eigen::MatrixXd::Zero(D, F);

  for (std::size_t j = 0; j < W; ++j) {
    const auto& S = problem.constraints[j].link_idx;
    double q = 1.0;
    for (int k : S) q += h.gain_for(j, k) * point.p[k];
    const double lam = point.lambda[j];

    for (int k : S) {
      for (int l : S)
        m.M_x(k, l) -= lam * h.gain_for(j, k) * h.gain_for(j, l) / (q * q);
      m.M_x(k, N + j) = h.gain_for(j, k) / q;
      m.M_x(N + j, k) = -h.gain_for(j, k) / q;
    }
    for (int e : S) {
      for (int k : S) {
        const double dd =
            lam * (((k == e) ? 1.0 : 0.0) / q - h.H[k] * point.p[e] / (q * q));
        m.M_hs(k, e) += dd * h.dH_dm[e];
      }
      m.M_hs(N + j, e) += (-point.p[e] / q) * h.dH_dm[e];
    }
    for (std::size_t i = 0; i < F; ++i)
      m.M_y(N + j, i) = problem.n_count(j, i);
  }
  return m;
}

Eigen::MatrixXd solve_kkt_system(const KktDerivatives& d,
                                 const Eigen::VectorXd& lambda,
                                 const Eigen::MatrixXd& rhs, double delta,
                                 double active_tol) {
  const Eigen::Index D = d.G_x.rows();
  const Eigen::Index N = D - lambda.size();

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < N; ++i) keep.push_back(i);
  for (Eigen::Index j = 0; j < lambda.size(); ++j)
    if (lambda[j] > active_tol) keep.push_back(N + j);

  const Eigen::Index m = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd A(m, m);
  Eigen::MatrixXd B(m, rhs.cols());
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) A(a, b) = d.G_x(keep[a], keep[b]);
    B.row(a) = rhs.row(keep[a]);
  }
  A.diagonal().array() += delta;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible())
    throw NumericalError(
        "KKT system is singular after Tikhonov damping (delta=" +
        std::to_string(delta) + ")");
  Eigen::MatrixXd u_red = lu.solve(B);
  if (!u_red.allFinite())
    throw NumericalError("KKT solve produced non-finite values");

  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(D, rhs.cols());
  for (Eigen::Index a = 0; a < m; ++a) u.row(keep[a]) = u_red.row(a);
  return u;
}

OuterSensitivities outer_sensitivities(const PrimalDualPoint& point,
                                       const EffectiveChannel& h,
                                       const RelayProblem& problem,
                                       double tikhonov_delta,
                                       double active_tol) {
  const KktDerivatives d = second_derivatives(point, h, problem);
  // dxhat/dr and dxhat/dh^l from the implicit function theorem on G = 0.
  const Eigen::MatrixXd dx_dr =
      -solve_kkt_system(d, point.lambda, d.G_y, tikhonov_delta, active_tol);
  const Eigen::MatrixXd dx_dhl =
      -solve_kkt_system(d, point.lambda, d.G_hl, tikhonov_delta, active_tol);
  OuterSensitivities s;
  s.That_y = d.K_r + d.K_x * dx_dr;
  s.That_hl = d.K_x * dx_dhl;
  return s;
}

}  // namespace mtnetopt
