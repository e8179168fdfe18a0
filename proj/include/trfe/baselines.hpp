#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "trfe/deriv.hpp"
#include "trfe/errors.hpp"
#include "trfe/model.hpp"
#include "trfe/parallel.hpp"
#include "trfe/rng.hpp"

namespace trfe {

/// Linear-Gaussian problem data in one place, so the simulator model and the
/// analytic oracle cannot drift apart. Cost is sum x'Qx + sum u'Ru (forms,
/// no halves), state cost through t = T, control cost through T-1.
struct LinearSpec {
  MatrixXd A, B, H;
  MatrixXd W;  // state-space process noise covariance
  MatrixXd V;  // sensor noise covariance
  MatrixXd Q, R;
  VectorXd x0_mean;
  MatrixXd x0_cov;
  int horizon = 0;
};

struct RiccatiPass {
  std::vector<MatrixXd> S;  // value matrices, 0..T
  std::vector<MatrixXd> K;  // gains, 0..T-1
};

inline RiccatiPass control_riccati(const std::vector<MatrixXd>& A,
                                   const std::vector<MatrixXd>& B,
                                   const std::vector<MatrixXd>& Q,
                                   const MatrixXd& R) {
  const int T = static_cast<int>(A.size());
  RiccatiPass out;
  out.S.resize(T + 1);
  out.K.resize(T);
  out.S[T] = Q[T];
  for (int t = T - 1; t >= 0; --t) {
    const MatrixXd bs = B[t].transpose() * out.S[t + 1];
    const MatrixXd gram = R + bs * B[t];
    out.K[t] = gram.ldlt().solve(bs * A[t]);
    out.S[t] = Q[t] + A[t].transpose() * out.S[t + 1] * A[t] -
               A[t].transpose() * out.S[t + 1] * B[t] * out.K[t];
    out.S[t] = 0.5 * (out.S[t] + out.S[t].transpose());
    if (!out.S[t].allFinite() || !out.K[t].allFinite())
      throw ConditioningError("control Riccati recursion lost finiteness");
  }
  return out;
}

/// Exact finite-horizon partially observed LQG optimal cost: backward control
/// Riccati, forward filter Riccati, then the separation-principle traces.
inline double lqg_analytic_cost(const LinearSpec& spec) {
  const int T = spec.horizon;
  detail::require_spd(spec.V, "LinearSpec.V");
  std::vector<MatrixXd> A(T, spec.A), B(T, spec.B), Q(T + 1, spec.Q);
  const RiccatiPass ric = control_riccati(A, B, Q, spec.R);

  double total = spec.x0_mean.dot(ric.S[0] * spec.x0_mean) +
                 (ric.S[0] * spec.x0_cov).trace();
  MatrixXd p_prior = spec.x0_cov;  // covariance of x_t given y_{0:t-1}
  for (int t = 0; t < T; ++t) {
    total += (ric.S[t + 1] * spec.W).trace();
    const MatrixXd gram = spec.R + spec.B.transpose() * ric.S[t + 1] * spec.B;
    const MatrixXd gamma = ric.K[t].transpose() * gram * ric.K[t];
    // measurement update at time t
    const MatrixXd innov_cov =
        spec.H * p_prior * spec.H.transpose() + spec.V;
    const MatrixXd gain =
        innov_cov.ldlt().solve(spec.H * p_prior).transpose();
    MatrixXd p_post = p_prior - gain * spec.H * p_prior;
    p_post = 0.5 * (p_post + p_post.transpose());
    total += (gamma * p_post).trace();
    p_prior = spec.A * p_post * spec.A.transpose() + spec.W;
    if (!p_prior.allFinite())
      throw ConditioningError("filter Riccati recursion lost finiteness");
  }
  return total;
}

// ---- sample-average open-loop optimization ----

struct OpenLoopOptions {
  int max_iterations = 400;
  double grad_tol_scale = 1e-5;  // |grad|_inf <= scale * (1 + |J|)
  int max_backtracks = 50;
};

struct OpenLoopResult {
  MatrixXd u_ol;  // T x m
  double J_ol = 0.0;
  double grad_norm = 0.0;
  double std_error = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

/// Mean trajectory cost over the bank plus its gradient in the flattened
/// control sequence. Tangents are pushed forward through the rollout: the
/// state Jacobian d x_t / d u advances by the per-step dynamics Jacobians,
/// which come from scalar dual passes.
template <class Sys>
double batch_cost_and_gradient(const Sys& sys, const MatrixXd& u_seq,
                               const NoiseBank& bank, VectorXd* grad_out,
                               double* std_error = nullptr) {
  const int T = sys.horizon, m = sys.control_dim, n = sys.state_dim;
  const int nw = sys.noise_dim();
  const int dim = T * m;
  const int count = bank.count();
  VectorXd costs(count);
  RowMatrixXd grads(count, dim);
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t s) {
    const int i = static_cast<int>(s);
    VectorXd x = initial_state(sys, bank, i);
    VectorXd w(nw), qg(n);
    MatrixXd a(n, n), b(n, m);
    MatrixXd xjac = MatrixXd::Zero(n, dim), xjac_next(n, dim);
    VectorXd g = VectorXd::Zero(dim);
    VecX<Dual1> xd(n), ud(m), wd(nw);
    double cost = sys.state_cost(0, x);
    for (int t = 0; t < T; ++t) {
      const VectorXd u = u_seq.row(t).transpose();
      w.noalias() = sys.process_noise_sqrt * bank.process_step(i, t);
      // per-step Jacobians in x and u, one dual pass per direction
      for (int k = 0; k < n; ++k) xd[k] = Dual1(x[k]);
      for (int k = 0; k < m; ++k) ud[k] = Dual1(u[k]);
      for (int k = 0; k < nw; ++k) wd[k] = Dual1(w[k]);
      for (int j = 0; j < n; ++j) {
        xd[j].d = 1.0;
        const VecX<Dual1> f = sys.dynamics(t, xd, ud, wd);
        for (int k = 0; k < n; ++k) a(k, j) = f[k].d;
        xd[j].d = 0.0;
      }
      for (int j = 0; j < m; ++j) {
        ud[j].d = 1.0;
        const VecX<Dual1> f = sys.dynamics(t, xd, ud, wd);
        for (int k = 0; k < n; ++k) b(k, j) = f[k].d;
        ud[j].d = 0.0;
      }
      xjac_next.noalias() = a * xjac;
      xjac_next.middleCols(t * m, m) += b;
      xjac.swap(xjac_next);
      x = sys.dynamics(t, x, u, w);
      cost += sys.state_cost(t + 1, x);
      for (int k = 0; k < n; ++k) xd[k] = Dual1(x[k]);
      for (int j = 0; j < n; ++j) {
        xd[j].d = 1.0;
        qg[j] = sys.state_cost(t + 1, xd).d;
        xd[j].d = 0.0;
      }
      g.noalias() += xjac.transpose() * qg;
    }
    costs[i] = cost;
    grads.row(i) = g.transpose();
  });
  // fixed-order reductions keep results identical across worker counts
  double mean_cost = 0.0;
  VectorXd grad = VectorXd::Zero(dim);
  for (int i = 0; i < count; ++i) {
    mean_cost += costs[i];
    grad += grads.row(i).transpose();
  }
  mean_cost /= count;
  grad /= count;
  for (int t = 0; t < T; ++t) {
    mean_cost += sys.control_cost(t, VectorXd(u_seq.row(t).transpose()));
    grad.segment(t * m, m) +=
        control_cost_gradient(sys, t, VectorXd(u_seq.row(t).transpose()));
  }
  if (grad_out) *grad_out = grad;
  if (std_error) {
    double var = 0.0;
    const double mean_state = costs.mean();
    for (int i = 0; i < count; ++i)
      var += (costs[i] - mean_state) * (costs[i] - mean_state);
    var /= std::max(1, count - 1);
    *std_error = std::sqrt(var / count);
  }
  return mean_cost;
}

}  // namespace detail

/// Minimizes the sample-average of J_trj(u; xi^(i)) over the bank by
/// gradient descent with Armijo backtracking; the trial step comes from the
/// Barzilai-Borwein secant pair. Gradients are forward-mode through the
/// rollout, so any twice-differentiable user system works.
template <class Sys>
OpenLoopResult optimize_open_loop(const Sys& sys, const NoiseBank& bank,
                                  const MatrixXd& u_init,
                                  const OpenLoopOptions& opts = {}) {
  if (bank.count() == 0) throw ModelContractError("empty noise bank");
  const int T = sys.horizon, m = sys.control_dim;
  const int dim = T * m;

  auto cost_only = [&](const MatrixXd& u) {
    double c = batch_state_costs(sys, u, bank).mean();
    return c + control_cost_total(sys, u);
  };
  auto unflatten = [&](const VectorXd& v) {
    MatrixXd u(T, m);
    for (int t = 0; t < T; ++t) u.row(t) = v.segment(t * m, m).transpose();
    return u;
  };

  MatrixXd u = u_init;
  VectorXd grad(dim);
  double f = detail::batch_cost_and_gradient(sys, u, bank, &grad);
  OpenLoopResult best;
  best.u_ol = u;
  best.J_ol = f;
  best.grad_norm = grad.cwiseAbs().maxCoeff();

  double step = 1.0 / std::max(1.0, grad.norm());
  VectorXd u_flat(dim);
  for (int t = 0; t < T; ++t) u_flat.segment(t * m, m) = u.row(t).transpose();
  VectorXd prev_flat = u_flat, prev_grad = grad;

  OpenLoopResult out = best;
  for (int it = 0; it < opts.max_iterations; ++it) {
    out.iterations = it + 1;
    const double gnorm = grad.cwiseAbs().maxCoeff();
    if (gnorm <= opts.grad_tol_scale * (1.0 + std::abs(f))) {
      out.converged = true;
      break;
    }
    // Armijo backtracking from the BB trial step
    const double g2 = grad.squaredNorm();
    double s = step;
    bool accepted = false;
    double f_new = f;
    VectorXd cand;
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      cand = u_flat - s * grad;
      f_new = cost_only(unflatten(cand));
      if (f_new <= f - 1e-4 * s * g2) {
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) break;  // line-search failure: report best iterate
    prev_flat = u_flat;
    prev_grad = grad;
    u_flat = cand;
    u = unflatten(u_flat);
    f = detail::batch_cost_and_gradient(sys, u, bank, &grad);
    const VectorXd du = u_flat - prev_flat;
    const VectorXd dg = grad - prev_grad;
    const double dgg = dg.squaredNorm();
    step = dgg > 0.0 ? std::clamp(std::abs(du.dot(dg)) / dgg, 1e-10, 1e6)
                     : 2.0 * s;
    if (f < best.J_ol) {
      best.J_ol = f;
      best.u_ol = u;
      best.grad_norm = grad.cwiseAbs().maxCoeff();
    }
  }
  out.u_ol = best.u_ol;
  out.J_ol = best.J_ol;
  double se = 0.0;
  VectorXd g_final(dim);
  out.J_ol = detail::batch_cost_and_gradient(sys, out.u_ol, bank, &g_final, &se);
  out.grad_norm = g_final.cwiseAbs().maxCoeff();
  out.std_error = se;
  out.converged =
      out.grad_norm <= opts.grad_tol_scale * (1.0 + std::abs(out.J_ol));
  return out;
}

// ---- certainty-equivalent output-feedback baseline ----

struct LQGDesign {
  MatrixXd x_ref;                 // (T+1) x n
  std::vector<MatrixXd> A, B, G;  // dynamics Jacobians about the reference
  std::vector<MatrixXd> H;        // sensor Jacobians, 0..T
  std::vector<MatrixXd> Q_lin;    // 1/2 Hessian of q_t at the reference
  MatrixXd R_lin;                 // 1/2 control-cost Hessian
  RiccatiPass control;            // value matrices + LQR gains
  std::vector<MatrixXd> L;        // filter gains, 0..T
  std::vector<MatrixXd> P_post;   // posterior covariances, 0..T
};

template <class Sys>
MatrixXd sensor_jacobian(const Sys& sys, const VectorXd& x) {
  const int n = sys.state_dim, p = sys.obs_dim;
  MatrixXd h(p, n);
  VecX<Dual1> xd(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) xd[i] = make_dual1(x[i], i == j);
    const VecX<Dual1> y = sys.sensor(xd);
    for (int i = 0; i < p; ++i) h(i, j) = y[i].d;
  }
  return h;
}

/// Time-varying LQR + Kalman design linearized about the reference. All
/// Jacobians and quadratic cost expansions come from forward-mode passes at
/// the reference, so any smooth user system works.
template <class Sys>
LQGDesign design_lqg(const Sys& sys) {
  const int T = sys.horizon, n = sys.state_dim, m = sys.control_dim;
  LQGDesign d;
  d.x_ref.resize(T + 1, n);
  for (int t = 0; t <= T; ++t) d.x_ref.row(t) = sys.x_ref(t).transpose();

  d.A.resize(T);
  d.B.resize(T);
  d.G.resize(T);
  d.H.resize(T + 1);
  d.Q_lin.resize(T + 1);
  const VectorXd u0 = VectorXd::Zero(m);
  const VectorXd w0 = VectorXd::Zero(sys.noise_dim());
  for (int t = 0; t < T; ++t) {
    const VectorXd xr = d.x_ref.row(t).transpose();
    const DynamicsJacobians jac = dynamics_jacobians(sys, t, xr, u0, w0);
    d.A[t] = jac.A;
    d.B[t] = jac.B;
    d.G[t] = jac.G;
  }
  for (int t = 0; t <= T; ++t) {
    const VectorXd xr = d.x_ref.row(t).transpose();
    d.H[t] = sensor_jacobian(sys, xr);
    d.Q_lin[t] = 0.5 * state_cost_hessian(sys, t, xr);
  }
  if (sys.control_cost_hessian.size() == 0)
    throw ModelContractError("design_lqg requires a quadratic control cost");
  d.R_lin = 0.5 * sys.control_cost_hessian;
  d.control = control_riccati(d.A, d.B, d.Q_lin, d.R_lin);
  for (const auto& s : d.control.S) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
    if (es.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, s.norm()))
      throw ConditioningError("LQR value matrix lost positive semidefiniteness");
  }

  // forward filter Riccati on the linearized model
  d.L.resize(T + 1);
  d.P_post.resize(T + 1);
  MatrixXd p_prior =
      sys.stochastic_x0 ? sys.x0_cov : MatrixXd::Zero(n, n);
  for (int t = 0; t <= T; ++t) {
    const MatrixXd innov_cov =
        d.H[t] * p_prior * d.H[t].transpose() + sys.sensor_noise_cov;
    d.L[t] = innov_cov.ldlt().solve(d.H[t] * p_prior).transpose();
    MatrixXd p_post = p_prior - d.L[t] * d.H[t] * p_prior;
    p_post = 0.5 * (p_post + p_post.transpose());
    d.P_post[t] = p_post;
    if (!p_post.allFinite() || p_post.cwiseAbs().maxCoeff() > 1e12)
      throw ConditioningError("filter covariance blew up");
    if (t < T) {
      p_prior = d.A[t] * p_post * d.A[t].transpose() +
                d.G[t] * sys.process_noise_cov * d.G[t].transpose();
    }
  }
  return d;
}

struct BaselineResult {
  double J_lqg = 0.0;
  double std_error = 0.0;
};

/// Simulates u_t = u_nom,t - K_t (xhat_t - x_ref,t) with the precomputed
/// Kalman gains on the true nonlinear dynamics. Episodes use a noise stream
/// independent of the bank feeding the bound pipeline.
template <class Sys>
BaselineResult lqg_baseline(const Sys& sys, const LQGDesign& design,
                            int n_eval, std::uint64_t seed) {
  const int T = sys.horizon, m = sys.control_dim;
  const MatrixXd v_root = detail::symmetric_sqrt(sys.sensor_noise_cov);
  VectorXd costs(n_eval);
  parallel_for(static_cast<std::size_t>(n_eval), [&](std::size_t ep) {
    GaussianStream g(mix_seed(seed, ep));
    VectorXd x = sys.x0_mean;
    if (sys.stochastic_x0) {
      VectorXd z(sys.state_dim);
      for (int k = 0; k < sys.state_dim; ++k) z[k] = g.next();
      x += sys.x0_cov_sqrt * z;
    }
    VectorXd dev_est = sys.x0_mean - design.x_ref.row(0).transpose();
    double cost = 0.0;
    for (int t = 0; t <= T; ++t) {
      VectorXd vz(sys.obs_dim);
      for (int k = 0; k < sys.obs_dim; ++k) vz[k] = g.next();
      const VectorXd y = sys.sensor(x) + v_root * vz;
      const VectorXd y_ref =
          sys.sensor(VectorXd(design.x_ref.row(t).transpose()));
      const VectorXd innov = y - y_ref - design.H[t] * dev_est;
      dev_est += design.L[t] * innov;
      cost += sys.state_cost(t, x);
      if (t == T) break;
      const VectorXd u = -design.control.K[t] * dev_est;
      cost += sys.control_cost(t, u);
      VectorXd wz(sys.noise_dim());
      for (int k = 0; k < sys.noise_dim(); ++k) wz[k] = g.next();
      x = sys.dynamics(t, x, u, VectorXd(sys.process_noise_sqrt * wz));
      detail::guard_state(x, t + 1, static_cast<int>(ep));
      dev_est = design.A[t] * dev_est + design.B[t] * u;
    }
    costs[static_cast<Eigen::Index>(ep)] = cost;
  });
  BaselineResult out;
  double mean = 0.0;
  for (int i = 0; i < n_eval; ++i) mean += costs[i];
  mean /= n_eval;
  double var = 0.0;
  for (int i = 0; i < n_eval; ++i) var += (costs[i] - mean) * (costs[i] - mean);
  var /= std::max(1, n_eval - 1);
  out.J_lqg = mean;
  out.std_error = std::sqrt(var / n_eval);
  return out;
}

}  // namespace trfe
