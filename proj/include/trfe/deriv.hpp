#pragma once

#include <Eigen/Dense>

#include "trfe/dual.hpp"
#include "trfe/model.hpp"

namespace trfe {

/// Jacobians of the dynamics at a point, one dual pass per input direction.
struct DynamicsJacobians {
  MatrixXd A;  // d f / d x
  MatrixXd B;  // d f / d u
  MatrixXd G;  // d f / d w
};

template <class Sys>
DynamicsJacobians dynamics_jacobians(const Sys& sys, int t, const VectorXd& x,
                                     const VectorXd& u, const VectorXd& w) {
  const int n = sys.state_dim, m = sys.control_dim, nw = sys.noise_dim();
  DynamicsJacobians out{MatrixXd(n, n), MatrixXd(n, m), MatrixXd(n, nw)};
  VecX<Dual1> xd(n), ud(m), wd(nw);
  auto reset = [&] {
    for (int i = 0; i < n; ++i) xd[i] = make_dual1(x[i], false);
    for (int i = 0; i < m; ++i) ud[i] = make_dual1(u[i], false);
    for (int i = 0; i < nw; ++i) wd[i] = make_dual1(w[i], false);
  };
  for (int j = 0; j < n; ++j) {
    reset();
    xd[j].d = 1.0;
    const VecX<Dual1> f = sys.dynamics(t, xd, ud, wd);
    for (int i = 0; i < n; ++i) out.A(i, j) = f[i].d;
  }
  for (int j = 0; j < m; ++j) {
    reset();
    ud[j].d = 1.0;
    const VecX<Dual1> f = sys.dynamics(t, xd, ud, wd);
    for (int i = 0; i < n; ++i) out.B(i, j) = f[i].d;
  }
  for (int j = 0; j < nw; ++j) {
    reset();
    wd[j].d = 1.0;
    const VecX<Dual1> f = sys.dynamics(t, xd, ud, wd);
    for (int i = 0; i < n; ++i) out.G(i, j) = f[i].d;
  }
  return out;
}

template <class Sys>
VectorXd state_cost_gradient(const Sys& sys, int t, const VectorXd& x) {
  const int n = sys.state_dim;
  VectorXd g(n);
  VecX<Dual1> xd(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) xd[i] = make_dual1(x[i], i == j);
    g[j] = sys.state_cost(t, xd).d;
  }
  return g;
}

template <class Sys>
VectorXd control_cost_gradient(const Sys& sys, int t, const VectorXd& u) {
  const int m = sys.control_dim;
  VectorXd g(m);
  VecX<Dual1> ud(m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) ud[i] = make_dual1(u[i], i == j);
    g[j] = sys.control_cost(t, ud).d;
  }
  return g;
}

/// Hessian of q_t at x via nested duals (upper triangle, symmetrized).
template <class Sys>
MatrixXd state_cost_hessian(const Sys& sys, int t, const VectorXd& x) {
  const int n = sys.state_dim;
  MatrixXd h(n, n);
  VecX<Dual2> xd(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      for (int k = 0; k < n; ++k) xd[k] = make_dual2(x[k], k == i, k == j);
      const double hij = sys.state_cost(t, xd).d.d;
      h(i, j) = hij;
      h(j, i) = hij;
    }
  }
  return h;
}

}  // namespace trfe
