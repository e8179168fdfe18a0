#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "trfe/dual.hpp"
#include "trfe/errors.hpp"
#include "trfe/model.hpp"
#include "trfe/parallel.hpp"

namespace trfe {

/// Hessian of the realized-input state cost S(zeta) = sum_t q_t(x_t(zeta)),
/// one nested-dual rollout per index pair. Rollouts restart from the cached
/// primal prefix: indices at or before min(i, j)'s time step cannot affect
/// earlier states. Symmetrized on return.
template <class Sys>
MatrixXd hessian_input_cost(const Sys& sys, const VectorXd& zeta) {
  const int T = sys.horizon, m = sys.control_dim, n = sys.state_dim;
  const int dim = T * m;
  if (!sys.matched_noise)
    throw ModelContractError("hessian_input_cost requires matched noise");
  if (zeta.size() != dim)
    throw ModelContractError("hessian_input_cost: zeta has wrong length");

  const auto primal = rollout_inputs<double>(sys, zeta);
  MatrixXd hess(dim, dim);
  const VecX<Dual2> zeros2 = VecX<Dual2>::Constant(sys.noise_dim(), Dual2(0.0));

  VecX<Dual2> x(n), u(m);
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      const int t0 = std::min(i, j) / m;
      for (int k = 0; k < n; ++k) x[k] = Dual2(primal[t0][k]);
      Dual2 acc(0.0);
      for (int t = t0; t < T; ++t) {
        for (int k = 0; k < m; ++k) {
          const int idx = t * m + k;
          u[k] = make_dual2(zeta[idx], idx == i, idx == j);
        }
        x = sys.dynamics(t, x, u, zeros2);
        acc += sys.state_cost(t + 1, x);
      }
      if (!finite_value(acc))
        throw DifferentiationError("NaN in second-derivative channel");
      hess(i, j) = acc.d.d;
      hess(j, i) = acc.d.d;
    }
  }
  return hess;
}

/// Central finite-difference Hessian of S(zeta) with a fixed step.
template <class Sys>
MatrixXd hessian_input_cost_fd(const Sys& sys, const VectorXd& zeta,
                               double step = 1e-4) {
  const int dim = sys.horizon * sys.control_dim;
  auto s_at = [&](const VectorXd& z) { return input_state_cost<double>(sys, z); };
  const double s0 = s_at(zeta);
  MatrixXd hess(dim, dim);
  for (int i = 0; i < dim; ++i) {
    VectorXd zp = zeta, zm = zeta;
    zp[i] += step;
    zm[i] -= step;
    hess(i, i) = (s_at(zp) - 2.0 * s0 + s_at(zm)) / (step * step);
    for (int j = i + 1; j < dim; ++j) {
      VectorXd zpp = zeta, zpm = zeta, zmp = zeta, zmm = zeta;
      zpp[i] += step; zpp[j] += step;
      zpm[i] += step; zpm[j] -= step;
      zmp[i] -= step; zmp[j] += step;
      zmm[i] -= step; zmm[j] -= step;
      const double hij =
          (s_at(zpp) - s_at(zpm) - s_at(zmp) + s_at(zmm)) / (4.0 * step * step);
      hess(i, j) = hij;
      hess(j, i) = hij;
    }
  }
  return hess;
}

struct BetaCeiling {
  double value = std::numeric_limits<double>::infinity();
  bool defined = true;  // false when alpha >= lambda_min(R)
};

/// (R_min - alpha) / (R_min alpha sigma_bar^2); +inf when alpha = 0;
/// undefined when alpha >= R_min (the strict-convexity hypothesis fails).
inline BetaCeiling beta_max(double alpha, double r_min, double sigma_bar_sq) {
  if (!(r_min > 0.0) || !(sigma_bar_sq > 0.0) || alpha < 0.0)
    throw Error("beta_max: bad arguments");
  BetaCeiling out;
  if (alpha == 0.0) return out;
  if (alpha >= r_min) {
    out.defined = false;
    out.value = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.value = (r_min - alpha) / (r_min * alpha * sigma_bar_sq);
  return out;
}

enum class HessianMethod { dual_number, finite_difference };

struct ConvexityCertificate {
  double alpha_hat = 0.0;
  double beta_max_hat = std::numeric_limits<double>::infinity();
  bool beta_max_defined = true;
  int n_alpha = 0;
  VectorXd min_eigs;  // per-sample smallest Hessian eigenvalues
  HessianMethod method = HessianMethod::dual_number;
};

/// Samples zeta^(i) = u_nom + Sigma_w^{1/2} xi^(i) and takes
/// alpha_hat = max(0, -min_i lambda_min(Hessian S(zeta^(i)))). A sampled
/// maximum under-covers the true supremum, so alpha_hat <= alpha and the
/// reported ceiling may exceed the true certified range.
template <class Sys>
ConvexityCertificate estimate_semiconvexity(
    const Sys& sys, const MatrixXd& u_nom, int n_alpha, std::uint64_t seed,
    HessianMethod method = HessianMethod::dual_number) {
  if (!sys.matched_noise)
    throw ModelContractError("estimate_semiconvexity requires matched noise");
  const int T = sys.horizon, m = sys.control_dim;
  NoiseBank bank(seed, n_alpha, T, sys.noise_dim(), 0);
  VectorXd u_flat(T * m);
  for (int t = 0; t < T; ++t)
    u_flat.segment(t * m, m) = u_nom.row(t).transpose();

  ConvexityCertificate out;
  out.n_alpha = n_alpha;
  out.method = method;
  out.min_eigs = VectorXd(n_alpha);
  parallel_for(static_cast<std::size_t>(n_alpha), [&](std::size_t i) {
    VectorXd zeta = u_flat;
    for (int t = 0; t < T; ++t)
      zeta.segment(t * m, m) +=
          sys.process_noise_sqrt * bank.process_step(static_cast<int>(i), t);
    const MatrixXd h = method == HessianMethod::dual_number
                           ? hessian_input_cost(sys, zeta)
                           : hessian_input_cost_fd(sys, zeta);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
    out.min_eigs[static_cast<Eigen::Index>(i)] = es.eigenvalues().minCoeff();
  });
  out.alpha_hat = std::max(0.0, -out.min_eigs.minCoeff());

  if (sys.control_cost_hessian.size() > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> er(sys.control_cost_hessian);
    Eigen::SelfAdjointEigenSolver<MatrixXd> ew(sys.process_noise_cov);
    const BetaCeiling ceiling = beta_max(out.alpha_hat,
                                         er.eigenvalues().minCoeff(),
                                         ew.eigenvalues().maxCoeff());
    out.beta_max_hat = ceiling.value;
    out.beta_max_defined = ceiling.defined;
  }
  return out;
}

}  // namespace trfe
