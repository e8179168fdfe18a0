#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "trfe/errors.hpp"
#include "trfe/model.hpp"

namespace trfe {

/// Serial, max-shifted log-sum-exp; never overflows for finite input.
inline double logsumexp(const VectorXd& a) {
  const double m = a.maxCoeff();
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) s += std::exp(a[i] - m);
  return m + std::log(s);
}

struct FreeEnergyEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double ess = 0.0;
  bool degenerate = false;  // weight mass collapsed onto one sample
};

struct TiltedWeights {
  VectorXd log_weights;  // normalized: logsumexp == 0
  VectorXd weights;      // sums to 1
  double ess = 0.0;
  bool degenerate = false;
};

/// Normalized weights proportional to exp(-beta * cost).
inline TiltedWeights tilted_weights(const VectorXd& costs, double beta) {
  TiltedWeights out;
  VectorXd a = (-beta) * costs;
  const double lz = logsumexp(a);
  out.log_weights = a.array() - lz;
  out.weights = out.log_weights.array().exp();
  double sq = 0.0;
  for (Eigen::Index i = 0; i < out.weights.size(); ++i)
    sq += out.weights[i] * out.weights[i];
  out.ess = 1.0 / sq;
  out.degenerate = out.ess <= 1.0 + 1e-9;
  return out;
}

/// F_beta = -(1/beta) (logsumexp(-beta J) - log N). The standard error comes
/// from the delta method on the partition-function estimate and reduces to
/// sd(J)/sqrt(N-1) as beta -> 0.
inline FreeEnergyEstimate free_energy(const VectorXd& costs, double beta) {
  if (!(beta > 0.0)) throw Error("free_energy requires beta > 0");
  const auto n = static_cast<double>(costs.size());
  FreeEnergyEstimate out;
  const VectorXd a = (-beta) * costs;
  const double lz = logsumexp(a);
  out.value = -(lz - std::log(n)) / beta;
  const TiltedWeights w = tilted_weights(costs, beta);
  out.ess = w.ess;
  out.degenerate = w.degenerate;
  const double rel_var = std::max(0.0, (n / w.ess - 1.0) / (n - 1.0));
  out.std_error = std::sqrt(rel_var) / beta;
  return out;
}

struct TiltedStats {
  TiltedWeights weights;
  VectorXd mean_input;
};

/// Weighted mean of the realized inputs under the tilted measure
/// mu propto exp(-beta J^x). `realized` holds one flattened zeta per row.
inline TiltedStats tilted_stats(const VectorXd& costs,
                                const Eigen::Ref<const RowMatrixXd>& realized,
                                double beta) {
  TiltedStats out;
  out.weights = tilted_weights(costs, beta);
  out.mean_input = realized.transpose() * out.weights.weights;
  return out;
}

struct GvpResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
};

/// Finite-alphabet variational inequality: E_p[loss] >= F_beta[q] - KL(p||q)/beta.
inline GvpResult gvp_check(const VectorXd& p, const VectorXd& q,
                           const VectorXd& losses, double beta) {
  GvpResult out;
  VectorXd shifted = (-beta) * losses;
  // F under q with max shift
  const double m = shifted.maxCoeff();
  double z = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i)
    z += q[i] * std::exp(shifted[i] - m);
  const double f = -(m + std::log(z)) / beta;
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0)
      throw AbsoluteContinuityError("p puts mass where q vanishes (atom " +
                                    std::to_string(i) + ")");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  out.lhs = f - kl / beta;
  out.rhs = p.dot(losses);
  out.gap = out.rhs - out.lhs;
  return out;
}

// ---- inner minimization (Algorithm 1 body) ----

struct MinimizeOptions {
  int max_iterations = 200;
  double tol_scale = 1e-4;  // tol_u = tol_scale * (1 + |u|_inf)
};

struct MinimizeResult {
  MatrixXd u_star;      // T x m
  double F_star = 0.0;  // free_energy(u_star) + J^u(u_star)
  int iterations = 0;
  double ess = 0.0;
  double std_error = 0.0;
  bool converged = false;
  bool degenerate = false;
};

/// Flattened per-sample process noise, scaled by the covariance root:
/// row i holds (w_0, ..., w_{T-1}) for sample i, so zeta_i = u + row_i.
template <class Sys>
RowMatrixXd scaled_input_noise(const Sys& sys, const NoiseBank& bank) {
  const int T = sys.horizon, m = sys.control_dim;
  RowMatrixXd e(bank.count(), T * m);
  parallel_for(bank.count(), [&](std::size_t i) {
    for (int t = 0; t < T; ++t)
      e.row(static_cast<Eigen::Index>(i)).segment(t * m, m) =
          (sys.process_noise_sqrt * bank.process_step(static_cast<int>(i), t))
              .transpose();
  });
  return e;
}

namespace detail {
inline MatrixXd flatten_controls(const MatrixXd& u) {
  MatrixXd out = u;
  return out;
}
}  // namespace detail

/// Minimizes F^x_beta(u) + J^u(u) over open-loop sequences by the
/// importance-weighted fixed-point iteration
///   u <- (I + beta Sigma_W R)^{-1} (u + sum_i w_i eps_i - mean(eps)),
/// the stationarity condition of the convex-minus-concave split of the
/// objective. The weighted noise mean is centered by the bank's empirical
/// mean (population value zero): the raw plug-in map has a fixed point at
/// O(mean(eps) / (beta Sigma_W R)), which diverges as beta -> 0 with any
/// finite bank; centering removes that bias exactly and leaves the
/// population map unchanged. Requires matched noise and a quadratic
/// control cost.
template <class Sys>
MinimizeResult minimize_free_objective(const Sys& sys, const NoiseBank& bank,
                                       double beta, const MatrixXd& u_init,
                                       const MinimizeOptions& opts = {}) {
  if (!sys.matched_noise)
    throw ModelContractError("minimize_free_objective requires matched noise");
  if (sys.control_cost_hessian.size() == 0)
    throw ModelContractError("minimize_free_objective requires quadratic control cost");
  const int T = sys.horizon, m = sys.control_dim;
  const MatrixXd step_map_inv =
      (MatrixXd::Identity(m, m) +
       beta * sys.process_noise_cov * sys.control_cost_hessian)
          .inverse();
  const RowMatrixXd noise = scaled_input_noise(sys, bank);
  const VectorXd noise_mean = noise.colwise().mean().transpose();

  // one cost batch per iterate: the same vector feeds the objective value,
  // the tilted weights, and the damping decision
  auto evaluate = [&](const MatrixXd& u, FreeEnergyEstimate* fe) {
    const VectorXd costs = batch_state_costs(sys, u, bank);
    const FreeEnergyEstimate est = free_energy(costs, beta);
    if (fe) *fe = est;
    return costs;
  };
  auto apply_map = [&](const MatrixXd& u, const VectorXd& costs) {
    const TiltedWeights w = tilted_weights(costs, beta);
    const VectorXd shift = noise.transpose() * w.weights - noise_mean;
    MatrixXd u_next(T, m);
    for (int t = 0; t < T; ++t)
      u_next.row(t) = (step_map_inv *
                       (u.row(t).transpose() + shift.segment(t * m, m)))
                          .transpose();
    return u_next;
  };

  MatrixXd u = u_init;
  FreeEnergyEstimate fe;
  VectorXd costs = evaluate(u, &fe);
  double obj = fe.value + control_cost_total(sys, u);
  MinimizeResult out;

  for (int it = 0; it < opts.max_iterations; ++it) {
    out.iterations = it + 1;
    MatrixXd u_next = apply_map(u, costs);
    FreeEnergyEstimate fe_next;
    VectorXd costs_next = evaluate(u_next, &fe_next);
    double obj_next = fe_next.value + control_cost_total(sys, u_next);
    if (obj_next > obj) {
      // damp toward the previous iterate when the objective rises
      u_next = u + 0.5 * (u_next - u);
      costs_next = evaluate(u_next, &fe_next);
      obj_next = fe_next.value + control_cost_total(sys, u_next);
    }
    const double du = (u_next - u).cwiseAbs().maxCoeff();
    const double tol = opts.tol_scale * (1.0 + u.cwiseAbs().maxCoeff());
    u.swap(u_next);
    costs.swap(costs_next);
    obj = obj_next;
    fe = fe_next;
    if (du < tol) {
      out.converged = true;
      break;
    }
  }
  out.u_star = u;
  out.F_star = obj;
  out.ess = fe.ess;
  out.std_error = fe.std_error;
  out.degenerate = fe.degenerate;
  return out;
}

// ---- temperature sweep ----

struct CurveOptions {
  double beta_min = 1e-3;
  double beta_max = 1e3;
  int count = 60;
  double ess_threshold = -1.0;  // <0: max(100, 0.002 N)
  MinimizeOptions minimize;
};

struct CurveEntry {
  double beta = 0.0;
  double F_star = 0.0;
  MatrixXd u_star;
  double ess = 0.0;
  double std_error = 0.0;
  bool accepted = false;
  bool converged = false;
};

struct FreeEnergyCurve {
  std::vector<CurveEntry> entries;

  int dropped_count() const {
    int n = 0;
    for (const auto& e : entries) n += e.accepted ? 0 : 1;
    return n;
  }
  bool has_accepted() const {
    for (const auto& e : entries)
      if (e.accepted) return true;
    return false;
  }
};

inline double default_ess_threshold(int n_samples) {
  return std::max(100.0, 0.002 * n_samples);
}

/// Runs the inner minimization over a log-spaced beta grid, warm-starting
/// small to large. Entries whose effective sample size falls under the
/// threshold (or that fail to converge) are recorded but never used
/// downstream.
template <class Sys>
FreeEnergyCurve build_free_energy_curve(const Sys& sys, const NoiseBank& bank,
                                        const MatrixXd& u_init,
                                        const CurveOptions& opts = {}) {
  const double thr = opts.ess_threshold >= 0.0
                         ? opts.ess_threshold
                         : default_ess_threshold(bank.count());
  FreeEnergyCurve curve;
  curve.entries.reserve(opts.count);
  MatrixXd warm = u_init;
  const double lmin = std::log(opts.beta_min), lmax = std::log(opts.beta_max);
  for (int k = 0; k < opts.count; ++k) {
    const double f = opts.count == 1
                         ? 0.0
                         : static_cast<double>(k) / (opts.count - 1);
    const double beta = std::exp(lmin + f * (lmax - lmin));
    const MinimizeResult res =
        minimize_free_objective(sys, bank, beta, warm, opts.minimize);
    CurveEntry e;
    e.beta = beta;
    e.F_star = res.F_star;
    e.u_star = res.u_star;
    e.ess = res.ess;
    e.std_error = res.std_error;
    e.converged = res.converged;
    e.accepted = res.converged && res.ess >= thr;
    if (e.accepted) warm = res.u_star;
    curve.entries.push_back(std::move(e));
  }
  return curve;
}

}  // namespace trfe
