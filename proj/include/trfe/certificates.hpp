#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <variant>
#include <vector>

#include "trfe/errors.hpp"
#include "trfe/model.hpp"

namespace trfe {

/// 1/2 log det(I + Sigma_v^{-1} Sigma_h) in nats, evaluated through the
/// symmetric pencil Sigma_v^{-1/2} Sigma_h Sigma_v^{-1/2} so the result is
/// real and nonnegative.
inline double gaussian_mi_bound(const MatrixXd& sigma_v,
                                const MatrixXd& sigma_h) {
  if (sigma_v.rows() != sigma_h.rows() || sigma_h.rows() != sigma_h.cols())
    throw Error("gaussian_mi_bound: shape mismatch");
  detail::require_spd(sigma_v, "sigma_v");
  const double scale = std::max(1.0, sigma_h.cwiseAbs().maxCoeff());
  if ((sigma_h - sigma_h.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw Error("gaussian_mi_bound: sigma_h not symmetric");
  Eigen::LLT<MatrixXd> llt(sigma_v);
  const MatrixXd l_inv =
      llt.matrixL().solve(MatrixXd::Identity(sigma_v.rows(), sigma_v.cols()));
  const MatrixXd pencil = l_inv * sigma_h * l_inv.transpose();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(pencil);
  double mi = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()[i];
    if (lam < -1e-9 * scale)
      throw Error("gaussian_mi_bound: sigma_h not positive semidefinite");
    mi += 0.5 * std::log1p(std::max(0.0, lam));
  }
  return mi;
}

struct LipschitzParams {
  double L = 1.0;  // sensor Lipschitz constant
  CoercivityParams coercivity;
  int horizon = 0;  // T
  int obs_dim = 0;  // p
  double lambda_min = 1.0;  // smallest eigenvalue of Sigma_v
};

struct WaterfillParams {
  VectorXd gains;  // eigenvalues of Qe^{-1/2} H' Sv^{-1} H Qe^{-1/2}
  int steps = 0;   // T + 1
};

struct WaterfillResult {
  VectorXd allocations;
  double value = 0.0;  // nats
  double kkt_residual = 0.0;
};

/// Water-filling: maximize 1/2 sum log(1 + g_j n_j) subject to sum n_j = b,
/// n_j >= 0. Zero-gain modes never receive budget.
inline WaterfillResult waterfill_allocation(const VectorXd& gains,
                                            double budget) {
  if (budget < 0.0) throw Error("waterfill_allocation: negative budget");
  const int k = static_cast<int>(gains.size());
  std::vector<int> active;
  for (int j = 0; j < k; ++j)
    if (gains[j] > 0.0) active.push_back(j);
  if (active.empty())
    throw CertificateHypothesisError(
        "waterfill_allocation: all sensor gains vanish");
  std::sort(active.begin(), active.end(),
            [&](int a, int b) { return gains[a] > gains[b]; });

  WaterfillResult out;
  out.allocations = VectorXd::Zero(k);
  if (budget == 0.0) return out;

  // shrink the active set from the weakest mode until the water level
  // clears every active inverse gain
  double level = 0.0;
  std::size_t n_active = active.size();
  for (; n_active >= 1; --n_active) {
    double inv_sum = 0.0;
    for (std::size_t j = 0; j < n_active; ++j) inv_sum += 1.0 / gains[active[j]];
    level = (budget + inv_sum) / static_cast<double>(n_active);
    if (level >= 1.0 / gains[active[n_active - 1]]) break;
  }
  double total = 0.0;
  for (std::size_t j = 0; j < n_active; ++j) {
    const int idx = active[j];
    out.allocations[idx] = std::max(0.0, level - 1.0 / gains[idx]);
    total += out.allocations[idx];
  }
  out.kkt_residual = std::abs(total - budget);
  for (int j = 0; j < k; ++j)
    out.value += 0.5 * std::log1p(gains[j] * out.allocations[j]);
  return out;
}

/// Monotone map J -> Ibar(J) in nats (Definition: continuous, strictly
/// increasing, and a valid total-MI budget for any policy with cost <= J).
class CICertificate {
 public:
  enum class Kind { lipschitz, waterfill };

  static CICertificate lipschitz(const LipschitzParams& p) {
    if (!(p.L > 0.0) || !(p.lambda_min > 0.0) || !(p.coercivity.a > 0.0) ||
        p.coercivity.b < 0.0)
      throw CertificateHypothesisError("lipschitz certificate: bad parameters");
    CICertificate c;
    c.kind_ = Kind::lipschitz;
    c.params_ = p;
    return c;
  }

  static CICertificate waterfill(const WaterfillParams& p) {
    bool any = false;
    for (Eigen::Index j = 0; j < p.gains.size(); ++j) {
      if (p.gains[j] < 0.0)
        throw CertificateHypothesisError("waterfill certificate: negative gain");
      any = any || p.gains[j] > 0.0;
    }
    if (!any || p.steps <= 0)
      throw CertificateHypothesisError(
          "waterfill certificate: sensor carries no information about the "
          "weighted state");
    CICertificate c;
    c.kind_ = Kind::waterfill;
    c.params_ = p;
    return c;
  }

  Kind kind() const { return kind_; }

  double evaluate(double cost_budget) const {
    if (cost_budget < 0.0) throw Error("CICertificate: negative cost budget");
    if (kind_ == Kind::lipschitz) {
      const auto& p = std::get<LipschitzParams>(params_);
      const double t = static_cast<double>(p.horizon);
      const double pp = static_cast<double>(p.obs_dim);
      return (t * pp / 2.0) *
             std::log1p(p.L * p.L * (cost_budget + p.coercivity.b * t) /
                        (p.coercivity.a * t * pp * p.lambda_min));
    }
    const auto& p = std::get<WaterfillParams>(params_);
    const double per_step = cost_budget / static_cast<double>(p.steps);
    return static_cast<double>(p.steps) *
           waterfill_allocation(p.gains, per_step).value;
  }

  double operator()(double cost_budget) const { return evaluate(cost_budget); }

  const LipschitzParams& lipschitz_params() const {
    return std::get<LipschitzParams>(params_);
  }
  const WaterfillParams& waterfill_params() const {
    return std::get<WaterfillParams>(params_);
  }

 private:
  CICertificate() = default;
  Kind kind_ = Kind::lipschitz;
  std::variant<LipschitzParams, WaterfillParams> params_;
};

/// Builds the linear-sensor certificate for a system with quadratic state
/// cost weight Q (taken from the system when not supplied). Singular Q is
/// handled by restricting to its positive eigenspace; the sensor must factor
/// through that subspace for the cost budget to bound what it sees.
inline CICertificate waterfill_certificate(const MatrixXd& h_sensor,
                                           const MatrixXd& sigma_v,
                                           const MatrixXd& q_weight,
                                           int horizon) {
  detail::require_spd(sigma_v, "sigma_v");
  Eigen::SelfAdjointEigenSolver<MatrixXd> qe(q_weight);
  const double qmax = qe.eigenvalues().cwiseAbs().maxCoeff();
  if (!(qmax > 0.0))
    throw CertificateHypothesisError("waterfill_certificate: Q is zero");
  const double tol = 1e-12 * qmax;
  std::vector<int> keep;
  for (Eigen::Index i = 0; i < qe.eigenvalues().size(); ++i) {
    if (qe.eigenvalues()[i] < -tol)
      throw CertificateHypothesisError(
          "waterfill_certificate: Q has a negative eigenvalue");
    if (qe.eigenvalues()[i] > tol) keep.push_back(static_cast<int>(i));
  }
  MatrixXd basis(q_weight.rows(), keep.size());
  VectorXd lam(keep.size());
  for (std::size_t j = 0; j < keep.size(); ++j) {
    basis.col(static_cast<Eigen::Index>(j)) = qe.eigenvectors().col(keep[j]);
    lam[static_cast<Eigen::Index>(j)] = qe.eigenvalues()[keep[j]];
  }
  // H must not observe the unweighted complement
  const MatrixXd residual =
      h_sensor - h_sensor * basis * basis.transpose();
  if (residual.cwiseAbs().maxCoeff() >
      1e-9 * std::max(1.0, h_sensor.cwiseAbs().maxCoeff()))
    throw CertificateHypothesisError(
        "waterfill_certificate: sensor observes directions the state cost "
        "does not weight");

  Eigen::LLT<MatrixXd> llt(sigma_v);
  const MatrixXd sv_root_inv =
      llt.matrixL().solve(MatrixXd::Identity(sigma_v.rows(), sigma_v.cols()));
  const MatrixXd b =
      sv_root_inv * h_sensor * basis * lam.cwiseSqrt().cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> ge(b.transpose() * b);
  WaterfillParams params;
  params.gains = ge.eigenvalues().cwiseMax(0.0);
  params.steps = horizon + 1;
  return CICertificate::waterfill(params);
}

template <class Sys>
CICertificate waterfill_certificate(const Sys& sys, const MatrixXd& h_sensor) {
  if (sys.state_cost_quadratic.size() == 0)
    throw CertificateHypothesisError(
        "waterfill_certificate: system has no quadratic state-cost weight");
  return waterfill_certificate(h_sensor, sys.sensor_noise_cov,
                               sys.state_cost_quadratic, sys.horizon);
}

}  // namespace trfe
