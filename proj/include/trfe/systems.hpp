#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <numbers>

#include "trfe/baselines.hpp"
#include "trfe/errors.hpp"
#include "trfe/model.hpp"

namespace trfe {

// ---- Dubins figure-eight tracking benchmark ----

struct DubinsParams {
  double speed = 1.0;
  double dt = 0.1;
  int horizon = 100;
  double sigma_w = 0.1;
  double sigma_v = 1.0;  // sweep variable
  double heading_weight = 0.1;
  double control_weight = 0.5;  // r(dw) = 0.5 dw^2
};

struct ReferenceTrajectory {
  MatrixXd p_ref;       // (T+1) x 2
  VectorXd theta_ref;   // (T+1), unwrapped
  VectorXd omega_nom;   // T feedforward turn rates
};

/// Figure-eight (Gerono lemniscate) resampled to constant arc speed. One
/// period spans exactly T*dt seconds at the given speed; headings come from
/// forward differences with angle unwrapping.
inline ReferenceTrajectory figure_eight_reference(const DubinsParams& params) {
  const int T = params.horizon;
  const double period_length = params.speed * params.dt * T;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  // dense polyline of the unit-amplitude curve (sin s, sin(2s)/2)
  const int grid = 40000;
  VectorXd cumlen(grid + 1);
  cumlen[0] = 0.0;
  double px_prev = 0.0, py_prev = 0.0;
  for (int k = 1; k <= grid; ++k) {
    const double s = two_pi * k / grid;
    const double px = std::sin(s), py = 0.5 * std::sin(2.0 * s);
    cumlen[k] = cumlen[k - 1] + std::hypot(px - px_prev, py - py_prev);
    px_prev = px;
    py_prev = py;
  }
  const double amplitude = period_length / cumlen[grid];

  auto point_at_arclen = [&](double ell) {
    // wrap into one period, invert the cumulative length by bisection
    double wrapped = std::fmod(ell / amplitude, cumlen[grid]);
    if (wrapped < 0.0) wrapped += cumlen[grid];
    int lo = 0, hi = grid;
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      (cumlen[mid] <= wrapped ? lo : hi) = mid;
    }
    const double seg = cumlen[hi] - cumlen[lo];
    const double f = seg > 0.0 ? (wrapped - cumlen[lo]) / seg : 0.0;
    const double s = two_pi * (lo + f) / grid;
    return Eigen::Vector2d(amplitude * std::sin(s),
                           amplitude * 0.5 * std::sin(2.0 * s));
  };

  ReferenceTrajectory out;
  out.p_ref.resize(T + 1, 2);
  out.theta_ref.resize(T + 1);
  out.omega_nom.resize(T);
  MatrixXd pts(T + 2, 2);  // one lookahead point for the final heading
  for (int t = 0; t <= T + 1; ++t)
    pts.row(t) = point_at_arclen(params.speed * params.dt * t).transpose();
  out.p_ref = pts.topRows(T + 1);

  double prev = 0.0;
  for (int t = 0; t <= T; ++t) {
    const double raw = std::atan2(pts(t + 1, 1) - pts(t, 1),
                                  pts(t + 1, 0) - pts(t, 0));
    double theta = raw;
    if (t > 0) {
      // unwrap against the previous heading
      while (theta - prev > std::numbers::pi) theta -= two_pi;
      while (theta - prev < -std::numbers::pi) theta += two_pi;
    }
    out.theta_ref[t] = theta;
    prev = theta;
  }
  for (int t = 0; t < T; ++t)
    out.omega_nom[t] = (out.theta_ref[t + 1] - out.theta_ref[t]) / params.dt;
  return out;
}

struct DubinsDynamics {
  double dt = 0.1;
  double speed = 1.0;
  std::shared_ptr<const ReferenceTrajectory> ref;

  template <class S>
  VecX<S> operator()(int t, const VecX<S>& x, const VecX<S>& u,
                     const VecX<S>& w) const {
    VecX<S> out(3);
    const S steer = u[0] + w[0];  // noise shares the steering channel
    out[0] = x[0] + dt * (speed * cos(x[2]));
    out[1] = x[1] + dt * (speed * sin(x[2]));
    out[2] = x[2] + dt * (ref->omega_nom[t] + steer);
    return out;
  }
};

struct DubinsStateCost {
  double heading_weight = 0.1;
  std::shared_ptr<const ReferenceTrajectory> ref;

  template <class S>
  S operator()(int t, const VecX<S>& x) const {
    const S dx = x[0] - ref->p_ref(t, 0);
    const S dy = x[1] - ref->p_ref(t, 1);
    const S dth = x[2] - ref->theta_ref[t];
    return dx * dx + dy * dy + heading_weight * (1.0 - cos(dth));
  }
};

struct DubinsControlCost {
  double weight = 0.5;
  template <class S>
  S operator()(int, const VecX<S>& u) const {
    return weight * u[0] * u[0];
  }
};

struct PositionSensor {
  template <class S>
  VecX<S> operator()(const VecX<S>& x) const {
    return x.template head<2>();
  }
};

using DubinsSystem = SystemModel<DubinsDynamics, PositionSensor,
                                 DubinsStateCost, DubinsControlCost>;

/// Dubins car in deviation-control coordinates: the stored control is
/// dw = w - w_nom, so r(dw) = 1/2 dw^2 is quadratic about the feedforward
/// and the cost matches the raw-coordinate task exactly.
inline DubinsSystem dubins_system(const DubinsParams& params) {
  auto ref = std::make_shared<ReferenceTrajectory>(
      figure_eight_reference(params));
  DubinsSystem sys;
  sys.state_dim = 3;
  sys.control_dim = 1;
  sys.obs_dim = 2;
  sys.horizon = params.horizon;
  sys.dynamics = DubinsDynamics{params.dt, params.speed, ref};
  sys.sensor = PositionSensor{};
  sys.state_cost = DubinsStateCost{params.heading_weight, ref};
  sys.control_cost = DubinsControlCost{params.control_weight};
  sys.sensor_noise_cov =
      params.sigma_v * params.sigma_v * MatrixXd::Identity(2, 2);
  sys.process_noise_cov =
      params.sigma_w * params.sigma_w * MatrixXd::Identity(1, 1);
  sys.x0_mean = VectorXd(3);
  sys.x0_mean << ref->p_ref(0, 0), ref->p_ref(0, 1), ref->theta_ref[0];
  sys.matched_noise = true;
  sys.control_cost_hessian =
      2.0 * params.control_weight * MatrixXd::Identity(1, 1);
  sys.state_cost_quadratic = MatrixXd::Zero(3, 3);
  sys.state_cost_quadratic(0, 0) = 1.0;
  sys.state_cost_quadratic(1, 1) = 1.0;
  sys.coercivity = CoercivityParams{1.0, 0.0};
  sys.coercivity_projection = MatrixXd::Zero(2, 3);
  sys.coercivity_projection(0, 0) = 1.0;
  sys.coercivity_projection(1, 1) = 1.0;
  sys.reference_state = [ref](int t) {
    VectorXd x(3);
    x << ref->p_ref(t, 0), ref->p_ref(t, 1), ref->theta_ref[t];
    return x;
  };
  finalize_system(sys);
  return sys;
}

inline MatrixXd dubins_sensor_matrix() {
  MatrixXd h = MatrixXd::Zero(2, 3);
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  return h;
}

// ---- linear-Gaussian oracle instances ----

struct LinearDynamics {
  MatrixXd A, B;  // x+ = A x + B (u + w)

  template <class S>
  VecX<S> operator()(int, const VecX<S>& x, const VecX<S>& u,
                     const VecX<S>& w) const {
    const int n = static_cast<int>(A.rows());
    const int m = static_cast<int>(B.cols());
    VecX<S> out(n);
    for (int i = 0; i < n; ++i) {
      S acc(0.0);
      for (int j = 0; j < n; ++j) acc += A(i, j) * x[j];
      for (int j = 0; j < m; ++j) {
        const S s = u[j] + w[j];
        acc += B(i, j) * s;
      }
      out[i] = acc;
    }
    return out;
  }
};

struct QuadraticStateCost {
  MatrixXd Q;  // q(x) = x' Q x

  template <class S>
  S operator()(int, const VecX<S>& x) const {
    const int n = static_cast<int>(Q.rows());
    S acc(0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) acc += Q(i, j) * x[i] * x[j];
    return acc;
  }
};

struct QuadraticControlCost {
  MatrixXd R;  // r(u) = u' R u

  template <class S>
  S operator()(int, const VecX<S>& u) const {
    const int m = static_cast<int>(R.rows());
    S acc(0.0);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) acc += R(i, j) * u[i] * u[j];
    return acc;
  }
};

struct LinearSensor {
  MatrixXd H;

  template <class S>
  VecX<S> operator()(const VecX<S>& x) const {
    const int p = static_cast<int>(H.rows());
    const int n = static_cast<int>(H.cols());
    VecX<S> out(p);
    for (int i = 0; i < p; ++i) {
      S acc(0.0);
      for (int j = 0; j < n; ++j) acc += H(i, j) * x[j];
      out[i] = acc;
    }
    return out;
  }
};

using LinearSystem = SystemModel<LinearDynamics, LinearSensor,
                                 QuadraticStateCost, QuadraticControlCost>;

struct LinearInstance {
  LinearSystem system;
  LinearSpec spec;
};

/// Matched-noise linear-Gaussian instance. The simulator model and analytic
/// oracle spec come from the same parameter set, so they cannot drift.
inline LinearInstance linear_system(const MatrixXd& a, const MatrixXd& b,
                                    const MatrixXd& h, const MatrixXd& q_form,
                                    const MatrixXd& r_form,
                                    const MatrixXd& sigma_w,
                                    const MatrixXd& sigma_v,
                                    const VectorXd& x0_mean,
                                    const MatrixXd& x0_cov, int horizon) {
  detail::require_spd(q_form, "state cost weight");
  detail::require_spd(r_form, "control cost weight");
  LinearInstance out;
  LinearSystem& sys = out.system;
  sys.state_dim = static_cast<int>(a.rows());
  sys.control_dim = static_cast<int>(b.cols());
  sys.obs_dim = static_cast<int>(h.rows());
  sys.horizon = horizon;
  sys.dynamics = LinearDynamics{a, b};
  sys.sensor = LinearSensor{h};
  sys.state_cost = QuadraticStateCost{q_form};
  sys.control_cost = QuadraticControlCost{r_form};
  sys.sensor_noise_cov = sigma_v;
  sys.process_noise_cov = sigma_w;
  sys.x0_mean = x0_mean;
  sys.x0_cov = x0_cov;
  sys.stochastic_x0 = x0_cov.size() > 0 && x0_cov.cwiseAbs().maxCoeff() > 0.0;
  sys.matched_noise = true;
  sys.control_cost_hessian = 2.0 * r_form;  // r(u) = u'Ru = 1/2 u'(2R)u
  sys.state_cost_quadratic = q_form;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eq(q_form);
  sys.coercivity = CoercivityParams{eq.eigenvalues().minCoeff(), 0.0};
  finalize_system(sys);

  out.spec.A = a;
  out.spec.B = b;
  out.spec.H = h;
  out.spec.W = b * sigma_w * b.transpose();
  out.spec.V = sigma_v;
  out.spec.Q = q_form;
  out.spec.R = r_form;
  out.spec.x0_mean = x0_mean;
  out.spec.x0_cov = sys.stochastic_x0 ? x0_cov
                                      : MatrixXd::Zero(a.rows(), a.rows());
  out.spec.horizon = horizon;
  return out;
}

/// Scalar benchmark: x+ = a x + b (u + w), y = x + v, costs q x^2 and r u^2.
inline LinearInstance scalar_lqg_system(double a, double b_coef, double q,
                                        double r, double sigma_w,
                                        double sigma_v, double x0_var,
                                        int horizon) {
  if (!(q > 0.0))
    throw CertificateHypothesisError(
        "scalar_lqg_system: state cost weight must be positive");
  if (!(r > 0.0)) throw ModelContractError("scalar_lqg_system: r must be positive");
  auto m1 = [](double v) { return (MatrixXd(1, 1) << v).finished(); };
  return linear_system(m1(a), m1(b_coef), m1(1.0), m1(q), m1(r),
                       m1(sigma_w * sigma_w), m1(sigma_v * sigma_v),
                       VectorXd::Zero(1), m1(x0_var), horizon);
}

}  // namespace trfe
