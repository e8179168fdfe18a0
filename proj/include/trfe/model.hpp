#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "trfe/dual.hpp"
#include "trfe/errors.hpp"
#include "trfe/parallel.hpp"
#include "trfe/rng.hpp"

namespace trfe {

template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Any state component beyond this magnitude aborts a rollout: model
/// instability, not estimator failure.
inline constexpr double kDivergenceGuard = 1e12;

/// q_t(t, x) >= a * |P (x - x_ref(t))|^2 - b on the projected block.
struct CoercivityParams {
  double a = 1.0;
  double b = 0.0;
};

struct CostBreakdown {
  double state_cost = 0.0;
  double control_cost = 0.0;
  double total = 0.0;
};

/// Frozen bank of standard-normal primitives: per sample, an initial-state
/// block of `init_dim` draws followed by (steps+1) rows of `noise_dim`
/// process draws. Stored unscaled; covariance roots apply at rollout time so
/// one bank serves every noise-level sweep (common random numbers).
class NoiseBank {
 public:
  NoiseBank(std::uint64_t seed, int count, int steps, int noise_dim,
            int init_dim)
      : seed_(seed),
        count_(count),
        steps_(steps),
        noise_dim_(noise_dim),
        init_dim_(init_dim),
        init_(count, std::max(init_dim, 1)),
        process_(count, (steps + 1) * noise_dim) {
    GaussianStream g(seed);
    for (int i = 0; i < count; ++i) {
      for (int k = 0; k < init_dim; ++k) init_(i, k) = g.next();
      for (int k = 0; k < (steps + 1) * noise_dim; ++k)
        process_(i, k) = g.next();
    }
  }

  std::uint64_t seed() const { return seed_; }
  int count() const { return count_; }
  int steps() const { return steps_; }
  int noise_dim() const { return noise_dim_; }
  int init_dim() const { return init_dim_; }

  Eigen::Map<const VectorXd> process_step(int sample, int t) const {
    return {process_.row(sample).data() + t * noise_dim_,
            static_cast<Eigen::Index>(noise_dim_)};
  }
  Eigen::Map<const VectorXd> init_draw(int sample) const {
    return {init_.row(sample).data(), static_cast<Eigen::Index>(init_dim_)};
  }
  const RowMatrixXd& process() const { return process_; }

  /// Copy of samples [begin, end); draws unchanged.
  NoiseBank slice(int begin, int end) const {
    NoiseBank out(*this);
    out.count_ = end - begin;
    out.init_ = init_.middleRows(begin, end - begin).eval();
    out.process_ = process_.middleRows(begin, end - begin).eval();
    return out;
  }

 private:
  std::uint64_t seed_;
  int count_, steps_, noise_dim_, init_dim_;
  RowMatrixXd init_;
  RowMatrixXd process_;
};

/// The system tuple: dynamics f, sensor h, costs q_t/r_t, noise covariances.
/// Callables are function objects with operator() templated on the scalar so
/// forward-mode derivatives flow through rollouts unchanged.
template <class Dyn, class Sens, class QCost, class RCost>
struct SystemModel {
  int state_dim = 0;
  int control_dim = 0;
  int obs_dim = 0;
  int horizon = 0;  // time steps t = 0..T

  Dyn dynamics;
  Sens sensor;
  QCost state_cost;
  RCost control_cost;

  MatrixXd sensor_noise_cov;   // p x p SPD
  MatrixXd process_noise_cov;  // noise_dim x noise_dim SPD
  VectorXd x0_mean;
  MatrixXd x0_cov;  // n x n PSD; ignored unless stochastic_x0
  bool stochastic_x0 = false;
  bool matched_noise = false;

  // r_t(u) = 1/2 u' R u for quadratic-control systems; empty otherwise.
  MatrixXd control_cost_hessian;
  // Q with q_t(x) >= (x - x_ref)' Q (x - x_ref); drives the MI certificates.
  MatrixXd state_cost_quadratic;
  CoercivityParams coercivity{1.0, 0.0};
  MatrixXd coercivity_projection;  // deviation -> coercive block; identity default
  std::function<VectorXd(int)> reference_state;  // x_ref(t); zero default

  // cached symmetric roots
  MatrixXd process_noise_sqrt;
  MatrixXd x0_cov_sqrt;

  int noise_dim() const { return static_cast<int>(process_noise_cov.rows()); }
  VectorXd x_ref(int t) const {
    return reference_state ? reference_state(t) : VectorXd::Zero(state_dim);
  }
};

namespace detail {

inline void require_spd(const MatrixXd& m, const char* name) {
  if (m.rows() != m.cols()) throw ModelContractError(std::string(name) + " not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ModelContractError(std::string(name) + " not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw ModelContractError(std::string(name) + " not positive definite");
}

inline MatrixXd symmetric_sqrt(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// Validates covariances and caches their roots. Call once per factory.
template <class Sys>
void finalize_system(Sys& sys) {
  detail::require_spd(sys.sensor_noise_cov, "sensor_noise_cov");
  detail::require_spd(sys.process_noise_cov, "process_noise_cov");
  sys.process_noise_sqrt = detail::symmetric_sqrt(sys.process_noise_cov);
  if (sys.stochastic_x0) {
    if (sys.x0_cov.rows() != sys.state_dim)
      throw ModelContractError("x0_cov dimension mismatch");
    sys.x0_cov_sqrt = detail::symmetric_sqrt(sys.x0_cov);
  }
  if (sys.coercivity_projection.size() == 0)
    sys.coercivity_projection = MatrixXd::Identity(sys.state_dim, sys.state_dim);
}

template <class Sys>
VectorXd initial_state(const Sys& sys, const NoiseBank& bank, int sample) {
  if (!sys.stochastic_x0) return sys.x0_mean;
  return sys.x0_mean + sys.x0_cov_sqrt * bank.init_draw(sample);
}

namespace detail {
inline void guard_state(const VectorXd& x, int t, int sample) {
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if (!std::isfinite(x[k]) || std::abs(x[k]) > kDivergenceGuard)
      throw DivergedRolloutError(t, sample);
}
}  // namespace detail

/// Open-loop rollout under the bank's sample: x_{t+1} = f(x_t, u_t, w_t).
/// Returns the (T+1) x n state sequence.
template <class Sys>
MatrixXd rollout(const Sys& sys, const MatrixXd& u_seq, const NoiseBank& bank,
                 int sample) {
  const int T = sys.horizon;
  MatrixXd states(T + 1, sys.state_dim);
  VectorXd x = initial_state(sys, bank, sample);
  detail::guard_state(x, 0, sample);
  states.row(0) = x.transpose();
  VectorXd w(sys.noise_dim());
  for (int t = 0; t < T; ++t) {
    w.noalias() = sys.process_noise_sqrt * bank.process_step(sample, t);
    x = sys.dynamics(t, VectorXd(states.row(t).transpose()),
                     VectorXd(u_seq.row(t).transpose()), w);
    detail::guard_state(x, t + 1, sample);
    states.row(t + 1) = x.transpose();
  }
  return states;
}

/// J^x = sum_{t=0..T} q_t(x_t), J^u = sum_{t=0..T-1} r_t(u_t). The paper's
/// control sum nominally runs to T, but only u_{0:T-1} ever enters the
/// dynamics; r_T is defined to be zero.
template <class Sys>
CostBreakdown trajectory_cost(const Sys& sys, const MatrixXd& states,
                              const MatrixXd& u_seq) {
  CostBreakdown out;
  for (int t = 0; t <= sys.horizon; ++t) {
    const double q = sys.state_cost(t, VectorXd(states.row(t).transpose()));
    if (!(q >= 0.0))
      throw ModelContractError("state cost negative or NaN at t=" +
                               std::to_string(t));
    out.state_cost += q;
  }
  for (int t = 0; t < sys.horizon; ++t) {
    const double r = sys.control_cost(t, VectorXd(u_seq.row(t).transpose()));
    if (!(r >= 0.0))
      throw ModelContractError("control cost negative or NaN at t=" +
                               std::to_string(t));
    out.control_cost += r;
  }
  out.total = out.state_cost + out.control_cost;
  return out;
}

template <class Sys>
double control_cost_total(const Sys& sys, const MatrixXd& u_seq) {
  double r = 0.0;
  for (int t = 0; t < sys.horizon; ++t)
    r += sys.control_cost(t, VectorXd(u_seq.row(t).transpose()));
  return r;
}

/// Per-sample state costs J^x over the whole bank. Fans out across samples;
/// every entry is a pure function of its index, so results match the serial
/// loop bit for bit at any worker count.
template <class Sys>
VectorXd batch_state_costs(const Sys& sys, const MatrixXd& u_seq,
                           const NoiseBank& bank) {
  if (bank.count() == 0) throw ModelContractError("empty noise bank");
  VectorXd out(bank.count());
  parallel_for(bank.count(), [&](std::size_t i) {
    try {
      out[static_cast<Eigen::Index>(i)] =
          trajectory_cost(sys, rollout(sys, u_seq, bank, static_cast<int>(i)),
                          u_seq)
              .state_cost;
    } catch (const DivergedRolloutError& e) {
      throw DivergedRolloutError(e.time_step, static_cast<int>(i));
    }
  });
  return out;
}

/// Deterministic rollout in the realized input: x_{t+1} = f(x_t, zeta_t, 0)
/// from the mean initial state. Templated on the scalar so nested duals can
/// ride through. Only meaningful for matched-noise systems.
template <class S, class Sys>
std::vector<VecX<S>> rollout_inputs(const Sys& sys, const VecX<S>& zeta) {
  const int T = sys.horizon;
  const int m = sys.control_dim;
  std::vector<VecX<S>> states(T + 1);
  VecX<S> x(sys.state_dim);
  for (int k = 0; k < sys.state_dim; ++k) x[k] = sys.x0_mean[k];
  states[0] = x;
  VecX<S> zeros = VecX<S>::Constant(sys.noise_dim(), S(0.0));
  for (int t = 0; t < T; ++t) {
    VecX<S> u = zeta.segment(t * m, m);
    x = sys.dynamics(t, states[t], u, zeros);
    for (int k = 0; k < sys.state_dim; ++k) {
      if (!finite_value(x[k])) throw DifferentiationError(
          "non-finite value in input rollout at t=" + std::to_string(t + 1));
      if (abs_value(x[k]) > kDivergenceGuard)
        throw DivergedRolloutError(t + 1);
    }
    states[t + 1] = x;
  }
  return states;
}

/// S(zeta) = sum_{t=0..T} q_t(x_t(zeta)) with w == 0.
template <class S, class Sys>
S input_state_cost(const Sys& sys, const VecX<S>& zeta) {
  auto states = rollout_inputs<S>(sys, zeta);
  S total(0.0);
  for (int t = 0; t <= sys.horizon; ++t)
    total += sys.state_cost(t, states[static_cast<std::size_t>(t)]);
  return total;
}

/// Max over random probes of |f(x,u,w) - f(x,u+w,0)|_inf. Matched-noise
/// systems must return exactly 0.
template <class Sys>
double matched_noise_probe(const Sys& sys, int n_probes = 100,
                           std::uint64_t seed = 17) {
  GaussianStream g(seed);
  std::mt19937_64 gen(mix_seed(seed, 1));
  double worst = 0.0;
  for (int k = 0; k < n_probes; ++k) {
    const int t = static_cast<int>(gen() % static_cast<std::uint64_t>(
                                             std::max(1, sys.horizon)));
    VectorXd x(sys.state_dim), u(sys.control_dim), w(sys.noise_dim());
    for (auto* v : {&x, &u, &w})
      for (Eigen::Index i = 0; i < v->size(); ++i) (*v)[i] = g.next();
    const VectorXd f1 = sys.dynamics(t, x, u, w);
    const VectorXd f2 =
        sys.dynamics(t, x, VectorXd(u + w), VectorXd(VectorXd::Zero(w.size())));
    worst = std::max(worst, (f1 - f2).cwiseAbs().maxCoeff());
  }
  return worst;
}

/// Minimum of q_t(x) - a |P (x - x_ref)|^2 + b over states visited by random
/// rollouts. Nonnegative (up to 1e-9) certifies the coercivity constants.
template <class Sys>
double coercivity_margin(const Sys& sys, const NoiseBank& bank,
                         int n_states = 1000, std::uint64_t seed = 29) {
  GaussianStream g(seed);
  double margin = std::numeric_limits<double>::infinity();
  int seen = 0;
  for (int pass = 0; seen < n_states; ++pass) {
    MatrixXd u(sys.horizon, sys.control_dim);
    for (int t = 0; t < sys.horizon; ++t)
      for (int j = 0; j < sys.control_dim; ++j) u(t, j) = 0.5 * g.next();
    const int sample = pass % bank.count();
    const MatrixXd states = rollout(sys, u, bank, sample);
    for (int t = 0; t <= sys.horizon && seen < n_states; ++t, ++seen) {
      const VectorXd dev = states.row(t).transpose() - sys.x_ref(t);
      const VectorXd proj = sys.coercivity_projection * dev;
      const double q = sys.state_cost(t, VectorXd(states.row(t).transpose()));
      margin = std::min(margin,
                        q - sys.coercivity.a * proj.squaredNorm() +
                            sys.coercivity.b);
    }
  }
  return margin;
}

}  // namespace trfe
