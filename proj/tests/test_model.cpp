#include <catch2/catch_amalgamated.hpp>

#include "trfe/model.hpp"
#include "trfe/systems.hpp"

using namespace trfe;

namespace {

// x+ = x + u + w, scalar everything
struct ShiftDynamics {
  template <class S>
  VecX<S> operator()(int, const VecX<S>& x, const VecX<S>& u,
                     const VecX<S>& w) const {
    VecX<S> out(1);
    const S s = u[0] + w[0];
    out[0] = x[0] + s;
    return out;
  }
};
struct IdentitySensor {
  template <class S>
  VecX<S> operator()(const VecX<S>& x) const {
    return x;
  }
};
struct SquareCost {
  template <class S>
  S operator()(int, const VecX<S>& x) const {
    return x[0] * x[0];
  }
};
struct ZeroCost {
  template <class S>
  S operator()(int, const VecX<S>&) const {
    return S(0.0);
  }
};

using WalkSystem =
    SystemModel<ShiftDynamics, IdentitySensor, SquareCost, ZeroCost>;

WalkSystem random_walk(double sigma_w, double x0_var, int horizon) {
  WalkSystem sys;
  sys.state_dim = sys.control_dim = sys.obs_dim = 1;
  sys.horizon = horizon;
  sys.sensor_noise_cov = MatrixXd::Identity(1, 1);
  sys.process_noise_cov = sigma_w * sigma_w * MatrixXd::Identity(1, 1);
  sys.x0_mean = VectorXd::Zero(1);
  sys.x0_cov = x0_var * MatrixXd::Identity(1, 1);
  sys.stochastic_x0 = x0_var > 0.0;
  sys.matched_noise = true;
  sys.control_cost_hessian = MatrixXd::Zero(1, 1);
  finalize_system(sys);
  return sys;
}


struct DoublingDynamics {
  template <class S>
  VecX<S> operator()(int, const VecX<S>& x, const VecX<S>& u,
                     const VecX<S>& w) const {
    VecX<S> out(1);
    const S s = u[0] + w[0];
    out[0] = 2.0 * x[0] + 0.0 * s;
    return out;
  }
};

struct NegativeCost {
  template <class S>
  S operator()(int, const VecX<S>& x) const {
    return x[0] - 10.0;
  }
};

// sample draws differ; blows up once the accumulated state passes 2
struct FuseDynamics {
  template <class S>
  VecX<S> operator()(int, const VecX<S>& x, const VecX<S>& u,
                     const VecX<S>& w) const {
    VecX<S> out(1);
    const S s = u[0] + w[0];
    out[0] = x[0] + s;
    if (x[0] > 2.0) out[0] = x[0] * 1e13;
    return out;
  }
};

}  // namespace

TEST_CASE("zero dynamics rollout stays at zero", "[model]") {
  auto sys = random_walk(0.5, 0.0, 2);
  NoiseBank bank(7, 1, 2, 1, 0);
  MatrixXd u = MatrixXd::Zero(2, 1);
  // force the noise path to zero by zeroing the covariance root
  auto frozen = sys;
  frozen.process_noise_sqrt = MatrixXd::Zero(1, 1);
  const MatrixXd states = rollout(frozen, u, bank, 0);
  REQUIRE(states.rows() == 3);
  CHECK(states.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("doubling map exceeds the divergence guard", "[model]") {
  SystemModel<DoublingDynamics, IdentitySensor, SquareCost, ZeroCost> sys;
  sys.state_dim = sys.control_dim = sys.obs_dim = 1;
  sys.horizon = 60;
  sys.sensor_noise_cov = MatrixXd::Identity(1, 1);
  sys.process_noise_cov = 1e-12 * MatrixXd::Identity(1, 1);
  sys.x0_mean = VectorXd::Ones(1);
  sys.matched_noise = true;
  finalize_system(sys);
  NoiseBank bank(3, 1, 60, 1, 0);
  const MatrixXd u = MatrixXd::Zero(60, 1);
  try {
    rollout(sys, u, bank, 0);
    FAIL("expected DivergedRolloutError");
  } catch (const DivergedRolloutError& e) {
    CHECK(e.time_step < 60);
    CHECK(e.time_step > 30);  // 2^t crosses 1e12 around t = 40
  }
}

TEST_CASE("trajectory cost sums components", "[model]") {
  auto sys = random_walk(0.1, 0.0, 1);
  MatrixXd states(2, 1);
  states << 1.0, 2.0;
  const MatrixXd u = MatrixXd::Zero(1, 1);
  const CostBreakdown c = trajectory_cost(sys, states, u);
  CHECK(c.state_cost == Catch::Approx(5.0));
  CHECK(c.control_cost == 0.0);
  CHECK(c.total == Catch::Approx(5.0));
}

TEST_CASE("negative cost trips the model contract", "[model]") {
  SystemModel<ShiftDynamics, IdentitySensor, NegativeCost, ZeroCost> sys;
  sys.state_dim = sys.control_dim = sys.obs_dim = 1;
  sys.horizon = 1;
  sys.sensor_noise_cov = MatrixXd::Identity(1, 1);
  sys.process_noise_cov = MatrixXd::Identity(1, 1);
  sys.x0_mean = VectorXd::Zero(1);
  sys.matched_noise = true;
  finalize_system(sys);
  MatrixXd states = MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(trajectory_cost(sys, states, MatrixXd::Zero(1, 1)),
                  ModelContractError);
}

TEST_CASE("noise bank draws are reproducible and immutable", "[model]") {
  NoiseBank a(42, 16, 10, 2, 3);
  NoiseBank b(42, 16, 10, 2, 3);
  CHECK((a.process() - b.process()).cwiseAbs().maxCoeff() == 0.0);
  NoiseBank c(43, 16, 10, 2, 3);
  CHECK((a.process() - c.process()).cwiseAbs().maxCoeff() > 0.0);
  // slices copy the same draws
  NoiseBank head = a.slice(0, 8);
  CHECK((head.process() - a.process().topRows(8)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batch costs equal the serial loop at any worker count", "[model]") {
  auto sys = random_walk(0.3, 1.0, 12);
  NoiseBank bank(11, 64, 12, 1, 1);
  const MatrixXd u = MatrixXd::Zero(12, 1);
  VectorXd serial(bank.count());
  for (int i = 0; i < bank.count(); ++i)
    serial[i] = trajectory_cost(sys, rollout(sys, u, bank, i), u).state_cost;

  for (const char* threads : {"1", "2", "5"}) {
    setenv("TRFE_THREADS", threads, 1);
    const VectorXd batch = batch_state_costs(sys, u, bank);
    CHECK((batch - serial).cwiseAbs().maxCoeff() == 0.0);
  }
  unsetenv("TRFE_THREADS");
}

TEST_CASE("diverged batch names the first failing sample", "[model]") {
  SystemModel<FuseDynamics, IdentitySensor, SquareCost, ZeroCost> sys;
  sys.state_dim = sys.control_dim = sys.obs_dim = 1;
  sys.horizon = 40;
  sys.sensor_noise_cov = MatrixXd::Identity(1, 1);
  sys.process_noise_cov = MatrixXd::Identity(1, 1);
  sys.x0_mean = VectorXd::Zero(1);
  sys.matched_noise = true;
  finalize_system(sys);
  NoiseBank bank(5, 32, 40, 1, 0);
  const MatrixXd u = MatrixXd::Zero(40, 1);

  int first = -1;
  for (int i = 0; i < bank.count() && first < 0; ++i) {
    try {
      rollout(sys, u, bank, i);
    } catch (const DivergedRolloutError&) {
      first = i;
    }
  }
  REQUIRE(first >= 0);
  for (const char* threads : {"1", "3"}) {
    setenv("TRFE_THREADS", threads, 1);
    try {
      batch_state_costs(sys, u, bank);
      FAIL("expected DivergedRolloutError");
    } catch (const DivergedRolloutError& e) {
      CHECK(e.sample_index == first);
    }
  }
  unsetenv("TRFE_THREADS");
}

TEST_CASE("random-walk cost matches closed-form variance accumulation",
          "[model]") {
  const double sigma_w = 0.4, x0_var = 0.8;
  const int T = 10;
  auto sys = random_walk(sigma_w, x0_var, T);
  NoiseBank bank(123, 60000, T, 1, 1);
  const MatrixXd u = MatrixXd::Zero(T, 1);
  const VectorXd costs = batch_state_costs(sys, u, bank);
  // E[J^x] = sum_t Var(x_t) = (T+1) Var(x0) + sigma_w^2 T(T+1)/2
  const double expected =
      (T + 1) * x0_var + sigma_w * sigma_w * T * (T + 1) / 2.0;
  const double mean = costs.mean();
  const double se = std::sqrt((costs.array() - mean).square().sum() /
                              (costs.size() - 1.0) / costs.size());
  CHECK(std::abs(mean - expected) < 3.5 * se);
}

TEST_CASE("bank scaling happens at rollout time", "[model]") {
  // same bank, two noise scales: costs scale accordingly
  const int T = 6;
  auto small = random_walk(0.1, 0.0, T);
  auto large = random_walk(0.2, 0.0, T);
  NoiseBank bank(9, 4, T, 1, 0);
  const MatrixXd u = MatrixXd::Zero(T, 1);
  const MatrixXd s1 = rollout(small, u, bank, 2);
  const MatrixXd s2 = rollout(large, u, bank, 2);
  CHECK((2.0 * s1 - s2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("matched-noise probe is exactly zero for shipped systems",
          "[model]") {
  auto sys = random_walk(0.3, 0.0, 8);
  CHECK(matched_noise_probe(sys) == 0.0);
  DubinsParams params;
  params.sigma_v = 1.0;
  CHECK(matched_noise_probe(dubins_system(params)) == 0.0);
}

TEST_CASE("coercivity audit passes on shipped systems", "[model]") {
  DubinsParams params;
  params.sigma_v = 0.5;
  auto sys = dubins_system(params);
  NoiseBank bank(31, 8, sys.horizon, 1, 0);
  CHECK(coercivity_margin(sys, bank) >= -1e-9);

  auto walk = random_walk(0.3, 0.5, 10);
  walk.coercivity = CoercivityParams{1.0, 0.0};  // q = x^2 exactly
  NoiseBank wbank(32, 8, 10, 1, 1);
  CHECK(coercivity_margin(walk, wbank) >= -1e-9);
}

TEST_CASE("covariance validation rejects bad inputs", "[model]") {
  WalkSystem sys;
  sys.state_dim = sys.control_dim = sys.obs_dim = 1;
  sys.horizon = 2;
  sys.x0_mean = VectorXd::Zero(1);
  sys.sensor_noise_cov = -MatrixXd::Identity(1, 1);
  sys.process_noise_cov = MatrixXd::Identity(1, 1);
  CHECK_THROWS_AS(finalize_system(sys), ModelContractError);
  sys.sensor_noise_cov = MatrixXd::Identity(1, 1);
  sys.process_noise_cov = MatrixXd::Zero(1, 1);
  CHECK_THROWS_AS(finalize_system(sys), ModelContractError);
}
