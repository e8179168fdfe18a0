#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "oracles.hpp"
#include "trfe/self_consistent.hpp"
#include "trfe/systems.hpp"

using namespace trfe;

namespace {

FreeEnergyCurve make_curve(std::initializer_list<std::pair<double, double>> pts,
                           double std_error = 0.0) {
  FreeEnergyCurve curve;
  for (const auto& [beta, f] : pts) {
    CurveEntry e;
    e.beta = beta;
    e.F_star = f;
    e.ess = 1e6;
    e.std_error = std_error;
    e.accepted = true;
    e.converged = true;
    curve.entries.push_back(e);
  }
  return curve;
}

}  // namespace

TEST_CASE("irreducible cost two-point arithmetic", "[selfconsistent]") {
  const auto curve = make_curve({{1.0, 1.0}, {2.0, 0.8}});
  CHECK(irreducible_cost(curve, 0.5) == Catch::Approx(0.55));
  CHECK(irreducible_cost(curve, 0.0) == Catch::Approx(1.0));
}

TEST_CASE("irreducible cost goes vacuous for huge budgets", "[selfconsistent]") {
  const auto curve = make_curve({{1.0, 1.0}, {2.0, 0.8}});
  CHECK(irreducible_cost(curve, 1e6) < 0.0);  // reported as-is, not clamped
}

TEST_CASE("irreducible cost needs accepted entries", "[selfconsistent]") {
  FreeEnergyCurve curve;
  CurveEntry e;
  e.beta = 1.0;
  e.F_star = 1.0;
  e.accepted = false;
  curve.entries.push_back(e);
  CHECK_THROWS_AS(irreducible_cost(curve, 0.0), EstimationError);
  CHECK_THROWS_AS(irreducible_cost(make_curve({{1.0, 1.0}}), -0.1), Error);
}

TEST_CASE("irreducible cost ignores rejected entries", "[selfconsistent]") {
  auto curve = make_curve({{1.0, 1.0}});
  CurveEntry rejected;
  rejected.beta = 2.0;
  rejected.F_star = 100.0;  // would dominate if it were used
  rejected.accepted = false;
  curve.entries.push_back(rejected);
  CHECK(irreducible_cost(curve, 0.0) == Catch::Approx(1.0));
  CHECK(curve.dropped_count() == 1);
}

TEST_CASE("phi composes the certificate with the curve", "[selfconsistent]") {
  const auto curve = make_curve({{0.5, 2.0}, {4.0, 1.1}});
  LipschitzParams p;
  p.L = 1.0;
  p.coercivity = CoercivityParams{1.0, 0.0};
  p.horizon = 6;
  p.obs_dim = 2;
  p.lambda_min = 0.5;
  const CICertificate cert = CICertificate::lipschitz(p);
  for (double j : {0.0, 0.4, 1.7})
    CHECK(phi(curve, cert, j) ==
          Catch::Approx(irreducible_cost(curve, cert.evaluate(j))));
  // monotone decreasing on a grid
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 100; ++k) {
    const double v = phi(curve, cert, 0.05 * k);
    CHECK(v <= prev + 1e-12);
    prev = v;
  }
}

TEST_CASE("a vanishing certificate makes phi constant", "[selfconsistent]") {
  const auto curve = make_curve({{0.5, 2.0}, {4.0, 1.1}});
  LipschitzParams p;
  p.L = 1e-12;  // evaluate(J) ~ 0 for any J of interest
  p.coercivity = CoercivityParams{1.0, 0.0};
  p.horizon = 6;
  p.obs_dim = 2;
  p.lambda_min = 0.5;
  const CICertificate cert = CICertificate::lipschitz(p);
  for (double j : {0.0, 1.0, 10.0})
    CHECK(phi(curve, cert, j) ==
          Catch::Approx(irreducible_cost(curve, 0.0)).margin(1e-9));
}

TEST_CASE("linear synthetic fixed point", "[selfconsistent]") {
  const double eps = 1e-4;
  const auto solve =
      bisect_fixed_point([](double j) { return 1.0 - 0.5 * j; }, 1.0, eps);
  CHECK(solve.root == Catch::Approx(2.0 / 3.0).margin(eps));
  CHECK(solve.residual <= eps);
  CHECK(solve.iterations <=
        static_cast<int>(std::ceil(std::log2(1.0 / eps))));
}

TEST_CASE("lambert synthetic fixed point", "[selfconsistent]") {
  const double eps = 1e-4;
  const auto solve =
      bisect_fixed_point([](double j) { return std::exp(-j); }, 1.0, eps);
  const double omega =
      oracles::scalar_root([](double j) { return std::exp(-j) - j; }, 0.0, 1.0);
  CHECK(omega == Catch::Approx(0.5671432904097838).epsilon(1e-10));
  CHECK(solve.root == Catch::Approx(omega).margin(eps));
  CHECK(solve.iterations <=
        static_cast<int>(std::ceil(std::log2(1.0 / eps))));
}

TEST_CASE("sign-condition violations are reported with both endpoints",
          "[selfconsistent]") {
  try {
    bisect_fixed_point([](double) { return -1.0; }, 1.0, 1e-6);
    FAIL("expected HypothesisViolationError");
  } catch (const HypothesisViolationError& e) {
    CHECK(e.g_at_zero == Catch::Approx(-1.0));
    CHECK(e.g_at_j_ol == Catch::Approx(-2.0));
  }
}

TEST_CASE("full report on a synthetic curve and certificate",
          "[selfconsistent]") {
  const auto curve = make_curve({{0.25, 3.0}, {1.0, 2.6}, {4.0, 1.9}}, 0.01);
  LipschitzParams p;
  p.L = 1.0;
  p.coercivity = CoercivityParams{1.0, 0.0};
  p.horizon = 10;
  p.obs_dim = 2;
  p.lambda_min = 1.0;
  const CICertificate cert = CICertificate::lipschitz(p);
  const double j_ol = 3.05;  // slightly above max F*
  const double eps = 1e-4 * j_ol;
  const BoundReport report = solve_fixed_point(curve, cert, j_ol, eps);
  CHECK(report.J_sc > 0.0);
  CHECK(report.J_sc < j_ol);
  CHECK(report.residual <= eps);
  CHECK(report.J_irr_ol <= report.J_sc + eps);
  CHECK(report.phi_monotone);
  // g changes sign exactly once on a fine grid
  int sign_changes = 0;
  double prev_g = phi(curve, cert, 0.0) - 0.0;
  for (int k = 1; k <= 1000; ++k) {
    const double j = j_ol * k / 1000.0;
    const double g = phi(curve, cert, j) - j;
    if ((g > 0) != (prev_g > 0)) ++sign_changes;
    prev_g = g;
  }
  CHECK(sign_changes == 1);
  // beta_star is the argmax at J_sc
  const int k_star = irreducible_argmax(curve, cert.evaluate(report.J_sc));
  CHECK(report.beta_star == curve.entries[k_star].beta);
}

TEST_CASE("certificate must carry information at J_ol", "[selfconsistent]") {
  const auto curve = make_curve({{1.0, 1.0}});
  LipschitzParams p;
  p.L = 1.0;
  p.coercivity = CoercivityParams{1.0, 0.0};
  p.horizon = 4;
  p.obs_dim = 1;
  p.lambda_min = 1.0;
  const CICertificate cert = CICertificate::lipschitz(p);
  CHECK_THROWS_AS(solve_fixed_point(curve, cert, -1.0, 1e-6), Error);
}
