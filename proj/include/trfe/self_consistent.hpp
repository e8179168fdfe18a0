#pragma once

#include <cmath>
#include <limits>

#include "trfe/certificates.hpp"
#include "trfe/errors.hpp"
#include "trfe/free_energy.hpp"

namespace trfe {

/// max over accepted grid points of F*_k - Ibar / beta_k. Restricting the
/// supremum to the grid only loosens the bound, so validity is preserved.
inline double irreducible_cost(const FreeEnergyCurve& curve, double mi_budget) {
  if (mi_budget < 0.0) throw Error("irreducible_cost: negative MI budget");
  if (!curve.has_accepted())
    throw EstimationError("irreducible_cost: no accepted temperatures");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& e : curve.entries) {
    if (!e.accepted) continue;
    best = std::max(best, e.F_star - mi_budget / e.beta);
  }
  return best;
}

/// Index of the accepted grid point achieving the maximum above.
inline int irreducible_argmax(const FreeEnergyCurve& curve, double mi_budget) {
  int best = -1;
  double val = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < curve.entries.size(); ++k) {
    const auto& e = curve.entries[k];
    if (!e.accepted) continue;
    const double v = e.F_star - mi_budget / e.beta;
    if (best < 0 || v > val) {
      best = static_cast<int>(k);
      val = v;
    }
  }
  return best;
}

/// Phi(J) = J_irr(Ibar(J)); strictly decreasing in J.
inline double phi(const FreeEnergyCurve& curve, const CICertificate& cert,
                  double j) {
  return irreducible_cost(curve, cert.evaluate(j));
}

struct BoundReport {
  double J_ol = 0.0;
  double J_sc = 0.0;
  double J_irr_ol = 0.0;        // open-loop-MI variant
  double beta_star = 0.0;       // grid argmax at J_sc
  int bisection_iters = 0;
  double residual = 0.0;        // |Phi(J_sc) - J_sc|
  int dropped_betas = 0;
  double std_error_at_optimum = 0.0;
  bool clamped = false;         // J_sc was negative and clamped in the report
  bool phi_monotone = true;     // grid check; Monte Carlo noise can break it
};

struct FixedPointSolve {
  double root = 0.0;
  int iterations = 0;  // interval halvings
  double residual = 0.0;
};

/// Bisection for J = phi_fn(J) on [0, j_ol]. The sign conditions
/// g(0) > 0 and g(j_ol) < 0 are verified before iterating; the bracket
/// width and |phi(J) - J| both end below epsilon.
template <class Phi>
FixedPointSolve bisect_fixed_point(Phi&& phi_fn, double j_ol,
                                   double epsilon) {
  if (!(j_ol > 0.0)) throw Error("bisect_fixed_point: J_ol must be positive");
  if (!(epsilon > 0.0))
    throw Error("bisect_fixed_point: epsilon must be positive");
  auto g = [&](double j) { return phi_fn(j) - j; };
  const double g0 = g(0.0);
  const double g1 = g(j_ol);
  if (!(g0 > 0.0) || !(g1 < 0.0)) throw HypothesisViolationError(g0, g1);

  // iteration count = interval halvings; width after k of them is J_ol/2^k
  double lo = 0.0, hi = j_ol;
  double mid = 0.5 * (lo + hi);
  double gm = g(mid);
  FixedPointSolve out;
  const int cap = 256;
  while ((hi - lo > epsilon || std::abs(gm) > epsilon) &&
         out.iterations < cap) {
    if (gm > 0.0)
      lo = mid;
    else
      hi = mid;
    ++out.iterations;
    mid = 0.5 * (lo + hi);
    gm = g(mid);
  }
  out.root = mid;
  out.residual = std::abs(gm);
  return out;
}

/// Full fixed-point report for a curve/certificate pair.
inline BoundReport solve_fixed_point(const FreeEnergyCurve& curve,
                                     const CICertificate& cert, double j_ol,
                                     double epsilon) {
  if (!(j_ol > 0.0)) throw Error("solve_fixed_point: J_ol must be positive");
  if (!(cert.evaluate(j_ol) > 0.0))
    throw HypothesisViolationError(phi(curve, cert, 0.0),
                                   phi(curve, cert, j_ol) - j_ol);
  const FixedPointSolve solve = bisect_fixed_point(
      [&](double j) { return phi(curve, cert, j); }, j_ol, epsilon);

  BoundReport out;
  out.J_ol = j_ol;
  out.dropped_betas = curve.dropped_count();
  out.bisection_iters = solve.iterations;
  out.residual = solve.residual;
  out.J_sc = solve.root;
  if (out.J_sc < 0.0) {
    out.J_sc = 0.0;
    out.clamped = true;
  }
  out.J_irr_ol = irreducible_cost(curve, cert.evaluate(j_ol));
  const int k_star = irreducible_argmax(curve, cert.evaluate(solve.root));
  out.beta_star = curve.entries[k_star].beta;
  out.std_error_at_optimum = curve.entries[k_star].std_error;

  // monotonicity audit of the empirical Phi; surfaced, never smoothed
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 16; ++k) {
    const double j = j_ol * k / 16.0;
    const double v = phi(curve, cert, j);
    if (v > prev + 1e-12 * std::max(1.0, std::abs(prev)))
      out.phi_monotone = false;
    prev = v;
  }
  return out;
}

}  // namespace trfe
