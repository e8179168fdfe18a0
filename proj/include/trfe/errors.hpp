#pragma once

#include <stdexcept>
#include <string>

namespace trfe {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A rollout produced a non-finite or out-of-range state component.
struct DivergedRolloutError : Error {
  int time_step;
  int sample_index;  // -1 when not evaluated inside a batch
  DivergedRolloutError(int t, int sample = -1)
      : Error("rollout diverged at time step " + std::to_string(t) +
              (sample >= 0 ? " (sample " + std::to_string(sample) + ")" : "")),
        time_step(t),
        sample_index(sample) {}
};

/// A model callable violated its contract (negative cost, missing
/// matched-noise structure, ...).
struct ModelContractError : Error {
  using Error::Error;
};

/// Free-energy curve unusable (no accepted temperatures, ...).
struct EstimationError : Error {
  using Error::Error;
};

/// Certificate hypotheses violated (zero sensor gains, cost matrix not
/// positive on the observed subspace, ...).
struct CertificateHypothesisError : Error {
  using Error::Error;
};

/// Fixed-point bracket sign conditions failed; carries both endpoint values.
struct HypothesisViolationError : Error {
  double g_at_zero;
  double g_at_j_ol;
  HypothesisViolationError(double g0, double g1)
      : Error("fixed-point sign conditions failed: g(0)=" + std::to_string(g0) +
              ", g(J_ol)=" + std::to_string(g1)),
        g_at_zero(g0),
        g_at_j_ol(g1) {}
};

/// p is not absolutely continuous w.r.t. q on the given alphabet.
struct AbsoluteContinuityError : Error {
  using Error::Error;
};

/// NaN appeared in a derivative channel.
struct DifferentiationError : Error {
  using Error::Error;
};

/// A covariance recursion lost positive definiteness or blew up.
struct ConditioningError : Error {
  using Error::Error;
};

}  // namespace trfe
