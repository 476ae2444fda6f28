#pragma once

#include <cstdint>
#include <limits>

#include <Eigen/Core>

namespace varcert {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Default seed for every sampling-based estimator.
inline constexpr std::uint64_t kDefaultSeed = 42;

/**
 * Numerical tolerances shared across modules.
 *
 * The defaults target double-precision problems of dimension at most ~50.
 */
struct Tolerances {
  /// Membership slack for ≤ / = checks.
  double feas = 1e-8;
  /// A row a·x ≤ b is active when a·x ≥ b − active.
  double active = 1e-6;
  /// Stationarity residual accepted by the dual certificates.
  double stat = 1e-7;
  /// Slack when testing cone membership of a multiplier.
  double cone = 1e-8;
  /// Relative slack in the multiplier bound comparison.
  double bound = 1e-6;
};

/// Three-valued verdict used by every sampling or certification routine.
enum class Verdict { Verified, Refuted, Inconclusive };

const char* to_string(Verdict v);

}  // namespace varcert
