#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "varcert/calculus.hpp"
#include "varcert/expr.hpp"
#include "varcert/funcspace.hpp"
#include "varcert/geometry.hpp"
#include "varcert/types.hpp"

namespace varcert {

/// minimize ϑ(x) subject to f(x) ∈ Θ.
class ConstrainedProblem {
 public:
  /// ϑ must be Smooth or PLQ. Throws DimensionMismatch, InputError.
  ConstrainedProblem(FnObject objective, SmoothMap constraint, Polyhedron theta);

  const FnObject& objective() const { return objective_; }
  const SmoothMap& constraint() const { return f_; }
  const Polyhedron& theta() const { return theta_; }
  std::size_t dim() const { return f_.input_dim(); }
  std::size_t constraint_dim() const { return f_.output_dim(); }
  bool smooth_objective() const { return objective_.kind() == FnObject::Kind::Smooth; }

  bool feasible(const Vector& x, double tol_feas = 1e-8) const;
  /// The constraint set Ω = f⁻¹(Θ) at x.
  Composite constraint_set(const Vector& x) const;

 private:
  FnObject objective_;
  SmoothMap f_;
  Polyhedron theta_;
};

enum class CertificateKind { Primal, DualKKT, ExactPenalty };
enum class KappaSource { None, Asserted, Estimated };
/// κ‖∇ϑ(x̄)‖ for smooth objectives, ℓκ otherwise.
enum class BoundRule { Gradient, Lipschitz };

const char* to_string(CertificateKind k);
const char* to_string(KappaSource k);
const char* to_string(BoundRule r);

/// Status detail when stationarity holds but ‖λ‖ exceeds the bound.
inline constexpr const char* kBoundExceeded = "BOUND_EXCEEDED";

struct Certificate {
  CertificateKind kind = CertificateKind::DualKKT;
  Verdict status = Verdict::Inconclusive;
  std::string detail;
  Vector x;
  /// Multipliers (DualKKT).
  Vector lambda;
  /// The element of ∂ϑ(x̄) balanced by ∇f(x̄)ᵀλ (∇ϑ(x̄) when smooth).
  Vector subgradient;
  /// ‖∇ϑ + ∇fᵀλ‖, or the distance of −∇fᵀλ to ∂ϑ(x̄) for PLQ objectives.
  double residual = 0.0;
  double cone_residual = 0.0;
  double bound_lhs = 0.0;
  double bound_rhs = 0.0;
  BoundRule bound_rule = BoundRule::Gradient;
  double kappa = 0.0;
  KappaSource kappa_source = KappaSource::None;
  /// Neighborhood radius behind an estimated κ.
  double kappa_radius = 0.0;
  double lipschitz = 0.0;
  /// Primal: optimal value of the descent LP. ExactPenalty: min ψ − ψ(x̄).
  double value = 0.0;
  /// Descent direction (Primal) or sample point (ExactPenalty).
  std::optional<Vector> witness;
  Tolerances tol;

  bool bound_exceeded() const { return detail == kBoundExceeded; }
};

/// min ⟨∇ϑ_i(x̄), u⟩ over active pieces i, u ∈ T_{C_i}(x̄),
/// ∇f(x̄)u ∈ T_Θ(ȳ), ‖u‖_∞ ≤ 1. Throws InfeasiblePoint.
Certificate primal_check(const ConstrainedProblem& p, const Vector& x,
                         const Tolerances& tol = {});

struct DualOptions {
  /// Asserted κ; estimated with msqc_estimate when absent.
  std::optional<double> kappa;
  ModulusOptions estimate;
  /// ℓ for the Lipschitz rule; estimated around x̄ when absent.
  std::optional<double> lipschitz;
  Tolerances tol;
};

/// λ ∈ N_Θ(ȳ) with 0 ∈ ∂ϑ(x̄) + ∇f(x̄)ᵀλ of least generator weight, and the
/// bound ‖λ‖ ≤ κ‖∇ϑ(x̄)‖ (or ℓκ). Throws InfeasiblePoint, NoMultiplier.
Certificate dual_certificate(const ConstrainedProblem& p, const Vector& x,
                             const DualOptions& options = {});

/// Re-evaluates a DualKKT certificate's x, λ and κ against the problem.
/// The returned copy has recomputed residuals, bound and status.
Certificate recheck_dual(const ConstrainedProblem& p, const Certificate& c);

struct PenaltyCheckOptions {
  double radius = 0.1;
  int samples = 200;
  double tol = 1e-9;
  std::uint64_t seed = kDefaultSeed;
};

/// ψ(x) = ϑ(x) + ℓκ·dist(f(x); Θ) sampled on a ball around x̄.
Certificate exact_penalty_check(const ConstrainedProblem& p, const Vector& x,
                                double lipschitz, double kappa,
                                const PenaltyCheckOptions& options = {});

/// ℓ: ‖∇ϑ(x̄)‖ for smooth objectives, rel_lipschitz_estimate otherwise.
double objective_lipschitz(const ConstrainedProblem& p, const Vector& x,
                           double radius = 0.1, int samples = 400,
                           std::uint64_t seed = kDefaultSeed);

}  // namespace varcert
