#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "varcert/calculus.hpp"
#include "varcert/certify.hpp"
#include "varcert/expr.hpp"
#include "varcert/types.hpp"

namespace varcert {

/// Axis-aligned box [lower, upper] ⊂ R^k; lower == upper on an axis is allowed.
struct IndexBox {
  Vector lower;
  Vector upper;

  std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }
  Vector clamp(const Vector& s) const;
};

/**
 * minimize ϑ(x) subject to θ(x,s) ≤ 0 for all s ∈ S and ψ(x,t) = 0 for all
 * t ∈ T.
 *
 * ϑ is an expression in x1..xn, θ in x1..xn, s1..sk and ψ in x1..xn, t1..tj.
 * Either family may be absent.
 */
class SIProblem {
 public:
  SIProblem(std::size_t n, Expr objective, std::optional<Expr> theta, IndexBox s,
            std::optional<Expr> psi = std::nullopt, IndexBox t = {});

  /// Builds the expressions from text with the variable names above.
  static SIProblem parse(std::size_t n, const std::string& objective,
                         const std::string& theta, IndexBox s,
                         const std::string& psi = "", IndexBox t = {});

  std::size_t dim() const { return n_; }
  const Expr& objective() const { return objective_; }
  bool has_inequalities() const { return theta_.has_value(); }
  bool has_equalities() const { return psi_.has_value(); }
  const IndexBox& index_set() const { return s_; }
  const IndexBox& equality_index_set() const { return t_; }

  double theta(const Vector& x, const Vector& s) const;
  /// ∇ₓθ(x,s).
  Vector theta_grad_x(const Vector& x, const Vector& s) const;
  /// ∇ₛθ(x,s).
  Vector theta_grad_s(const Vector& x, const Vector& s) const;
  double psi(const Vector& x, const Vector& t) const;
  Vector psi_grad_x(const Vector& x, const Vector& t) const;
  Vector objective_grad(const Vector& x) const;

 private:
  std::size_t n_;
  Expr objective_;
  std::optional<Expr> theta_;
  IndexBox s_;
  std::optional<Expr> psi_;
  IndexBox t_;
};

struct GridOptions {
  /// Points per axis; 0 picks 64 for k ≤ 2, 16 for k = 3 and 8 beyond.
  int density = 0;
  int polish_steps = 100;
  /// Grid cells polished by sup_violation.
  int starts = 5;
};

int grid_density(const GridOptions& options, std::size_t k);

struct IndexMax {
  /// sup θ⁺(x,·).
  double violation = 0.0;
  /// sup θ(x,·).
  double value = -kInf;
  Vector s;
};

/// Multi-start maximization of θ(x,·) over S: grid, then projected-gradient
/// polish from the best cells.
IndexMax sup_violation(const SIProblem& p, const Vector& x,
                       const GridOptions& options = {});

/// sup_{t∈T} |ψ(x,t)| and a maximizer.
IndexMax sup_equality_violation(const SIProblem& p, const Vector& x,
                                const GridOptions& options = {});

inline constexpr double kDedupRadius = 1e-4;

/// Polished grid local maxima s with θ(x̄,s) ≥ −tol_active, deduplicated.
/// Throws InfeasiblePoint.
std::vector<Vector> active_indexes(const SIProblem& p, const Vector& x,
                                   double tol_active = 1e-6,
                                   const GridOptions& options = {},
                                   double tol_feas = 1e-8);

/// Indexes t with |ψ(x̄,t)| ≤ tol_active (all grid points, deduplicated).
std::vector<Vector> active_equality_indexes(const SIProblem& p, const Vector& x,
                                            double tol_active = 1e-6,
                                            const GridOptions& options = {});

/// κ̂ for dist(x; Ω) ≤ κ·sup_s θ⁺(x,s) (plus sup_t |ψ(x,t)|) near x̄.
CQReport sip_kappa_estimate(const SIProblem& p, const Vector& x,
                            const ModulusOptions& modulus = {},
                            const GridOptions& grid = {});

/// Extended Mangasarian–Fromovitz: some u with ⟨∇ₓθ(x̄,s), u⟩ < 0 for all
/// active s. REFUTED carries the active index that blocks it.
CQReport emfcq_check(const SIProblem& p, const Vector& x,
                     const GridOptions& grid = {}, double tol_active = 1e-6);

struct Atom {
  Vector index;
  double weight = 0.0;
};

struct AtomicMultiplier {
  std::vector<Atom> atoms;
  /// Equality atoms (t_i, μ_i), μ_i of either sign.
  std::vector<Atom> equality_atoms;

  double weight_sum() const;
  double equality_abs_sum() const;
};

struct Reduction {
  /// Indexes into the input columns that keep a positive weight.
  std::vector<int> kept;
  /// Weights of the kept columns, ≥ 0.
  Vector weights;
  int pivots = 0;
};

/// Removes columns of G until at most rows(G) weights are positive while
/// keeping Gλ: steps along null-space directions of the active columns.
Reduction caratheodory_reduce(const Matrix& g, const Vector& weights);

/// The same on index points: returns atoms with at most rows(G) entries.
AtomicMultiplier caratheodory_reduce(const std::vector<Vector>& points,
                                     const Vector& weights, const Matrix& g);

struct SipOptions {
  std::optional<double> kappa;
  GridOptions grid;
  ModulusOptions modulus;
  Tolerances tol;
  /// Grid doublings tried when the multiplier LP is infeasible.
  int refinements = 2;
};

struct SipCertificate {
  Verdict status = Verdict::Inconclusive;
  std::string detail;
  Vector x;
  Vector gradient;
  AtomicMultiplier multiplier;
  /// ‖∇ϑ + Σλᵢ∇ₓθ(x̄,sᵢ) + Σμᵢ∇ₓψ(x̄,tᵢ)‖.
  double residual = 0.0;
  /// max |λᵢθ(x̄,sᵢ)|.
  double complementarity = 0.0;
  /// Σλᵢ (+ Σ|μᵢ|).
  double bound_lhs = 0.0;
  /// κ‖∇ϑ‖, or 2κ‖∇ϑ‖ with equalities.
  double bound_rhs = 0.0;
  double kappa = 0.0;
  KappaSource kappa_source = KappaSource::None;
  int grid_density = 0;
  Tolerances tol;

  bool bound_exceeded() const { return detail == kBoundExceeded; }
};

/// Atomic multiplier for the inequality-constrained SIP at x̄.
/// Throws InfeasiblePoint, NoMultiplier.
SipCertificate certify(const SIProblem& p, const Vector& x,
                       const SipOptions& options = {});

/// ψ = 0 handled as ±ψ ≤ 0; μ = λ⁺ − λ⁻ and the bound uses 2κ‖∇ϑ‖.
SipCertificate certify_with_equalities(const SIProblem& p, const Vector& x,
                                       const SipOptions& options = {});

/// Recomputes residual, complementarity, bound and status from the atoms.
SipCertificate recheck_sip(const SIProblem& p, const SipCertificate& c);

}  // namespace varcert
