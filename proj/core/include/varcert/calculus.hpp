#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "varcert/expr.hpp"
#include "varcert/funcspace.hpp"
#include "varcert/geometry.hpp"
#include "varcert/types.hpp"

namespace varcert {

/**
 * The composition φ = θ∘f around a base point x̄ with ȳ = f(x̄) ∈ dom θ.
 *
 * Qualification checks need dom θ as a polyhedron; it is taken from
 * θ.domain_polyhedron() (multi-piece PLQ functions need an explicit domain).
 */
class Composite {
 public:
  /// Throws DimensionMismatch, NotInDomain.
  Composite(FnObject theta, SmoothMap f, Vector xbar);

  /// The set Ω = f⁻¹(Θ) as the composite δ_Θ∘f.
  static Composite set(SmoothMap f, Polyhedron theta, Vector xbar);

  const FnObject& theta() const { return theta_; }
  const SmoothMap& f() const { return f_; }
  const Vector& xbar() const { return xbar_; }
  const Vector& ybar() const { return ybar_; }
  /// ∇f(x̄).
  const Matrix& jacobian() const { return jac_; }
  std::size_t input_dim() const { return f_.input_dim(); }
  std::size_t output_dim() const { return f_.output_dim(); }

  bool has_polyhedral_domain() const { return dom_.has_value(); }
  /// dom θ. Throws InputError when it is not known to be polyhedral.
  const Polyhedron& dom_theta() const;

  /// θ∘f as a function object.
  FnObject as_function() const;
  /// Ω = f⁻¹(dom θ) as a residual oracle.
  SampledSet feasible_set() const;
  /// The same θ and f at another base point.
  Composite at(const Vector& x) const;

 private:
  FnObject theta_;
  SmoothMap f_;
  Vector xbar_;
  Vector ybar_;
  Matrix jac_;
  std::optional<Polyhedron> dom_;
};

// ---------------------------------------------------------------------------
// Chain and sum rules

/// Hypotheses under which the subderivative chain rule is applied.
enum class ChainRoute {
  /// AQC plus proper epi-differentiability of θ at ȳ.
  AbadieEpi,
  /// MSQC with θ relatively Lipschitz on its domain.
  MetricSubregularity,
};

const char* to_string(ChainRoute r);

struct ChainSubderivative {
  SubderivativeValue value;
  ChainRoute route = ChainRoute::MetricSubregularity;
};

/// dθ(ȳ)(∇f(x̄)u). The route is recorded, not checked.
ChainSubderivative chain_subderivative(
    const Composite& c, const Vector& u,
    ChainRoute route = ChainRoute::MetricSubregularity,
    const SampleSchedule& schedule = {});

enum class SubdifferentialRoute {
  /// θ Lipschitz around ȳ and Dini-Hadamard regular there.
  LipschitzRegular,
  /// θ convex and AQC at x̄.
  ConvexAbadie,
};

const char* to_string(SubdifferentialRoute r);

struct ChainSubdifferential {
  SubdifferentialSet set;
  SubdifferentialRoute route = SubdifferentialRoute::LipschitzRegular;
  /// The route's hypotheses were not confirmed (AQC not verified).
  bool heuristic = false;
  std::string note;
};

/// ∇f(x̄)ᵀ∂θ(ȳ). Throws NonconvexUnsupported when θ is neither regular and
/// Lipschitz at ȳ nor convex.
ChainSubdifferential chain_subdifferential(const Composite& c,
                                           int directions = 50,
                                           std::uint64_t seed = kDefaultSeed);

struct SumSubderivative {
  SubderivativeValue value;
  /// T_{dom φ ∩ dom ψ}(x) = T_{dom φ}(x) ∩ T_{dom ψ}(x) was confirmed.
  bool qc_verified = false;
  std::string qc;
};

SumSubderivative sum_subderivative(const FnObject& phi, const FnObject& psi,
                                   const Vector& x, const Vector& u,
                                   const SampleSchedule& schedule = {});

struct SumSubdifferential {
  SubdifferentialSet set;
  /// Both summands Lipschitz around x and regular at x.
  bool regular = false;
};

SumSubdifferential sum_subdifferential(const FnObject& phi, const FnObject& psi,
                                       const Vector& x, int directions = 50,
                                       std::uint64_t seed = kDefaultSeed);

// ---------------------------------------------------------------------------
// Qualification conditions

enum class CQCondition { Abadie, MSQC, Robinson };

const char* to_string(CQCondition c);

struct CQReport {
  CQCondition condition = CQCondition::Abadie;
  Verdict verdict = Verdict::Inconclusive;
  /// Direction or point violating the condition.
  std::optional<Vector> witness;
  /// Modulus estimate (MSQC-type checks).
  std::optional<double> kappa;
  /// Per-radius estimates, largest radius first.
  std::vector<double> level_kappas;
  double radius = 0.0;
  int samples = 0;
  /// VERIFIED came from sampling rather than an exact argument.
  bool sampling_confidence = false;
  /// The modulus estimate at least doubled at every radius halving.
  bool divergent = false;
  std::string detail;
};

struct AbadieOptions {
  /// Extra random directions of the linearized cone besides its generators.
  int samples = 24;
  std::uint64_t seed = kDefaultSeed;
};

/// T_Ω(x̄) = {u : ∇f(x̄)u ∈ T_{dom θ}(ȳ)} for Ω = f⁻¹(dom θ).
CQReport abadie_check(const Composite& c, const AbadieOptions& options = {});

/// The linearized cone {u : ∇f(x̄)u ∈ T_{dom θ}(ȳ)} in halfspace form.
PolyhedralCone linearized_cone(const Composite& c);

/// Unit directions (p − x̄)/‖p − x̄‖ for feasible points p near x̄.
std::vector<Vector> sampled_tangents(const Composite& c, int count,
                                     double step = 1e-5,
                                     std::uint64_t seed = kDefaultSeed);

struct ModulusOptions {
  double radius = 0.1;
  /// Sample points per radius level.
  int samples = 60;
  /// Number of radius halvings after the first level.
  int halvings = 2;
  std::uint64_t seed = kDefaultSeed;
};

/**
 * Sampled estimate of the smallest κ with dist(x; Ω) ≤ κ·r(x) near x̄.
 *
 * `parts(x)` returns (dist(x; Ω), r(x)) or nothing when x is (numerically)
 * in Ω. The same directions and relative radii are used at each level.
 */
CQReport modulus_estimate(
    const Vector& xbar,
    const std::function<std::optional<std::pair<double, double>>(const Vector&)>&
        parts,
    const ModulusOptions& options);

/// dist(x; Ω) by penalty projection, accepted at residual ≤ 1e-8·scale and,
/// failing that, at 1e-3·scale (degenerate constraints converge slowly).
std::optional<double> sampled_distance(const SampledSet& omega, const Vector& x,
                                       double scale);

/// κ̂ for dist(x; Ω) ≤ κ·dist(f(x); dom θ) near x̄.
CQReport msqc_estimate(const Composite& c, const ModulusOptions& options = {});

/// Relative interiority step for robinson_check.
inline constexpr double kRobinsonEps = 1e-3;

/// 0 ∈ int{f(x̄) + ∇f(x̄)Rⁿ − dom θ}, tested on ±ε e_j with
/// ε = kRobinsonEps·(‖f(x̄)‖ + 1).
CQReport robinson_check(const Composite& c, double eps_rel = kRobinsonEps);

// ---------------------------------------------------------------------------
// Normals to inverse images

struct MultiplierCheck {
  Vector lambda;
  double lambda_norm = 0.0;
  double v_norm = 0.0;
  /// κ‖v‖.
  double bound = 0.0;
  bool within = false;
  /// The minimal-norm multiplier was computed after the 1-norm one failed.
  bool refined = false;
};

inline constexpr double kTolBound = 1e-6;

/// ∇f(x̄)ᵀN_Θ(ȳ) with Θ = dom θ, and the bounded multiplier test.
class InverseImageNormals {
 public:
  InverseImageNormals(PolyhedralCone cone, PolyhedralCone theta_normals,
                      Matrix jacobian, double kappa);

  /// Generator form.
  const PolyhedralCone& cone() const { return cone_; }
  const PolyhedralCone& theta_normals() const { return theta_normals_; }
  double kappa() const { return kappa_; }

  /// λ ∈ N_Θ(ȳ) with ∇f(x̄)ᵀλ = v of least generator weight, refined to the
  /// least Euclidean norm if ‖λ‖ > κ‖v‖. Throws InfeasibleWitness.
  MultiplierCheck check(const Vector& v) const;

 private:
  PolyhedralCone cone_;
  PolyhedralCone theta_normals_;
  Matrix jac_;
  double kappa_;
};

InverseImageNormals normal_cone_inverse_image(const Composite& c, double kappa);

struct RobustnessReport {
  bool applicable = false;
  double max_violation = 0.0;
  int sequences = 0;
  /// Tail-averaged unit normals that were tested.
  std::vector<Vector> limits;
  bool pass = false;
};

struct RobustnessOptions {
  int samples = 20;
  double radius = 0.1;
  int levels = 20;
  double tol = 1e-5;
  std::uint64_t seed = kDefaultSeed;
};

/// Limits of normals N_Ω(x_k) along x_k → x̄ belong to N_Ω(x̄). Not
/// applicable without a modulus κ.
RobustnessReport robustness_check(const Composite& c, std::optional<double> kappa,
                                  const RobustnessOptions& options = {});

struct ProxRegularityReport {
  bool applicable = false;
  /// Largest ⟨v, u − x⟩/‖u − x‖² over all sampled triples.
  double r_hat = 0.0;
  /// The same over the first half of the samples.
  double r_hat_half = 0.0;
  /// κ·β with β bounding ‖∇²f‖ on the samples.
  double r_bound = 0.0;
  double hessian_bound = 0.0;
  int points = 0;
  bool stable = false;
  bool pass = false;
};

struct ProxOptions {
  double radius = 0.5;
  int samples = 80;
  std::uint64_t seed = kDefaultSeed;
};

ProxRegularityReport prox_regularity_check(const Composite& c,
                                           std::optional<double> kappa,
                                           const ProxOptions& options = {});

/// Central-difference Hessians of each component of f (step 1e-4 on the
/// exact gradients).
std::vector<Matrix> fd_hessians(const SmoothMap& f, const Vector& x,
                                double step = 1e-4);

}  // namespace varcert
