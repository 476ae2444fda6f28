#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "varcert/expr.hpp"
#include "varcert/geometry.hpp"
#include "varcert/types.hpp"

namespace varcert {

/// One piece of a PLQ function: xᵀB x + ⟨b, x⟩ + β on the polyhedron Ω.
struct PLQPiece {
  Polyhedron region;
  Matrix quad;
  Vector lin;
  double beta = 0.0;

  double eval(const Vector& x) const;
  /// 2 B x + b.
  Vector gradient(const Vector& x) const;
};

/**
 * Extended-real-valued function on Rⁿ.
 *
 * Smooth, Indicator and PLQ are the structured kinds with analytic
 * generalized derivatives. Distance is dist(·; P) for a polyhedron. Oracle
 * is a black-box value function with an optional polyhedral domain.
 * Scaled, Sum and Composite (θ∘f) are wrappers.
 */
class FnObject {
 public:
  enum class Kind {
    Smooth,
    Indicator,
    PLQ,
    Distance,
    Oracle,
    Scaled,
    Sum,
    Composite,
  };
  using ValueFn = std::function<double(const Vector&)>;

  FnObject() = default;

  static FnObject smooth(Expr e);
  static FnObject indicator(Polyhedron p);
  /// Pieces must agree on overlaps; checked on sampled points unless
  /// check_consistency is false (throws InputError).
  static FnObject plq(std::vector<PLQPiece> pieces,
                      std::optional<Polyhedron> domain = std::nullopt,
                      bool check_consistency = true);
  static FnObject distance(Polyhedron p);
  static FnObject oracle(std::size_t n, ValueFn f,
                         std::optional<Polyhedron> domain = std::nullopt);
  /// α·φ for α > 0.
  static FnObject scaled(double alpha, FnObject inner);
  static FnObject sum(FnObject a, FnObject b);
  /// θ∘f.
  static FnObject composite(FnObject outer, SmoothMap inner);

  Kind kind() const;
  std::size_t dim() const;
  const char* kind_name() const;

  const Expr& expr() const;
  /// The set of an Indicator or Distance function.
  const Polyhedron& set() const;
  const std::vector<PLQPiece>& pieces() const;
  const std::optional<Polyhedron>& plq_domain() const;
  double alpha() const;
  const FnObject& first() const;
  const FnObject& second() const;
  const SmoothMap& inner_map() const;

  double operator()(const Vector& x) const;

  /// dom φ when it is known to be a polyhedron. Multi-piece PLQ functions
  /// report their explicit domain only.
  std::optional<Polyhedron> domain_polyhedron() const;

  /// dom φ as a residual oracle when it is a smooth preimage (Composite).
  std::optional<SampledSet> domain_set() const;

 private:
  struct Impl;
  explicit FnObject(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
};

/// Tolerance used by value() for membership in pieces and domains.
inline constexpr double kValueTol = 1e-10;

double value(const FnObject& phi, const Vector& x);

struct SampleSchedule {
  double t0 = 1e-2;
  double rho = 0.5;
  int levels = 20;
  double tol_spread = 1e-4;
  int perturbations = 8;
  /// Perturbation radius c·t; projected directions are accepted within
  /// c·√t of u.
  double radius_c = 1.0;
  std::uint64_t seed = kDefaultSeed;

  double t(int j) const;
};

enum class SubderivativeMode { Analytic, Sampled };

struct SubderivativeValue {
  double value = 0.0;
  SubderivativeMode mode = SubderivativeMode::Analytic;
  int levels_used = 0;
  /// max − min of the quotients over the last levels (sampled mode).
  double spread = 0.0;
  /// Sampled spread exceeded tol_spread.
  bool inconclusive = false;
};

/// dφ(x)(u): analytic for Smooth, Indicator, PLQ, Distance and sums with a
/// smooth summand; sampled otherwise. Throws NotInDomain.
SubderivativeValue subderivative(const FnObject& phi, const Vector& x,
                                 const Vector& u,
                                 const SampleSchedule& schedule = {});

/// Difference-quotient estimator of the lower limit defining dφ(x)(u).
SubderivativeValue subderivative_sampled(const FnObject& phi, const Vector& x,
                                         const Vector& u,
                                         const SampleSchedule& schedule = {});

/**
 * A convex set of dual vectors in one of three forms:
 *
 * - {o + M z : z ∈ Q} with Q a polyhedron (Singleton when Q is R⁰);
 * - K ∩ r·B for a polyhedral cone K (distance functions);
 * - the empty set.
 */
class SubdifferentialSet {
 public:
  enum class Kind { Empty, Singleton, Polyhedral, ConeCapBall };

  static SubdifferentialSet empty(std::size_t n);
  static SubdifferentialSet singleton(Vector g);
  static SubdifferentialSet lifted(Vector offset, Matrix map, Polyhedron q);
  static SubdifferentialSet from_cone(const PolyhedralCone& k);
  static SubdifferentialSet cone_cap_ball(PolyhedralCone k, double radius);

  Kind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  const Vector& offset() const { return offset_; }
  const Matrix& map() const { return map_; }
  const Polyhedron& lifted_set() const { return q_; }
  const PolyhedralCone& cone() const { return cone_; }
  double radius() const { return radius_; }

  /// sup{⟨v,u⟩ : v in the set}; −∞ for the empty set.
  double support(const Vector& u) const;
  /// Distance-like residual, 0 for members.
  double membership_residual(const Vector& v) const;
  bool contains(const Vector& v, double tol = 1e-8) const;

  /// Maximizers of random linear functionals (bounded ones only).
  std::vector<Vector> sample_elements(int count,
                                      std::uint64_t seed = kDefaultSeed) const;

  /// {Jᵀ v : v in the set}.
  SubdifferentialSet adjoint_image(const Matrix& jacobian) const;

  friend SubdifferentialSet minkowski_sum(const SubdifferentialSet& a,
                                          const SubdifferentialSet& b);

  std::string describe() const;

 private:
  Kind kind_ = Kind::Empty;
  std::size_t dim_ = 0;
  Vector offset_;
  Matrix map_;
  Polyhedron q_;
  PolyhedralCone cone_;
  double radius_ = 0.0;
};

SubdifferentialSet minkowski_sum(const SubdifferentialSet& a,
                                 const SubdifferentialSet& b);

/// ∂φ(x) exactly for Smooth, Indicator, Distance, convex PLQ, and sums and
/// positive multiples of those. Throws NotInDomain, NonconvexUnsupported.
SubdifferentialSet subdifferential(const FnObject& phi, const Vector& x);

/// Elements of ∂φ(x) found by testing candidate vectors (piece gradients, a
/// difference gradient) against ⟨v,u⟩ ≤ dφ(x)(u) on sampled directions.
/// Exact when subdifferential() succeeds.
SubdifferentialSet subdifferential_inner(const FnObject& phi, const Vector& x,
                                         int directions = 50,
                                         std::uint64_t seed = kDefaultSeed);

/// Largest violation of ⟨v,u⟩ ≤ dφ(x)(u) over the given directions.
double dual_inequality_violation(const FnObject& phi, const Vector& x,
                                 const Vector& v,
                                 const std::vector<Vector>& directions);

/// Unit directions in Rⁿ: ±e_i first, then uniform random ones.
std::vector<Vector> unit_directions(std::size_t n, int count,
                                    std::uint64_t seed = kDefaultSeed);

struct EpiReport {
  std::vector<Vector> directions;
  std::vector<double> liminf;
  std::vector<double> limsup;
  std::vector<Verdict> verdicts;
  Verdict overall = Verdict::Inconclusive;
};

/// Proper epi-differentiability: along the best nearby directions ũ(t)
/// the quotient has a limit (tail lim inf and lim sup within tol_spread).
EpiReport epi_check(const FnObject& phi, const Vector& x,
                    const std::vector<Vector>& directions,
                    const SampleSchedule& schedule = {});

struct RegularityReport {
  std::vector<double> gaps;
  double max_gap = 0.0;
  bool pass = false;
};

inline constexpr double kTolReg = 1e-5;

/// Dini-Hadamard regularity: support of ∂φ(x) against dφ(x) (empty set
/// has support −∞).
RegularityReport regularity_check(const FnObject& phi, const Vector& x,
                                  const std::vector<Vector>& directions,
                                  double tol_reg = kTolReg);

/// ℓ̂ = max |φ(a) − φ(b)|/‖a − b‖ over sampled a, b ∈ dom φ ∩ B(x, radius).
double rel_lipschitz_estimate(const FnObject& phi, const Vector& x,
                              double radius, int samples,
                              std::uint64_t seed = kDefaultSeed);

/// B_i ⪰ 0 for every piece and midpoint convexity on sampled pairs of
/// dom φ ∩ B(x, 1).
bool plq_is_convex(const FnObject& phi, const Vector& x, int pairs = 500,
                   std::uint64_t seed = kDefaultSeed);

/// Largest disagreement of two pieces' formulas on sampled points of their
/// intersections.
double plq_consistency_gap(const std::vector<PLQPiece>& pieces,
                           int samples_per_pair = 20,
                           std::uint64_t seed = kDefaultSeed);

}  // namespace varcert
