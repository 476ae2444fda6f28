#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "varcert/solvers.hpp"
#include "varcert/types.hpp"

namespace varcert {

/// {x : A_ineq x ≤ b_ineq, A_eq x = b_eq} ⊂ Rⁿ.
class Polyhedron {
 public:
  Polyhedron() = default;
  Polyhedron(Matrix a_ineq, Vector b_ineq, Matrix a_eq, Vector b_eq);

  static Polyhedron whole_space(std::size_t n);
  static Polyhedron inequalities(Matrix a, Vector b);
  /// {x : x ≤ 0}.
  static Polyhedron nonpositive_orthant(std::size_t n);
  /// {x : x ≥ 0}.
  static Polyhedron nonnegative_orthant(std::size_t n);
  static Polyhedron box(const Vector& lower, const Vector& upper);
  static Polyhedron point(const Vector& p);

  std::size_t dim() const { return dim_; }
  const Matrix& a_ineq() const { return a_ineq_; }
  const Vector& b_ineq() const { return b_ineq_; }
  const Matrix& a_eq() const { return a_eq_; }
  const Vector& b_eq() const { return b_eq_; }

  /// Largest constraint violation (≤-rows positive part, |=-rows|).
  double max_violation(const Vector& x) const;
  bool contains(const Vector& x, double tol_feas = 1e-8) const;

  /// Phase-1 LP; emptiness is an answer, not an error.
  bool is_empty() const;

  /// Inequality rows with A_i x ≥ b_i − tol_active.
  std::vector<Eigen::Index> active_rows(const Vector& x,
                                        double tol_active = 1e-6) const;

  Polyhedron intersect(const Polyhedron& other) const;

 private:
  std::size_t dim_ = 0;
  Matrix a_ineq_;
  Vector b_ineq_;
  Matrix a_eq_;
  Vector b_eq_;
};

/**
 * A polyhedral cone in halfspace form {u : G u ≤ 0, H u = 0} and/or
 * generator form cone{columns of R} + span{columns of L}.
 *
 * Conversion between the two forms uses the double-description method and
 * is limited to dimension ≤ kMaxConversionDim; beyond that, membership is
 * answered by LP on whichever form is present.
 */
class PolyhedralCone {
 public:
  enum class Form { Halfspace, Generators, Both };

  static constexpr std::size_t kMaxConversionDim = 8;

  PolyhedralCone() = default;

  /// Rows of `g` and `h` are the constraint normals.
  static PolyhedralCone from_halfspaces(Matrix g, Matrix h, std::size_t n);
  /// Columns of `rays` and `lines` are the generators.
  static PolyhedralCone from_generators(Matrix rays, Matrix lines,
                                        std::size_t n);
  static PolyhedralCone whole_space(std::size_t n);
  static PolyhedralCone zero(std::size_t n);

  std::size_t dim() const { return dim_; }
  Form form() const;
  bool has_halfspaces() const { return has_h_; }
  bool has_generators() const { return has_v_; }

  const Matrix& ineq() const { return g_; }
  const Matrix& eq() const { return h_; }
  const Matrix& rays() const { return rays_; }
  const Matrix& lines() const { return lines_; }

  /// Distance-like membership residual: 0 for members. In halfspace form
  /// this is the largest normalized constraint violation; in generator form
  /// the least 1-norm error of a generator decomposition (LP).
  double membership_residual(const Vector& u) const;
  bool contains(const Vector& u, double tol = 1e-8) const;

  /// Copies populated with the missing form (double description).
  PolyhedralCone with_generators() const;
  PolyhedralCone with_halfspaces() const;

  /// {v : ⟨v,u⟩ ≤ 0 for all u ∈ K}; swaps the two forms.
  PolyhedralCone polar() const;

  /// Mutual generator membership; converts as needed.
  bool equals(const PolyhedralCone& other, double tol = 1e-7) const;

  /// Image {M u : u ∈ K}; requires the generator form.
  PolyhedralCone image(const Matrix& m) const;

  /// Preimage {u : M u ∈ K}; requires the halfspace form.
  PolyhedralCone preimage(const Matrix& m) const;

  /// Finite list of vectors whose nonnegative combinations give K:
  /// the rays, then ± each line.
  Matrix generator_list() const;

  /// Cross-check of a cone holding both forms.
  bool forms_consistent(double tol = 1e-7) const;

  std::string describe() const;

 private:
  std::size_t dim_ = 0;
  bool has_h_ = false;
  bool has_v_ = false;
  Matrix g_;
  Matrix h_;
  Matrix rays_;
  Matrix lines_;
};

/// Generators {rays, lines} of {u : G u ≤ 0, H u = 0} by double description.
/// Throws DimensionTooLarge above PolyhedralCone::kMaxConversionDim.
void double_description(const Matrix& g, const Matrix& h, std::size_t n,
                        Matrix& rays, Matrix& lines);

/// T_P(x): {u : A_i u ≤ 0 for active i, A_eq u = 0}. Throws NotMember.
PolyhedralCone tangent_cone(const Polyhedron& p, const Vector& x,
                            double tol_active = 1e-6, double tol_feas = 1e-8);

/// N_P(x): cone{active A_i} + span{rows of A_eq}. Throws NotMember.
PolyhedralCone normal_cone(const Polyhedron& p, const Vector& x,
                           double tol_active = 1e-6, double tol_feas = 1e-8);

PolyhedralCone polar(const PolyhedralCone& k);

/// The closed set described by a cone's halfspace form, as a Polyhedron.
Polyhedron as_polyhedron(const PolyhedralCone& k);

struct ProjectOptions {
  /// Points within this violation are their own projection.
  double tol_feas = 1e-8;
  DykstraOptions dykstra;
};

struct Projection {
  Vector point;
  double distance = 0.0;
  int iterations = 0;
};

/// Euclidean projection by Dykstra. Throws EmptySet or NonConvergence.
Projection project(const Polyhedron& p, const Vector& z,
                   const ProjectOptions& options = {});

/// dist(z; P).
double distance(const Polyhedron& p, const Vector& z,
                const ProjectOptions& options = {});

/// Options for distance values that must stay accurate at small scales.
ProjectOptions precise_projection();

/// Geometric grid t_j = t0 · ρ^j, j = 0 … levels−1.
struct Schedule {
  double t0 = 1e-2;
  double rho = 0.5;
  int levels = 20;

  double t(int j) const;
};

/**
 * A possibly nonconvex closed set known through a residual map r with
 * r(x) = 0 exactly on the set.
 *
 * If `jacobian` is empty, central finite differences are used.
 */
struct SampledSet {
  std::size_t dim = 0;
  std::function<Vector(const Vector&)> residual;
  std::function<Matrix(const Vector&)> jacobian;

  double residual_norm(const Vector& x) const { return residual(x).norm(); }
  Matrix residual_jacobian(const Vector& x) const;
};

/// Ω = f⁻¹(Θ) for a smooth map and a polyhedron: the residual stacks the
/// positive parts of the normalized inequality rows and the equality rows.
SampledSet preimage_set(const class SmoothMap& f, const Polyhedron& theta);

/// A polyhedron seen as a sampled set.
SampledSet as_sampled_set(const Polyhedron& p);

struct PenaltyOptions {
  /// Graduated penalty weights; continued by ×100 up to mu_max until the
  /// residual tolerance is met.
  std::vector<double> mu = {1e2, 1e4, 1e6};
  double mu_max = 1e16;
  int max_iter = 200;
  double residual_tol = 1e-8;
};

struct PenaltyResult {
  Vector point;
  double residual = 0.0;
  bool accepted = false;
};

/**
 * Local nearest point of z in a sampled set: minimizes
 * ‖x − z‖² + μ‖r(x)‖² for increasing μ by Gauss–Newton steps with
 * backtracking, starting from z.
 */
PenaltyResult penalty_project(const SampledSet& set, const Vector& z,
                              const PenaltyOptions& options = {});

struct DerivabilityReport {
  std::vector<double> t;
  std::vector<double> ratios;
  /// Max of dist(x + t u)/t over the last five levels.
  double max_tail_ratio = 0.0;
  bool pass = false;
  Verdict verdict = Verdict::Inconclusive;
};

inline constexpr double kTolDeriv = 1e-2;

/// dist(x + t u; P)/t → 0 along the grid. Throws NotMember when u is not
/// in T_P(x).
DerivabilityReport derivability_check(const Polyhedron& p, const Vector& x,
                                      const Vector& u,
                                      const Schedule& schedule = {},
                                      double tol_deriv = kTolDeriv);

/// Default grid for sampled sets; coarser because distances come from
/// penalty descent.
Schedule sampled_set_schedule();

DerivabilityReport derivability_check(const SampledSet& set, const Vector& x,
                                      const Vector& u,
                                      const Schedule& schedule =
                                          sampled_set_schedule(),
                                      double tol_deriv = kTolDeriv);

}  // namespace varcert
