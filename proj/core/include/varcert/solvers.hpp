#pragma once

#include <vector>

#include "varcert/types.hpp"

namespace varcert {

enum class RowSense { Le, Eq, Ge };

/**
 * Dense linear program
 *
 *   minimize cᵀx  subject to  aᵢx (≤ | = | ≥) bᵢ,  lower ≤ x ≤ upper.
 *
 * Bounds default to free (±∞).
 */
struct LPProblem {
  Vector c;
  Matrix a;
  Vector b;
  std::vector<RowSense> senses;
  Vector lower;
  Vector upper;

  /// Problem with free variables; lower/upper are filled with ∓∞.
  static LPProblem make(Vector c, Matrix a, Vector b,
                        std::vector<RowSense> senses);

  Eigen::Index num_vars() const { return c.size(); }
  Eigen::Index num_rows() const { return a.rows(); }

  /// Throws DimensionMismatch / InputError on inconsistent data.
  void validate() const;
};

enum class LPStatus { Optimal, Infeasible, Unbounded };

const char* to_string(LPStatus s);

/**
 * Result of lp_solve.
 *
 * Dual convention: with the Lagrangian cᵀx − yᵀ(Ax − b), an optimal y has
 * yᵢ ≤ 0 on ≤ rows, yᵢ ≥ 0 on ≥ rows, and bound duals z = c − Aᵀy that are
 * ≥ 0 at lower bounds, ≤ 0 at upper bounds and 0 on free variables.
 */
struct LPSolution {
  LPStatus status = LPStatus::Infeasible;
  Vector x;
  Vector y;
  /// Reduced costs c − Aᵀy.
  Vector z;
  double objective = 0.0;
  int pivots = 0;

  /// bᵀy plus the bound terms; equals objective at optimality.
  double dual_objective(const LPProblem& p) const;
};

/// Two-phase dense primal simplex with Bland's rule.
///
/// Throws NumericalBreakdown when the basis becomes singular on
/// refactorization.
LPSolution lp_solve(const LPProblem& p);

/// Eigen-decomposition of a symmetric matrix.
struct EigenDecomposition {
  /// Sorted descending.
  Vector values;
  /// Orthonormal eigenvectors, column k matches values[k].
  Matrix vectors;
  int sweeps = 0;
};

/// Cyclic Jacobi rotations; the input is symmetrized first.
EigenDecomposition eigh(const Matrix& a);

/// σ(A): the largest eigenvalue.
double largest_eigenvalue(const Matrix& a);

struct DykstraOptions {
  int max_iter = 10000;
  /// Stop when a full cycle changes the iterate and the correction vectors
  /// by less than tol_move + tol_rel · ‖x − z‖ in total.
  double tol_move = 1e-10;
  double tol_rel = 0.0;
};

struct DykstraResult {
  Vector point;
  int iterations = 0;
  bool converged = false;
};

/**
 * Euclidean projection of z onto {x : A x ≤ b, E x = d} by Dykstra's
 * alternating projections over the individual halfspaces and hyperplanes.
 *
 * Zero rows are ignored. Does not detect emptiness; callers check first.
 */
DykstraResult dykstra_project(const Vector& z, const Matrix& a_ineq,
                              const Vector& b_ineq, const Matrix& a_eq,
                              const Vector& b_eq,
                              const DykstraOptions& options = {});

/// Projection onto the single halfspace {x : a·x ≤ b}.
Vector project_halfspace(const Vector& x, const Vector& a, double b);

/// Projection onto the hyperplane {x : a·x = b}.
Vector project_hyperplane(const Vector& x, const Vector& a, double b);

}  // namespace varcert
