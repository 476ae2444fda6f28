#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "varcert/calculus.hpp"
#include "varcert/certify.hpp"
#include "varcert/expr.hpp"
#include "varcert/sip.hpp"
#include "varcert/types.hpp"

namespace varcert {

/// A symmetric matrix of expressions in x1..xn, stored as its upper
/// triangle in row-major order: (0,0), (0,1), …, (0,m−1), (1,1), ….
class SymmetricExprMatrix {
 public:
  SymmetricExprMatrix() = default;
  /// Throws DimensionMismatch unless upper has m(m+1)/2 entries.
  SymmetricExprMatrix(std::size_t m, std::vector<Expr> upper);

  std::size_t size() const { return m_; }
  bool empty() const { return m_ == 0; }
  const Expr& entry(std::size_t i, std::size_t j) const;

  Matrix eval(const Vector& x) const;
  /// ∂/∂x_j of the matrix, j = 0 … n−1.
  std::vector<Matrix> partials(const Vector& x) const;

 private:
  std::size_t m_ = 0;
  std::vector<Expr> upper_;
};

/// minimize ϑ(x) subject to Φ(x) ⪯ 0 and Ψ(x) = 0.
class SDProblem {
 public:
  SDProblem(std::size_t n, Expr objective, SymmetricExprMatrix phi,
            SymmetricExprMatrix psi = {});

  /// Upper triangles given as text in the variables x1..xn.
  static SDProblem parse(std::size_t n, const std::string& objective, std::size_t m,
                         const std::vector<std::string>& phi_upper,
                         std::size_t q = 0,
                         const std::vector<std::string>& psi_upper = {});

  std::size_t dim() const { return n_; }
  const Expr& objective() const { return objective_; }
  const SymmetricExprMatrix& phi() const { return phi_; }
  const SymmetricExprMatrix& psi() const { return psi_; }
  Vector objective_grad(const Vector& x) const;

 private:
  std::size_t n_;
  Expr objective_;
  SymmetricExprMatrix phi_;
  SymmetricExprMatrix psi_;
};

struct SdpFeasibility {
  /// σ⁺(Φ(x)) = max(0, largest eigenvalue).
  double sigma_plus = 0.0;
  /// max |Ψ(x)_ij|.
  double psi_max = 0.0;
  bool feasible = false;
};

SdpFeasibility feasibility(const SDProblem& p, const Vector& x, double tol_feas = 1e-8);

/// Components ⟨s, ∂Φ/∂x_j(x) s⟩. Throws NotUnit unless |‖s‖ − 1| ≤ 1e-10.
Vector grad_quadform(const SDProblem& p, const Vector& x, const Vector& s);

struct SdpOptions {
  std::optional<double> kappa;
  ModulusOptions modulus;
  Tolerances tol;
  std::uint64_t seed = kDefaultSeed;
};

struct SdpCertificate {
  Verdict status = Verdict::Inconclusive;
  std::string detail;
  Vector x;
  Vector gradient;
  /// Unit vectors s_i in the kernel of Φ(x̄) with weights λ_i ≥ 0.
  std::vector<Atom> atoms;
  /// Symmetric multiplier for Ψ (empty without equalities).
  Matrix mu;
  double residual = 0.0;
  /// max |⟨s_i, Φ(x̄) s_i⟩| over the atoms.
  double complementarity = 0.0;
  /// Σλ_i + ΣΣ|μ_ij|.
  double bound_lhs = 0.0;
  /// 2κ‖∇ϑ(x̄)‖.
  double bound_rhs = 0.0;
  double kappa = 0.0;
  KappaSource kappa_source = KappaSource::None;
  double tol_ker = 0.0;
  int kernel_dim = 0;
  int candidates = 0;
  Tolerances tol;

  bool bound_exceeded() const { return detail == kBoundExceeded; }
};

/// 1e-7·(1 + ‖A‖₂).
double kernel_tolerance(const Matrix& phi);

/// Eigenvector atoms of the kernel of Φ(x̄) and a symmetric μ solving the
/// stationarity system. Throws InfeasiblePoint, NoMultiplier.
SdpCertificate certify(const SDProblem& p, const Vector& x, const SdpOptions& options = {});

SdpCertificate recheck_sdp(const SDProblem& p, const SdpCertificate& c);

/// θ(x, angles) = ⟨s(angles), Φ(x) s(angles)⟩ over a sphere chart (half
/// sphere, since s and −s give the same value). Throws DimensionTooLarge
/// for m > 3.
SIProblem reduce_to_sip(const SDProblem& p);

/// The chart used by reduce_to_sip.
Vector sphere_point(std::size_t m, const Vector& angles);

}  // namespace varcert
