#include "varcert/certify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "varcert/errors.hpp"
#include "varcert/solvers.hpp"

namespace varcert {

const char* to_string(CertificateKind k) {
  switch (k) {
    case CertificateKind::Primal: return "Primal";
    case CertificateKind::DualKKT: return "DualKKT";
    case CertificateKind::ExactPenalty: return "ExactPenalty";
  }
  return "?";
}

const char* to_string(KappaSource k) {
  switch (k) {
    case KappaSource::None: return "none";
    case KappaSource::Asserted: return "asserted";
    case KappaSource::Estimated: return "estimated";
  }
  return "?";
}

const char* to_string(BoundRule r) {
  switch (r) {
    case BoundRule::Gradient: return "kappa*|grad|";
    case BoundRule::Lipschitz: return "l*kappa";
  }
  return "?";
}

ConstrainedProblem::ConstrainedProblem(FnObject objective, SmoothMap constraint,
                                       Polyhedron theta)
    : objective_(std::move(objective)), f_(std::move(constraint)),
      theta_(std::move(theta)) {
  const auto kind = objective_.kind();
  if (kind != FnObject::Kind::Smooth && kind != FnObject::Kind::PLQ) {
    throw InputError(std::string("problem: objective must be smooth or PLQ, got ") +
                     objective_.kind_name());
  }
  if (objective_.dim() != f_.input_dim()) {
    throw DimensionMismatch("problem: objective has " +
                            std::to_string(objective_.dim()) +
                            " variables, constraint map " +
                            std::to_string(f_.input_dim()));
  }
  if (theta_.dim() != f_.output_dim()) {
    throw DimensionMismatch("problem: Θ ⊂ R^" + std::to_string(theta_.dim()) +
                            " but f has " + std::to_string(f_.output_dim()) +
                            " components");
  }
}

bool ConstrainedProblem::feasible(const Vector& x, double tol_feas) const {
  if (static_cast<std::size_t>(x.size()) != dim()) return false;
  const Vector y = f_.eval(x);
  return y.allFinite() && theta_.contains(y, tol_feas) && std::isfinite(objective_(x));
}

Composite ConstrainedProblem::constraint_set(const Vector& x) const {
  return Composite::set(f_, theta_, x);
}

namespace {

void require_feasible(const ConstrainedProblem& p, const Vector& x,
                      const Tolerances& tol) {
  if (static_cast<std::size_t>(x.size()) != p.dim()) {
    throw DimensionMismatch("x̄ has dimension " + std::to_string(x.size()) +
                            ", problem has " + std::to_string(p.dim()));
  }
  if (!p.feasible(x, tol.feas)) {
    throw InfeasiblePoint("x̄ is not feasible (f(x̄) ∉ Θ or ϑ(x̄) = ∞)");
  }
}

Vector smooth_gradient(const ConstrainedProblem& p, const Vector& x) {
  return grad(p.objective().expr(), x).value;
}

struct ActivePiece {
  Vector gradient;
  PolyhedralCone cell_tangent;
};

// Pieces whose cell contains x (within the value tolerance) restricted to the
// explicit domain, with their tangent cones.
std::vector<ActivePiece> active_pieces(const ConstrainedProblem& p, const Vector& x,
                                       const Tolerances& tol) {
  std::vector<ActivePiece> out;
  const auto n = static_cast<std::size_t>(x.size());
  if (p.smooth_objective()) {
    out.push_back({smooth_gradient(p, x), PolyhedralCone::whole_space(n)});
    return out;
  }
  const FnObject& phi = p.objective();
  for (const auto& piece : phi.pieces()) {
    Polyhedron cell = piece.region;
    if (phi.plq_domain()) cell = cell.intersect(*phi.plq_domain());
    if (!cell.contains(x, kValueTol)) continue;
    out.push_back({piece.gradient(x), tangent_cone(cell, x, tol.active, kValueTol)});
  }
  return out;
}

double multiplier_bound_rhs(const Certificate& c) {
  return c.bound_rule == BoundRule::Gradient ? c.kappa * c.subgradient.norm()
                                             : c.lipschitz * c.kappa;
}

// Residual, cone residual, bound and status from x, λ, κ.
void evaluate_dual(const ConstrainedProblem& p, Certificate& c) {
  const Matrix j = p.constraint().jacobian(c.x);
  const Vector jl = j.transpose() * c.lambda;
  if (p.smooth_objective()) {
    c.subgradient = smooth_gradient(p, c.x);
    c.residual = (c.subgradient + jl).norm();
  } else {
    const SubdifferentialSet sd = subdifferential(p.objective(), c.x);
    c.residual = sd.membership_residual(-jl);
  }
  const PolyhedralCone n = normal_cone(p.theta(), p.constraint().eval(c.x),
                                       c.tol.active, c.tol.feas);
  c.cone_residual = n.membership_residual(c.lambda);
  c.bound_lhs = c.lambda.norm();
  c.bound_rhs = multiplier_bound_rhs(c);
  const bool stationary = c.residual <= c.tol.stat && c.cone_residual <= c.tol.cone;
  const bool bounded = c.bound_lhs <= c.bound_rhs * (1.0 + c.tol.bound) + 1e-12;
  c.detail.clear();
  if (!stationary) {
    c.status = Verdict::Refuted;
    c.detail = c.residual > c.tol.stat ? "stationarity residual above tolerance"
                                       : "multiplier outside N_Θ(ȳ)";
  } else if (!bounded) {
    c.status = Verdict::Refuted;
    c.detail = kBoundExceeded;
  } else {
    c.status = Verdict::Verified;
  }
}

}  // namespace

double objective_lipschitz(const ConstrainedProblem& p, const Vector& x,
                           double radius, int samples, std::uint64_t seed) {
  if (p.smooth_objective()) return smooth_gradient(p, x).norm();
  return rel_lipschitz_estimate(p.objective(), x, radius, samples, seed);
}

Certificate primal_check(const ConstrainedProblem& p, const Vector& x,
                         const Tolerances& tol) {
  require_feasible(p, x, tol);
  Certificate cert;
  cert.kind = CertificateKind::Primal;
  cert.x = x;
  cert.tol = tol;
  const auto n = x.size();
  const Matrix j = p.constraint().jacobian(x);
  const PolyhedralCone t = tangent_cone(p.theta(), p.constraint().eval(x),
                                        tol.active, tol.feas);
  const Matrix gj = t.ineq() * j;
  const Matrix hj = t.eq() * j;

  double best = kInf;
  for (const auto& piece : active_pieces(p, x, tol)) {
    const Matrix& gc = piece.cell_tangent.ineq();
    const Matrix& hc = piece.cell_tangent.eq();
    Matrix a(gj.rows() + gc.rows() + hj.rows() + hc.rows(), n);
    a << gj, gc, hj, hc;
    std::vector<RowSense> senses(static_cast<std::size_t>(gj.rows() + gc.rows()),
                                 RowSense::Le);
    senses.insert(senses.end(), static_cast<std::size_t>(hj.rows() + hc.rows()),
                  RowSense::Eq);
    LPProblem lp = LPProblem::make(piece.gradient, a, Vector::Zero(a.rows()), senses);
    lp.lower = Vector::Constant(n, -1.0);
    lp.upper = Vector::Constant(n, 1.0);
    const LPSolution s = lp_solve(lp);
    if (s.status != LPStatus::Optimal) continue;
    if (s.objective < best) {
      best = s.objective;
      cert.witness = s.x;
      cert.subgradient = piece.gradient;
    }
  }
  if (best == kInf) {
    throw NumericalError("primal_check: no active piece at x̄");
  }
  cert.value = best;
  cert.residual = std::max(0.0, -best);
  if (best >= -tol.stat) {
    cert.status = Verdict::Verified;
    cert.witness.reset();
  } else {
    cert.status = Verdict::Refuted;
    cert.detail = "linearized descent direction";
  }
  return cert;
}

Certificate dual_certificate(const ConstrainedProblem& p, const Vector& x,
                             const DualOptions& options) {
  const Tolerances& tol = options.tol;
  require_feasible(p, x, tol);
  Certificate cert;
  cert.kind = CertificateKind::DualKKT;
  cert.x = x;
  cert.tol = tol;

  const Composite omega = p.constraint_set(x);
  const Matrix& j = omega.jacobian();
  const auto n = j.cols();
  const PolyhedralCone nc = normal_cone(p.theta(), omega.ybar(), tol.active, tol.feas);
  const Matrix& rays = nc.rays();
  const Matrix& lines = nc.lines();
  const Eigen::Index w = rays.cols() + 2 * lines.cols();
  Matrix gens(j.rows(), w);
  gens << rays, lines, -lines;
  const Matrix jg = j.transpose() * gens;

  // Variables (weights ≥ 0, z) with Jᵀ·gens·weights + g(z) = 0.
  Vector g;
  if (p.smooth_objective()) {
    g = smooth_gradient(p, x);
    LPProblem lp = LPProblem::make(Vector::Ones(w), jg, -g,
                                   std::vector<RowSense>(static_cast<std::size_t>(n),
                                                         RowSense::Eq));
    lp.lower.setZero();
    if (lp_solve(lp).status != LPStatus::Optimal) {
      throw NoMultiplier("no λ ∈ N_Θ(ȳ) with ∇ϑ(x̄) + ∇f(x̄)ᵀλ = 0");
    }
  } else {
    const SubdifferentialSet sd = subdifferential(p.objective(), x);
    if (sd.kind() == SubdifferentialSet::Kind::Empty) {
      throw NoMultiplier("∂ϑ(x̄) is empty");
    }
    const Matrix& m = sd.map();
    const Polyhedron& q = sd.lifted_set();
    const Eigen::Index k = sd.kind() == SubdifferentialSet::Kind::Singleton ? 0 : m.cols();
    const Eigen::Index qi = k ? q.a_ineq().rows() : 0;
    const Eigen::Index qe = k ? q.a_eq().rows() : 0;
    Matrix a = Matrix::Zero(n + qi + qe, w + k);
    Vector b(n + qi + qe);
    a.topLeftCorner(n, w) = jg;
    if (k) {
      a.block(0, w, n, k) = m;
      a.block(n, w, qi, k) = q.a_ineq();
      a.block(n + qi, w, qe, k) = q.a_eq();
      b << -sd.offset(), q.b_ineq(), q.b_eq();
    } else {
      b = -sd.offset();
    }
    std::vector<RowSense> senses(static_cast<std::size_t>(n), RowSense::Eq);
    senses.insert(senses.end(), static_cast<std::size_t>(qi), RowSense::Le);
    senses.insert(senses.end(), static_cast<std::size_t>(qe), RowSense::Eq);
    Vector c = Vector::Zero(w + k);
    c.head(w).setOnes();
    LPProblem lp = LPProblem::make(c, a, b, senses);
    lp.lower.head(w).setZero();
    const LPSolution s = lp_solve(lp);
    if (s.status != LPStatus::Optimal) {
      throw NoMultiplier("no λ ∈ N_Θ(ȳ) with −∇f(x̄)ᵀλ ∈ ∂ϑ(x̄)");
    }
    g = sd.offset();
    if (k) g += m * s.x.tail(k);
  }
  cert.subgradient = g;

  if (options.kappa) {
    cert.kappa = *options.kappa;
    cert.kappa_source = KappaSource::Asserted;
  } else {
    const CQReport rep = msqc_estimate(omega, options.estimate);
    cert.kappa_source = KappaSource::Estimated;
    cert.kappa_radius = rep.radius;
    if (!rep.kappa || rep.verdict != Verdict::Verified) {
      cert.kappa = rep.kappa.value_or(kInf);
      cert.lambda = Vector::Zero(j.rows());
      cert.status = Verdict::Inconclusive;
      cert.detail = "metric subregularity modulus not established";
      return cert;
    }
    cert.kappa = *rep.kappa;
  }
  if (p.smooth_objective()) {
    cert.bound_rule = BoundRule::Gradient;
    cert.lipschitz = g.norm();
  } else {
    cert.bound_rule = BoundRule::Lipschitz;
    cert.lipschitz = options.lipschitz
                         ? *options.lipschitz
                         : objective_lipschitz(p, x, options.estimate.radius);
  }

  // Least generator weight first, then least Euclidean norm for this g.
  const InverseImageNormals normals(nc.image(j.transpose()), nc, j,
                                    cert.bound_rule == BoundRule::Gradient
                                        ? cert.kappa
                                        : cert.kappa * cert.lipschitz /
                                              std::max(g.norm(), 1e-300));
  MultiplierCheck mc;
  try {
    mc = normals.check(-g);
  } catch (const InfeasibleWitness&) {
    throw NoMultiplier("no λ ∈ N_Θ(ȳ) balances the selected subgradient");
  }
  cert.lambda = mc.lambda;
  evaluate_dual(p, cert);
  return cert;
}

Certificate recheck_dual(const ConstrainedProblem& p, const Certificate& c) {
  if (c.kind != CertificateKind::DualKKT) {
    throw InputError("recheck: not a dual certificate");
  }
  if (static_cast<std::size_t>(c.lambda.size()) != p.constraint_dim()) {
    throw DimensionMismatch("recheck: λ has dimension " +
                            std::to_string(c.lambda.size()));
  }
  require_feasible(p, c.x, c.tol);
  Certificate out = c;
  if (!p.smooth_objective() && !(c.lipschitz > 0.0) &&
      c.bound_rule == BoundRule::Lipschitz) {
    out.lipschitz = objective_lipschitz(p, c.x);
  }
  evaluate_dual(p, out);
  return out;
}

Certificate exact_penalty_check(const ConstrainedProblem& p, const Vector& x,
                                double lipschitz, double kappa,
                                const PenaltyCheckOptions& options) {
  Certificate cert;
  cert.kind = CertificateKind::ExactPenalty;
  cert.x = x;
  require_feasible(p, x, cert.tol);
  cert.kappa = kappa;
  cert.lipschitz = lipschitz;
  cert.bound_rhs = lipschitz * kappa;
  cert.bound_rule = BoundRule::Lipschitz;
  const double weight = lipschitz * kappa;
  const ProjectOptions popt = precise_projection();
  auto psi = [&](const Vector& z) {
    const double v = p.objective()(z);
    if (!std::isfinite(v)) return kInf;
    const Vector y = p.constraint().eval(z);
    if (!y.allFinite()) return kInf;
    return v + weight * distance(p.theta(), y, popt);
  };
  const double base = psi(x);
  const auto n = x.size();
  std::vector<Vector> points;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (double s : {1.0, -1.0}) {
      for (double r : {1.0, 0.5, 0.1}) {
        Vector z = x;
        z[i] += s * r * options.radius;
        points.push_back(z);
      }
    }
  }
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int k = 0; k < options.samples; ++k) {
    Vector u(n);
    for (auto& v : u) v = g(rng);
    if (u.norm() == 0.0) continue;
    const double r = options.radius * std::pow(uni(rng), 1.0 / static_cast<double>(n));
    points.push_back(x + r * u.normalized());
  }
  double worst = 0.0;
  for (const auto& z : points) {
    const double d = psi(z) - base;
    if (d < worst) {
      worst = d;
      cert.witness = z;
    }
  }
  cert.value = worst;
  if (worst >= -options.tol) {
    cert.status = Verdict::Verified;
    cert.witness.reset();
    cert.detail = "sampling-confidence";
  } else if (worst < -10.0 * options.tol) {
    cert.status = Verdict::Refuted;
    cert.detail = "penalized objective decreases";
  } else {
    cert.status = Verdict::Inconclusive;
  }
  return cert;
}

}  // namespace varcert
