#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/QR>

#include "varcert/errors.hpp"
#include "varcert/expr.hpp"
#include "varcert/geometry.hpp"

namespace varcert {

namespace {

Matrix empty_rows(Eigen::Index n) { return Matrix(0, n); }

}  // namespace

Polyhedron::Polyhedron(Matrix a_ineq, Vector b_ineq, Matrix a_eq, Vector b_eq)
    : a_ineq_(std::move(a_ineq)),
      b_ineq_(std::move(b_ineq)),
      a_eq_(std::move(a_eq)),
      b_eq_(std::move(b_eq)) {
  Eigen::Index n = std::max(a_ineq_.cols(), a_eq_.cols());
  if (a_ineq_.rows() == 0) a_ineq_.resize(0, n);
  if (a_eq_.rows() == 0) a_eq_.resize(0, n);
  if (a_ineq_.cols() != n || a_eq_.cols() != n) {
    throw DimensionMismatch("polyhedron: A_ineq and A_eq column counts differ");
  }
  if (b_ineq_.size() != a_ineq_.rows() || b_eq_.size() != a_eq_.rows()) {
    throw DimensionMismatch("polyhedron: right-hand side length mismatch");
  }
  dim_ = static_cast<std::size_t>(n);
}

Polyhedron Polyhedron::whole_space(std::size_t n) {
  const auto ni = static_cast<Eigen::Index>(n);
  return Polyhedron(empty_rows(ni), Vector(0), empty_rows(ni), Vector(0));
}

Polyhedron Polyhedron::inequalities(Matrix a, Vector b) {
  const Eigen::Index n = a.cols();
  return Polyhedron(std::move(a), std::move(b), empty_rows(n), Vector(0));
}

Polyhedron Polyhedron::nonpositive_orthant(std::size_t n) {
  const auto ni = static_cast<Eigen::Index>(n);
  return inequalities(Matrix::Identity(ni, ni), Vector::Zero(ni));
}

Polyhedron Polyhedron::nonnegative_orthant(std::size_t n) {
  const auto ni = static_cast<Eigen::Index>(n);
  return inequalities(-Matrix::Identity(ni, ni), Vector::Zero(ni));
}

Polyhedron Polyhedron::box(const Vector& lower, const Vector& upper) {
  if (lower.size() != upper.size()) throw DimensionMismatch("box bounds");
  const Eigen::Index n = lower.size();
  std::vector<std::pair<Vector, double>> rows;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isfinite(upper[i])) rows.emplace_back(Vector::Unit(n, i), upper[i]);
    if (std::isfinite(lower[i])) {
      rows.emplace_back(-Vector::Unit(n, i), -lower[i]);
    }
  }
  Matrix a(static_cast<Eigen::Index>(rows.size()), n);
  Vector b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    a.row(static_cast<Eigen::Index>(k)) = rows[k].first.transpose();
    b[static_cast<Eigen::Index>(k)] = rows[k].second;
  }
  return inequalities(std::move(a), std::move(b));
}

Polyhedron Polyhedron::point(const Vector& p) {
  const Eigen::Index n = p.size();
  return Polyhedron(empty_rows(n), Vector(0), Matrix::Identity(n, n), p);
}

double Polyhedron::max_violation(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != dim_) {
    throw DimensionMismatch("polyhedron: point has dimension " +
                            std::to_string(x.size()) + ", expected " +
                            std::to_string(dim_));
  }
  double worst = 0.0;
  if (a_ineq_.rows() > 0) {
    worst = std::max(worst, (a_ineq_ * x - b_ineq_).maxCoeff());
  }
  if (a_eq_.rows() > 0) {
    worst = std::max(worst, (a_eq_ * x - b_eq_).cwiseAbs().maxCoeff());
  }
  return worst;
}

bool Polyhedron::contains(const Vector& x, double tol_feas) const {
  return max_violation(x) <= tol_feas;
}

bool Polyhedron::is_empty() const {
  const auto n = static_cast<Eigen::Index>(dim_);
  const Eigen::Index p = a_ineq_.rows();
  const Eigen::Index q = a_eq_.rows();
  if (p + q == 0) return false;
  Matrix a(p + q, n);
  a << a_ineq_, a_eq_;
  Vector b(p + q);
  b << b_ineq_, b_eq_;
  std::vector<RowSense> senses(static_cast<std::size_t>(p), RowSense::Le);
  senses.resize(static_cast<std::size_t>(p + q), RowSense::Eq);
  const LPSolution sol =
      lp_solve(LPProblem::make(Vector::Zero(n), std::move(a), std::move(b),
                               std::move(senses)));
  return sol.status == LPStatus::Infeasible;
}

std::vector<Eigen::Index> Polyhedron::active_rows(const Vector& x,
                                                  double tol_active) const {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < a_ineq_.rows(); ++i) {
    if (a_ineq_.row(i).dot(x) >= b_ineq_[i] - tol_active) out.push_back(i);
  }
  return out;
}

Polyhedron Polyhedron::intersect(const Polyhedron& other) const {
  if (other.dim_ != dim_) throw DimensionMismatch("polyhedron intersection");
  const auto n = static_cast<Eigen::Index>(dim_);
  Matrix a(a_ineq_.rows() + other.a_ineq_.rows(), n);
  a << a_ineq_, other.a_ineq_;
  Vector b(b_ineq_.size() + other.b_ineq_.size());
  b << b_ineq_, other.b_ineq_;
  Matrix e(a_eq_.rows() + other.a_eq_.rows(), n);
  e << a_eq_, other.a_eq_;
  Vector d(b_eq_.size() + other.b_eq_.size());
  d << b_eq_, other.b_eq_;
  return Polyhedron(std::move(a), std::move(b), std::move(e), std::move(d));
}

PolyhedralCone tangent_cone(const Polyhedron& p, const Vector& x,
                            double tol_active, double tol_feas) {
  if (!p.contains(x, tol_feas)) {
    throw NotMember("tangent_cone: point is not in the polyhedron");
  }
  const auto rows = p.active_rows(x, tol_active);
  Matrix g(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(p.dim()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    g.row(static_cast<Eigen::Index>(k)) = p.a_ineq().row(rows[k]);
  }
  return PolyhedralCone::from_halfspaces(std::move(g), p.a_eq(), p.dim());
}

PolyhedralCone normal_cone(const Polyhedron& p, const Vector& x,
                           double tol_active, double tol_feas) {
  return tangent_cone(p, x, tol_active, tol_feas).polar();
}

Polyhedron as_polyhedron(const PolyhedralCone& k) {
  const PolyhedralCone h = k.with_halfspaces();
  return Polyhedron(h.ineq(), Vector::Zero(h.ineq().rows()), h.eq(),
                    Vector::Zero(h.eq().rows()));
}

namespace {

// Exact projection onto the face {rows near-active at y}, kept only when it
// satisfies the KKT conditions of the full projection problem.
std::optional<Vector> polish_projection(const Polyhedron& p, const Vector& z,
                                        const Vector& y, double scale) {
  const Eigen::Index n = z.size();
  const Eigen::Index q = p.a_eq().rows();
  const Vector slack = p.b_ineq() - p.a_ineq() * y;
  for (double delta : {1e-10, 1e-8, 1e-6, 1e-4}) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index i = 0; i < slack.size(); ++i) {
      const double rn = p.a_ineq().row(i).norm();
      if (rn > 0.0 && slack[i] <= delta * scale * rn) act.push_back(i);
    }
    const auto k = static_cast<Eigen::Index>(act.size());
    Matrix m(k + q, n);
    Vector rhs(k + q);
    for (Eigen::Index j = 0; j < k; ++j) {
      m.row(j) = p.a_ineq().row(act[static_cast<std::size_t>(j)]);
      rhs[j] = p.b_ineq()[act[static_cast<std::size_t>(j)]];
    }
    m.bottomRows(q) = p.a_eq();
    rhs.tail(q) = p.b_eq();
    if (m.rows() == 0) continue;
    const Matrix gram = m * m.transpose();
    const Vector lam = gram.completeOrthogonalDecomposition().solve(m * z - rhs);
    const Vector x = z - m.transpose() * lam;
    if ((m * x - rhs).cwiseAbs().maxCoeff() > 1e-12 * scale) continue;
    if (k > 0 && lam.head(k).minCoeff() < -1e-9 * (1.0 + lam.cwiseAbs().maxCoeff())) {
      continue;
    }
    if (p.max_violation(x) > 1e-12 * scale) continue;
    return x;
  }
  return std::nullopt;
}

}  // namespace

Projection project(const Polyhedron& p, const Vector& z,
                   const ProjectOptions& options) {
  Projection out;
  if (p.max_violation(z) <= options.tol_feas) {
    out.point = z;
    return out;
  }
  DykstraResult r = dykstra_project(z, p.a_ineq(), p.b_ineq(), p.a_eq(),
                                    p.b_eq(), options.dykstra);
  const double scale = 1.0 + z.cwiseAbs().maxCoeff();
  if (auto x = polish_projection(p, z, r.point, scale)) {
    r.point = *x;
    r.converged = true;
  }
  if (!r.converged || p.max_violation(r.point) > 1e-6 * scale) {
    if (p.is_empty()) throw EmptySet("project: polyhedron is empty");
    if (!r.converged) throw NonConvergence(r.iterations);
  }
  out.point = r.point;
  out.distance = (z - r.point).norm();
  out.iterations = r.iterations;
  return out;
}

double distance(const Polyhedron& p, const Vector& z,
                const ProjectOptions& options) {
  return project(p, z, options).distance;
}

ProjectOptions precise_projection() {
  ProjectOptions o;
  o.tol_feas = 0.0;
  o.dykstra.max_iter = 200000;
  o.dykstra.tol_move = 1e-15;
  o.dykstra.tol_rel = 1e-11;
  return o;
}

double Schedule::t(int j) const { return t0 * std::pow(rho, j); }

Matrix SampledSet::residual_jacobian(const Vector& x) const {
  if (jacobian) return jacobian(x);
  const Vector r0 = residual(x);
  Matrix j(r0.size(), x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-7 * (1.0 + std::abs(x[i]));
    xp[i] = x[i] + h;
    const Vector rp = residual(xp);
    xp[i] = x[i] - h;
    const Vector rm = residual(xp);
    xp[i] = x[i];
    j.col(i) = (rp - rm) / (2.0 * h);
  }
  return j;
}

namespace {

struct NormalizedRows {
  Matrix a;
  Vector b;
};

NormalizedRows normalize_rows(const Matrix& a, const Vector& b) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (a.row(i).norm() > 0.0) keep.push_back(i);
  }
  NormalizedRows out{Matrix(static_cast<Eigen::Index>(keep.size()), a.cols()),
                     Vector(static_cast<Eigen::Index>(keep.size()))};
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto i = keep[k];
    const double nrm = a.row(i).norm();
    out.a.row(static_cast<Eigen::Index>(k)) = a.row(i) / nrm;
    out.b[static_cast<Eigen::Index>(k)] = b[i] / nrm;
  }
  return out;
}

}  // namespace

SampledSet preimage_set(const SmoothMap& f, const Polyhedron& theta) {
  if (f.output_dim() != theta.dim()) {
    throw DimensionMismatch("preimage_set: f maps into R^" +
                            std::to_string(f.output_dim()) +
                            " but the polyhedron lives in R^" +
                            std::to_string(theta.dim()));
  }
  const NormalizedRows ineq = normalize_rows(theta.a_ineq(), theta.b_ineq());
  const NormalizedRows eq = normalize_rows(theta.a_eq(), theta.b_eq());
  const Eigen::Index p = ineq.a.rows();
  const Eigen::Index q = eq.a.rows();

  SampledSet s;
  s.dim = f.input_dim();
  s.residual = [f, ineq, eq, p, q](const Vector& x) {
    const Vector y = f.eval(x);
    Vector r(p + q);
    if (!y.allFinite()) {
      r.setConstant(kInf);
      return r;
    }
    r.head(p) = (ineq.a * y - ineq.b).cwiseMax(0.0);
    r.tail(q) = eq.a * y - eq.b;
    return r;
  };
  s.jacobian = [f, ineq, eq, p, q](const Vector& x) {
    const Vector y = f.eval(x);
    const Matrix jf = f.jacobian(x);
    Matrix j(p + q, jf.cols());
    for (Eigen::Index i = 0; i < p; ++i) {
      if (ineq.a.row(i).dot(y) - ineq.b[i] > 0.0) {
        j.row(i) = ineq.a.row(i) * jf;
      } else {
        j.row(i).setZero();
      }
    }
    j.bottomRows(q) = eq.a * jf;
    return j;
  };
  return s;
}

SampledSet as_sampled_set(const Polyhedron& p) {
  return preimage_set(SmoothMap::identity(p.dim()), p);
}

PenaltyResult penalty_project(const SampledSet& set, const Vector& z,
                              const PenaltyOptions& options) {
  PenaltyResult out;
  Vector x = z;
  out.residual = set.residual_norm(x);
  if (out.residual <= options.residual_tol) {
    out.point = x;
    out.accepted = true;
    return out;
  }
  std::vector<double> mus = options.mu;
  if (mus.empty()) mus.push_back(1e2);
  while (mus.back() * 100.0 <= options.mu_max * (1.0 + 1e-12)) {
    mus.push_back(mus.back() * 100.0);
  }

  const Eigen::Index n = z.size();
  for (const double mu : mus) {
    const double smu = std::sqrt(mu);
    auto objective = [&](const Vector& y) {
      const Vector r = set.residual(y);
      return (y - z).squaredNorm() + mu * r.squaredNorm();
    };
    for (int it = 0; it < options.max_iter; ++it) {
      const Vector r = set.residual(x);
      const Matrix j = set.residual_jacobian(x);
      const double f0 = (x - z).squaredNorm() + mu * r.squaredNorm();
      Matrix m(n + j.rows(), n);
      m << Matrix::Identity(n, n), smu * j;
      Vector rhs(n + j.rows());
      rhs << z - x, -smu * r;
      const Vector dx = m.householderQr().solve(rhs);
      double alpha = 1.0;
      bool moved = false;
      for (int h = 0; h < 60; ++h) {
        const Vector trial = x + alpha * dx;
        if (objective(trial) < f0) {
          x = trial;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved || alpha * dx.norm() <= 1e-15 * (1.0 + x.norm())) break;
    }
    out.residual = set.residual_norm(x);
    if (out.residual <= options.residual_tol) {
      out.accepted = true;
      break;
    }
  }
  out.point = x;
  return out;
}

namespace {

void finish_report(DerivabilityReport& rep, const std::vector<bool>& accepted,
                   double tol_deriv) {
  const std::size_t levels = rep.ratios.size();
  const std::size_t tail = std::min<std::size_t>(5, levels);
  if (tail == 0) return;
  double lo = kInf;
  bool all_accepted = true;
  for (std::size_t j = levels - tail; j < levels; ++j) {
    rep.max_tail_ratio = std::max(rep.max_tail_ratio, rep.ratios[j]);
    lo = std::min(lo, rep.ratios[j]);
    all_accepted = all_accepted && accepted[j];
  }
  rep.pass = all_accepted && rep.max_tail_ratio <= tol_deriv;
  const double first = rep.ratios[levels - tail];
  const double last = rep.ratios[levels - 1];
  if (rep.pass) {
    rep.verdict = Verdict::Verified;
  } else if (all_accepted && lo > 5.0 * tol_deriv && last >= 0.5 * first) {
    rep.verdict = Verdict::Refuted;
  } else {
    rep.verdict = Verdict::Inconclusive;
  }
}

}  // namespace

DerivabilityReport derivability_check(const Polyhedron& p, const Vector& x,
                                      const Vector& u,
                                      const Schedule& schedule,
                                      double tol_deriv) {
  if (!tangent_cone(p, x).contains(u)) {
    throw NotMember("derivability_check: direction is not tangent");
  }
  DerivabilityReport rep;
  const ProjectOptions opts = precise_projection();
  for (int j = 0; j < schedule.levels; ++j) {
    const double t = schedule.t(j);
    rep.t.push_back(t);
    rep.ratios.push_back(distance(p, x + t * u, opts) / t);
  }
  finish_report(rep, std::vector<bool>(rep.ratios.size(), true), tol_deriv);
  return rep;
}

Schedule sampled_set_schedule() { return Schedule{1e-1, 0.5, 12}; }

DerivabilityReport derivability_check(const SampledSet& set, const Vector& x,
                                      const Vector& u,
                                      const Schedule& schedule,
                                      double tol_deriv) {
  if (set.residual_norm(x) > 1e-8) {
    throw NotMember("derivability_check: base point is not in the set");
  }
  DerivabilityReport rep;
  std::vector<bool> accepted;
  for (int j = 0; j < schedule.levels; ++j) {
    const double t = schedule.t(j);
    const Vector z = x + t * u;
    PenaltyOptions opts;
    opts.residual_tol = std::max(1e-4 * t * t, 1e-15);
    const PenaltyResult r = penalty_project(set, z, opts);
    rep.t.push_back(t);
    rep.ratios.push_back((r.point - z).norm() / t);
    accepted.push_back(r.accepted);
  }
  finish_report(rep, accepted, tol_deriv);
  return rep;
}

}  // namespace varcert
