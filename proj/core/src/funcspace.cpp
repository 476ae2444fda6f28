#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "varcert/errors.hpp"
#include "varcert/funcspace.hpp"

namespace varcert {

double PLQPiece::eval(const Vector& x) const {
  return x.dot(quad * x) + lin.dot(x) + beta;
}

Vector PLQPiece::gradient(const Vector& x) const {
  return 2.0 * (quad * x) + lin;
}

struct FnObject::Impl {
  Kind kind = Kind::Smooth;
  std::size_t dim = 0;
  Expr expr;
  Polyhedron set;
  std::vector<PLQPiece> pieces;
  std::optional<Polyhedron> domain;
  ValueFn fn;
  double alpha = 1.0;
  std::shared_ptr<const FnObject> a;
  std::shared_ptr<const FnObject> b;
  SmoothMap map;
};

FnObject::FnObject(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

FnObject FnObject::smooth(Expr e) {
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::Smooth;
  impl->dim = e.dimension();
  impl->expr = std::move(e);
  return FnObject(std::move(impl));
}

FnObject FnObject::indicator(Polyhedron p) {
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::Indicator;
  impl->dim = p.dim();
  impl->set = std::move(p);
  return FnObject(std::move(impl));
}

FnObject FnObject::plq(std::vector<PLQPiece> pieces,
                       std::optional<Polyhedron> domain,
                       bool check_consistency) {
  if (pieces.empty()) throw InputError("PLQ function needs at least one piece");
  const std::size_t n = pieces.front().region.dim();
  const auto ni = static_cast<Eigen::Index>(n);
  for (auto& p : pieces) {
    if (p.region.dim() != n) throw DimensionMismatch("PLQ piece dimension");
    if (p.quad.size() == 0) p.quad = Matrix::Zero(ni, ni);
    if (p.lin.size() == 0) p.lin = Vector::Zero(ni);
    if (p.quad.rows() != ni || p.quad.cols() != ni || p.lin.size() != ni) {
      throw DimensionMismatch("PLQ piece coefficients");
    }
    p.quad = 0.5 * (p.quad + p.quad.transpose()).eval();
  }
  if (domain && domain->dim() != n) throw DimensionMismatch("PLQ domain");
  if (check_consistency && pieces.size() > 1) {
    const double gap = plq_consistency_gap(pieces);
    if (gap > 1e-8) {
      char buf[96];
      std::snprintf(buf, sizeof buf,
                    "PLQ pieces disagree on an overlap (gap %.3e)", gap);
      throw InputError(buf);
    }
  }
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::PLQ;
  impl->dim = n;
  impl->pieces = std::move(pieces);
  impl->domain = std::move(domain);
  return FnObject(std::move(impl));
}

FnObject FnObject::distance(Polyhedron p) {
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::Distance;
  impl->dim = p.dim();
  impl->set = std::move(p);
  return FnObject(std::move(impl));
}

FnObject FnObject::oracle(std::size_t n, ValueFn f,
                          std::optional<Polyhedron> domain) {
  if (domain && domain->dim() != n) throw DimensionMismatch("oracle domain");
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::Oracle;
  impl->dim = n;
  impl->fn = std::move(f);
  impl->domain = std::move(domain);
  return FnObject(std::move(impl));
}

FnObject FnObject::scaled(double alpha, FnObject inner) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InputError("scaling factor must be positive and finite");
  }
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::Scaled;
  impl->dim = inner.dim();
  impl->alpha = alpha;
  impl->a = std::make_shared<const FnObject>(std::move(inner));
  return FnObject(std::move(impl));
}

FnObject FnObject::sum(FnObject a, FnObject b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("sum of functions");
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::Sum;
  impl->dim = a.dim();
  impl->a = std::make_shared<const FnObject>(std::move(a));
  impl->b = std::make_shared<const FnObject>(std::move(b));
  return FnObject(std::move(impl));
}

FnObject FnObject::composite(FnObject outer, SmoothMap inner) {
  if (outer.dim() != inner.output_dim()) {
    throw DimensionMismatch("composite: θ expects R^" +
                            std::to_string(outer.dim()) + " but f maps into R^" +
                            std::to_string(inner.output_dim()));
  }
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::Composite;
  impl->dim = inner.input_dim();
  impl->a = std::make_shared<const FnObject>(std::move(outer));
  impl->map = std::move(inner);
  return FnObject(std::move(impl));
}

FnObject::Kind FnObject::kind() const { return impl_->kind; }
std::size_t FnObject::dim() const { return impl_ ? impl_->dim : 0; }

const char* FnObject::kind_name() const {
  switch (impl_->kind) {
    case Kind::Smooth: return "smooth";
    case Kind::Indicator: return "indicator";
    case Kind::PLQ: return "plq";
    case Kind::Distance: return "distance";
    case Kind::Oracle: return "oracle";
    case Kind::Scaled: return "scaled";
    case Kind::Sum: return "sum";
    case Kind::Composite: return "composite";
  }
  return "?";
}

const Expr& FnObject::expr() const { return impl_->expr; }
const Polyhedron& FnObject::set() const { return impl_->set; }
const std::vector<PLQPiece>& FnObject::pieces() const { return impl_->pieces; }
const std::optional<Polyhedron>& FnObject::plq_domain() const {
  return impl_->domain;
}
double FnObject::alpha() const { return impl_->alpha; }
const FnObject& FnObject::first() const { return *impl_->a; }
const FnObject& FnObject::second() const { return *impl_->b; }
const SmoothMap& FnObject::inner_map() const { return impl_->map; }

namespace {

double member_tol(const Vector& x) {
  return kValueTol * (1.0 + (x.size() ? x.cwiseAbs().maxCoeff() : 0.0));
}

void check_dim(const FnObject& phi, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != phi.dim()) {
    throw DimensionMismatch("point has dimension " + std::to_string(x.size()) +
                            ", function expects " + std::to_string(phi.dim()));
  }
}

}  // namespace

double FnObject::operator()(const Vector& x) const {
  check_dim(*this, x);
  const Impl& f = *impl_;
  switch (f.kind) {
    case Kind::Smooth:
      return value(f.expr, x);
    case Kind::Indicator:
      return f.set.contains(x, member_tol(x)) ? 0.0 : kInf;
    case Kind::PLQ: {
      const double tol = member_tol(x);
      if (f.domain && !f.domain->contains(x, tol)) return kInf;
      for (const auto& p : f.pieces) {
        if (p.region.contains(x, tol)) return p.eval(x);
      }
      return kInf;
    }
    case Kind::Distance:
      return varcert::distance(f.set, x, precise_projection());
    case Kind::Oracle: {
      if (f.domain && !f.domain->contains(x, member_tol(x))) return kInf;
      const double v = f.fn(x);
      return std::isnan(v) ? kInf : v;
    }
    case Kind::Scaled:
      return f.alpha * (*f.a)(x);
    case Kind::Sum: {
      const double va = (*f.a)(x);
      if (va == kInf) return kInf;
      return va + (*f.b)(x);
    }
    case Kind::Composite: {
      const Vector y = f.map.eval(x);
      if (!y.allFinite()) return kInf;
      return (*f.a)(y);
    }
  }
  return kInf;
}

std::optional<Polyhedron> FnObject::domain_polyhedron() const {
  const Impl& f = *impl_;
  switch (f.kind) {
    case Kind::Smooth:
    case Kind::Distance:
      return Polyhedron::whole_space(f.dim);
    case Kind::Indicator:
      return f.set;
    case Kind::PLQ:
      if (f.domain) {
        if (f.pieces.size() == 1) return f.domain->intersect(f.pieces[0].region);
        return f.domain;
      }
      if (f.pieces.size() == 1) return f.pieces[0].region;
      return std::nullopt;
    case Kind::Oracle:
      return f.domain;
    case Kind::Scaled:
      return f.a->domain_polyhedron();
    case Kind::Sum: {
      auto da = f.a->domain_polyhedron();
      auto db = f.b->domain_polyhedron();
      if (da && db) return da->intersect(*db);
      return std::nullopt;
    }
    case Kind::Composite:
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<SampledSet> FnObject::domain_set() const {
  const Impl& f = *impl_;
  if (f.kind == Kind::Composite) {
    auto outer = f.a->domain_polyhedron();
    if (outer) return preimage_set(f.map, *outer);
    return std::nullopt;
  }
  if (f.kind == Kind::Scaled) return f.a->domain_set();
  if (auto p = domain_polyhedron()) return as_sampled_set(*p);
  return std::nullopt;
}

double value(const FnObject& phi, const Vector& x) { return phi(x); }

double SampleSchedule::t(int j) const { return t0 * std::pow(rho, j); }

namespace {

Vector random_unit(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Vector u(n);
  do {
    for (Eigen::Index i = 0; i < n; ++i) u[i] = g(rng);
  } while (u.norm() == 0.0);
  return u.normalized();
}

struct QuotientTrace {
  std::vector<double> q;
  double fx = 0.0;
};

// Per level, the smallest quotient over u and nearby directions. Directions
// whose point leaves dom φ are moved back into the domain when its shape is
// known and accepted only if they stay within c·√t of u.
QuotientTrace quotient_trace(const FnObject& phi, const Vector& x,
                             const Vector& u, const SampleSchedule& s) {
  QuotientTrace tr;
  tr.fx = phi(x);
  if (!std::isfinite(tr.fx)) {
    throw NotInDomain("point is outside the domain of the function");
  }
  std::mt19937_64 rng(s.seed);
  const auto dom = phi.domain_polyhedron();
  std::optional<SampledSet> dom_set;
  if (!dom) dom_set = phi.domain_set();
  std::vector<const PLQPiece*> active;
  if (phi.kind() == FnObject::Kind::PLQ && !dom) {
    for (const auto& p : phi.pieces()) {
      if (p.region.contains(x, member_tol(x))) active.push_back(&p);
    }
  }
  const ProjectOptions popt = precise_projection();

  for (int j = 0; j < s.levels; ++j) {
    const double t = s.t(j);
    const double accept = s.radius_c * std::sqrt(t);
    double best = kInf;
    // Domain membership relative to t.
    const double strict = std::max(1e-6 * t, 1e-14) * (1.0 + x.cwiseAbs().maxCoeff());
    auto in_domain = [&](const Vector& z) {
      if (dom) return dom->contains(z, strict);
      if (dom_set) return dom_set->residual_norm(z) <= strict;
      return true;
    };
    auto consider = [&](const Vector& up) {
      const Vector z = x + t * up;
      double v = phi(z);
      if (std::isfinite(v) && in_domain(z)) {
        best = std::min(best, (v - tr.fx) / t);
        return;
      }
      auto try_point = [&](const Vector& w) {
        if (((w - x) / t - u).norm() > accept) return;
        const double vw = phi(w);
        if (std::isfinite(vw)) best = std::min(best, (vw - tr.fx) / t);
      };
      if (dom) {
        try_point(project(*dom, z, popt).point);
      } else if (!active.empty()) {
        for (const auto* p : active) try_point(project(p->region, z, popt).point);
      } else if (dom_set) {
        PenaltyOptions o;
        o.residual_tol = 1e-13;
        const PenaltyResult r = penalty_project(*dom_set, z, o);
        if (r.accepted) try_point(r.point);
      }
    };
    consider(u);
    for (int k = 0; k < s.perturbations; ++k) {
      consider(u + s.radius_c * t * random_unit(rng, u.size()));
    }
    tr.q.push_back(best);
  }
  return tr;
}

SubderivativeValue summarize(const QuotientTrace& tr, const SampleSchedule& s) {
  SubderivativeValue out;
  out.mode = SubderivativeMode::Sampled;
  const std::size_t levels = tr.q.size();
  const std::size_t tail = std::min<std::size_t>(5, levels);
  out.levels_used = static_cast<int>(levels);
  double lo = kInf;
  double hi = -kInf;
  for (std::size_t j = levels - tail; j < levels; ++j) {
    lo = std::min(lo, tr.q[j]);
    hi = std::max(hi, tr.q[j]);
  }
  out.value = lo;
  if (lo == kInf) {
    out.spread = 0.0;
  } else {
    out.spread = hi - lo;
  }
  out.inconclusive = !(out.spread <= s.tol_spread * (1.0 + std::abs(lo)));
  return out;
}

SubderivativeValue analytic(double v) {
  SubderivativeValue out;
  out.value = v;
  out.mode = SubderivativeMode::Analytic;
  return out;
}

}  // namespace

SubderivativeValue subderivative_sampled(const FnObject& phi, const Vector& x,
                                         const Vector& u,
                                         const SampleSchedule& schedule) {
  check_dim(phi, x);
  check_dim(phi, u);
  return summarize(quotient_trace(phi, x, u, schedule), schedule);
}

SubderivativeValue subderivative(const FnObject& phi, const Vector& x,
                                 const Vector& u,
                                 const SampleSchedule& schedule) {
  check_dim(phi, x);
  check_dim(phi, u);
  if (!std::isfinite(phi(x))) {
    throw NotInDomain("point is outside the domain of the function");
  }
  switch (phi.kind()) {
    case FnObject::Kind::Smooth: {
      const Gradient g = grad(phi.expr(), x);
      if (g.kink) break;
      return analytic(g.value.dot(u));
    }
    case FnObject::Kind::Indicator:
      return analytic(tangent_cone(phi.set(), x, 1e-6, 1.0).contains(u) ? 0.0
                                                                        : kInf);
    case FnObject::Kind::PLQ: {
      const double tol = member_tol(x);
      if (phi.plq_domain() &&
          !tangent_cone(*phi.plq_domain(), x, 1e-6, 1.0).contains(u)) {
        return analytic(kInf);
      }
      double best = kInf;
      for (const auto& p : phi.pieces()) {
        if (!p.region.contains(x, tol)) continue;
        if (!tangent_cone(p.region, x, 1e-6, 1.0).contains(u)) continue;
        best = std::min(best, p.gradient(x).dot(u));
      }
      return analytic(best);
    }
    case FnObject::Kind::Distance: {
      const Projection pr = project(phi.set(), x, precise_projection());
      if (pr.distance > 0.0) {
        return analytic((x - pr.point).dot(u) / pr.distance);
      }
      const Polyhedron t = as_polyhedron(tangent_cone(phi.set(), x, 1e-6, 1.0));
      return analytic(varcert::distance(t, u, precise_projection()));
    }
    case FnObject::Kind::Scaled: {
      SubderivativeValue v = subderivative(phi.first(), x, u, schedule);
      v.value *= phi.alpha();
      v.spread *= phi.alpha();
      return v;
    }
    case FnObject::Kind::Sum: {
      if (phi.first().kind() != FnObject::Kind::Smooth &&
          phi.second().kind() != FnObject::Kind::Smooth) {
        break;
      }
      const SubderivativeValue a = subderivative(phi.first(), x, u, schedule);
      const SubderivativeValue b = subderivative(phi.second(), x, u, schedule);
      SubderivativeValue out = a;
      out.value = (a.value == kInf || b.value == kInf) ? kInf : a.value + b.value;
      if (b.mode == SubderivativeMode::Sampled) out.mode = b.mode;
      out.spread = a.spread + b.spread;
      out.inconclusive = a.inconclusive || b.inconclusive;
      return out;
    }
    case FnObject::Kind::Oracle:
    case FnObject::Kind::Composite:
      break;
  }
  return subderivative_sampled(phi, x, u, schedule);
}

// ---------------------------------------------------------------------------
// SubdifferentialSet

namespace {

Polyhedron product(const Polyhedron& p, const Polyhedron& q) {
  const Eigen::Index n1 = static_cast<Eigen::Index>(p.dim());
  const Eigen::Index n2 = static_cast<Eigen::Index>(q.dim());
  Matrix a = Matrix::Zero(p.a_ineq().rows() + q.a_ineq().rows(), n1 + n2);
  a.topLeftCorner(p.a_ineq().rows(), n1) = p.a_ineq();
  a.bottomRightCorner(q.a_ineq().rows(), n2) = q.a_ineq();
  Vector b(p.b_ineq().size() + q.b_ineq().size());
  b << p.b_ineq(), q.b_ineq();
  Matrix e = Matrix::Zero(p.a_eq().rows() + q.a_eq().rows(), n1 + n2);
  e.topLeftCorner(p.a_eq().rows(), n1) = p.a_eq();
  e.bottomRightCorner(q.a_eq().rows(), n2) = q.a_eq();
  Vector d(p.b_eq().size() + q.b_eq().size());
  d << p.b_eq(), q.b_eq();
  return Polyhedron(std::move(a), std::move(b), std::move(e), std::move(d));
}

// Rows of the LP "z ∈ Q" plus extra equality rows in front.
LPProblem lifted_lp(const Polyhedron& q, const Matrix& extra_eq,
                    const Vector& extra_rhs, Eigen::Index extra_cols) {
  const Eigen::Index k = static_cast<Eigen::Index>(q.dim());
  const Eigen::Index nv = k + extra_cols;
  const Eigen::Index r0 = extra_eq.rows();
  const Eigen::Index p = q.a_ineq().rows();
  const Eigen::Index m = q.a_eq().rows();
  Matrix a = Matrix::Zero(r0 + p + m, nv);
  Vector b(r0 + p + m);
  std::vector<RowSense> senses;
  if (r0 > 0) a.topRows(r0) = extra_eq;
  b.head(r0) = extra_rhs;
  senses.assign(static_cast<std::size_t>(r0), RowSense::Eq);
  a.block(r0, 0, p, k) = q.a_ineq();
  b.segment(r0, p) = q.b_ineq();
  senses.resize(static_cast<std::size_t>(r0 + p), RowSense::Le);
  a.block(r0 + p, 0, m, k) = q.a_eq();
  b.tail(m) = q.b_eq();
  senses.resize(static_cast<std::size_t>(r0 + p + m), RowSense::Eq);
  return LPProblem::make(Vector::Zero(nv), std::move(a), std::move(b),
                         std::move(senses));
}

}  // namespace

SubdifferentialSet SubdifferentialSet::empty(std::size_t n) {
  SubdifferentialSet s;
  s.kind_ = Kind::Empty;
  s.dim_ = n;
  return s;
}

SubdifferentialSet SubdifferentialSet::singleton(Vector g) {
  SubdifferentialSet s;
  s.kind_ = Kind::Singleton;
  s.dim_ = static_cast<std::size_t>(g.size());
  s.map_ = Matrix(g.size(), 0);
  s.q_ = Polyhedron::whole_space(0);
  s.offset_ = std::move(g);
  return s;
}

SubdifferentialSet SubdifferentialSet::lifted(Vector offset, Matrix map,
                                              Polyhedron q) {
  if (map.rows() != offset.size() ||
      static_cast<std::size_t>(map.cols()) != q.dim()) {
    throw DimensionMismatch("lifted subdifferential: shapes disagree");
  }
  if (map.cols() == 0) return singleton(std::move(offset));
  SubdifferentialSet s;
  s.kind_ = Kind::Polyhedral;
  s.dim_ = static_cast<std::size_t>(offset.size());
  s.offset_ = std::move(offset);
  s.map_ = std::move(map);
  s.q_ = std::move(q);
  return s;
}

SubdifferentialSet SubdifferentialSet::from_cone(const PolyhedralCone& k) {
  const auto n = static_cast<Eigen::Index>(k.dim());
  if (k.has_generators()) {
    const Eigen::Index r = k.rays().cols();
    const Eigen::Index l = k.lines().cols();
    Matrix map(n, r + l);
    map << k.rays(), k.lines();
    Matrix a = Matrix::Zero(r, r + l);
    a.leftCols(r) = -Matrix::Identity(r, r);
    return lifted(Vector::Zero(n), std::move(map),
                  Polyhedron::inequalities(std::move(a), Vector::Zero(r)));
  }
  return lifted(Vector::Zero(n), Matrix::Identity(n, n), as_polyhedron(k));
}

SubdifferentialSet SubdifferentialSet::cone_cap_ball(PolyhedralCone k,
                                                     double radius) {
  SubdifferentialSet s;
  s.kind_ = Kind::ConeCapBall;
  s.dim_ = k.dim();
  s.cone_ = std::move(k);
  s.radius_ = radius;
  return s;
}

double SubdifferentialSet::support(const Vector& u) const {
  switch (kind_) {
    case Kind::Empty:
      return -kInf;
    case Kind::Singleton:
      return offset_.dot(u);
    case Kind::Polyhedral: {
      LPProblem lp = lifted_lp(q_, Matrix(0, map_.cols()), Vector(0), 0);
      lp.c = -(map_.transpose() * u);
      const LPSolution sol = lp_solve(lp);
      if (sol.status == LPStatus::Infeasible) return -kInf;
      if (sol.status == LPStatus::Unbounded) return kInf;
      return offset_.dot(u) - sol.objective;
    }
    case Kind::ConeCapBall: {
      const Polyhedron polar_set = as_polyhedron(cone_.polar());
      return radius_ * varcert::distance(polar_set, u, precise_projection());
    }
  }
  return -kInf;
}

double SubdifferentialSet::membership_residual(const Vector& v) const {
  if (static_cast<std::size_t>(v.size()) != dim_) {
    throw DimensionMismatch("subdifferential membership: dimension mismatch");
  }
  switch (kind_) {
    case Kind::Empty:
      return kInf;
    case Kind::Singleton:
      return (v - offset_).cwiseAbs().maxCoeff();
    case Kind::Polyhedral: {
      const Eigen::Index n = static_cast<Eigen::Index>(dim_);
      const Eigen::Index k = map_.cols();
      Matrix eq(n, k + 2 * n);
      eq << map_, Matrix::Identity(n, n), -Matrix::Identity(n, n);
      LPProblem lp = lifted_lp(q_, eq, v - offset_, 2 * n);
      lp.c.tail(2 * n).setOnes();
      lp.lower.tail(2 * n).setZero();
      const LPSolution sol = lp_solve(lp);
      return sol.status == LPStatus::Optimal ? sol.objective : kInf;
    }
    case Kind::ConeCapBall:
      return std::max({cone_.membership_residual(v), v.norm() - radius_, 0.0});
  }
  return kInf;
}

bool SubdifferentialSet::contains(const Vector& v, double tol) const {
  return membership_residual(v) <= tol * (1.0 + v.norm());
}

std::vector<Vector> SubdifferentialSet::sample_elements(int count,
                                                        std::uint64_t seed) const {
  std::vector<Vector> out;
  std::mt19937_64 rng(seed);
  const auto n = static_cast<Eigen::Index>(dim_);
  switch (kind_) {
    case Kind::Empty:
      return out;
    case Kind::Singleton:
      out.push_back(offset_);
      return out;
    case Kind::Polyhedral: {
      for (int c = 0; c < count; ++c) {
        const Vector u = random_unit(rng, n);
        LPProblem lp = lifted_lp(q_, Matrix(0, map_.cols()), Vector(0), 0);
        lp.c = -(map_.transpose() * u);
        const LPSolution sol = lp_solve(lp);
        if (sol.status != LPStatus::Optimal) continue;
        out.push_back(offset_ + map_ * sol.x);
      }
      return out;
    }
    case Kind::ConeCapBall: {
      out.push_back(Vector::Zero(n));
      const Polyhedron polar_set = as_polyhedron(cone_.polar());
      for (int c = 1; c < count; ++c) {
        const Vector u = random_unit(rng, n);
        const Vector p = u - project(polar_set, u, precise_projection()).point;
        if (p.norm() > 1e-12) out.push_back(radius_ * p / p.norm());
      }
      return out;
    }
  }
  return out;
}

SubdifferentialSet SubdifferentialSet::adjoint_image(const Matrix& jacobian) const {
  if (static_cast<std::size_t>(jacobian.rows()) != dim_) {
    throw DimensionMismatch("adjoint image: Jacobian has wrong row count");
  }
  const Matrix jt = jacobian.transpose();
  switch (kind_) {
    case Kind::Empty:
      return empty(static_cast<std::size_t>(jacobian.cols()));
    case Kind::Singleton:
      return singleton(jt * offset_);
    case Kind::Polyhedral:
      return lifted(jt * offset_, jt * map_, q_);
    case Kind::ConeCapBall:
      break;
  }
  throw NonconvexUnsupported(
      "adjoint image of a cone-ball set has no polyhedral representation");
}

SubdifferentialSet minkowski_sum(const SubdifferentialSet& a,
                                 const SubdifferentialSet& b) {
  using Kind = SubdifferentialSet::Kind;
  if (a.dim() != b.dim()) throw DimensionMismatch("Minkowski sum");
  if (a.kind() == Kind::Empty || b.kind() == Kind::Empty) {
    return SubdifferentialSet::empty(a.dim());
  }
  if (a.kind() == Kind::ConeCapBall || b.kind() == Kind::ConeCapBall) {
    throw NonconvexUnsupported(
        "Minkowski sums with cone-ball sets are not represented");
  }
  Matrix map(static_cast<Eigen::Index>(a.dim()), a.map().cols() + b.map().cols());
  map << a.map(), b.map();
  return SubdifferentialSet::lifted(a.offset() + b.offset(), std::move(map),
                                    product(a.lifted_set(), b.lifted_set()));
}

std::string SubdifferentialSet::describe() const {
  char buf[128];
  switch (kind_) {
    case Kind::Empty:
      return "empty set";
    case Kind::Singleton:
      std::snprintf(buf, sizeof buf, "singleton in R^%zu", dim_);
      return buf;
    case Kind::Polyhedral:
      std::snprintf(buf, sizeof buf, "polyhedral set in R^%zu (%td lifted variables)",
                    dim_, static_cast<std::ptrdiff_t>(map_.cols()));
      return buf;
    case Kind::ConeCapBall:
      std::snprintf(buf, sizeof buf, "cone intersected with ball of radius %g",
                    radius_);
      return buf;
  }
  return "";
}

// ---------------------------------------------------------------------------

namespace {

// v − A_actᵀμ − Eᵀν = g constraints for one piece, appended to a builder.
struct LiftBuilder {
  Eigen::Index n;
  std::vector<Matrix> blocks;  // n×k_i blocks of −[A_actᵀ Eᵀ]
  std::vector<Eigen::Index> nonneg;  // count of μ per block
  std::vector<Vector> rhs;

  void add_piece(const Polyhedron& region, const Vector& x, const Vector& g) {
    const PolyhedralCone nc = normal_cone(region, x, 1e-6, 1.0);
    Matrix blk(n, nc.rays().cols() + nc.lines().cols());
    blk << nc.rays(), nc.lines();
    blocks.push_back(-blk);
    nonneg.push_back(nc.rays().cols());
    rhs.push_back(g);
  }
};

SubdifferentialSet convex_plq_subdifferential(const FnObject& phi,
                                              const Vector& x) {
  const auto n = static_cast<Eigen::Index>(phi.dim());
  const double tol = member_tol(x);
  LiftBuilder lb{n, {}, {}, {}};
  for (const auto& p : phi.pieces()) {
    if (p.region.contains(x, tol)) lb.add_piece(p.region, x, p.gradient(x));
  }
  // Variables: v, then per piece (μ_i, ν_i), then (μ_D, ν_D) of the domain.
  Matrix dom_gen(n, 0);
  Eigen::Index dom_rays = 0;
  if (phi.plq_domain()) {
    const PolyhedralCone nd = normal_cone(*phi.plq_domain(), x, 1e-6, 1.0);
    dom_gen.resize(n, nd.rays().cols() + nd.lines().cols());
    dom_gen << nd.rays(), nd.lines();
    dom_rays = nd.rays().cols();
  }
  Eigen::Index k = n;
  for (const auto& b : lb.blocks) k += b.cols();
  const Eigen::Index k_total = k + dom_gen.cols();

  const Eigen::Index pieces = static_cast<Eigen::Index>(lb.blocks.size());
  Matrix eq = Matrix::Zero(pieces * n, k_total);
  Vector d(pieces * n);
  std::vector<Eigen::Index> nonneg_cols;
  Eigen::Index col = n;
  for (Eigen::Index i = 0; i < pieces; ++i) {
    const auto si = static_cast<std::size_t>(i);
    eq.block(i * n, 0, n, n) = Matrix::Identity(n, n);
    eq.block(i * n, col, n, lb.blocks[si].cols()) = lb.blocks[si];
    d.segment(i * n, n) = lb.rhs[si];
    for (Eigen::Index c = 0; c < lb.nonneg[si]; ++c) nonneg_cols.push_back(col + c);
    col += lb.blocks[si].cols();
  }
  for (Eigen::Index c = 0; c < dom_rays; ++c) nonneg_cols.push_back(col + c);
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(nonneg_cols.size()), k_total);
  for (std::size_t r = 0; r < nonneg_cols.size(); ++r) {
    a(static_cast<Eigen::Index>(r), nonneg_cols[r]) = -1.0;
  }
  Matrix map = Matrix::Zero(n, k_total);
  map.leftCols(n) = Matrix::Identity(n, n);
  map.rightCols(dom_gen.cols()) = dom_gen;
  Polyhedron q(std::move(a), Vector::Zero(static_cast<Eigen::Index>(nonneg_cols.size())),
               std::move(eq), std::move(d));
  return SubdifferentialSet::lifted(Vector::Zero(n), std::move(map), std::move(q));
}

}  // namespace

SubdifferentialSet subdifferential(const FnObject& phi, const Vector& x) {
  check_dim(phi, x);
  if (!std::isfinite(phi(x))) {
    throw NotInDomain("point is outside the domain of the function");
  }
  switch (phi.kind()) {
    case FnObject::Kind::Smooth: {
      const Gradient g = grad(phi.expr(), x);
      if (g.kink) {
        throw NonconvexUnsupported(
            "expression has an abs/max/min kink at the point; use the PLQ form");
      }
      return SubdifferentialSet::singleton(g.value);
    }
    case FnObject::Kind::Indicator:
      return SubdifferentialSet::from_cone(normal_cone(phi.set(), x, 1e-6, 1.0));
    case FnObject::Kind::Distance: {
      const Projection pr = project(phi.set(), x, precise_projection());
      if (pr.distance > 0.0) {
        return SubdifferentialSet::singleton((x - pr.point) / pr.distance);
      }
      return SubdifferentialSet::cone_cap_ball(normal_cone(phi.set(), x, 1e-6, 1.0),
                                               1.0);
    }
    case FnObject::Kind::PLQ:
      if (!plq_is_convex(phi, x)) {
        throw NonconvexUnsupported(
            "PLQ function is not convex; test membership via the subderivative");
      }
      return convex_plq_subdifferential(phi, x);
    case FnObject::Kind::Scaled: {
      const SubdifferentialSet inner = subdifferential(phi.first(), x);
      const double a = phi.alpha();
      switch (inner.kind()) {
        case SubdifferentialSet::Kind::Empty:
          return inner;
        case SubdifferentialSet::Kind::ConeCapBall:
          return SubdifferentialSet::cone_cap_ball(inner.cone(), a * inner.radius());
        default:
          return SubdifferentialSet::lifted(a * inner.offset(), a * inner.map(),
                                            inner.lifted_set());
      }
    }
    case FnObject::Kind::Sum:
      return minkowski_sum(subdifferential(phi.first(), x),
                           subdifferential(phi.second(), x));
    case FnObject::Kind::Oracle:
    case FnObject::Kind::Composite:
      break;
  }
  throw NonconvexUnsupported(std::string("no exact subdifferential for ") +
                             phi.kind_name() + " functions");
}

std::vector<Vector> unit_directions(std::size_t n, int count,
                                    std::uint64_t seed) {
  std::vector<Vector> out;
  const auto ni = static_cast<Eigen::Index>(n);
  for (Eigen::Index i = 0; i < ni && static_cast<int>(out.size()) < count; ++i) {
    out.push_back(Vector::Unit(ni, i));
    if (static_cast<int>(out.size()) < count) out.push_back(-Vector::Unit(ni, i));
  }
  std::mt19937_64 rng(seed);
  while (static_cast<int>(out.size()) < count) out.push_back(random_unit(rng, ni));
  return out;
}

double dual_inequality_violation(const FnObject& phi, const Vector& x,
                                 const Vector& v,
                                 const std::vector<Vector>& directions) {
  double worst = -kInf;
  for (const auto& u : directions) {
    const double d = subderivative(phi, x, u).value;
    if (d == kInf) continue;
    worst = std::max(worst, v.dot(u) - d);
  }
  return worst;
}

SubdifferentialSet subdifferential_inner(const FnObject& phi, const Vector& x,
                                         int directions, std::uint64_t seed) {
  try {
    return subdifferential(phi, x);
  } catch (const NonconvexUnsupported&) {
  }
  const auto n = static_cast<Eigen::Index>(phi.dim());
  std::vector<Vector> candidates;
  if (phi.kind() == FnObject::Kind::PLQ) {
    for (const auto& p : phi.pieces()) {
      if (p.region.contains(x, member_tol(x))) candidates.push_back(p.gradient(x));
    }
  }
  if (phi.kind() == FnObject::Kind::Smooth) {
    candidates.push_back(grad(phi.expr(), x).value);
  }
  {
    Vector g(n);
    Vector xp = x;
    bool ok = true;
    for (Eigen::Index i = 0; i < n && ok; ++i) {
      const double h = 1e-6 * (1.0 + std::abs(x[i]));
      xp[i] = x[i] + h;
      const double fp = phi(xp);
      xp[i] = x[i] - h;
      const double fm = phi(xp);
      xp[i] = x[i];
      ok = std::isfinite(fp) && std::isfinite(fm);
      g[i] = (fp - fm) / (2.0 * h);
    }
    if (ok) candidates.push_back(g);
  }
  const auto dirs = unit_directions(phi.dim(), directions, seed);
  std::vector<Vector> kept;
  for (const auto& c : candidates) {
    if (dual_inequality_violation(phi, x, c, dirs) <= 1e-6) kept.push_back(c);
  }
  if (kept.empty()) return SubdifferentialSet::empty(phi.dim());
  const auto k = static_cast<Eigen::Index>(kept.size());
  Matrix map(n, k);
  for (Eigen::Index j = 0; j < k; ++j) map.col(j) = kept[static_cast<std::size_t>(j)];
  Polyhedron simplex(-Matrix::Identity(k, k), Vector::Zero(k),
                     Matrix::Ones(1, k), Vector::Ones(1));
  return SubdifferentialSet::lifted(Vector::Zero(n), std::move(map),
                                    std::move(simplex));
}

EpiReport epi_check(const FnObject& phi, const Vector& x,
                    const std::vector<Vector>& directions,
                    const SampleSchedule& schedule) {
  EpiReport rep;
  bool all = true;
  for (const auto& u : directions) {
    if (subderivative(phi, x, u, schedule).value == kInf) continue;
    const QuotientTrace tr = quotient_trace(phi, x, u, schedule);
    const SubderivativeValue s = summarize(tr, schedule);
    rep.directions.push_back(u);
    rep.liminf.push_back(s.value);
    rep.limsup.push_back(s.value + s.spread);
    const Verdict v = s.inconclusive ? Verdict::Inconclusive : Verdict::Verified;
    rep.verdicts.push_back(v);
    all = all && v == Verdict::Verified;
  }
  rep.overall = (all && !rep.directions.empty()) ? Verdict::Verified
                                                 : Verdict::Inconclusive;
  return rep;
}

RegularityReport regularity_check(const FnObject& phi, const Vector& x,
                                  const std::vector<Vector>& directions,
                                  double tol_reg) {
  RegularityReport rep;
  const SubdifferentialSet s = subdifferential_inner(phi, x);
  for (const auto& u : directions) {
    const double d = subderivative(phi, x, u).value;
    const double h = s.support(u);
    double gap = 0.0;
    if (d != h) gap = (std::isinf(d) || std::isinf(h)) ? kInf : std::abs(d - h);
    rep.gaps.push_back(gap);
    rep.max_gap = std::max(rep.max_gap, gap);
  }
  rep.pass = rep.max_gap <= tol_reg;
  return rep;
}

namespace {

// A random point of dom φ ∩ B(center, radius), if one was found.
std::optional<Vector> sample_domain_point(const FnObject& phi,
                                          const std::optional<Polyhedron>& dom,
                                          const Vector& center, double radius,
                                          std::mt19937_64& rng) {
  const auto n = center.size();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(n));
  Vector z = center + r * random_unit(rng, n);
  if (dom) {
    z = project(*dom, z).point;
  } else if (phi.kind() == FnObject::Kind::PLQ) {
    const auto& pieces = phi.pieces();
    std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
    const auto& region = pieces[pick(rng)].region;
    if (region.is_empty()) return std::nullopt;
    z = project(region, z).point;
  }
  if ((z - center).norm() > radius * (1.0 + 1e-12)) return std::nullopt;
  if (!std::isfinite(phi(z))) return std::nullopt;
  return z;
}

}  // namespace

double rel_lipschitz_estimate(const FnObject& phi, const Vector& x,
                              double radius, int samples, std::uint64_t seed) {
  check_dim(phi, x);
  std::mt19937_64 rng(seed);
  const auto dom = phi.domain_polyhedron();
  double best = 0.0;
  std::optional<Vector> prev;
  auto ratio = [&](const Vector& a, const Vector& b) {
    const double d = (a - b).norm();
    if (d < 1e-12) return;
    best = std::max(best, std::abs(phi(a) - phi(b)) / d);
  };
  for (int s = 0; s < samples; ++s) {
    const auto a = sample_domain_point(phi, dom, x, radius, rng);
    if (!a) continue;
    const auto b = sample_domain_point(phi, dom, *a, 1e-3 * radius, rng);
    if (b && (*b - x).norm() <= radius) ratio(*a, *b);
    if (prev) ratio(*a, *prev);
    prev = a;
  }
  return best;
}

bool plq_is_convex(const FnObject& phi, const Vector& x, int pairs,
                   std::uint64_t seed) {
  if (phi.kind() != FnObject::Kind::PLQ) {
    throw InputError("plq_is_convex expects a PLQ function");
  }
  for (const auto& p : phi.pieces()) {
    if (p.quad.size() == 0) continue;
    const double lo = eigh(p.quad).values.minCoeff();
    if (lo < -1e-10 * (1.0 + p.quad.norm())) return false;
  }
  std::mt19937_64 rng(seed);
  const auto dom = phi.domain_polyhedron();
  int done = 0;
  for (int tries = 0; tries < 4 * pairs && done < pairs; ++tries) {
    const auto a = sample_domain_point(phi, dom, x, 1.0, rng);
    const auto b = sample_domain_point(phi, dom, x, 1.0, rng);
    if (!a || !b) continue;
    ++done;
    const double fa = phi(*a);
    const double fb = phi(*b);
    const double fm = phi(0.5 * (*a + *b));
    if (fm > 0.5 * (fa + fb) + 1e-9 * (1.0 + std::abs(fa) + std::abs(fb))) {
      return false;
    }
  }
  return true;
}

double plq_consistency_gap(const std::vector<PLQPiece>& pieces,
                           int samples_per_pair, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    for (std::size_t j = i + 1; j < pieces.size(); ++j) {
      const Polyhedron both = pieces[i].region.intersect(pieces[j].region);
      const auto n = static_cast<Eigen::Index>(both.dim());
      // A feasible point of the overlap, if any, by LP.
      Matrix a(both.a_ineq().rows() + both.a_eq().rows(), n);
      a << both.a_ineq(), both.a_eq();
      Vector b(a.rows());
      b << both.b_ineq(), both.b_eq();
      std::vector<RowSense> senses(static_cast<std::size_t>(both.a_ineq().rows()),
                                   RowSense::Le);
      senses.resize(static_cast<std::size_t>(a.rows()), RowSense::Eq);
      const LPSolution sol =
          lp_solve(LPProblem::make(Vector::Zero(n), a, b, senses));
      if (sol.status != LPStatus::Optimal) continue;
      // Vertices of the overlap inside a unit box around sol.x, then
      // midpoints of consecutive vertices.
      std::vector<Vector> pts{sol.x};
      for (int s = 0; s < samples_per_pair; ++s) {
        Vector c(n);
        for (Eigen::Index k = 0; k < n; ++k) c[k] = g(rng);
        LPProblem lp = LPProblem::make(c, a, b, senses);
        lp.lower = sol.x.array() - 1.0;
        lp.upper = sol.x.array() + 1.0;
        const LPSolution v = lp_solve(lp);
        if (v.status != LPStatus::Optimal) continue;
        pts.push_back(0.5 * (v.x + pts.back()));
        pts.push_back(v.x);
      }
      for (const auto& z : pts) {
        const double vi = pieces[i].eval(z);
        const double vj = pieces[j].eval(z);
        worst = std::max(worst, std::abs(vi - vj) / (1.0 + std::abs(vi)));
      }
    }
  }
  return worst;
}

}  // namespace varcert
