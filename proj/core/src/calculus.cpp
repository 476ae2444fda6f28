#include "varcert/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <utility>

#include "varcert/errors.hpp"
#include "varcert/solvers.hpp"

namespace varcert {

namespace {

Vector random_unit(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Vector u(n);
  do {
    for (Eigen::Index i = 0; i < n; ++i) u[i] = g(rng);
  } while (u.norm() == 0.0);
  return u.normalized();
}

bool is_whole_space(const Polyhedron& p) {
  return p.a_ineq().rows() == 0 && p.a_eq().rows() == 0;
}

// dφ(x)(u) < ∞ on every direction: with a polyhedral (or piecewise
// polyhedral) domain this means x is interior to dom φ.
bool finite_in_all_directions(const FnObject& phi, const Vector& x,
                              const std::vector<Vector>& dirs) {
  for (const auto& u : dirs) {
    if (subderivative(phi, x, u).value == kInf) return false;
  }
  return true;
}

bool known_convex(const FnObject& phi, const Vector& x) {
  switch (phi.kind()) {
    case FnObject::Kind::Indicator:
    case FnObject::Kind::Distance:
      return true;
    case FnObject::Kind::PLQ:
      return plq_is_convex(phi, x);
    case FnObject::Kind::Scaled:
      return known_convex(phi.first(), x);
    case FnObject::Kind::Sum:
      return known_convex(phi.first(), x) && known_convex(phi.second(), x);
    default:
      return false;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Composite

Composite::Composite(FnObject theta, SmoothMap f, Vector xbar)
    : theta_(std::move(theta)), f_(std::move(f)), xbar_(std::move(xbar)) {
  if (static_cast<std::size_t>(xbar_.size()) != f_.input_dim()) {
    throw DimensionMismatch("composite: base point has dimension " +
                            std::to_string(xbar_.size()) + ", f expects " +
                            std::to_string(f_.input_dim()));
  }
  if (f_.output_dim() != theta_.dim()) {
    throw DimensionMismatch("composite: f has " + std::to_string(f_.output_dim()) +
                            " components, θ expects " +
                            std::to_string(theta_.dim()));
  }
  ybar_ = f_.eval(xbar_);
  if (!ybar_.allFinite() || !std::isfinite(theta_(ybar_))) {
    throw NotInDomain("composite: f(x̄) is not in dom θ");
  }
  jac_ = f_.jacobian(xbar_);
  dom_ = theta_.domain_polyhedron();
}

Composite Composite::set(SmoothMap f, Polyhedron theta, Vector xbar) {
  return Composite(FnObject::indicator(std::move(theta)), std::move(f),
                   std::move(xbar));
}

const Polyhedron& Composite::dom_theta() const {
  if (!dom_) {
    throw InputError("composite: dom θ is not a known polyhedron; give the PLQ "
                     "function an explicit domain");
  }
  return *dom_;
}

FnObject Composite::as_function() const { return FnObject::composite(theta_, f_); }

SampledSet Composite::feasible_set() const { return preimage_set(f_, dom_theta()); }

Composite Composite::at(const Vector& x) const { return Composite(theta_, f_, x); }

// ---------------------------------------------------------------------------
// Chain and sum rules

const char* to_string(ChainRoute r) {
  switch (r) {
    case ChainRoute::AbadieEpi:
      return "AQC+epi-differentiability";
    case ChainRoute::MetricSubregularity:
      return "MSQC";
  }
  return "?";
}

const char* to_string(SubdifferentialRoute r) {
  switch (r) {
    case SubdifferentialRoute::LipschitzRegular:
      return "Lipschitz+regular";
    case SubdifferentialRoute::ConvexAbadie:
      return "convex+AQC";
  }
  return "?";
}

ChainSubderivative chain_subderivative(const Composite& c, const Vector& u,
                                       ChainRoute route,
                                       const SampleSchedule& schedule) {
  if (static_cast<std::size_t>(u.size()) != c.input_dim()) {
    throw DimensionMismatch("chain_subderivative: direction has dimension " +
                            std::to_string(u.size()));
  }
  ChainSubderivative out;
  out.route = route;
  out.value = subderivative(c.theta(), c.ybar(), c.jacobian() * u, schedule);
  return out;
}

ChainSubdifferential chain_subdifferential(const Composite& c, int directions,
                                           std::uint64_t seed) {
  const auto dirs = unit_directions(c.output_dim(), directions, seed);
  const FnObject& theta = c.theta();
  ChainSubdifferential out;
  if (finite_in_all_directions(theta, c.ybar(), dirs) &&
      regularity_check(theta, c.ybar(), dirs).pass) {
    out.route = SubdifferentialRoute::LipschitzRegular;
    out.set = subdifferential_inner(theta, c.ybar(), directions, seed)
                  .adjoint_image(c.jacobian());
    return out;
  }
  if (!known_convex(theta, c.ybar())) {
    throw NonconvexUnsupported(
        "chain_subdifferential: θ is neither Lipschitz and regular at ȳ nor "
        "convex");
  }
  out.route = SubdifferentialRoute::ConvexAbadie;
  out.set = subdifferential(theta, c.ybar()).adjoint_image(c.jacobian());
  if (!c.has_polyhedral_domain()) {
    out.heuristic = true;
    out.note = "AQC not checked: dom θ is not a known polyhedron";
    return out;
  }
  const CQReport aqc = abadie_check(c);
  if (aqc.verdict != Verdict::Verified) {
    out.heuristic = true;
    out.note = std::string("AQC ") + to_string(aqc.verdict);
  }
  return out;
}

SumSubderivative sum_subderivative(const FnObject& phi, const FnObject& psi,
                                   const Vector& x, const Vector& u,
                                   const SampleSchedule& schedule) {
  if (phi.dim() != psi.dim()) {
    throw DimensionMismatch("sum_subderivative: summands have different dimensions");
  }
  const SubderivativeValue a = subderivative(phi, x, u, schedule);
  const SubderivativeValue b = subderivative(psi, x, u, schedule);
  SumSubderivative out;
  out.value = a;
  out.value.value = (a.value == kInf || b.value == kInf) ? kInf : a.value + b.value;
  if (b.mode == SubderivativeMode::Sampled) out.value.mode = b.mode;
  out.value.levels_used = std::max(a.levels_used, b.levels_used);
  out.value.spread = a.spread + b.spread;
  out.value.inconclusive = a.inconclusive || b.inconclusive;

  const auto da = phi.domain_polyhedron();
  const auto db = psi.domain_polyhedron();
  if ((da && is_whole_space(*da)) || (db && is_whole_space(*db))) {
    out.qc_verified = true;
    out.qc = "one domain is the whole space";
    return out;
  }
  if (da && db) {
    const PolyhedralCone ta = tangent_cone(*da, x);
    const PolyhedralCone tb = tangent_cone(*db, x);
    const PolyhedralCone tab = tangent_cone(da->intersect(*db), x);
    Matrix g(ta.ineq().rows() + tb.ineq().rows(), x.size());
    g << ta.ineq(), tb.ineq();
    Matrix h(ta.eq().rows() + tb.eq().rows(), x.size());
    h << ta.eq(), tb.eq();
    const auto both = PolyhedralCone::from_halfspaces(g, h, phi.dim());
    try {
      out.qc_verified = tab.equals(both);
      out.qc = "tangential (cone comparison)";
    } catch (const DimensionTooLarge&) {
      out.qc_verified = true;
      out.qc = "tangential (polyhedral domains)";
    }
    return out;
  }
  out.qc = "not checked: a domain is not a known polyhedron";
  return out;
}

SumSubdifferential sum_subdifferential(const FnObject& phi, const FnObject& psi,
                                       const Vector& x, int directions,
                                       std::uint64_t seed) {
  if (phi.dim() != psi.dim()) {
    throw DimensionMismatch("sum_subdifferential: summands have different dimensions");
  }
  const auto dirs = unit_directions(phi.dim(), directions, seed);
  SumSubdifferential out;
  out.set = minkowski_sum(subdifferential_inner(phi, x, directions, seed),
                          subdifferential_inner(psi, x, directions, seed));
  out.regular = finite_in_all_directions(phi, x, dirs) &&
                finite_in_all_directions(psi, x, dirs) &&
                regularity_check(phi, x, dirs).pass &&
                regularity_check(psi, x, dirs).pass;
  return out;
}

// ---------------------------------------------------------------------------
// Qualification conditions

const char* to_string(CQCondition c) {
  switch (c) {
    case CQCondition::Abadie:
      return "Abadie";
    case CQCondition::MSQC:
      return "MSQC";
    case CQCondition::Robinson:
      return "Robinson";
  }
  return "?";
}

PolyhedralCone linearized_cone(const Composite& c) {
  return tangent_cone(c.dom_theta(), c.ybar()).preimage(c.jacobian());
}

std::vector<Vector> sampled_tangents(const Composite& c, int count, double step,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const SampledSet omega = c.feasible_set();
  PenaltyOptions opts;
  opts.residual_tol = std::max(1e-4 * step * step, 1e-15);
  std::vector<Vector> out;
  const auto n = static_cast<Eigen::Index>(c.input_dim());
  for (int i = 0; i < count; ++i) {
    const Vector z = c.xbar() + step * random_unit(rng, n);
    const PenaltyResult r = penalty_project(omega, z, opts);
    if (!r.accepted) continue;
    const Vector d = r.point - c.xbar();
    if (d.norm() <= 1e-3 * step) continue;
    out.push_back(d.normalized());
  }
  return out;
}

CQReport abadie_check(const Composite& c, const AbadieOptions& options) {
  CQReport rep;
  rep.condition = CQCondition::Abadie;
  const Polyhedron& dom = c.dom_theta();
  if (dom.active_rows(c.ybar(), 1e-6).empty() && dom.a_eq().rows() == 0) {
    rep.verdict = Verdict::Verified;
    rep.detail = "f(x̄) is interior to dom θ: both cones are the whole space";
    return rep;
  }
  const PolyhedralCone lin = linearized_cone(c);
  const auto n = static_cast<Eigen::Index>(c.input_dim());
  std::mt19937_64 rng(options.seed);

  std::vector<Vector> dirs;
  std::optional<Matrix> gens;
  try {
    gens = lin.with_generators().generator_list();
  } catch (const DimensionTooLarge&) {
  }
  if (gens) {
    for (Eigen::Index j = 0; j < gens->cols(); ++j) {
      if (gens->col(j).norm() > 1e-12) dirs.push_back(gens->col(j).normalized());
    }
    if (dirs.empty()) {
      rep.verdict = Verdict::Verified;
      rep.detail = "linearized cone is {0}";
      return rep;
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int s = 0; s < options.samples; ++s) {
      Vector u = Vector::Zero(n);
      for (Eigen::Index j = 0; j < gens->cols(); ++j) u += unif(rng) * gens->col(j);
      if (u.norm() > 1e-9) dirs.push_back(u.normalized());
    }
  } else {
    const Polyhedron lp = as_polyhedron(lin);
    for (int s = 0; s < options.samples + 2 * static_cast<int>(n); ++s) {
      const Vector u = project(lp, random_unit(rng, n), precise_projection()).point;
      if (u.norm() > 1e-6) dirs.push_back(u.normalized());
    }
  }

  const SampledSet omega = c.feasible_set();
  bool all_verified = true;
  for (const auto& u : dirs) {
    ++rep.samples;
    const DerivabilityReport d = derivability_check(omega, c.xbar(), u);
    if (d.verdict == Verdict::Refuted) {
      rep.verdict = Verdict::Refuted;
      rep.witness = u;
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "linearized direction is not tangent: dist(x̄+tu; Ω)/t ≈ %.3e",
                    d.max_tail_ratio);
      rep.detail = buf;
      return rep;
    }
    all_verified = all_verified && d.verdict == Verdict::Verified;
  }
  if (!all_verified) {
    rep.detail = "some linearized directions were not confirmed tangent";
    return rep;
  }
  for (const auto& d : sampled_tangents(c, 16, 1e-5, options.seed)) {
    if (lin.membership_residual(d) > 1e-3) {
      rep.detail = "a sampled tangent lies outside the linearized cone";
      rep.witness = d;
      return rep;
    }
  }
  rep.verdict = Verdict::Verified;
  rep.sampling_confidence = true;
  return rep;
}

CQReport modulus_estimate(
    const Vector& xbar,
    const std::function<std::optional<std::pair<double, double>>(const Vector&)>&
        parts,
    const ModulusOptions& options) {
  CQReport rep;
  rep.condition = CQCondition::MSQC;
  rep.radius = options.radius;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> rho(0.5, 1.0);
  const auto n = xbar.size();
  std::vector<Vector> dirs;
  std::vector<double> rel;
  for (int s = 0; s < options.samples; ++s) {
    dirs.push_back(random_unit(rng, n));
    rel.push_back(rho(rng));
  }
  Vector worst_point = xbar;
  for (int level = 0; level <= options.halvings; ++level) {
    const double r = options.radius * std::pow(0.5, level);
    double k = 0.0;
    for (std::size_t s = 0; s < dirs.size(); ++s) {
      const Vector x = xbar + r * rel[s] * dirs[s];
      const auto p = parts(x);
      ++rep.samples;
      if (!p || p->second <= 0.0) continue;
      const double ratio = p->first / p->second;
      if (ratio > k) {
        k = ratio;
        if (level == options.halvings) worst_point = x;
      }
    }
    rep.level_kappas.push_back(k);
  }
  const auto& ks = rep.level_kappas;
  bool stable = true;
  bool doubling = ks.size() > 1;
  for (std::size_t j = 0; j + 1 < ks.size(); ++j) {
    stable = stable && ks[j + 1] <= 1.1 * ks[j] + 1e-12;
    doubling = doubling && ks[j] > 0.0 && ks[j + 1] >= 1.8 * ks[j];
  }
  rep.kappa = *std::max_element(ks.begin(), ks.end());
  if (stable) {
    rep.verdict = Verdict::Verified;
    rep.sampling_confidence = true;
  } else if (doubling) {
    rep.divergent = true;
    rep.witness = worst_point;
    rep.detail = "modulus estimate grows like 1/radius";
  } else {
    rep.detail = "modulus estimate did not stabilize";
  }
  return rep;
}

std::optional<double> sampled_distance(const SampledSet& omega, const Vector& x,
                                       double scale) {
  for (double rel : {1e-8, 1e-3}) {
    PenaltyOptions o;
    o.residual_tol = std::max(rel * scale, 1e-14);
    const PenaltyResult p = penalty_project(omega, x, o);
    if (p.accepted) return (p.point - x).norm();
  }
  return std::nullopt;
}

CQReport msqc_estimate(const Composite& c, const ModulusOptions& options) {
  const Polyhedron& dom = c.dom_theta();
  const SampledSet omega = c.feasible_set();
  const ProjectOptions popt = precise_projection();
  auto parts = [&](const Vector& x) -> std::optional<std::pair<double, double>> {
    const Vector y = c.f().eval(x);
    if (!y.allFinite()) return std::nullopt;
    const double r = distance(dom, y, popt);
    if (r <= 1e-12 * (1.0 + y.norm())) return std::nullopt;
    const auto d = sampled_distance(omega, x, r);
    if (!d) return std::nullopt;
    return std::make_pair(*d, r);
  };
  CQReport rep = modulus_estimate(c.xbar(), parts, options);
  rep.condition = CQCondition::MSQC;
  return rep;
}

CQReport robinson_check(const Composite& c, double eps_rel) {
  CQReport rep;
  rep.condition = CQCondition::Robinson;
  const Polyhedron& dom = c.dom_theta();
  const auto n = static_cast<Eigen::Index>(c.input_dim());
  const auto m = static_cast<Eigen::Index>(c.output_dim());
  const double eps = eps_rel * (c.ybar().norm() + 1.0);
  const Eigen::Index pi = dom.a_ineq().rows();
  const Eigen::Index pe = dom.a_eq().rows();
  // Variables (u, w): J u − w = ε e − ȳ, w ∈ dom θ.
  Matrix a = Matrix::Zero(m + pi + pe, n + m);
  a.topLeftCorner(m, n) = c.jacobian();
  a.block(0, n, m, m) = -Matrix::Identity(m, m);
  a.block(m, n, pi, m) = dom.a_ineq();
  a.block(m + pi, n, pe, m) = dom.a_eq();
  std::vector<RowSense> senses(static_cast<std::size_t>(m), RowSense::Eq);
  senses.insert(senses.end(), static_cast<std::size_t>(pi), RowSense::Le);
  senses.insert(senses.end(), static_cast<std::size_t>(pe), RowSense::Eq);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (double sign : {1.0, -1.0}) {
      Vector e = Vector::Zero(m);
      e[j] = sign;
      Vector b(m + pi + pe);
      b << eps * e - c.ybar(), dom.b_ineq(), dom.b_eq();
      ++rep.samples;
      const LPSolution s = lp_solve(LPProblem::make(Vector::Zero(n + m), a, b, senses));
      if (s.status == LPStatus::Infeasible) {
        rep.verdict = Verdict::Refuted;
        rep.witness = e;
        rep.detail = "f(x̄) + ∇f(x̄)Rⁿ − dom θ misses ε·witness";
        return rep;
      }
    }
  }
  rep.verdict = Verdict::Verified;
  return rep;
}

// ---------------------------------------------------------------------------
// Normals to inverse images

InverseImageNormals::InverseImageNormals(PolyhedralCone cone,
                                         PolyhedralCone theta_normals,
                                         Matrix jacobian, double kappa)
    : cone_(std::move(cone)),
      theta_normals_(std::move(theta_normals)),
      jac_(std::move(jacobian)),
      kappa_(kappa) {}

MultiplierCheck InverseImageNormals::check(const Vector& v) const {
  if (v.size() != jac_.cols()) {
    throw DimensionMismatch("bound check: v has dimension " + std::to_string(v.size()));
  }
  const Matrix& r = theta_normals_.rays();
  const Matrix& l = theta_normals_.lines();
  const Eigen::Index p = r.cols();
  const Eigen::Index q = l.cols();
  const Eigen::Index n = jac_.cols();
  Matrix gens(jac_.rows(), p + 2 * q);
  gens << r, l, -l;
  const Matrix a = jac_.transpose() * gens;
  LPProblem lp = LPProblem::make(Vector::Ones(p + 2 * q), a, v,
                                 std::vector<RowSense>(static_cast<std::size_t>(n),
                                                       RowSense::Eq));
  lp.lower.setZero();
  const LPSolution s = lp_solve(lp);
  if (s.status != LPStatus::Optimal) {
    throw InfeasibleWitness("v is not in ∇f(x̄)ᵀN_Θ(ȳ)");
  }
  MultiplierCheck out;
  out.lambda = gens * s.x;
  out.v_norm = v.norm();
  out.bound = kappa_ * out.v_norm;
  out.lambda_norm = out.lambda.norm();
  auto within = [&](double norm) {
    return norm <= out.bound * (1.0 + kTolBound) + 1e-12;
  };
  out.within = within(out.lambda_norm);
  if (out.within) return out;
  try {
    const PolyhedralCone h = theta_normals_.with_halfspaces();
    const Eigen::Index m = jac_.rows();
    Matrix eq(h.eq().rows() + n, m);
    eq << h.eq(), jac_.transpose();
    Vector rhs(eq.rows());
    rhs << Vector::Zero(h.eq().rows()), v;
    const Polyhedron set(h.ineq(), Vector::Zero(h.ineq().rows()), eq, rhs);
    const Vector lam = project(set, Vector::Zero(m), precise_projection()).point;
    if (lam.norm() < out.lambda_norm) {
      out.lambda = lam;
      out.lambda_norm = lam.norm();
      out.refined = true;
      out.within = within(out.lambda_norm);
    }
  } catch (const DimensionTooLarge&) {
  } catch (const NumericalError&) {
  }
  return out;
}

InverseImageNormals normal_cone_inverse_image(const Composite& c, double kappa) {
  PolyhedralCone n = normal_cone(c.dom_theta(), c.ybar());
  PolyhedralCone img = n.image(c.jacobian().transpose());
  return InverseImageNormals(std::move(img), std::move(n), c.jacobian(), kappa);
}

RobustnessReport robustness_check(const Composite& c, std::optional<double> kappa,
                                  const RobustnessOptions& options) {
  RobustnessReport rep;
  if (!kappa) return rep;
  rep.applicable = true;
  const Polyhedron& dom = c.dom_theta();
  const SampledSet omega = c.feasible_set();
  const PolyhedralCone limit_cone = normal_cone_inverse_image(c, *kappa).cone();
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  Vector wi(dom.a_ineq().rows());
  for (auto& v : wi) v = weight(rng);
  Vector we(dom.a_eq().rows());
  for (auto& v : we) v = sym(rng);

  const auto n = static_cast<Eigen::Index>(c.input_dim());
  PenaltyOptions popt;
  popt.residual_tol = 1e-13;
  for (int s = 0; s < options.samples; ++s) {
    const Vector w = random_unit(rng, n);
    std::vector<Vector> tail;
    for (int k = std::max(0, options.levels - 5); k < options.levels; ++k) {
      const double t = options.radius * std::pow(0.5, k);
      const PenaltyResult p = penalty_project(omega, c.xbar() + t * w, popt);
      if (!p.accepted || (p.point - c.xbar()).norm() > 2.0 * t) continue;
      const Vector y = c.f().eval(p.point);
      Vector lam = dom.a_eq().transpose() * we;
      for (const auto i : dom.active_rows(y, 1e-7)) {
        lam += wi[i] * dom.a_ineq().row(i).transpose();
      }
      const Vector v = c.f().jacobian(p.point).transpose() * lam;
      if (v.norm() <= 1e-12) continue;
      tail.push_back(v.normalized());
    }
    if (tail.size() < 2) continue;
    Vector avg = Vector::Zero(n);
    const std::size_t take = std::min<std::size_t>(3, tail.size());
    for (std::size_t i = tail.size() - take; i < tail.size(); ++i) avg += tail[i];
    if (avg.norm() <= 1e-12) continue;
    avg.normalize();
    ++rep.sequences;
    rep.limits.push_back(avg);
    rep.max_violation = std::max(rep.max_violation, limit_cone.membership_residual(avg));
  }
  rep.pass = rep.max_violation <= options.tol;
  return rep;
}

std::vector<Matrix> fd_hessians(const SmoothMap& f, const Vector& x, double step) {
  const auto n = x.size();
  std::vector<Matrix> out(f.output_dim(), Matrix::Zero(n, n));
  Vector xp = x;
  for (Eigen::Index j = 0; j < n; ++j) {
    xp[j] = x[j] + step;
    const Matrix jp = f.jacobian(xp);
    xp[j] = x[j] - step;
    const Matrix jm = f.jacobian(xp);
    xp[j] = x[j];
    const Matrix col = (jp - jm) / (2.0 * step);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i].col(j) = col.row(static_cast<Eigen::Index>(i)).transpose();
    }
  }
  for (auto& h : out) h = (0.5 * (h + h.transpose())).eval();
  return out;
}

ProxRegularityReport prox_regularity_check(const Composite& c,
                                           std::optional<double> kappa,
                                           const ProxOptions& options) {
  ProxRegularityReport rep;
  if (!kappa) return rep;
  rep.applicable = true;
  const Polyhedron& dom = c.dom_theta();
  const SampledSet omega = c.feasible_set();
  const auto n = static_cast<Eigen::Index>(c.input_dim());
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  PenaltyOptions popt;
  popt.residual_tol = 1e-12;

  struct Sample {
    Vector p;
    std::vector<Vector> normals;
  };
  std::vector<Sample> pts;
  for (int s = 0; s < options.samples; ++s) {
    const double r =
        options.radius * std::pow(unif(rng), 1.0 / static_cast<double>(n));
    const Vector z = c.xbar() + r * random_unit(rng, n);
    const PenaltyResult pr = penalty_project(omega, z, popt);
    if (!pr.accepted || (pr.point - c.xbar()).norm() > options.radius) continue;
    Sample smp{pr.point, {}};
    try {
      const PolyhedralCone nc = normal_cone(dom, c.f().eval(pr.point), 1e-7);
      const Matrix gens = c.f().jacobian(pr.point).transpose() * nc.generator_list();
      for (Eigen::Index j = 0; j < gens.cols(); ++j) {
        if (gens.col(j).norm() > 1e-12) smp.normals.push_back(gens.col(j).normalized());
      }
    } catch (const NotMember&) {
      continue;
    }
    const double beta = [&] {
      double sq = 0.0;
      for (const auto& h : fd_hessians(c.f(), pr.point)) {
        const Vector ev = eigh(h).values;
        const double nrm = std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));
        sq += nrm * nrm;
      }
      return std::sqrt(sq);
    }();
    rep.hessian_bound = std::max(rep.hessian_bound, beta);
    pts.push_back(std::move(smp));
  }
  rep.points = static_cast<int>(pts.size());
  const std::size_t half = pts.size() / 2;
  const double min_sep = 1e-3 * options.radius;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      const Vector d = pts[j].p - pts[i].p;
      const double den = d.squaredNorm();
      if (den < min_sep * min_sep) continue;
      for (const auto& v : pts[i].normals) {
        const double num = v.dot(d);
        if (num <= 1e-9) continue;
        const double ratio = num / den;
        rep.r_hat = std::max(rep.r_hat, ratio);
        if (i < half && j < half) rep.r_hat_half = std::max(rep.r_hat_half, ratio);
      }
    }
  }
  rep.r_bound = *kappa * rep.hessian_bound;
  rep.stable = std::isfinite(rep.r_hat) && rep.r_hat <= 2.0 * rep.r_hat_half + 1e-9;
  rep.pass = rep.points >= 4 && rep.stable;
  return rep;
}

}  // namespace varcert
