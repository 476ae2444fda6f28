#include "varcert/sip.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <utility>

#include <Eigen/SVD>

#include "varcert/errors.hpp"
#include "varcert/geometry.hpp"
#include "varcert/solvers.hpp"

namespace varcert {

Vector IndexBox::clamp(const Vector& s) const {
  return s.cwiseMax(lower).cwiseMin(upper);
}

namespace {

std::vector<std::string> joined_names(std::size_t n, const char* second,
                                      std::size_t k) {
  std::vector<std::string> names = numbered_names("x", n);
  for (const auto& v : numbered_names(second, k)) names.push_back(v);
  return names;
}

void check_box(const IndexBox& b, const char* what) {
  if (b.lower.size() != b.upper.size()) {
    throw DimensionMismatch(std::string(what) + ": bounds have different lengths");
  }
  for (Eigen::Index i = 0; i < b.lower.size(); ++i) {
    if (!(b.lower[i] <= b.upper[i]) || !std::isfinite(b.lower[i]) ||
        !std::isfinite(b.upper[i])) {
      throw InputError(std::string(what) + ": empty or unbounded box");
    }
  }
}

Vector concat(const Vector& a, const Vector& b) {
  Vector v(a.size() + b.size());
  v << a, b;
  return v;
}

}  // namespace

SIProblem::SIProblem(std::size_t n, Expr objective, std::optional<Expr> theta,
                     IndexBox s, std::optional<Expr> psi, IndexBox t)
    : n_(n), objective_(std::move(objective)), theta_(std::move(theta)),
      s_(std::move(s)), psi_(std::move(psi)), t_(std::move(t)) {
  if (objective_.dimension() != n_) {
    throw DimensionMismatch("sip: objective must use exactly x1..x" +
                            std::to_string(n_));
  }
  if (theta_) {
    check_box(s_, "sip: index set S");
    if (theta_->dimension() != n_ + s_.dim()) {
      throw DimensionMismatch("sip: θ must be an expression in x and s");
    }
  }
  if (psi_) {
    check_box(t_, "sip: index set T");
    if (psi_->dimension() != n_ + t_.dim()) {
      throw DimensionMismatch("sip: ψ must be an expression in x and t");
    }
  }
}

SIProblem SIProblem::parse(std::size_t n, const std::string& objective,
                           const std::string& theta, IndexBox s,
                           const std::string& psi, IndexBox t) {
  Expr obj = varcert::parse(objective, numbered_names("x", n));
  std::optional<Expr> th;
  if (!theta.empty()) th = varcert::parse(theta, joined_names(n, "s", s.dim()));
  std::optional<Expr> ps;
  if (!psi.empty()) ps = varcert::parse(psi, joined_names(n, "t", t.dim()));
  return SIProblem(n, std::move(obj), std::move(th), std::move(s), std::move(ps),
                   std::move(t));
}

double SIProblem::theta(const Vector& x, const Vector& s) const {
  return value(*theta_, concat(x, s));
}

Vector SIProblem::theta_grad_x(const Vector& x, const Vector& s) const {
  return grad(*theta_, concat(x, s)).value.head(x.size());
}

Vector SIProblem::theta_grad_s(const Vector& x, const Vector& s) const {
  return grad(*theta_, concat(x, s)).value.tail(s.size());
}

double SIProblem::psi(const Vector& x, const Vector& t) const {
  return value(*psi_, concat(x, t));
}

Vector SIProblem::psi_grad_x(const Vector& x, const Vector& t) const {
  return grad(*psi_, concat(x, t)).value.head(x.size());
}

Vector SIProblem::objective_grad(const Vector& x) const {
  return grad(objective_, x).value;
}

int grid_density(const GridOptions& options, std::size_t k) {
  if (options.density > 0) return options.density;
  if (k <= 2) return 64;
  if (k == 3) return 16;
  return 8;
}

namespace {

using ScalarFn = std::function<double(const Vector&)>;
using GradFn = std::function<Vector(const Vector&)>;

struct Grid {
  std::vector<int> counts;
  std::vector<Vector> points;
};

Grid make_grid(const IndexBox& box, int density) {
  Grid g;
  const auto k = static_cast<int>(box.dim());
  std::size_t total = 1;
  for (int a = 0; a < k; ++a) {
    const int c = box.lower[a] == box.upper[a] ? 1 : std::max(density, 2);
    g.counts.push_back(c);
    total *= static_cast<std::size_t>(c);
  }
  g.points.reserve(total);
  std::vector<int> idx(static_cast<std::size_t>(k), 0);
  for (std::size_t lin = 0; lin < total; ++lin) {
    Vector s(k);
    for (int a = 0; a < k; ++a) {
      const int c = g.counts[static_cast<std::size_t>(a)];
      const double frac = c == 1 ? 0.0 : static_cast<double>(idx[static_cast<std::size_t>(a)]) / (c - 1);
      s[a] = box.lower[a] + frac * (box.upper[a] - box.lower[a]);
    }
    g.points.push_back(s);
    for (int a = 0; a < k; ++a) {
      if (++idx[static_cast<std::size_t>(a)] < g.counts[static_cast<std::size_t>(a)]) break;
      idx[static_cast<std::size_t>(a)] = 0;
    }
  }
  return g;
}

// Grid points whose value is ≥ every axis neighbour's.
std::vector<std::size_t> grid_local_maxima(const Grid& g, const std::vector<double>& v) {
  std::vector<std::size_t> out;
  const std::size_t k = g.counts.size();
  for (std::size_t lin = 0; lin < v.size(); ++lin) {
    bool is_max = true;
    std::size_t stride = 1;
    std::size_t rest = lin;
    for (std::size_t a = 0; a < k && is_max; ++a) {
      const auto c = static_cast<std::size_t>(g.counts[a]);
      const std::size_t i = rest % c;
      rest /= c;
      if (i > 0 && v[lin - stride] > v[lin]) is_max = false;
      if (i + 1 < c && v[lin + stride] > v[lin]) is_max = false;
      stride *= c;
    }
    if (is_max) out.push_back(lin);
  }
  return out;
}

std::pair<Vector, double> polish(const ScalarFn& f, const GradFn& df,
                                 const IndexBox& box, Vector s, int steps) {
  double fs = f(s);
  if (box.dim() == 0) return {s, fs};
  double width = (box.upper - box.lower).maxCoeff();
  double step = width > 0.0 ? 0.1 * width : 0.0;
  if (step == 0.0) return {s, fs};
  for (int it = 0; it < steps && step > 1e-14 * width; ++it) {
    const Vector g = df(s);
    if (!g.allFinite() || g.norm() == 0.0) break;
    const Vector trial = box.clamp(s + step * g);
    const double ft = f(trial);
    if (ft > fs) {
      s = trial;
      fs = ft;
      step *= 1.5;
    } else {
      step *= 0.5;
    }
  }
  return {s, fs};
}

std::vector<std::pair<Vector, double>> dedup(std::vector<std::pair<Vector, double>> c) {
  std::stable_sort(c.begin(), c.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::pair<Vector, double>> out;
  for (auto& cand : c) {
    bool near = false;
    for (const auto& kept : out) {
      if ((kept.first - cand.first).norm() <= kDedupRadius) {
        near = true;
        break;
      }
    }
    if (!near) out.push_back(std::move(cand));
  }
  return out;
}

IndexMax maximize(const ScalarFn& f, const GradFn& df, const IndexBox& box,
                  const GridOptions& options) {
  const Grid g = make_grid(box, grid_density(options, box.dim()));
  std::vector<double> v(g.points.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(g.points[i]);
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  const auto top = std::min<std::size_t>(static_cast<std::size_t>(std::max(options.starts, 1)),
                                         order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top),
                    order.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  IndexMax best;
  for (std::size_t j = 0; j < top; ++j) {
    const std::size_t i = order[j];
    if (v[i] > best.value || best.s.size() == 0) {
      best.value = v[i];
      best.s = g.points[i];
    }
    auto [s, fs] = polish(f, df, box, g.points[i], options.polish_steps);
    if (fs > best.value) {
      best.value = fs;
      best.s = s;
    }
  }
  best.violation = std::max(0.0, best.value);
  return best;
}

// Polished grid local maxima of f with value ≥ floor, deduplicated.
std::vector<Vector> local_maxima_above(const ScalarFn& f, const GradFn& df,
                                       const IndexBox& box, const GridOptions& options,
                                       double floor) {
  const Grid g = make_grid(box, grid_density(options, box.dim()));
  std::vector<double> v(g.points.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(g.points[i]);
  std::vector<std::pair<Vector, double>> cands;
  for (std::size_t i : grid_local_maxima(g, v)) {
    auto [s, fs] = polish(f, df, box, g.points[i], options.polish_steps);
    if (fs >= floor) cands.emplace_back(std::move(s), fs);
  }
  std::vector<Vector> out;
  for (auto& c : dedup(std::move(cands))) out.push_back(std::move(c.first));
  return out;
}

ScalarFn theta_of(const SIProblem& p, const Vector& x, double sign = 1.0) {
  return [&p, x, sign](const Vector& s) { return sign * p.theta(x, s); };
}

GradFn theta_grad_of(const SIProblem& p, const Vector& x, double sign = 1.0) {
  return [&p, x, sign](const Vector& s) -> Vector { return sign * p.theta_grad_s(x, s); };
}

ScalarFn psi_of(const SIProblem& p, const Vector& x, double sign) {
  return [&p, x, sign](const Vector& t) { return sign * p.psi(x, t); };
}

// ∇ₜψ by central differences; ψ is only maximized, not certified, in t.
GradFn psi_grad_of(const SIProblem& p, const Vector& x, double sign) {
  return [&p, x, sign](const Vector& t) -> Vector {
    Vector g(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double h = 1e-7 * (1.0 + std::abs(t[i]));
      Vector a = t, b = t;
      a[i] += h;
      b[i] -= h;
      g[i] = sign * (p.psi(x, a) - p.psi(x, b)) / (2 * h);
    }
    return g;
  };
}

void check_dim(const SIProblem& p, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != p.dim()) {
    throw DimensionMismatch("sip: x has dimension " + std::to_string(x.size()) +
                            ", problem has " + std::to_string(p.dim()));
  }
}

}  // namespace

IndexMax sup_violation(const SIProblem& p, const Vector& x, const GridOptions& options) {
  check_dim(p, x);
  if (!p.has_inequalities()) return IndexMax{0.0, -kInf, Vector()};
  return maximize(theta_of(p, x), theta_grad_of(p, x), p.index_set(), options);
}

IndexMax sup_equality_violation(const SIProblem& p, const Vector& x,
                                const GridOptions& options) {
  check_dim(p, x);
  if (!p.has_equalities()) return IndexMax{0.0, -kInf, Vector()};
  IndexMax best;
  for (double sign : {1.0, -1.0}) {
    IndexMax m = maximize(psi_of(p, x, sign), psi_grad_of(p, x, sign),
                          p.equality_index_set(), options);
    if (m.value > best.value || best.s.size() == 0) best = m;
  }
  best.violation = std::max(0.0, best.value);
  return best;
}

std::vector<Vector> active_indexes(const SIProblem& p, const Vector& x,
                                   double tol_active, const GridOptions& options,
                                   double tol_feas) {
  check_dim(p, x);
  if (!p.has_inequalities()) return {};
  if (sup_violation(p, x, options).violation > tol_feas) {
    throw InfeasiblePoint("sip: θ(x̄,s) > 0 for some s ∈ S");
  }
  return local_maxima_above(theta_of(p, x), theta_grad_of(p, x), p.index_set(), options,
                            -tol_active);
}

std::vector<Vector> active_equality_indexes(const SIProblem& p, const Vector& x,
                                            double tol_active,
                                            const GridOptions& options) {
  check_dim(p, x);
  if (!p.has_equalities()) return {};
  const Grid g = make_grid(p.equality_index_set(),
                           grid_density(options, p.equality_index_set().dim()));
  std::vector<std::pair<Vector, double>> cands;
  for (const auto& t : g.points) {
    const double v = std::abs(p.psi(x, t));
    if (v <= tol_active) cands.emplace_back(t, -v);
  }
  std::vector<Vector> out;
  for (auto& c : dedup(std::move(cands))) out.push_back(std::move(c.first));
  return out;
}

CQReport sip_kappa_estimate(const SIProblem& p, const Vector& x,
                            const ModulusOptions& modulus, const GridOptions& grid) {
  check_dim(p, x);
  const int density = grid_density(grid, p.index_set().dim());
  const std::vector<Vector> s_pts =
      p.has_inequalities() ? make_grid(p.index_set(), density).points : std::vector<Vector>{};
  const std::vector<Vector> t_pts =
      p.has_equalities()
          ? make_grid(p.equality_index_set(),
                      grid_density(grid, p.equality_index_set().dim()))
                .points
          : std::vector<Vector>{};
  const auto rows = static_cast<Eigen::Index>(s_pts.size() + t_pts.size());
  const auto n = static_cast<Eigen::Index>(p.dim());
  SampledSet omega;
  omega.dim = p.dim();
  omega.residual = [&p, s_pts, t_pts, rows](const Vector& z) {
    Vector r(rows);
    Eigen::Index i = 0;
    for (const auto& s : s_pts) r[i++] = std::max(0.0, p.theta(z, s));
    for (const auto& t : t_pts) r[i++] = p.psi(z, t);
    return r;
  };
  omega.jacobian = [&p, s_pts, t_pts, rows, n](const Vector& z) {
    Matrix j = Matrix::Zero(rows, n);
    Eigen::Index i = 0;
    for (const auto& s : s_pts) {
      if (p.theta(z, s) > 0.0) j.row(i) = p.theta_grad_x(z, s).transpose();
      ++i;
    }
    for (const auto& t : t_pts) j.row(i++) = p.psi_grad_x(z, t).transpose();
    return j;
  };
  auto parts = [&](const Vector& z) -> std::optional<std::pair<double, double>> {
    const double v = sup_violation(p, z, grid).violation +
                     sup_equality_violation(p, z, grid).violation;
    if (!(v > 1e-14)) return std::nullopt;
    const auto d = sampled_distance(omega, z, v);
    if (!d) return std::nullopt;
    return std::make_pair(*d, v);
  };
  CQReport rep = modulus_estimate(x, parts, modulus);
  rep.condition = CQCondition::MSQC;
  return rep;
}

CQReport emfcq_check(const SIProblem& p, const Vector& x, const GridOptions& grid,
                     double tol_active) {
  CQReport rep;
  rep.condition = CQCondition::Robinson;
  const std::vector<Vector> act = active_indexes(p, x, tol_active, grid);
  const std::vector<Vector> eq = active_equality_indexes(p, x, tol_active, grid);
  const auto n = static_cast<Eigen::Index>(p.dim());
  const auto mi = static_cast<Eigen::Index>(act.size());
  const auto me = static_cast<Eigen::Index>(eq.size());
  rep.samples = static_cast<int>(mi + me);
  if (mi == 0 && me == 0) {
    rep.verdict = Verdict::Verified;
    rep.detail = "no active indexes";
    return rep;
  }
  // maximize τ: ⟨∇ₓθ(x̄,s), u⟩ + τ ≤ 0, ⟨∇ₓψ(x̄,t), u⟩ = 0, ‖u‖_∞ ≤ 1, τ ≤ 1.
  Matrix a = Matrix::Zero(mi + me, n + 1);
  for (Eigen::Index i = 0; i < mi; ++i) {
    a.row(i).head(n) = p.theta_grad_x(x, act[static_cast<std::size_t>(i)]).transpose();
    a(i, n) = 1.0;
  }
  for (Eigen::Index i = 0; i < me; ++i) {
    a.row(mi + i).head(n) = p.psi_grad_x(x, eq[static_cast<std::size_t>(i)]).transpose();
  }
  std::vector<RowSense> senses(static_cast<std::size_t>(mi), RowSense::Le);
  senses.insert(senses.end(), static_cast<std::size_t>(me), RowSense::Eq);
  Vector c = Vector::Zero(n + 1);
  c[n] = -1.0;
  LPProblem lp = LPProblem::make(c, a, Vector::Zero(mi + me), senses);
  lp.lower.head(n).setConstant(-1.0);
  lp.upper.head(n).setConstant(1.0);
  lp.upper[n] = 1.0;
  const LPSolution s = lp_solve(lp);
  const double tau = s.status == LPStatus::Optimal ? s.x[n] : -kInf;
  if (tau > 1e-9) {
    rep.verdict = Verdict::Verified;
    rep.witness = s.x.head(n);
    rep.detail = "strictly decreasing direction for all active indexes";
    return rep;
  }
  rep.verdict = Verdict::Refuted;
  // The binding active index carrying the largest dual weight.
  double best = -1.0;
  for (Eigen::Index i = 0; i < mi; ++i) {
    const double slack = s.status == LPStatus::Optimal ? -(a.row(i) * s.x)(0) : 0.0;
    const double w = s.status == LPStatus::Optimal ? std::abs(s.y[i]) : 1.0;
    if (slack <= 1e-9 && w > best) {
      best = w;
      rep.witness = act[static_cast<std::size_t>(i)];
    }
  }
  rep.detail = "no u with ⟨∇ₓθ(x̄,s), u⟩ < 0 for every active s";
  return rep;
}

double AtomicMultiplier::weight_sum() const {
  double s = 0.0;
  for (const auto& a : atoms) s += a.weight;
  return s;
}

double AtomicMultiplier::equality_abs_sum() const {
  double s = 0.0;
  for (const auto& a : equality_atoms) s += std::abs(a.weight);
  return s;
}

Reduction caratheodory_reduce(const Matrix& g, const Vector& weights) {
  if (weights.size() != g.cols()) {
    throw DimensionMismatch("caratheodory_reduce: one weight per column required");
  }
  Reduction r;
  Vector w = weights;
  for (auto& v : w) {
    if (v < 0.0) throw InputError("caratheodory_reduce: negative weight");
  }
  const Eigen::Index rows = g.rows();
  std::vector<int> support;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w[j] > 0.0) support.push_back(static_cast<int>(j));
  }
  while (static_cast<Eigen::Index>(support.size()) > rows) {
    const auto k = static_cast<Eigen::Index>(support.size());
    Matrix gs(rows, k);
    for (Eigen::Index j = 0; j < k; ++j) gs.col(j) = g.col(support[static_cast<std::size_t>(j)]);
    Eigen::JacobiSVD<Matrix> svd(gs, Eigen::ComputeFullV);
    Vector d = svd.matrixV().col(k - 1);
    if (d.sum() < 0.0) d = -d;
    // Largest step keeping every weight ≥ 0.
    double alpha = kInf;
    Eigen::Index hit = -1;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (d[j] > 1e-14) {
        const double a = w[support[static_cast<std::size_t>(j)]] / d[j];
        if (a < alpha) {
          alpha = a;
          hit = j;
        }
      }
    }
    if (hit < 0) {
      d = -d;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (d[j] > 1e-14) {
          const double a = w[support[static_cast<std::size_t>(j)]] / d[j];
          if (a < alpha) {
            alpha = a;
            hit = j;
          }
        }
      }
    }
    if (hit < 0) throw NumericalError("caratheodory_reduce: null vector is zero");
    for (Eigen::Index j = 0; j < k; ++j) {
      auto& v = w[support[static_cast<std::size_t>(j)]];
      v = std::max(0.0, v - alpha * d[j]);
    }
    w[support[static_cast<std::size_t>(hit)]] = 0.0;
    std::vector<int> next;
    for (int j : support) {
      if (w[j] > 0.0) next.push_back(j);
    }
    support = std::move(next);
    ++r.pivots;
  }
  r.kept = support;
  r.weights.resize(static_cast<Eigen::Index>(support.size()));
  for (std::size_t j = 0; j < support.size(); ++j) {
    r.weights[static_cast<Eigen::Index>(j)] = w[support[j]];
  }
  return r;
}

AtomicMultiplier caratheodory_reduce(const std::vector<Vector>& points,
                                     const Vector& weights, const Matrix& g) {
  if (points.size() != static_cast<std::size_t>(g.cols())) {
    throw DimensionMismatch("caratheodory_reduce: one index point per column required");
  }
  const Reduction r = caratheodory_reduce(g, weights);
  AtomicMultiplier m;
  for (std::size_t j = 0; j < r.kept.size(); ++j) {
    m.atoms.push_back({points[static_cast<std::size_t>(r.kept[j])],
                       r.weights[static_cast<Eigen::Index>(j)]});
  }
  return m;
}

namespace {

void evaluate_sip(const SIProblem& p, SipCertificate& c, bool equality_bound) {
  c.gradient = p.objective_grad(c.x);
  Vector r = c.gradient;
  c.complementarity = 0.0;
  bool nonneg = true;
  for (const auto& a : c.multiplier.atoms) {
    r += a.weight * p.theta_grad_x(c.x, a.index);
    c.complementarity = std::max(c.complementarity, std::abs(a.weight * p.theta(c.x, a.index)));
    nonneg = nonneg && a.weight >= 0.0;
  }
  for (const auto& a : c.multiplier.equality_atoms) {
    r += a.weight * p.psi_grad_x(c.x, a.index);
  }
  c.residual = r.norm();
  c.bound_lhs = c.multiplier.weight_sum() + c.multiplier.equality_abs_sum();
  c.bound_rhs = (equality_bound ? 2.0 : 1.0) * c.kappa * c.gradient.norm();
  c.detail.clear();
  if (!nonneg) {
    c.status = Verdict::Refuted;
    c.detail = "negative inequality multiplier";
  } else if (c.residual > c.tol.stat) {
    c.status = Verdict::Refuted;
    c.detail = "stationarity residual above tolerance";
  } else if (c.complementarity > c.tol.stat) {
    c.status = Verdict::Refuted;
    c.detail = "complementarity violated";
  } else if (c.bound_lhs > c.bound_rhs * (1.0 + c.tol.bound) + 1e-12) {
    c.status = Verdict::Refuted;
    c.detail = kBoundExceeded;
  } else {
    c.status = Verdict::Verified;
    if (c.kappa_source == KappaSource::Estimated) c.detail = "sampling-confidence";
  }
}

SipCertificate certify_impl(const SIProblem& p, const Vector& x,
                            const SipOptions& options) {
  check_dim(p, x);
  const Tolerances& tol = options.tol;
  if (sup_violation(p, x, options.grid).violation > tol.feas ||
      sup_equality_violation(p, x, options.grid).violation > tol.feas) {
    throw InfeasiblePoint("sip: x̄ violates the constraints");
  }
  SipCertificate cert;
  cert.x = x;
  cert.tol = tol;
  const Vector grad_obj = p.objective_grad(x);
  const auto n = static_cast<Eigen::Index>(p.dim());

  GridOptions grid = options.grid;
  grid.density = grid_density(options.grid, std::max(p.index_set().dim(),
                                                     p.equality_index_set().dim()));
  std::vector<Vector> s_act;
  std::vector<Vector> t_act;
  Matrix g;
  LPSolution sol;
  bool found = false;
  for (int round = 0; round <= options.refinements && !found; ++round) {
    if (round > 0) grid.density *= 2;
    s_act = active_indexes(p, x, tol.active, grid, tol.feas);
    t_act = active_equality_indexes(p, x, tol.active, grid);
    const auto ms = static_cast<Eigen::Index>(s_act.size());
    const auto mt = static_cast<Eigen::Index>(t_act.size());
    g.resize(n, ms + 2 * mt);
    for (Eigen::Index j = 0; j < ms; ++j) {
      g.col(j) = p.theta_grad_x(x, s_act[static_cast<std::size_t>(j)]);
    }
    for (Eigen::Index j = 0; j < mt; ++j) {
      const Vector gj = p.psi_grad_x(x, t_act[static_cast<std::size_t>(j)]);
      g.col(ms + j) = gj;
      g.col(ms + mt + j) = -gj;
    }
    if (g.cols() == 0) {
      found = grad_obj.norm() <= tol.stat;
      sol.x = Vector();
      break;
    }
    LPProblem lp = LPProblem::make(Vector::Ones(g.cols()), g, -grad_obj,
                                   std::vector<RowSense>(static_cast<std::size_t>(n),
                                                         RowSense::Eq));
    lp.lower.setZero();
    sol = lp_solve(lp);
    if (sol.status != LPStatus::Optimal) {
      // Balance within half the stationarity tolerance.
      const double eps = 0.5 * tol.stat / std::sqrt(static_cast<double>(n));
      Matrix a2(2 * n, g.cols());
      a2 << g, g;
      Vector b2(2 * n);
      b2 << -grad_obj.array() + eps, -grad_obj.array() - eps;
      std::vector<RowSense> senses(static_cast<std::size_t>(n), RowSense::Le);
      senses.insert(senses.end(), static_cast<std::size_t>(n), RowSense::Ge);
      LPProblem relaxed = LPProblem::make(Vector::Ones(g.cols()), a2, b2, senses);
      relaxed.lower.setZero();
      sol = lp_solve(relaxed);
    }
    found = sol.status == LPStatus::Optimal;
  }
  if (!found) {
    throw NoMultiplier("sip: no nonnegative atomic multiplier balances ∇ϑ(x̄)");
  }
  cert.grid_density = grid.density;

  const auto ms = s_act.size();
  const auto mt = t_act.size();
  if (g.cols() > 0) {
    const Reduction red = caratheodory_reduce(g, sol.x);
    std::vector<double> mu(mt, 0.0);
    for (std::size_t j = 0; j < red.kept.size(); ++j) {
      const auto col = static_cast<std::size_t>(red.kept[j]);
      const double w = red.weights[static_cast<Eigen::Index>(j)];
      if (col < ms) {
        cert.multiplier.atoms.push_back({s_act[col], w});
      } else if (col < ms + mt) {
        mu[col - ms] += w;
      } else {
        mu[col - ms - mt] -= w;
      }
    }
    for (std::size_t j = 0; j < mt; ++j) {
      if (mu[j] != 0.0) cert.multiplier.equality_atoms.push_back({t_act[j], mu[j]});
    }
  }

  if (options.kappa) {
    cert.kappa = *options.kappa;
    cert.kappa_source = KappaSource::Asserted;
  } else {
    const CQReport rep = sip_kappa_estimate(p, x, options.modulus, options.grid);
    cert.kappa_source = KappaSource::Estimated;
    if (!rep.kappa || rep.verdict != Verdict::Verified) {
      cert.kappa = rep.kappa.value_or(kInf);
      evaluate_sip(p, cert, p.has_equalities());
      cert.status = Verdict::Inconclusive;
      cert.detail = "SIP modulus not established";
      return cert;
    }
    cert.kappa = *rep.kappa;
  }
  evaluate_sip(p, cert, p.has_equalities());
  return cert;
}

}  // namespace

SipCertificate certify(const SIProblem& p, const Vector& x, const SipOptions& options) {
  if (p.has_equalities()) {
    throw InputError("sip: problem has equality constraints; use certify_with_equalities");
  }
  return certify_impl(p, x, options);
}

SipCertificate certify_with_equalities(const SIProblem& p, const Vector& x,
                                       const SipOptions& options) {
  return certify_impl(p, x, options);
}

SipCertificate recheck_sip(const SIProblem& p, const SipCertificate& c) {
  check_dim(p, c.x);
  for (const auto& a : c.multiplier.atoms) {
    if (!p.has_inequalities() ||
        static_cast<std::size_t>(a.index.size()) != p.index_set().dim()) {
      throw DimensionMismatch("recheck: atom index has the wrong dimension");
    }
  }
  for (const auto& a : c.multiplier.equality_atoms) {
    if (!p.has_equalities() ||
        static_cast<std::size_t>(a.index.size()) != p.equality_index_set().dim()) {
      throw DimensionMismatch("recheck: equality atom index has the wrong dimension");
    }
  }
  if (sup_violation(p, c.x).violation > c.tol.feas ||
      sup_equality_violation(p, c.x).violation > c.tol.feas) {
    throw InfeasiblePoint("recheck: x̄ violates the constraints");
  }
  SipCertificate out = c;
  evaluate_sip(p, out, p.has_equalities());
  for (const auto& a : out.multiplier.atoms) {
    const Vector s = p.index_set().clamp(a.index);
    if ((s - a.index).norm() > 0.0 && out.status == Verdict::Verified) {
      out.status = Verdict::Refuted;
      out.detail = "atom outside S";
    }
  }
  return out;
}

}  // namespace varcert
