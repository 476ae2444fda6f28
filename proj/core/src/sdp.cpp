#include "varcert/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <utility>

#include "varcert/errors.hpp"
#include "varcert/geometry.hpp"
#include "varcert/solvers.hpp"

namespace varcert {

namespace {

std::size_t upper_index(std::size_t m, std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  return i * m - i * (i - 1) / 2 + (j - i);
}

double max_abs(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

}  // namespace

SymmetricExprMatrix::SymmetricExprMatrix(std::size_t m, std::vector<Expr> upper)
    : m_(m), upper_(std::move(upper)) {
  if (upper_.size() != m_ * (m_ + 1) / 2) {
    throw DimensionMismatch("symmetric matrix: expected " +
                            std::to_string(m_ * (m_ + 1) / 2) + " upper entries");
  }
}

const Expr& SymmetricExprMatrix::entry(std::size_t i, std::size_t j) const {
  if (i >= m_ || j >= m_) throw DimensionMismatch("symmetric matrix: index out of range");
  return upper_[upper_index(m_, i, j)];
}

Matrix SymmetricExprMatrix::eval(const Vector& x) const {
  const auto m = static_cast<Eigen::Index>(m_);
  Matrix a(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      const double v = value(entry(static_cast<std::size_t>(i), static_cast<std::size_t>(j)), x);
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return a;
}

std::vector<Matrix> SymmetricExprMatrix::partials(const Vector& x) const {
  const auto m = static_cast<Eigen::Index>(m_);
  std::vector<Matrix> out(static_cast<std::size_t>(x.size()), Matrix::Zero(m, m));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      const Vector g =
          grad(entry(static_cast<std::size_t>(i), static_cast<std::size_t>(j)), x).value;
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        out[static_cast<std::size_t>(k)](i, j) = g[k];
        out[static_cast<std::size_t>(k)](j, i) = g[k];
      }
    }
  }
  return out;
}

SDProblem::SDProblem(std::size_t n, Expr objective, SymmetricExprMatrix phi,
                     SymmetricExprMatrix psi)
    : n_(n), objective_(std::move(objective)), phi_(std::move(phi)), psi_(std::move(psi)) {
  if (objective_.dimension() != n_) {
    throw DimensionMismatch("sdp: objective must use exactly x1..x" + std::to_string(n_));
  }
  if (phi_.empty()) throw InputError("sdp: Φ must be at least 1×1");
  for (const auto* mat : {&phi_, &psi_}) {
    for (std::size_t i = 0; i < mat->size(); ++i) {
      for (std::size_t j = i; j < mat->size(); ++j) {
        if (mat->entry(i, j).dimension() != n_) {
          throw DimensionMismatch("sdp: matrix entries must use exactly x1..x" +
                                  std::to_string(n_));
        }
      }
    }
  }
}

SDProblem SDProblem::parse(std::size_t n, const std::string& objective, std::size_t m,
                           const std::vector<std::string>& phi_upper, std::size_t q,
                           const std::vector<std::string>& psi_upper) {
  const auto names = numbered_names("x", n);
  auto build = [&names](std::size_t size, const std::vector<std::string>& texts) {
    std::vector<Expr> entries;
    entries.reserve(texts.size());
    for (const auto& t : texts) entries.push_back(varcert::parse(t, names));
    return SymmetricExprMatrix(size, std::move(entries));
  };
  return SDProblem(n, varcert::parse(objective, names), build(m, phi_upper),
                   q == 0 ? SymmetricExprMatrix() : build(q, psi_upper));
}

Vector SDProblem::objective_grad(const Vector& x) const { return grad(objective_, x).value; }

namespace {

void check_dim(const SDProblem& p, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != p.dim()) {
    throw DimensionMismatch("sdp: point has dimension " + std::to_string(x.size()) +
                            ", expected " + std::to_string(p.dim()));
  }
}

double quadform(const Matrix& a, const Vector& s) { return s.dot(a * s); }

}  // namespace

SdpFeasibility feasibility(const SDProblem& p, const Vector& x, double tol_feas) {
  check_dim(p, x);
  SdpFeasibility f;
  f.sigma_plus = std::max(0.0, largest_eigenvalue(p.phi().eval(x)));
  if (!p.psi().empty()) f.psi_max = max_abs(p.psi().eval(x));
  f.feasible = f.sigma_plus <= tol_feas && f.psi_max <= tol_feas;
  return f;
}

Vector grad_quadform(const SDProblem& p, const Vector& x, const Vector& s) {
  check_dim(p, x);
  if (static_cast<std::size_t>(s.size()) != p.phi().size()) {
    throw DimensionMismatch("grad_quadform: s must have length m");
  }
  if (std::abs(s.norm() - 1.0) > 1e-10) throw NotUnit("grad_quadform: ‖s‖ ≠ 1");
  const auto parts = p.phi().partials(x);
  Vector out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    out[j] = quadform(parts[static_cast<std::size_t>(j)], s);
  }
  return out;
}

double kernel_tolerance(const Matrix& phi) {
  const Vector ev = eigh(phi).values;
  const double norm = ev.size() == 0 ? 0.0 : ev.cwiseAbs().maxCoeff();
  return 1e-7 * (1.0 + norm);
}

namespace {

CQReport sdp_kappa_estimate(const SDProblem& p, const Vector& x,
                            const ModulusOptions& modulus) {
  const auto n = static_cast<Eigen::Index>(p.dim());
  const auto m = static_cast<Eigen::Index>(p.phi().size());
  const auto q = static_cast<Eigen::Index>(p.psi().size());
  const Eigen::Index rows = m + q * (q + 1) / 2;
  SampledSet omega;
  omega.dim = p.dim();
  omega.residual = [&p, m, q, rows](const Vector& z) {
    Vector r(rows);
    const Vector ev = eigh(p.phi().eval(z)).values;
    for (Eigen::Index k = 0; k < m; ++k) r[k] = std::max(0.0, ev[k]);
    if (q > 0) {
      const Matrix s = p.psi().eval(z);
      Eigen::Index i = m;
      for (Eigen::Index a = 0; a < q; ++a) {
        for (Eigen::Index b = a; b < q; ++b) r[i++] = s(a, b);
      }
    }
    return r;
  };
  omega.jacobian = [&p, n, m, q, rows](const Vector& z) {
    Matrix j = Matrix::Zero(rows, n);
    const auto e = eigh(p.phi().eval(z));
    const auto parts = p.phi().partials(z);
    for (Eigen::Index k = 0; k < m; ++k) {
      if (e.values[k] <= 0.0) continue;
      const Vector v = e.vectors.col(k);
      for (Eigen::Index c = 0; c < n; ++c) {
        j(k, c) = quadform(parts[static_cast<std::size_t>(c)], v);
      }
    }
    if (q > 0) {
      Eigen::Index i = m;
      for (std::size_t a = 0; a < static_cast<std::size_t>(q); ++a) {
        for (std::size_t b = a; b < static_cast<std::size_t>(q); ++b) {
          j.row(i++) = grad(p.psi().entry(a, b), z).value.transpose();
        }
      }
    }
    return j;
  };
  auto parts = [&](const Vector& z) -> std::optional<std::pair<double, double>> {
    const SdpFeasibility f = feasibility(p, z);
    const double v = f.sigma_plus + f.psi_max;
    if (!(v > 1e-14)) return std::nullopt;
    const auto d = sampled_distance(omega, z, v);
    if (!d) return std::nullopt;
    return std::make_pair(*d, v);
  };
  CQReport rep = modulus_estimate(x, parts, modulus);
  rep.condition = CQCondition::MSQC;
  return rep;
}

void evaluate_sdp(const SDProblem& p, SdpCertificate& c) {
  c.gradient = p.objective_grad(c.x);
  const Matrix phi = p.phi().eval(c.x);
  c.tol_ker = kernel_tolerance(phi);
  Vector r = c.gradient;
  c.complementarity = 0.0;
  bool nonneg = true;
  bool unit = true;
  double lhs = 0.0;
  for (const auto& a : c.atoms) {
    if (std::abs(a.index.norm() - 1.0) > 1e-10) {
      unit = false;
      continue;
    }
    r += a.weight * grad_quadform(p, c.x, a.index);
    c.complementarity = std::max(c.complementarity, std::abs(quadform(phi, a.index)));
    nonneg = nonneg && a.weight >= 0.0;
    lhs += a.weight;
  }
  if (c.mu.size() > 0) {
    const auto parts = p.psi().partials(c.x);
    for (Eigen::Index j = 0; j < r.size(); ++j) {
      r[j] += parts[static_cast<std::size_t>(j)].cwiseProduct(c.mu).sum();
    }
    lhs += c.mu.cwiseAbs().sum();
  }
  c.residual = r.norm();
  c.bound_lhs = lhs;
  c.bound_rhs = 2.0 * c.kappa * c.gradient.norm();
  c.detail.clear();
  const bool mu_symmetric =
      c.mu.size() == 0 || (c.mu - c.mu.transpose()).cwiseAbs().maxCoeff() <= 1e-12;
  if (!unit) {
    c.status = Verdict::Refuted;
    c.detail = "atom is not a unit vector";
  } else if (!nonneg) {
    c.status = Verdict::Refuted;
    c.detail = "negative atom weight";
  } else if (!mu_symmetric) {
    c.status = Verdict::Refuted;
    c.detail = "equality multiplier is not symmetric";
  } else if (c.residual > c.tol.stat) {
    c.status = Verdict::Refuted;
    c.detail = "stationarity residual above tolerance";
  } else if (c.complementarity > 10.0 * c.tol_ker) {
    c.status = Verdict::Refuted;
    c.detail = "atom outside the kernel of Φ(x̄)";
  } else if (c.bound_lhs > c.bound_rhs * (1.0 + c.tol.bound) + 1e-12) {
    c.status = Verdict::Refuted;
    c.detail = kBoundExceeded;
  } else {
    c.status = Verdict::Verified;
    if (c.kappa_source == KappaSource::Estimated) c.detail = "sampling-confidence";
  }
}

struct Column {
  Vector g;
  double cost;
  // Atom index into the candidate list, or the μ entry (a, b) with its sign.
  int atom = -1;
  std::size_t a = 0;
  std::size_t b = 0;
  double sign = 0.0;
};

}  // namespace

SdpCertificate certify(const SDProblem& p, const Vector& x, const SdpOptions& options) {
  check_dim(p, x);
  const Tolerances& tol = options.tol;
  if (!feasibility(p, x, tol.feas).feasible) {
    throw InfeasiblePoint("sdp: x̄ violates Φ(x) ⪯ 0 or Ψ(x) = 0");
  }
  SdpCertificate cert;
  cert.x = x;
  cert.tol = tol;
  const Matrix phi = p.phi().eval(x);
  cert.tol_ker = kernel_tolerance(phi);
  const auto eig = eigh(phi);

  std::vector<Vector> kernel;
  for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
    if (std::abs(eig.values[k]) <= cert.tol_ker) kernel.push_back(eig.vectors.col(k));
  }
  cert.kernel_dim = static_cast<int>(kernel.size());
  std::vector<Vector> candidates = kernel;
  const std::size_t d = kernel.size();
  const std::size_t extra = 3 * d * (d - (d > 0 ? 1 : 0)) / 2;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  for (std::size_t r = 0; r < extra; ++r) {
    Vector s = Vector::Zero(phi.rows());
    for (const auto& v : kernel) s += normal(rng) * v;
    const double len = s.norm();
    if (len < 1e-12) continue;
    candidates.push_back(s / len);
  }
  cert.candidates = static_cast<int>(candidates.size());

  std::vector<Column> cols;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    Column c{grad_quadform(p, x, candidates[i]), 1.0};
    c.atom = static_cast<int>(i);
    cols.push_back(std::move(c));
  }
  std::vector<Matrix> psi_parts;
  if (!p.psi().empty()) psi_parts = p.psi().partials(x);
  for (std::size_t a = 0; a < p.psi().size(); ++a) {
    for (std::size_t b = a; b < p.psi().size(); ++b) {
      const double factor = a == b ? 1.0 : 2.0;
      Vector g(x.size());
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        g[j] = factor * psi_parts[static_cast<std::size_t>(j)](
                            static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      }
      for (double sign : {1.0, -1.0}) {
        Column c{sign * g, factor};
        c.a = a;
        c.b = b;
        c.sign = sign;
        cols.push_back(std::move(c));
      }
    }
  }

  const Vector grad_obj = p.objective_grad(x);
  const auto n = x.size();
  const auto q = static_cast<Eigen::Index>(p.psi().size());
  cert.mu = q > 0 ? Matrix::Zero(q, q) : Matrix();
  if (cols.empty()) {
    if (grad_obj.norm() > tol.stat) {
      throw NoMultiplier("sdp: Φ(x̄) has trivial kernel and ∇ϑ(x̄) ≠ 0");
    }
  } else {
    // Pricing a kernel atom against LP duals y is an eigenproblem:
    // the best s = Ku maximizes uᵀ(Σ y_j Kᵀ∂ⱼΦK)u.
    const auto kd = static_cast<Eigen::Index>(kernel.size());
    Matrix basis(phi.rows(), kd);
    for (Eigen::Index k = 0; k < kd; ++k) basis.col(k) = kernel[static_cast<std::size_t>(k)];
    const auto parts = p.phi().partials(x);
    std::vector<Matrix> reduced;
    for (const auto& dj : parts) reduced.push_back(basis.transpose() * dj * basis);
    auto price = [&](const Vector& y, double threshold) {
      if (kd == 0) return false;
      Matrix m = Matrix::Zero(kd, kd);
      for (Eigen::Index j = 0; j < n; ++j) m += y[j] * reduced[static_cast<std::size_t>(j)];
      const auto e = eigh(m);
      if (!(e.values[0] > threshold)) return false;
      const Vector s = (basis * e.vectors.col(0)).normalized();
      candidates.push_back(s);
      Column c{grad_quadform(p, x, s), 1.0};
      c.atom = static_cast<int>(candidates.size() - 1);
      cols.push_back(std::move(c));
      return true;
    };
    // Scaled columns g/cost with unit cost, so the reduction never raises Σλ + ΣΣ|μ|.
    auto matrix_of = [&] {
      Matrix g(n, static_cast<Eigen::Index>(cols.size()));
      for (std::size_t j = 0; j < cols.size(); ++j) {
        g.col(static_cast<Eigen::Index>(j)) = cols[j].g / cols[j].cost;
      }
      return g;
    };
    const std::vector<RowSense> eq(static_cast<std::size_t>(n), RowSense::Eq);
    constexpr int kMaxGenerated = 200;
    const double scale = 1.0 + grad_obj.norm();

    // Phase 1: least 1-norm stationarity gap with the current atoms.
    for (int round = 0;; ++round) {
      const Matrix g = matrix_of();
      const Eigen::Index k = g.cols();
      Matrix a(n, k + 2 * n);
      a << g, Matrix::Identity(n, n), -Matrix::Identity(n, n);
      Vector cost = Vector::Zero(k + 2 * n);
      cost.tail(2 * n).setOnes();
      LPProblem lp = LPProblem::make(cost, a, -grad_obj, eq);
      lp.lower.setZero();
      const LPSolution sol = lp_solve(lp);
      if (sol.objective <= 1e-12 * scale) break;
      if (round >= kMaxGenerated || !price(sol.y, 1e-12 * scale)) {
        throw NoMultiplier("sdp: no kernel atoms and equality multiplier balance ∇ϑ(x̄)");
      }
    }
    // Phase 2: least Σλ + ΣΣ|μ|.
    LPSolution sol;
    Matrix g;
    for (int round = 0;; ++round) {
      g = matrix_of();
      LPProblem lp = LPProblem::make(Vector::Ones(g.cols()), g, -grad_obj, eq);
      lp.lower.setZero();
      sol = lp_solve(lp);
      if (sol.status != LPStatus::Optimal) {
        throw NoMultiplier("sdp: no kernel atoms and equality multiplier balance ∇ϑ(x̄)");
      }
      if (round >= kMaxGenerated || !price(sol.y, 1.0 + 1e-10)) break;
    }
    cert.candidates = static_cast<int>(candidates.size());
    const Reduction red = caratheodory_reduce(g, sol.x);
    for (std::size_t k = 0; k < red.kept.size(); ++k) {
      const Column& c = cols[static_cast<std::size_t>(red.kept[k])];
      const double w = red.weights[static_cast<Eigen::Index>(k)] / c.cost;
      if (c.atom >= 0) {
        cert.atoms.push_back({candidates[static_cast<std::size_t>(c.atom)], w});
      } else {
        const auto a = static_cast<Eigen::Index>(c.a);
        const auto b = static_cast<Eigen::Index>(c.b);
        cert.mu(a, b) += c.sign * w;
        if (a != b) cert.mu(b, a) += c.sign * w;
      }
    }
  }

  if (options.kappa) {
    cert.kappa = *options.kappa;
    cert.kappa_source = KappaSource::Asserted;
  } else {
    const CQReport rep = sdp_kappa_estimate(p, x, options.modulus);
    cert.kappa_source = KappaSource::Estimated;
    if (!rep.kappa || rep.verdict != Verdict::Verified) {
      cert.kappa = rep.kappa.value_or(kInf);
      evaluate_sdp(p, cert);
      cert.status = Verdict::Inconclusive;
      cert.detail = "SDP modulus not established";
      return cert;
    }
    cert.kappa = *rep.kappa;
  }
  evaluate_sdp(p, cert);
  return cert;
}

SdpCertificate recheck_sdp(const SDProblem& p, const SdpCertificate& c) {
  check_dim(p, c.x);
  const auto m = static_cast<Eigen::Index>(p.phi().size());
  for (const auto& a : c.atoms) {
    if (a.index.size() != m) throw DimensionMismatch("recheck: atom has the wrong length");
  }
  const auto q = static_cast<Eigen::Index>(p.psi().size());
  if (c.mu.size() > 0 && (c.mu.rows() != q || c.mu.cols() != q)) {
    throw DimensionMismatch("recheck: μ has the wrong shape");
  }
  if (!feasibility(p, c.x, c.tol.feas).feasible) {
    throw InfeasiblePoint("recheck: x̄ violates the constraints");
  }
  SdpCertificate out = c;
  evaluate_sdp(p, out);
  return out;
}

Vector sphere_point(std::size_t m, const Vector& angles) {
  switch (m) {
    case 1:
      return Vector::Ones(1);
    case 2: {
      Vector s(2);
      s << std::cos(angles[0]), std::sin(angles[0]);
      return s;
    }
    case 3: {
      Vector s(3);
      s << std::sin(angles[1]) * std::cos(angles[0]), std::sin(angles[1]) * std::sin(angles[0]),
          std::cos(angles[1]);
      return s;
    }
    default:
      throw DimensionTooLarge("sphere chart: only m ≤ 3 is supported");
  }
}

SIProblem reduce_to_sip(const SDProblem& p) {
  const std::size_t m = p.phi().size();
  if (m > 3) throw DimensionTooLarge("reduce_to_sip: m = " + std::to_string(m) + " > 3");
  std::vector<std::string> chart;
  IndexBox box;
  const double pi = std::numbers::pi;
  switch (m) {
    case 1:
      chart = {"1"};
      box = {Vector::Zero(1), Vector::Zero(1)};
      break;
    case 2:
      chart = {"cos(s1)", "sin(s1)"};
      box = {Vector::Zero(1), Vector::Constant(1, pi)};
      break;
    default: {
      chart = {"sin(s2)*cos(s1)", "sin(s2)*sin(s1)", "cos(s2)"};
      Vector hi(2);
      hi << 2.0 * pi, pi / 2.0;
      box = {Vector::Zero(2), hi};
      break;
    }
  }
  std::string theta;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      if (!theta.empty()) theta += " + ";
      theta += i == j ? "" : "2*";
      theta += "(" + p.phi().entry(i, j).to_string() + ")*(" + chart[i] + ")*(" + chart[j] + ")";
    }
  }
  return SIProblem::parse(p.dim(), p.objective().to_string(), theta, box);
}

}  // namespace varcert
