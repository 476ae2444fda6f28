#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "varcert/errors.hpp"
#include "varcert/geometry.hpp"

namespace varcert {

namespace {

constexpr double kSignTol = 1e-10;

struct Ray {
  Vector v;
  std::vector<bool> zero;  // tight inequality constraints seen so far
};

Matrix columns(const std::vector<Vector>& cols, std::size_t n) {
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    m.col(static_cast<Eigen::Index>(j)) = cols[j];
  }
  return m;
}

bool parallel_duplicate(const std::vector<Ray>& rays, const Vector& v) {
  for (const auto& r : rays) {
    if ((r.v - v).norm() < 1e-9) return true;
  }
  return false;
}

double row_normalized(const Vector& row, const Vector& u) {
  const double nrm = row.norm();
  return nrm == 0.0 ? 0.0 : row.dot(u) / nrm;
}

}  // namespace

void double_description(const Matrix& g, const Matrix& h, std::size_t n,
                        Matrix& rays_out, Matrix& lines_out) {
  if (n > PolyhedralCone::kMaxConversionDim) {
    throw DimensionTooLarge("cone conversion is limited to dimension " +
                            std::to_string(PolyhedralCone::kMaxConversionDim));
  }
  const auto ni = static_cast<Eigen::Index>(n);
  if (g.rows() > 0 && g.cols() != ni) throw DimensionMismatch("cone rows");
  if (h.rows() > 0 && h.cols() != ni) throw DimensionMismatch("cone rows");

  const Eigen::Index total = g.rows() + h.rows();
  std::vector<Vector> lines;
  for (Eigen::Index i = 0; i < ni; ++i) lines.push_back(Vector::Unit(ni, i));
  std::vector<Ray> rays;

  for (Eigen::Index k = 0; k < total; ++k) {
    const bool is_eq = k >= g.rows();
    Vector a = is_eq ? Vector(h.row(k - g.rows()).transpose())
                     : Vector(g.row(k).transpose());
    const double anorm = a.norm();
    if (anorm == 0.0) {
      for (auto& r : rays) r.zero.push_back(true);
      continue;
    }
    a /= anorm;

    // A line not orthogonal to a: eliminate it.
    std::size_t pick = lines.size();
    double best = kSignTol;
    for (std::size_t j = 0; j < lines.size(); ++j) {
      const double d = std::abs(a.dot(lines[j]));
      if (d > best) {
        best = d;
        pick = j;
      }
    }
    if (pick < lines.size()) {
      Vector l = lines[pick];
      const double al = a.dot(l);
      if (al > 0.0) l = -l;
      const double alo = a.dot(l);
      lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(pick));
      for (auto& other : lines) {
        other -= (a.dot(other) / alo) * l;
        other.normalize();
      }
      for (auto& r : rays) {
        r.v -= (a.dot(r.v) / alo) * l;
        r.v.normalize();
        r.zero.push_back(true);
      }
      if (!is_eq) {
        Ray nr{l.normalized(), std::vector<bool>(static_cast<std::size_t>(k), false)};
        // The new ray is tight exactly on the earlier constraints all lines
        // were orthogonal to, which is every earlier constraint.
        std::fill(nr.zero.begin(), nr.zero.end(), true);
        nr.zero.push_back(false);
        rays.push_back(std::move(nr));
      }
      continue;
    }

    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    std::vector<Ray> next;
    std::vector<double> val(rays.size());
    for (std::size_t j = 0; j < rays.size(); ++j) {
      val[j] = a.dot(rays[j].v);
      if (val[j] > kSignTol) {
        pos.push_back(j);
      } else if (val[j] < -kSignTol) {
        neg.push_back(j);
      } else {
        Ray r = rays[j];
        r.zero.push_back(true);
        next.push_back(std::move(r));
      }
    }
    if (!is_eq) {
      for (auto j : neg) {
        Ray r = rays[j];
        r.zero.push_back(false);
        next.push_back(std::move(r));
      }
    }
    for (auto p : pos) {
      for (auto q : neg) {
        // Combinatorial adjacency: no third ray is tight on every
        // constraint p and q share.
        std::vector<bool> common(static_cast<std::size_t>(k));
        for (std::size_t c = 0; c < common.size(); ++c) {
          common[c] = rays[p].zero[c] && rays[q].zero[c];
        }
        bool adjacent = true;
        for (std::size_t r = 0; r < rays.size() && adjacent; ++r) {
          if (r == p || r == q) continue;
          bool covers = true;
          for (std::size_t c = 0; c < common.size(); ++c) {
            if (common[c] && !rays[r].zero[c]) {
              covers = false;
              break;
            }
          }
          if (covers) adjacent = false;
        }
        if (!adjacent) continue;
        Vector v = val[p] * rays[q].v - val[q] * rays[p].v;
        const double nrm = v.norm();
        if (nrm < kSignTol) continue;
        v /= nrm;
        if (parallel_duplicate(next, v)) continue;
        common.push_back(true);
        next.push_back(Ray{v, std::move(common)});
      }
    }
    rays = std::move(next);
  }

  std::vector<Vector> out;
  out.reserve(rays.size());
  for (auto& r : rays) out.push_back(r.v);
  rays_out = columns(out, n);
  lines_out = columns(lines, n);
}

PolyhedralCone PolyhedralCone::from_halfspaces(Matrix g, Matrix h,
                                               std::size_t n) {
  const auto ni = static_cast<Eigen::Index>(n);
  if (g.size() == 0) g.resize(0, ni);
  if (h.size() == 0) h.resize(0, ni);
  if (g.cols() != ni || h.cols() != ni) {
    throw DimensionMismatch("halfspace rows must have " + std::to_string(n) +
                            " columns");
  }
  PolyhedralCone k;
  k.dim_ = n;
  k.has_h_ = true;
  k.g_ = std::move(g);
  k.h_ = std::move(h);
  return k;
}

PolyhedralCone PolyhedralCone::from_generators(Matrix rays, Matrix lines,
                                               std::size_t n) {
  const auto ni = static_cast<Eigen::Index>(n);
  if (rays.size() == 0) rays.resize(ni, 0);
  if (lines.size() == 0) lines.resize(ni, 0);
  if (rays.rows() != ni || lines.rows() != ni) {
    throw DimensionMismatch("generators must have " + std::to_string(n) +
                            " rows");
  }
  PolyhedralCone k;
  k.dim_ = n;
  k.has_v_ = true;
  k.rays_ = std::move(rays);
  k.lines_ = std::move(lines);
  return k;
}

PolyhedralCone PolyhedralCone::whole_space(std::size_t n) {
  const auto ni = static_cast<Eigen::Index>(n);
  PolyhedralCone k = from_halfspaces(Matrix(0, ni), Matrix(0, ni), n);
  k.has_v_ = true;
  k.rays_.resize(ni, 0);
  k.lines_ = Matrix::Identity(ni, ni);
  return k;
}

PolyhedralCone PolyhedralCone::zero(std::size_t n) {
  const auto ni = static_cast<Eigen::Index>(n);
  PolyhedralCone k = from_generators(Matrix(ni, 0), Matrix(ni, 0), n);
  k.has_h_ = true;
  k.g_.resize(0, ni);
  k.h_ = Matrix::Identity(ni, ni);
  return k;
}

PolyhedralCone::Form PolyhedralCone::form() const {
  if (has_h_ && has_v_) return Form::Both;
  return has_h_ ? Form::Halfspace : Form::Generators;
}

double PolyhedralCone::membership_residual(const Vector& u) const {
  if (static_cast<std::size_t>(u.size()) != dim_) {
    throw DimensionMismatch("cone membership: dimension mismatch");
  }
  if (has_h_) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < g_.rows(); ++i) {
      worst = std::max(worst, row_normalized(g_.row(i).transpose(), u));
    }
    for (Eigen::Index i = 0; i < h_.rows(); ++i) {
      worst = std::max(worst,
                       std::abs(row_normalized(h_.row(i).transpose(), u)));
    }
    return worst;
  }
  // min ‖R w + L ν − u‖₁ over w ≥ 0: variables (w, ν, e⁺, e⁻).
  const Eigen::Index n = static_cast<Eigen::Index>(dim_);
  const Eigen::Index r = rays_.cols();
  const Eigen::Index l = lines_.cols();
  const Eigen::Index nv = r + l + 2 * n;
  LPProblem lp = LPProblem::make(Vector::Zero(nv), Matrix::Zero(n, nv), u,
                                 std::vector<RowSense>(static_cast<std::size_t>(n),
                                                       RowSense::Eq));
  lp.a.leftCols(r) = rays_;
  lp.a.middleCols(r, l) = lines_;
  lp.a.middleCols(r + l, n) = Matrix::Identity(n, n);
  lp.a.rightCols(n) = -Matrix::Identity(n, n);
  lp.c.tail(2 * n).setOnes();
  lp.lower.head(r).setZero();
  lp.lower.tail(2 * n).setZero();
  const LPSolution sol = lp_solve(lp);
  return sol.status == LPStatus::Optimal ? sol.objective : kInf;
}

bool PolyhedralCone::contains(const Vector& u, double tol) const {
  return membership_residual(u) <= tol * (1.0 + u.norm());
}

PolyhedralCone PolyhedralCone::with_generators() const {
  if (has_v_) return *this;
  PolyhedralCone k = *this;
  double_description(g_, h_, dim_, k.rays_, k.lines_);
  k.has_v_ = true;
  return k;
}

PolyhedralCone PolyhedralCone::with_halfspaces() const {
  if (has_h_) return *this;
  // Halfspaces of K are the generators of its polar.
  Matrix rays;
  Matrix lines;
  double_description(rays_.transpose(), lines_.transpose(), dim_, rays, lines);
  PolyhedralCone k = *this;
  k.g_ = rays.transpose();
  k.h_ = lines.transpose();
  k.has_h_ = true;
  return k;
}

PolyhedralCone PolyhedralCone::polar() const {
  PolyhedralCone k;
  k.dim_ = dim_;
  if (has_h_) {
    k.has_v_ = true;
    k.rays_ = g_.transpose();
    k.lines_ = h_.transpose();
  }
  if (has_v_) {
    k.has_h_ = true;
    k.g_ = rays_.transpose();
    k.h_ = lines_.transpose();
  }
  return k;
}

bool PolyhedralCone::equals(const PolyhedralCone& other, double tol) const {
  if (other.dim_ != dim_) return false;
  const PolyhedralCone a = has_v_ ? *this : with_generators();
  const PolyhedralCone b = other.has_v_ ? other : other.with_generators();
  const Matrix ga = a.generator_list();
  const Matrix gb = b.generator_list();
  for (Eigen::Index j = 0; j < ga.cols(); ++j) {
    if (!other.contains(ga.col(j), tol)) return false;
  }
  for (Eigen::Index j = 0; j < gb.cols(); ++j) {
    if (!contains(gb.col(j), tol)) return false;
  }
  return true;
}

PolyhedralCone PolyhedralCone::image(const Matrix& m) const {
  if (static_cast<std::size_t>(m.cols()) != dim_) {
    throw DimensionMismatch("cone image: matrix has wrong column count");
  }
  const PolyhedralCone k = has_v_ ? *this : with_generators();
  return from_generators(m * k.rays_, m * k.lines_,
                         static_cast<std::size_t>(m.rows()));
}

PolyhedralCone PolyhedralCone::preimage(const Matrix& m) const {
  if (static_cast<std::size_t>(m.rows()) != dim_) {
    throw DimensionMismatch("cone preimage: matrix has wrong row count");
  }
  const PolyhedralCone k = has_h_ ? *this : with_halfspaces();
  return from_halfspaces(k.g_ * m, k.h_ * m,
                         static_cast<std::size_t>(m.cols()));
}

Matrix PolyhedralCone::generator_list() const {
  const PolyhedralCone k = has_v_ ? *this : with_generators();
  Matrix out(static_cast<Eigen::Index>(dim_),
             k.rays_.cols() + 2 * k.lines_.cols());
  out << k.rays_, k.lines_, -k.lines_;
  return out;
}

bool PolyhedralCone::forms_consistent(double tol) const {
  if (!(has_h_ && has_v_)) return true;
  const PolyhedralCone hs = from_halfspaces(g_, h_, dim_);
  const Matrix gens = generator_list();
  for (Eigen::Index j = 0; j < gens.cols(); ++j) {
    if (!hs.contains(gens.col(j), tol)) return false;
  }
  if (dim_ > kMaxConversionDim) return true;
  const PolyhedralCone vs = from_generators(rays_, lines_, dim_);
  const Matrix extreme = hs.with_generators().generator_list();
  for (Eigen::Index j = 0; j < extreme.cols(); ++j) {
    if (!vs.contains(extreme.col(j), tol)) return false;
  }
  return true;
}

std::string PolyhedralCone::describe() const {
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "cone in R^%zu: %td inequalities, %td equalities, %td rays, "
                "%td lines",
                dim_, static_cast<std::ptrdiff_t>(g_.rows()),
                static_cast<std::ptrdiff_t>(h_.rows()),
                static_cast<std::ptrdiff_t>(rays_.cols()),
                static_cast<std::ptrdiff_t>(lines_.cols()));
  return buf;
}

PolyhedralCone polar(const PolyhedralCone& k) { return k.polar(); }

}  // namespace varcert
