#pragma once

#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "varcert/calculus.hpp"
#include "varcert/expr.hpp"
#include "varcert/funcspace.hpp"
#include "varcert/geometry.hpp"

namespace fixture {

using varcert::FnObject;
using varcert::Matrix;
using varcert::PLQPiece;
using varcert::Polyhedron;
using varcert::Vector;

inline Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

inline Polyhedron halfline_le(double c) {  // {x ≤ c} in R
  return Polyhedron::inequalities(Matrix::Ones(1, 1), Vector::Constant(1, c));
}

inline Polyhedron halfline_ge(double c) {  // {x ≥ c} in R
  return Polyhedron::inequalities(-Matrix::Ones(1, 1), Vector::Constant(1, -c));
}

/// |x| as two PLQ pieces.
inline FnObject abs_plq() {
  return FnObject::plq({PLQPiece{halfline_le(0), Matrix(), vec({-1}), 0.0},
                        PLQPiece{halfline_ge(0), Matrix(), vec({1}), 0.0}});
}

/**
 * max_i (or min_i) of ⟨a_i, y⟩ + α_i, plus yᵀQ y, written as PLQ pieces on
 * the cells where each affine term attains the max (min). With zero offsets
 * every piece is active at the origin.
 */
inline FnObject random_plq(std::mt19937_64& rng, int m, int terms, bool convex,
                           bool zero_offsets, double quad_scale = 0.5,
                           std::optional<Polyhedron> domain = std::nullopt) {
  std::normal_distribution<double> g;
  std::vector<Vector> a(static_cast<std::size_t>(terms));
  std::vector<double> alpha(static_cast<std::size_t>(terms));
  for (int i = 0; i < terms; ++i) {
    a[static_cast<std::size_t>(i)] = Vector(m);
    for (int k = 0; k < m; ++k) a[static_cast<std::size_t>(i)][k] = g(rng);
    alpha[static_cast<std::size_t>(i)] = zero_offsets ? 0.0 : 0.3 * g(rng);
  }
  Matrix q(m, m);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < m; ++k) q(i, k) = g(rng);
  }
  q = convex ? Matrix(quad_scale * q.transpose() * q / m)
             : Matrix(quad_scale * 0.5 * (q + q.transpose()));
  const double sign = convex ? 1.0 : -1.0;
  std::vector<PLQPiece> pieces;
  for (int i = 0; i < terms; ++i) {
    const auto si = static_cast<std::size_t>(i);
    Matrix rows(terms - 1, m);
    Vector rhs(terms - 1);
    int r = 0;
    for (int j = 0; j < terms; ++j) {
      if (j == i) continue;
      const auto sj = static_cast<std::size_t>(j);
      // max: ⟨a_j − a_i, y⟩ ≤ α_i − α_j ; min: the reverse.
      rows.row(r) = sign * (a[sj] - a[si]).transpose();
      rhs[r++] = sign * (alpha[si] - alpha[sj]);
    }
    pieces.push_back(PLQPiece{Polyhedron::inequalities(rows, rhs), q, a[si],
                              alpha[si]});
  }
  return FnObject::plq(std::move(pieces), std::move(domain));
}

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/**
 * m random polynomials of degree ≤ 3 in n variables, all vanishing at x̄:
 * linear, quadratic and cubic terms in (x − x̄).
 */
inline varcert::SmoothMap random_poly_map(std::mt19937_64& rng, int n, int m,
                                          const Vector& xbar) {
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> var(0, n - 1);
  std::vector<std::string> d;
  for (int k = 0; k < n; ++k) {
    d.push_back("(x" + std::to_string(k + 1) + " - " + num(xbar[k]) + ")");
  }
  std::vector<std::string> comps;
  for (int i = 0; i < m; ++i) {
    std::string e;
    for (int k = 0; k < n; ++k) e += (k ? " + " : "") + num(g(rng)) + "*" + d[k];
    for (int t = 0; t < 2; ++t) {
      e += " + " + num(0.5 * g(rng)) + "*" + d[var(rng)] + "*" + d[var(rng)];
    }
    e += " + " + num(0.3 * g(rng)) + "*" + d[var(rng)] + "*" + d[var(rng)] + "*" +
         d[var(rng)];
    comps.push_back(e);
  }
  return varcert::SmoothMap::parse(comps, varcert::numbered_names("x", n));
}

/// Random halfspaces through the origin of R^m (count may be 0).
inline Polyhedron random_cone_domain(std::mt19937_64& rng, int m, int count) {
  if (count == 0) return Polyhedron::whole_space(m);
  std::normal_distribution<double> g;
  Matrix a(count, m);
  for (int i = 0; i < count; ++i) {
    for (int k = 0; k < m; ++k) a(i, k) = g(rng);
  }
  return Polyhedron::inequalities(a, Vector::Zero(count));
}

/// θ∘f with θ a PLQ function whose pieces all meet at ȳ = f(x̄) = 0 and
/// whose domain is a polyhedral cone at 0.
inline varcert::Composite random_composite(std::mt19937_64& rng, int n, int m,
                                           bool convex, int domain_rows) {
  std::normal_distribution<double> g;
  Vector xbar(n);
  for (auto& v : xbar) v = 0.5 * g(rng);
  Polyhedron dom = random_cone_domain(rng, m, domain_rows);
  FnObject theta = random_plq(rng, m, 2 + static_cast<int>(rng() % 2), convex,
                              true, 0.5, dom);
  return varcert::Composite(std::move(theta), random_poly_map(rng, n, m, xbar),
                            xbar);
}

/// The linear map x ↦ rows [first, first + count) of x in R^n.
inline varcert::SmoothMap coordinate_block(int n, int first, int count) {
  Matrix a = Matrix::Zero(count, n);
  for (int i = 0; i < count; ++i) a(i, first + i) = 1.0;
  return varcert::SmoothMap::affine(a, Vector::Zero(count));
}

/// A bounded random LP over R^n: a box [−1,1]ⁿ cut by `cuts` random
/// halfspaces through points at distance ≤ 0.5 from the origin.
struct RandomLP {
  Vector c;
  Polyhedron feasible;
  std::string objective;
};

inline RandomLP random_lp(std::mt19937_64& rng, int n, int cuts) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> off(0.1, 0.5);
  Matrix a(cuts + 2 * n, n);
  Vector b(cuts + 2 * n);
  for (int i = 0; i < cuts; ++i) {
    for (int k = 0; k < n; ++k) a(i, k) = g(rng);
    a.row(i).normalize();
    b[i] = off(rng);
  }
  a.bottomRows(2 * n) << Matrix::Identity(n, n), -Matrix::Identity(n, n);
  b.tail(2 * n).setOnes();
  RandomLP lp{Vector(n), Polyhedron::inequalities(a, b), ""};
  for (int k = 0; k < n; ++k) {
    lp.c[k] = g(rng);
    lp.objective += (k ? " + " : "") + num(lp.c[k]) + "*x" + std::to_string(k + 1);
  }
  return lp;
}

}  // namespace fixture
