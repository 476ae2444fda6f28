#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "varcert/errors.hpp"
#include "varcert/solvers.hpp"

namespace varcert {

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (i != j) s += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(s);
}

}  // namespace

EigenDecomposition eigh(const Matrix& input) {
  if (input.rows() != input.cols()) {
    throw DimensionMismatch("eigh expects a square matrix");
  }
  const Eigen::Index n = input.rows();
  Matrix a = 0.5 * (input + input.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double scale = a.norm();

  EigenDecomposition out;
  constexpr int kMaxSweeps = 100;
  while (out.sweeps < kMaxSweeps && off_diagonal_norm(a) > 1e-12 * scale) {
    ++out.sweeps;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle annihilating a(p, q) (Golub & Van Loan, 8.5.2).
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) {
    return a(i, i) > a(j, j);
  });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto src = order[static_cast<std::size_t>(k)];
    out.values[k] = a(src, src);
    out.vectors.col(k) = v.col(src);
  }
  return out;
}

double largest_eigenvalue(const Matrix& a) {
  if (a.rows() == 0) return -kInf;
  return eigh(a).values[0];
}

}  // namespace varcert
