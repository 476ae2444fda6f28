#include <cmath>
#include <vector>

#include "varcert/solvers.hpp"

namespace varcert {

Vector project_halfspace(const Vector& x, const Vector& a, double b) {
  const double viol = a.dot(x) - b;
  const double nrm2 = a.squaredNorm();
  if (viol <= 0.0 || nrm2 == 0.0) return x;
  return x - (viol / nrm2) * a;
}

Vector project_hyperplane(const Vector& x, const Vector& a, double b) {
  const double nrm2 = a.squaredNorm();
  if (nrm2 == 0.0) return x;
  return x - ((a.dot(x) - b) / nrm2) * a;
}

DykstraResult dykstra_project(const Vector& z, const Matrix& a_ineq,
                              const Vector& b_ineq, const Matrix& a_eq,
                              const Vector& b_eq,
                              const DykstraOptions& options) {
  const Eigen::Index p = a_ineq.rows();
  const Eigen::Index q = a_eq.rows();
  DykstraResult out;
  out.point = z;
  if (p + q == 0) {
    out.converged = true;
    return out;
  }
  // One correction vector per halfspace. Hyperplane corrections are normal
  // to the hyperplane and do not change its projection, so they are dropped.
  Matrix corr = Matrix::Zero(z.size(), p);
  Vector x = z;
  for (int it = 1; it <= options.max_iter; ++it) {
    const Vector prev = x;
    double corr_change = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
      const Vector shifted = x + corr.col(i);
      const Vector y = project_halfspace(shifted, a_ineq.row(i).transpose(),
                                         b_ineq[i]);
      const Vector c = shifted - y;
      corr_change += (c - corr.col(i)).squaredNorm();
      corr.col(i) = c;
      x = y;
    }
    for (Eigen::Index i = 0; i < q; ++i) {
      x = project_hyperplane(x, a_eq.row(i).transpose(), b_eq[i]);
    }
    out.iterations = it;
    // The iterate can return to the same point while corrections still
    // change, so both must settle.
    if ((x - prev).norm() + std::sqrt(corr_change) <
        options.tol_move + options.tol_rel * (x - z).norm()) {
      out.converged = true;
      break;
    }
  }
  out.point = x;
  return out;
}

}  // namespace varcert
