#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "varcert/errors.hpp"
#include "varcert/solvers.hpp"

namespace vc = varcert;

using vc::RowSense;

TEST(LP, SmallProblemWithKnownOptimum) {
  // max x + y s.t. x + 2y ≤ 4, 3x + y ≤ 6, x, y ≥ 0 → (1.6, 1.2), value 2.8.
  vc::Matrix a(2, 2);
  a << 1, 2, 3, 1;
  vc::Vector b(2);
  b << 4, 6;
  vc::LPProblem p = vc::LPProblem::make(vc::Vector::Constant(2, -1.0), a, b,
                                        {RowSense::Le, RowSense::Le});
  p.lower.setZero();
  const vc::LPSolution s = vc::lp_solve(p);
  ASSERT_EQ(s.status, vc::LPStatus::Optimal);
  EXPECT_NEAR(s.x[0], 1.6, 1e-12);
  EXPECT_NEAR(s.x[1], 1.2, 1e-12);
  EXPECT_NEAR(s.objective, -2.8, 1e-12);
  EXPECT_NEAR(s.dual_objective(p), s.objective, 1e-10);
  EXPECT_LE(s.y.maxCoeff(), 1e-12);
}

TEST(LP, InfeasibleAndUnbounded) {
  vc::Matrix a(2, 1);
  a << 1, -1;
  vc::Vector b(2);
  b << -1, -1;  // x ≤ −1 and x ≥ 1
  const auto inf = vc::lp_solve(vc::LPProblem::make(
      vc::Vector::Ones(1), a, b, {RowSense::Le, RowSense::Le}));
  EXPECT_EQ(inf.status, vc::LPStatus::Infeasible);

  vc::Matrix a2(1, 1);
  a2 << 1;
  const auto unb = vc::lp_solve(vc::LPProblem::make(
      vc::Vector::Ones(1), a2, vc::Vector::Zero(1), {RowSense::Le}));
  EXPECT_EQ(unb.status, vc::LPStatus::Unbounded);
}

TEST(LP, EqualityAndGreaterRowsWithBounds) {
  // min x − y s.t. x + y = 1, x − y ≥ −0.5, 0 ≤ x ≤ 1, y ≤ 0.7.
  vc::Matrix a(2, 2);
  a << 1, 1, 1, -1;
  vc::Vector b(2);
  b << 1, -0.5;
  vc::LPProblem p = vc::LPProblem::make(vc::Vector(vc::Vector::Unit(2, 0) -
                                                   vc::Vector::Unit(2, 1)),
                                        a, b, {RowSense::Eq, RowSense::Ge});
  p.lower[0] = 0.0;
  p.upper[0] = 1.0;
  p.upper[1] = 0.7;
  const auto s = vc::lp_solve(p);
  ASSERT_EQ(s.status, vc::LPStatus::Optimal);
  EXPECT_NEAR(s.x[0], 0.3, 1e-12);
  EXPECT_NEAR(s.x[1], 0.7, 1e-12);
  EXPECT_NEAR(s.dual_objective(p), s.objective, 1e-10);
  EXPECT_GE(s.y[1], -1e-12);
}

TEST(LP, DimensionMismatchIsAnInputError) {
  vc::LPProblem p = vc::LPProblem::make(vc::Vector::Ones(2), vc::Matrix::Ones(1, 3),
                                        vc::Vector::Ones(1), {RowSense::Le});
  EXPECT_THROW(vc::lp_solve(p), vc::DimensionMismatch);
}

TEST(LP, MatchesVertexEnumerationOnRandomBoxes) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> dims(2, 3);
  std::uniform_int_distribution<int> rows(1, 5);
  for (int k = 0; k < 150; ++k) {
    const int n = dims(rng);
    const int m = rows(rng);
    vc::Vector c(n);
    for (auto& v : c) v = g(rng);
    vc::Matrix a(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    }
    vc::Vector b(m);
    for (auto& v : b) v = std::abs(g(rng));  // origin feasible
    const vc::Vector lo = vc::Vector::Constant(n, -2.0);
    const vc::Vector hi = vc::Vector::Constant(n, 2.0);
    vc::LPProblem p = vc::LPProblem::make(c, a, b,
                                          std::vector<RowSense>(m, RowSense::Le));
    p.lower = lo;
    p.upper = hi;
    const auto s = vc::lp_solve(p);
    ASSERT_EQ(s.status, vc::LPStatus::Optimal);
    const double expect = oracle::brute_force_lp(c, a, b, lo, hi);
    EXPECT_NEAR(s.objective, expect, 1e-9);
    EXPECT_NEAR(s.dual_objective(p), s.objective, 1e-9);
    EXPECT_LE((a * s.x - b).maxCoeff(), 1e-9);
  }
}

TEST(LP, DegenerateCyclingExampleTerminates) {
  // Beale's cycling example; Bland's rule must terminate.
  vc::Matrix a(3, 4);
  a << 0.25, -8, -1, 9, 0.5, -12, -0.5, 3, 0, 0, 1, 0;
  vc::Vector b(3);
  b << 0, 0, 1;
  vc::Vector c(4);
  c << -0.75, 20, -0.5, 6;
  vc::LPProblem p = vc::LPProblem::make(c, a, b,
                                        std::vector<RowSense>(3, RowSense::Le));
  p.lower.setZero();
  const auto s = vc::lp_solve(p);
  ASSERT_EQ(s.status, vc::LPStatus::Optimal);
  EXPECT_NEAR(s.objective, -1.25, 1e-12);
}

TEST(Eigh, MatchesReferenceEigenvalues) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  for (int k = 0; k < 50; ++k) {
    const int n = 1 + k % 8;
    vc::Matrix m(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) m(i, j) = g(rng);
    }
    m = (m + m.transpose()).eval();
    const vc::EigenDecomposition d = vc::eigh(m);
    Eigen::SelfAdjointEigenSolver<vc::Matrix> ref(m);
    const vc::Vector expect = ref.eigenvalues().reverse();
    EXPECT_LT((d.values - expect).norm(), 1e-10);
    EXPECT_LT((d.vectors.transpose() * d.vectors - vc::Matrix::Identity(n, n)).norm(),
              1e-10);
    EXPECT_LT((m * d.vectors - d.vectors * d.values.asDiagonal()).norm(), 1e-9);
    EXPECT_NEAR(vc::largest_eigenvalue(m), expect[0], 1e-10);
  }
}

TEST(Eigh, DiagonalAndNonSquare) {
  vc::Matrix m(2, 2);
  m << 0, 0, 0, -1;
  EXPECT_DOUBLE_EQ(vc::largest_eigenvalue(m), 0.0);
  m << 0, 1, 1, 0;
  const auto d = vc::eigh(m);
  EXPECT_NEAR(d.values[0], 1.0, 1e-14);
  EXPECT_NEAR(std::abs(d.vectors(0, 0)), std::sqrt(0.5), 1e-14);
  EXPECT_THROW(vc::eigh(vc::Matrix::Zero(2, 3)), vc::DimensionMismatch);
}

TEST(Dykstra, MatchesActiveSetEnumeration) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  for (int k = 0; k < 100; ++k) {
    const int n = 2 + k % 3;
    const int p = 2 + k % 5;
    vc::Matrix a(p, n);
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    }
    vc::Vector b(p);
    for (auto& v : b) v = std::abs(g(rng));
    vc::Matrix e(k % 2, n);
    for (int j = 0; j < n; ++j) {
      if (e.rows() > 0) e(0, j) = g(rng);
    }
    const vc::Vector d = vc::Vector::Zero(e.rows());
    vc::Vector z(n);
    for (auto& v : z) v = 3.0 * g(rng);
    const vc::DykstraResult r = vc::dykstra_project(z, a, b, e, d);
    ASSERT_TRUE(r.converged);
    const vc::Vector expect = oracle::brute_force_projection(a, b, e, d, z);
    EXPECT_LT((r.point - expect).norm(), 1e-6)
        << "k=" << k << " eq=" << e.rows() << " it=" << r.iterations
        << " dz=" << (r.point - z).norm() << " de=" << (expect - z).norm()
        << " viol=" << (a * r.point - b).maxCoeff();
  }
}
