#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "varcert/certify.hpp"
#include "varcert/errors.hpp"
#include "varcert/solvers.hpp"

namespace vc = varcert;

using fixture::vec;
using vc::ConstrainedProblem;
using vc::FnObject;
using vc::Polyhedron;
using vc::SmoothMap;
using vc::Verdict;

namespace {

SmoothMap map(std::vector<std::string> comps, std::size_t n) {
  return SmoothMap::parse(comps, vc::numbered_names("x", n));
}

FnObject smooth(const std::string& text, std::size_t n) {
  return FnObject::smooth(vc::parse(text, vc::numbered_names("x", n)));
}

ConstrainedProblem orthant(const char* objective) {
  return ConstrainedProblem(smooth(objective, 2), SmoothMap::identity(2),
                            Polyhedron::nonpositive_orthant(2));
}

ConstrainedProblem halfline(const char* objective) {
  return ConstrainedProblem(smooth(objective, 1), map({"x1"}, 1),
                            fixture::halfline_le(0));
}

vc::DualOptions with_kappa(double k) {
  vc::DualOptions o;
  o.kappa = k;
  return o;
}

// max(−2x, −x/2): ∂ϑ(0) = [−2, −1/2].
FnObject kinked_descent() {
  return FnObject::plq(
      {vc::PLQPiece{fixture::halfline_le(0), vc::Matrix(), vec({-2}), 0.0},
       vc::PLQPiece{fixture::halfline_ge(0), vc::Matrix(), vec({-0.5}), 0.0}});
}

}  // namespace

TEST(Problem, Validation) {
  EXPECT_THROW(ConstrainedProblem(smooth("x1", 1), SmoothMap::identity(2),
                                  Polyhedron::nonpositive_orthant(2)),
               vc::DimensionMismatch);
  EXPECT_THROW(ConstrainedProblem(smooth("x1", 1), map({"x1"}, 1),
                                  Polyhedron::nonpositive_orthant(2)),
               vc::DimensionMismatch);
  EXPECT_THROW(ConstrainedProblem(FnObject::distance(fixture::halfline_le(0)),
                                  map({"x1"}, 1), fixture::halfline_le(0)),
               vc::InputError);
}

TEST(PrimalCheck, Examples) {
  const auto a = vc::primal_check(orthant("-x1 - x2"), vec({0, 0}));
  EXPECT_EQ(a.status, Verdict::Verified);
  EXPECT_NEAR(a.value, 0.0, 1e-12);

  const auto b = vc::primal_check(orthant("x1 + x2"), vec({0, 0}));
  EXPECT_EQ(b.status, Verdict::Refuted);
  EXPECT_NEAR(b.value, -2.0, 1e-12);
  ASSERT_TRUE(b.witness.has_value());
  EXPECT_NEAR((*b.witness - vec({-1, -1})).norm(), 0.0, 1e-12);

  const auto c = vc::primal_check(halfline("-x1"), vec({0}));
  EXPECT_EQ(c.status, Verdict::Verified);
  EXPECT_NEAR(c.value, 0.0, 1e-12);
}

TEST(PrimalCheck, InfeasiblePoint) {
  EXPECT_THROW(vc::primal_check(halfline("-x1"), vec({1})), vc::InfeasiblePoint);
  EXPECT_THROW(vc::dual_certificate(halfline("-x1"), vec({1})), vc::InfeasiblePoint);
}

TEST(PrimalCheck, PiecewiseObjective) {
  const ConstrainedProblem p(kinked_descent(), map({"x1"}, 1), fixture::halfline_le(0));
  EXPECT_EQ(vc::primal_check(p, vec({0})).status, Verdict::Verified);
  const ConstrainedProblem q(kinked_descent(), map({"x1"}, 1),
                             Polyhedron::whole_space(1));
  const auto r = vc::primal_check(q, vec({0}));
  EXPECT_EQ(r.status, Verdict::Refuted);
  EXPECT_NEAR(r.value, -0.5, 1e-12);
}

TEST(DualCertificate, Examples) {
  const auto a = vc::dual_certificate(orthant("-x1 - x2"), vec({0, 0}), with_kappa(1));
  EXPECT_EQ(a.status, Verdict::Verified);
  EXPECT_NEAR((a.lambda - vec({1, 1})).norm(), 0.0, 1e-12);
  EXPECT_LE(a.residual, 1e-12);
  EXPECT_NEAR(a.bound_lhs, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(a.bound_rhs, std::sqrt(2.0), 1e-12);
  EXPECT_EQ(a.kappa_source, vc::KappaSource::Asserted);

  EXPECT_THROW(vc::dual_certificate(orthant("x1 + x2"), vec({0, 0}), with_kappa(1)),
               vc::NoMultiplier);

  const ConstrainedProblem doubled(smooth("-x1", 1), map({"x1", "x1"}, 1),
                                   Polyhedron::nonpositive_orthant(2));
  const auto c = vc::dual_certificate(doubled, vec({0}), with_kappa(1));
  EXPECT_EQ(c.status, Verdict::Verified);
  EXPECT_NEAR(c.lambda.sum(), 1.0, 1e-12);
  EXPECT_NEAR(c.bound_lhs, 1.0, 1e-12);
  EXPECT_NEAR(c.lambda.minCoeff(), 0.0, 1e-12);
}

TEST(DualCertificate, BoundExceeded) {
  const ConstrainedProblem doubled(smooth("-x1", 1), map({"x1", "x1"}, 1),
                                   Polyhedron::nonpositive_orthant(2));
  const auto c = vc::dual_certificate(doubled, vec({0}), with_kappa(0.5));
  EXPECT_EQ(c.status, Verdict::Refuted);
  EXPECT_TRUE(c.bound_exceeded());
  EXPECT_LE(c.residual, 1e-12);
  // The minimal Euclidean multiplier (1/2, 1/2) still misses 0.5.
  EXPECT_NEAR(c.bound_lhs, std::sqrt(0.5), 1e-9);
}

TEST(DualCertificate, EstimatedKappa) {
  const auto c = vc::dual_certificate(halfline("-x1"), vec({0}));
  EXPECT_EQ(c.status, Verdict::Verified);
  EXPECT_EQ(c.kappa_source, vc::KappaSource::Estimated);
  EXPECT_NEAR(c.kappa, 1.0, 1e-6);
  EXPECT_GT(c.kappa_radius, 0.0);
  EXPECT_NEAR(c.lambda[0], 1.0, 1e-12);
}

TEST(DualCertificate, DivergentModulusIsInconclusive) {
  const ConstrainedProblem p(smooth("-x1", 1), map({"x1^2"}, 1),
                             Polyhedron::point(vec({0})));
  EXPECT_THROW(
      {
        const auto c = vc::dual_certificate(p, vec({0}));
        (void)c;
      },
      vc::NoMultiplier);
  const ConstrainedProblem q(smooth("x1^2", 1), map({"x1^2"}, 1),
                             Polyhedron::point(vec({0})));
  const auto c = vc::dual_certificate(q, vec({0}));
  EXPECT_EQ(c.status, Verdict::Inconclusive);
}

TEST(DualCertificate, PiecewiseObjective) {
  const ConstrainedProblem p(kinked_descent(), map({"x1"}, 1), fixture::halfline_le(0));
  const auto c = vc::dual_certificate(p, vec({0}), with_kappa(1));
  EXPECT_EQ(c.status, Verdict::Verified);
  EXPECT_EQ(c.bound_rule, vc::BoundRule::Lipschitz);
  EXPECT_NEAR(c.lambda[0], 0.5, 1e-12);
  EXPECT_NEAR(c.lipschitz, 2.0, 1e-9);
  EXPECT_NEAR(c.bound_rhs, 2.0, 1e-9);
}

TEST(Recheck, RoundTripAndMutation) {
  const ConstrainedProblem p = orthant("-x1 - x2");
  const auto c = vc::dual_certificate(p, vec({0, 0}), with_kappa(1));
  EXPECT_EQ(vc::recheck_dual(p, c).status, Verdict::Verified);

  auto bad = c;
  bad.lambda[0] += 0.1;
  EXPECT_EQ(vc::recheck_dual(p, bad).status, Verdict::Refuted);
  bad = c;
  bad.lambda = vec({-1, 3});
  EXPECT_EQ(vc::recheck_dual(p, bad).status, Verdict::Refuted);
  bad = c;
  bad.kappa = 0.5;
  const auto r = vc::recheck_dual(p, bad);
  EXPECT_EQ(r.status, Verdict::Refuted);
  EXPECT_TRUE(r.bound_exceeded());
}

TEST(ExactPenalty, Examples) {
  const ConstrainedProblem p = halfline("-x1");
  const auto a = vc::exact_penalty_check(p, vec({0}), 1.0, 1.0);
  EXPECT_EQ(a.status, Verdict::Verified);

  const auto b = vc::exact_penalty_check(p, vec({0}), 1.0, 0.5);
  ASSERT_EQ(b.status, Verdict::Refuted);
  ASSERT_TRUE(b.witness.has_value());
  EXPECT_GT((*b.witness)[0], 0.0);

  const ConstrainedProblem q(smooth("(x1 - 0.5)^2 + x2^2", 2), SmoothMap::identity(2),
                             Polyhedron::nonnegative_orthant(2));
  EXPECT_EQ(vc::exact_penalty_check(q, vec({0.5, 0}), 0.0, 1.0).status,
            Verdict::Verified);
}

// Invariants

TEST(CertifyProperty, DualImpliesPrimalOnRandomLPs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 3;
    const auto lp = fixture::random_lp(rng, n, 3 + trial % 4);
    vc::LPProblem prob = vc::LPProblem::make(
        lp.c, lp.feasible.a_ineq(), lp.feasible.b_ineq(),
        std::vector<vc::RowSense>(static_cast<std::size_t>(lp.feasible.a_ineq().rows()),
                                  vc::RowSense::Le));
    const auto sol = vc::lp_solve(prob);
    ASSERT_EQ(sol.status, vc::LPStatus::Optimal);
    const ConstrainedProblem p(smooth(lp.objective, n), SmoothMap::identity(n),
                               lp.feasible);
    const auto d = vc::dual_certificate(p, sol.x, with_kappa(1));
    EXPECT_EQ(d.status, Verdict::Verified) << "trial " << trial << " " << d.detail;
    const int active = static_cast<int>(
        ((lp.feasible.a_ineq() * sol.x - lp.feasible.b_ineq()).array() >= -1e-6).count());
    EXPECT_LE(d.bound_lhs, lp.c.norm() * std::sqrt(active) + 1e-9);
    EXPECT_EQ(vc::primal_check(p, sol.x).status, Verdict::Verified) << "trial " << trial;
  }
}

TEST(CertifyProperty, ScalingCovariance) {
  const ConstrainedProblem base(smooth("-x1", 1), map({"x1", "x1"}, 1),
                                Polyhedron::nonpositive_orthant(2));
  for (double kappa : {1.0, 0.5}) {
    const auto c1 = vc::dual_certificate(base, vec({0}), with_kappa(kappa));
    for (double alpha : {0.1, 3.0, 250.0}) {
      const ConstrainedProblem scaled(smooth(fixture::num(-alpha) + "*x1", 1),
                                      map({"x1", "x1"}, 1),
                                      Polyhedron::nonpositive_orthant(2));
      const auto c2 = vc::dual_certificate(scaled, vec({0}), with_kappa(kappa));
      EXPECT_EQ(c1.status, c2.status);
      EXPECT_LE((c2.lambda - alpha * c1.lambda).norm(), 1e-9 * alpha);
      EXPECT_NEAR(c2.bound_lhs, alpha * c1.bound_lhs, 1e-9 * alpha);
      EXPECT_NEAR(c2.bound_rhs, alpha * c1.bound_rhs, 1e-9 * alpha);
    }
  }
}
