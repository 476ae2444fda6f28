#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "varcert/calculus.hpp"
#include "varcert/errors.hpp"

namespace vc = varcert;

using fixture::vec;
using vc::Composite;
using vc::FnObject;
using vc::kInf;
using vc::Polyhedron;
using vc::SmoothMap;
using vc::Verdict;

namespace {

SmoothMap map(std::vector<std::string> comps, std::size_t n) {
  return SmoothMap::parse(comps, vc::numbered_names("x", n));
}

FnObject smooth(const char* text, std::size_t n) {
  return FnObject::smooth(vc::parse(text, vc::numbered_names("x", n)));
}

Composite orthant_identity() {
  return Composite::set(SmoothMap::identity(2), Polyhedron::nonpositive_orthant(2),
                        vec({0, 0}));
}

Composite squared_zero() {
  return Composite::set(map({"x1^2"}, 1), Polyhedron::point(vec({0})), vec({0}));
}

// {b ≥ a²} as f(a,b) = b − a² ∈ R₊.
Composite parabola_epigraph() {
  return Composite::set(map({"x2 - x1^2"}, 2), Polyhedron::nonnegative_orthant(1),
                        vec({0, 0}));
}

// {b ≤ a²} as f(a,b) = b − a² ∈ R₋.
Composite parabola_hypograph() {
  return Composite::set(map({"x2 - x1^2"}, 2), Polyhedron::nonpositive_orthant(1),
                        vec({0, 0}));
}

// max(y1, y2) on the whole plane.
FnObject max_plq() {
  vc::Matrix r1(1, 2), r2(1, 2);
  r1 << -1, 1;  // y2 ≤ y1
  r2 << 1, -1;
  return FnObject::plq(
      {vc::PLQPiece{Polyhedron::inequalities(r1, vec({0})), vc::Matrix(), vec({1, 0}), 0},
       vc::PLQPiece{Polyhedron::inequalities(r2, vec({0})), vc::Matrix(), vec({0, 1}), 0}},
      Polyhedron::whole_space(2));
}

}  // namespace

TEST(ChainSubderivative, Examples) {
  const Composite a(fixture::abs_plq(), map({"x1^2"}, 1), vec({1}));
  EXPECT_NEAR(vc::chain_subderivative(a, vec({1})).value.value, 2.0, 1e-12);

  const Composite ind = Composite::set(map({"x1"}, 1), fixture::halfline_le(0), vec({0}));
  EXPECT_EQ(vc::chain_subderivative(ind, vec({-1})).value.value, 0.0);
  EXPECT_EQ(vc::chain_subderivative(ind, vec({1})).value.value, kInf);
  EXPECT_EQ(vc::chain_subderivative(ind, vec({1}), vc::ChainRoute::AbadieEpi).route,
            vc::ChainRoute::AbadieEpi);
}

TEST(Composite, RejectsBasePointOutsideDomain) {
  EXPECT_THROW(Composite::set(map({"x1"}, 1), fixture::halfline_le(0), vec({1})),
               vc::NotInDomain);
  EXPECT_THROW(Composite(fixture::abs_plq(), SmoothMap::identity(2), vec({0, 0})),
               vc::DimensionMismatch);
}

TEST(ChainSubdifferential, Examples) {
  const Composite a(fixture::abs_plq(), map({"2*x1"}, 1), vec({0}));
  const auto r = vc::chain_subdifferential(a);
  EXPECT_TRUE(r.set.contains(vec({2})));
  EXPECT_TRUE(r.set.contains(vec({-2})));
  EXPECT_FALSE(r.set.contains(vec({2.1})));
  EXPECT_NEAR(r.set.support(vec({1})), 2.0, 1e-9);

  const Composite s(smooth("x1^2 + sin(x2)", 2), map({"x1*x2", "x1 + x2"}, 2),
                    vec({1, 2}));
  const auto rs = vc::chain_subdifferential(s);
  // ∇θ(2, 3) = (4, cos 3); J = [[2, 1], [1, 1]].
  const vc::Vector g = vec({2 * 4 + std::cos(3.0), 4 + std::cos(3.0)});
  EXPECT_TRUE(rs.set.contains(g, 1e-8));
  EXPECT_FALSE(rs.set.contains(g + vec({1e-3, 0})));

  const Composite m(max_plq(), map({"x1", "-x1"}, 1), vec({0}));
  const auto rm = vc::chain_subdifferential(m);
  EXPECT_NEAR(rm.set.support(vec({1})), 1.0, 1e-9);
  EXPECT_NEAR(rm.set.support(vec({-1})), 1.0, 1e-9);
  EXPECT_TRUE(rm.set.contains(vec({0.3})));
}

TEST(ChainSubdifferential, ConvexIndicatorRoute) {
  const Composite ind = Composite::set(map({"x1"}, 1), fixture::halfline_le(0), vec({0}));
  const auto r = vc::chain_subdifferential(ind);
  EXPECT_EQ(r.route, vc::SubdifferentialRoute::ConvexAbadie);
  EXPECT_FALSE(r.heuristic);
  EXPECT_TRUE(r.set.contains(vec({5})));
  EXPECT_FALSE(r.set.contains(vec({-0.1})));
}

TEST(ChainSubdifferential, NonconvexIrregularIsUnsupported) {
  const FnObject neg_abs = FnObject::plq(
      {vc::PLQPiece{fixture::halfline_le(0), vc::Matrix(), vec({1}), 0.0},
       vc::PLQPiece{fixture::halfline_ge(0), vc::Matrix(), vec({-1}), 0.0}});
  const Composite c(neg_abs, map({"x1"}, 1), vec({0}));
  EXPECT_THROW(vc::chain_subdifferential(c), vc::NonconvexUnsupported);
}

TEST(SumRule, Examples) {
  const FnObject id = smooth("x1", 1);
  const auto s = vc::sum_subderivative(fixture::abs_plq(), id, vec({0}), vec({-1}));
  EXPECT_NEAR(s.value.value, 0.0, 1e-12);
  EXPECT_TRUE(s.qc_verified);

  const auto d = vc::sum_subdifferential(fixture::abs_plq(), id, vec({0}));
  EXPECT_NEAR(d.set.support(vec({1})), 2.0, 1e-9);
  EXPECT_NEAR(d.set.support(vec({-1})), 0.0, 1e-9);

  const FnObject neg = FnObject::indicator(fixture::halfline_le(0));
  const FnObject pos = FnObject::indicator(fixture::halfline_ge(0));
  const auto z = vc::sum_subderivative(neg, pos, vec({0}), vec({0}));
  EXPECT_EQ(z.value.value, 0.0);
  EXPECT_TRUE(z.qc_verified);
  EXPECT_EQ(vc::sum_subderivative(neg, pos, vec({0}), vec({1})).value.value, kInf);
  EXPECT_EQ(vc::sum_subderivative(neg, pos, vec({0}), vec({-1})).value.value, kInf);
}

TEST(Abadie, IdentityIsVerified) {
  const auto r = vc::abadie_check(
      Composite::set(map({"x1"}, 1), fixture::halfline_le(0), vec({0})));
  EXPECT_EQ(r.verdict, Verdict::Verified);
  EXPECT_EQ(vc::abadie_check(orthant_identity()).verdict, Verdict::Verified);
}

TEST(Abadie, SquareOntoPointIsRefuted) {
  const auto r = vc::abadie_check(squared_zero());
  ASSERT_EQ(r.verdict, Verdict::Refuted);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_NEAR(std::abs((*r.witness)[0]), 1.0, 1e-12);
}

TEST(Abadie, SmoothPreimagesAreVerified) {
  EXPECT_EQ(vc::abadie_check(parabola_epigraph()).verdict, Verdict::Verified);
  EXPECT_EQ(vc::abadie_check(parabola_hypograph()).verdict, Verdict::Verified);
}

// Ω = {x : −x ∈ ice-cream cone, ⟨x, (1,0,−1)⟩ ≤ 0}, the domain of δ_{Θ°}∘Aᵀ
// with Θ = Θ₁ × Θ₂ and A = [I I]. The two constraints pin Ω to the ray
// through (−1, 0, −1); being a closed convex cone, Ω equals the linearized
// cone and its direction must be derivable while nearby ones are not.
TEST(Abadie, NonclosedImageExampleHoldsOnSamples) {
  vc::SampledSet omega;
  omega.dim = 3;
  omega.residual = [](const vc::Vector& x) {
    return vec({std::max(0.0, std::hypot(x[0], x[1]) + x[2]),
                std::max(0.0, x[0] - x[2])});
  };
  const vc::Vector ray = vec({-1, 0, -1}).normalized();
  EXPECT_EQ(omega.residual_norm(ray), 0.0);
  EXPECT_EQ(vc::derivability_check(omega, vec({0, 0, 0}), ray).verdict,
            Verdict::Verified);
  for (const auto& off : {vec({0, 0.2, 0}), vec({0.2, 0, 0}), vec({0, 0, -0.2})}) {
    const vc::Vector u = (ray + off).normalized();
    EXPECT_GT(omega.residual_norm(u), 0.0);
    EXPECT_FALSE(vc::derivability_check(omega, vec({0, 0, 0}), u).pass);
  }
}

TEST(Msqc, IdentityHasModulusOne) {
  const auto r = vc::msqc_estimate(
      Composite::set(map({"x1"}, 1), fixture::halfline_le(0), vec({0})));
  EXPECT_EQ(r.verdict, Verdict::Verified);
  ASSERT_TRUE(r.kappa.has_value());
  EXPECT_NEAR(*r.kappa, 1.0, 1e-6);
}

TEST(Msqc, SquareOntoPointDiverges) {
  const auto r = vc::msqc_estimate(squared_zero());
  EXPECT_NE(r.verdict, Verdict::Verified);
  EXPECT_TRUE(r.divergent);
  EXPECT_TRUE(r.witness.has_value());
}

TEST(Msqc, DoubledCoordinateHasModulusOneOverRootTwo) {
  const auto r = vc::msqc_estimate(Composite::set(
      map({"x1", "x1"}, 1), Polyhedron::nonpositive_orthant(2), vec({0})));
  EXPECT_EQ(r.verdict, Verdict::Verified);
  EXPECT_NEAR(*r.kappa, 1.0 / std::sqrt(2.0), 1e-6);
}

TEST(Msqc, ParabolaIsStable) {
  const auto r = vc::msqc_estimate(parabola_epigraph());
  EXPECT_EQ(r.verdict, Verdict::Verified);
  EXPECT_GT(*r.kappa, 0.5);
  EXPECT_LT(*r.kappa, 1.5);
}

TEST(Robinson, Examples) {
  EXPECT_EQ(vc::robinson_check(
                Composite::set(map({"x1"}, 1), fixture::halfline_le(0), vec({0})))
                .verdict,
            Verdict::Verified);
  const auto r = vc::robinson_check(Composite::set(
      map({"x1", "0"}, 1), Polyhedron::nonpositive_orthant(2), vec({0})));
  ASSERT_EQ(r.verdict, Verdict::Refuted);
  ASSERT_TRUE(r.witness.has_value());
  // f(x̄) + ∇f(x̄)R − R²₋ = R × R₊ misses −ε e₂.
  EXPECT_NEAR((*r.witness - vec({0, -1})).norm(), 0.0, 1e-12);
}

TEST(InverseImageNormals, Examples) {
  const auto n = vc::normal_cone_inverse_image(orthant_identity(), 1.0);
  const auto c = n.check(vec({1, 1}));
  EXPECT_NEAR((c.lambda - vec({1, 1})).norm(), 0.0, 1e-9);
  EXPECT_NEAR(c.lambda_norm, c.v_norm, 1e-9);
  EXPECT_TRUE(c.within);
  EXPECT_THROW(n.check(vec({-1, 0})), vc::InfeasibleWitness);

  const Composite doubled = Composite::set(
      map({"x1", "x1"}, 1), Polyhedron::nonpositive_orthant(2), vec({0}));
  const double kappa = *vc::msqc_estimate(doubled).kappa;
  const auto d = vc::normal_cone_inverse_image(doubled, kappa).check(vec({2}));
  EXPECT_TRUE(d.within);
  EXPECT_NEAR(d.lambda_norm, std::sqrt(2.0), 1e-6);
  EXPECT_NEAR(d.lambda.sum(), 2.0, 1e-9);
}

TEST(InverseImageNormals, ConeIsImageOfNormals) {
  const auto n = vc::normal_cone_inverse_image(parabola_epigraph(), 1.0);
  // ∇f(0) = (0, 1), N_{R₊}(0) = R₋.
  EXPECT_TRUE(n.cone().contains(vec({0, -3})));
  EXPECT_FALSE(n.cone().contains(vec({0, 1})));
  EXPECT_FALSE(n.cone().contains(vec({1, 0})));
}

TEST(Robustness, OrthantAndParabola) {
  const auto a = vc::robustness_check(orthant_identity(), 1.0);
  EXPECT_TRUE(a.applicable);
  EXPECT_TRUE(a.pass);
  EXPECT_LE(a.max_violation, 1e-5);
  EXPECT_GT(a.sequences, 0);

  const auto b = vc::robustness_check(parabola_epigraph(), 1.0);
  EXPECT_TRUE(b.pass);
  EXPECT_LE(b.max_violation, 1e-5);
}

TEST(Robustness, WithoutModulusNotApplicable) {
  const auto r = vc::robustness_check(parabola_epigraph(), std::nullopt);
  EXPECT_FALSE(r.applicable);
  EXPECT_FALSE(r.pass);
}

TEST(ProxRegularity, ConvexSetsHaveZeroConstant) {
  const auto a = vc::prox_regularity_check(orthant_identity(), 1.0);
  EXPECT_TRUE(a.pass);
  EXPECT_EQ(a.r_hat, 0.0);
  const auto b = vc::prox_regularity_check(parabola_epigraph(), 1.0);
  EXPECT_TRUE(b.pass);
  EXPECT_LE(b.r_hat, 1e-9);
}

TEST(ProxRegularity, ParabolaHypographHasUnitOrder) {
  const auto r = vc::prox_regularity_check(parabola_hypograph(), 1.0);
  EXPECT_TRUE(r.applicable);
  EXPECT_TRUE(r.pass);
  EXPECT_GT(r.r_hat, 0.3);
  EXPECT_LT(r.r_hat, 3.0);
  EXPECT_NEAR(r.hessian_bound, 2.0, 1e-4);
  EXPECT_LE(r.r_hat, r.r_bound + 1e-9);
}

TEST(ProxRegularity, WithoutModulusNotApplicable) {
  EXPECT_FALSE(vc::prox_regularity_check(parabola_hypograph(), std::nullopt).applicable);
}

TEST(FdHessians, Quadratic) {
  const auto h = vc::fd_hessians(map({"x1^2*x2", "x2 - x1^2"}, 2), vec({1, 2}));
  ASSERT_EQ(h.size(), 2u);
  vc::Matrix e(2, 2);
  e << 4, 2, 2, 0;
  EXPECT_LE((h[0] - e).norm(), 1e-6);
  e << -2, 0, 0, 0;
  EXPECT_LE((h[1] - e).norm(), 1e-6);
}

// Invariants

TEST(ChainRuleProperty, MatchesSampledQuotient) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 2 + trial % 2;
    const int m = 1 + trial % 2;
    const Composite c =
        fixture::random_composite(rng, n, m, trial % 3 != 0, trial % 3);
    const FnObject phi = c.as_function();
    for (const auto& u : vc::unit_directions(c.input_dim(), 6, 100 + trial)) {
      const double chain = vc::chain_subderivative(c, u).value.value;
      const double sampled = vc::subderivative_sampled(phi, c.xbar(), u).value;
      if (chain == kInf) {
        EXPECT_EQ(sampled, kInf) << "trial " << trial;
      } else {
        EXPECT_NEAR(chain, sampled, 1e-4) << "trial " << trial;
      }
    }
  }
}

TEST(QualificationHierarchy, MsqcVerifiedImpliesAbadieNotRefuted) {
  std::vector<Composite> corpus{
      orthant_identity(), squared_zero(), parabola_epigraph(), parabola_hypograph(),
      Composite::set(map({"x1", "0"}, 1), Polyhedron::nonpositive_orthant(2), vec({0})),
      Composite::set(map({"x1", "x1"}, 1), Polyhedron::nonpositive_orthant(2),
                     vec({0}))};
  std::mt19937_64 rng(99);
  for (int i = 0; i < 4; ++i) corpus.push_back(fixture::random_composite(rng, 2, 1, true, 1));
  int verified = 0;
  for (const auto& c : corpus) {
    if (vc::msqc_estimate(c).verdict != Verdict::Verified) continue;
    ++verified;
    EXPECT_NE(vc::abadie_check(c).verdict, Verdict::Refuted);
  }
  EXPECT_GE(verified, 6);
}

TEST(ChainSubdifferentialProperty, DualInequality) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    const Composite c = fixture::random_composite(rng, 2, 2, true, trial % 2);
    const auto r = vc::chain_subdifferential(c);
    const auto dirs = vc::unit_directions(2, 50, trial);
    for (const auto& v : r.set.sample_elements(10, trial)) {
      for (const auto& u : dirs) {
        EXPECT_LE(v.dot(u), vc::chain_subderivative(c, u).value.value + 1e-7);
      }
    }
  }
}

TEST(SumRuleProperty, AgreesWithDiagonalChainRule) {
  const std::vector<std::pair<FnObject, FnObject>> pairs{
      {fixture::abs_plq(), smooth("x1", 1)},
      {FnObject::indicator(fixture::halfline_le(0)),
       FnObject::indicator(fixture::halfline_ge(0))},
      {fixture::abs_plq(), FnObject::scaled(2.0, fixture::abs_plq())},
      {smooth("x1^2", 1), FnObject::indicator(fixture::halfline_ge(0))}};
  for (const auto& [phi, psi] : pairs) {
    const FnObject theta =
        FnObject::sum(FnObject::composite(phi, fixture::coordinate_block(2, 0, 1)),
                      FnObject::composite(psi, fixture::coordinate_block(2, 1, 1)));
    const Composite c(theta, map({"x1", "x1"}, 1), vec({0}));
    for (double u : {-1.0, -0.5, 0.0, 1.0}) {
      const double sum = vc::sum_subderivative(phi, psi, vec({0}), vec({u})).value.value;
      const double chain = vc::chain_subderivative(c, vec({u})).value.value;
      if (sum == kInf) {
        EXPECT_EQ(chain, kInf);
      } else {
        EXPECT_NEAR(sum, chain, 1e-4);
      }
    }
  }
}
