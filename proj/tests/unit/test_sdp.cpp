#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/QR>
#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "varcert/errors.hpp"
#include "varcert/sdp.hpp"
#include "varcert/solvers.hpp"

namespace vc = varcert;

using fixture::vec;
using vc::SDProblem;
using vc::Verdict;

namespace {

SDProblem diag_problem(const char* objective) {
  return SDProblem::parse(1, objective, 2, {"x1", "0", "-1"});
}

vc::SdpOptions with_kappa(double k) {
  vc::SdpOptions o;
  o.kappa = k;
  return o;
}

vc::Matrix random_symmetric(std::mt19937_64& rng, int m, double scale = 1.0) {
  std::normal_distribution<double> normal;
  vc::Matrix a(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      a(i, j) = scale * normal(rng);
      a(j, i) = a(i, j);
    }
  }
  return a;
}

// Upper triangle of a0 + Σ x_k a_k as text.
std::vector<std::string> affine_entries(const std::vector<vc::Matrix>& a) {
  std::vector<std::string> out;
  const auto m = a[0].rows();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      std::string t = fixture::num(a[0](i, j));
      for (std::size_t k = 1; k < a.size(); ++k) {
        t += " + " + fixture::num(a[k](i, j)) + "*x" + std::to_string(k);
      }
      out.push_back(t);
    }
  }
  return out;
}

vc::Matrix random_orthogonal(std::mt19937_64& rng, int m) {
  Eigen::HouseholderQR<vc::Matrix> qr(random_symmetric(rng, m) +
                                      vc::Matrix::Identity(m, m) * 0.1);
  return qr.householderQ() * vc::Matrix::Identity(m, m);
}

}  // namespace

TEST(SdpProblem, Validation) {
  EXPECT_THROW(SDProblem::parse(1, "x1", 2, {"x1", "0"}), vc::DimensionMismatch);
  EXPECT_THROW(SDProblem::parse(1, "x1", 0, {}), vc::InputError);
  const auto p = diag_problem("-x1");
  const vc::Matrix a = p.phi().eval(vec({0.25}));
  EXPECT_EQ(a, a.transpose());
  EXPECT_DOUBLE_EQ(a(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(a(1, 1), -1.0);
}

TEST(SdpFeasibility, Examples) {
  const auto p = diag_problem("-x1");
  const auto a = vc::feasibility(p, vec({0}));
  EXPECT_DOUBLE_EQ(a.sigma_plus, 0.0);
  EXPECT_TRUE(a.feasible);
  const auto b = vc::feasibility(p, vec({0.5}));
  EXPECT_NEAR(b.sigma_plus, 0.5, 1e-14);
  EXPECT_FALSE(b.feasible);

  const auto q = SDProblem::parse(1, "-x1", 1, {"-1"}, 1, {"x1"});
  EXPECT_DOUBLE_EQ(vc::feasibility(q, vec({0})).psi_max, 0.0);
  EXPECT_DOUBLE_EQ(vc::feasibility(q, vec({-0.3})).psi_max, 0.3);
}

TEST(SdpGradQuadform, Examples) {
  const auto p = diag_problem("-x1");
  EXPECT_NEAR(vc::grad_quadform(p, vec({0}), vec({1, 0}))[0], 1.0, 1e-15);
  EXPECT_NEAR(vc::grad_quadform(p, vec({0}), vec({0, 1}))[0], 0.0, 1e-15);
  const auto c = SDProblem::parse(2, "x1", 2, {"1", "2", "3"});
  EXPECT_EQ(vc::grad_quadform(c, vec({0, 0}), vec({0.6, 0.8})), vc::Vector::Zero(2));
  EXPECT_THROW(vc::grad_quadform(p, vec({0}), vec({1, 1})), vc::NotUnit);
}

TEST(SdpCertify, Examples) {
  const auto a = vc::certify(diag_problem("-x1"), vec({0}), with_kappa(1));
  EXPECT_EQ(a.status, Verdict::Verified);
  ASSERT_EQ(a.atoms.size(), 1u);
  EXPECT_NEAR(std::abs(a.atoms[0].index[0]), 1.0, 1e-12);
  EXPECT_NEAR(a.atoms[0].weight, 1.0, 1e-12);
  EXPECT_NEAR(a.bound_lhs, 1.0, 1e-12);
  EXPECT_NEAR(a.bound_rhs, 2.0, 1e-12);
  EXPECT_EQ(a.kernel_dim, 1);

  EXPECT_THROW(vc::certify(diag_problem("x1"), vec({0}), with_kappa(1)), vc::NoMultiplier);
  EXPECT_THROW(vc::certify(diag_problem("-x1"), vec({0.5}), with_kappa(1)),
               vc::InfeasiblePoint);

  const auto q = SDProblem::parse(1, "-x1", 1, {"-1"}, 1, {"x1"});
  const auto c = vc::certify(q, vec({0}), with_kappa(1));
  EXPECT_EQ(c.status, Verdict::Verified);
  EXPECT_TRUE(c.atoms.empty());
  ASSERT_EQ(c.mu.rows(), 1);
  EXPECT_NEAR(c.mu(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(c.bound_lhs, 1.0, 1e-12);
}

TEST(SdpCertify, OffDiagonalEqualityCountsTwice) {
  // Ψ = [[0, x], [x, 0]]: ΣΣμΨ contributes 2μ₁₂, so μ₁₂ = 1/2 and ΣΣ|μ| = 1.
  const auto p = SDProblem::parse(1, "-x1", 1, {"-1"}, 2, {"0", "x1", "0"});
  const auto c = vc::certify(p, vec({0}), with_kappa(1));
  EXPECT_EQ(c.status, Verdict::Verified);
  EXPECT_NEAR(std::abs(c.mu(0, 1)), 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(c.mu(0, 1), c.mu(1, 0));
  EXPECT_NEAR(c.bound_lhs, 1.0, 1e-12);
}

TEST(SdpCertify, BoundExceededAndEstimatedKappa) {
  const auto a = vc::certify(diag_problem("-x1"), vec({0}), with_kappa(0.25));
  EXPECT_EQ(a.status, Verdict::Refuted);
  EXPECT_TRUE(a.bound_exceeded());

  const auto b = vc::certify(diag_problem("-x1"), vec({0}));
  EXPECT_EQ(b.status, Verdict::Verified);
  EXPECT_EQ(b.kappa_source, vc::KappaSource::Estimated);
  EXPECT_NEAR(b.kappa, 1.0, 1e-6);
}

TEST(SdpCertify, KernelOfDimensionTwo) {
  // Φ(x) = diag(x1, x2, −1) at 0, ϑ = −x1 − 2x2: λ₁ = 1 on e₁ and λ₂ = 2 on e₂.
  const auto p = SDProblem::parse(2, "-x1 - 2*x2", 3, {"x1", "0", "0", "x2", "0", "-1"});
  const auto c = vc::certify(p, vec({0, 0}), with_kappa(2));
  EXPECT_EQ(c.status, Verdict::Verified) << c.detail;
  EXPECT_EQ(c.kernel_dim, 2);
  EXPECT_EQ(c.candidates, 2 + 3);
  EXPECT_LE(c.atoms.size(), 2u);
  EXPECT_NEAR(c.bound_lhs, 3.0, 1e-9);
  EXPECT_LE(c.residual, 1e-9);
}

TEST(SdpRecheck, Mutation) {
  const auto p = diag_problem("-x1");
  const auto c = vc::certify(p, vec({0}), with_kappa(1));
  EXPECT_EQ(vc::recheck_sdp(p, c).status, Verdict::Verified);
  auto bad = c;
  bad.atoms[0].index = vec({0, 1});
  EXPECT_EQ(vc::recheck_sdp(p, bad).status, Verdict::Refuted);
  bad = c;
  bad.atoms[0].index = vec({2, 0});
  EXPECT_EQ(vc::recheck_sdp(p, bad).status, Verdict::Refuted);
  bad = c;
  bad.atoms[0].weight = 1.5;
  EXPECT_EQ(vc::recheck_sdp(p, bad).status, Verdict::Refuted);
}

TEST(SdpReduction, Examples) {
  const auto p = diag_problem("-x1");
  const auto sip = vc::reduce_to_sip(p);
  const auto a = vc::sup_violation(sip, vec({0.5}));
  EXPECT_NEAR(a.value, 0.5, 1e-9);
  const double angle = std::fmod(a.s[0], std::numbers::pi);
  EXPECT_NEAR(std::min(angle, std::numbers::pi - angle), 0.0, 1e-4);

  const auto q = SDProblem::parse(1, "x1", 2, {"0", "1", "0"});
  const auto b = vc::sup_violation(vc::reduce_to_sip(q), vec({0}));
  EXPECT_NEAR(b.value, 1.0, 1e-9);
  EXPECT_NEAR(b.s[0], std::numbers::pi / 4, 1e-4);

  const auto big = SDProblem::parse(1, "x1", 4, std::vector<std::string>(10, "x1"));
  EXPECT_THROW(vc::reduce_to_sip(big), vc::DimensionTooLarge);

  const auto one = SDProblem::parse(1, "x1", 1, {"x1 - 1"});
  EXPECT_NEAR(vc::sup_violation(vc::reduce_to_sip(one), vec({3})).value, 2.0, 1e-12);
}

// Invariants

TEST(SdpProperty, EigenvalueAndSipRoutesAgree) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 2 + trial % 2;
    const std::vector<vc::Matrix> a = {random_symmetric(rng, m), random_symmetric(rng, m)};
    const auto p = SDProblem::parse(1, "x1", static_cast<std::size_t>(m), affine_entries(a));
    const vc::Vector x = vec({std::uniform_real_distribution<double>(-1, 1)(rng)});
    const double sigma = vc::feasibility(p, x).sigma_plus;
    const double sup = vc::sup_violation(vc::reduce_to_sip(p), x).violation;
    EXPECT_NEAR(sigma, sup, 1e-6) << "trial " << trial << " m " << m;
  }
}

TEST(SdpProperty, VerifiedCertificatesSatisfyTheSystem) {
  std::mt19937_64 rng(5);
  int verified = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 2 + trial % 3;
    // Φ(x) = V diag(0, …, negative) Vᵀ + x1 A1 + x2 A2 at x = 0 is feasible with a kernel.
    const vc::Matrix v = random_orthogonal(rng, m);
    vc::Vector d = vc::Vector::Zero(m);
    for (int k = 1 + trial % 2; k < m; ++k) d[k] = -1.0 - k;
    const vc::Matrix a0 = v * d.asDiagonal() * v.transpose();
    const std::vector<vc::Matrix> a = {a0, random_symmetric(rng, m), random_symmetric(rng, m)};
    const vc::Vector s0 = v.col(0);
    // ϑ chosen as −λ·∇Φ(s0,s0) so that one atom suffices.
    const double g1 = s0.dot(a[1] * s0);
    const double g2 = s0.dot(a[2] * s0);
    const std::string obj = fixture::num(-g1) + "*x1 + " + fixture::num(-g2) + "*x2";
    const auto p = SDProblem::parse(2, obj, static_cast<std::size_t>(m), affine_entries(a));
    vc::SdpCertificate c;
    try {
      c = vc::certify(p, vec({0, 0}), with_kappa(10));
    } catch (const vc::NoMultiplier&) {
      ADD_FAILURE() << "trial " << trial;
      continue;
    }
    if (c.status != Verdict::Verified) continue;
    ++verified;
    EXPECT_LE(c.residual, 1e-7);
    EXPECT_LE(c.complementarity, 10 * c.tol_ker);
    EXPECT_LE(static_cast<int>(c.atoms.size()), 2);
    for (const auto& atom : c.atoms) EXPECT_NEAR(atom.index.norm(), 1.0, 1e-10);
  }
  EXPECT_GE(verified, 25);
}

TEST(SdpProperty, OrthogonalChangeOfBasis) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 2 + trial % 3;
    const vc::Matrix v = random_orthogonal(rng, m);
    vc::Vector d = vc::Vector::Zero(m);
    for (int k = 1; k < m; ++k) d[k] = -1.0;
    const std::vector<vc::Matrix> a = {v * d.asDiagonal() * v.transpose(),
                                       random_symmetric(rng, m)};
    const double g = v.col(0).dot(a[1] * v.col(0));
    const double kappa = trial % 2 == 0 ? 10.0 : 0.4 / std::max(std::abs(g), 1e-3);
    const std::string obj = fixture::num(-g) + "*x1";
    const vc::Matrix q = random_orthogonal(rng, m);
    std::vector<vc::Matrix> rotated;
    for (const auto& ak : a) rotated.push_back(q.transpose() * ak * q);

    const auto p1 = SDProblem::parse(1, obj, static_cast<std::size_t>(m), affine_entries(a));
    const auto p2 =
        SDProblem::parse(1, obj, static_cast<std::size_t>(m), affine_entries(rotated));
    const auto c1 = vc::certify(p1, vec({0}), with_kappa(kappa));
    const auto c2 = vc::certify(p2, vec({0}), with_kappa(kappa));
    EXPECT_EQ(c1.status, c2.status) << "trial " << trial;
    EXPECT_EQ(c1.bound_exceeded(), c2.bound_exceeded());
    EXPECT_NEAR(c1.bound_lhs, c2.bound_lhs, 1e-8);
    ASSERT_EQ(c1.atoms.size(), 1u);
    ASSERT_EQ(c2.atoms.size(), 1u);
    const vc::Vector mapped = q.transpose() * c1.atoms[0].index;
    EXPECT_NEAR(std::abs(mapped.dot(c2.atoms[0].index)), 1.0, 1e-8);
  }
}
