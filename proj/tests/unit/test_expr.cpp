#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "varcert/errors.hpp"
#include "varcert/expr.hpp"

namespace vc = varcert;

namespace {

const std::vector<std::string> kX12 = {"x1", "x2"};

vc::Vector pt(std::initializer_list<double> v) {
  vc::Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

// Random smooth expression text over x1..xn; every function stays inside
// its domain on the sample box [-1, 1]^n.
std::string random_expr(std::mt19937_64& rng, int n, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 9);
  std::uniform_int_distribution<int> var(1, n);
  std::uniform_real_distribution<double> num(-2.0, 2.0);
  auto sub = [&] { return random_expr(rng, n, depth - 1); };
  char buf[64];
  switch (pick(rng)) {
    case 0:
      return "x" + std::to_string(var(rng));
    case 1:
      std::snprintf(buf, sizeof buf, "%.3f", num(rng));
      return buf;
    case 2:
      return "(" + sub() + " + " + sub() + ")";
    case 3:
      return "(" + sub() + " - " + sub() + ")";
    case 4:
      return "(" + sub() + " * " + sub() + ")";
    case 5:
      return "sin(" + sub() + ")";
    case 6:
      return "cos(" + sub() + ")";
    case 7:
      return "(" + sub() + ")^2";
    case 8:
      return "sqrt(1 + (" + sub() + ")^2)";
    default:
      return sub() + " / (2 + sin(" + sub() + "))";
  }
}

}  // namespace

TEST(Expr, ParsesPolynomialWithSine) {
  const vc::Expr e = vc::parse("x1^2 + sin(x2)", kX12);
  EXPECT_EQ(e.op(), vc::Op::Add);
  EXPECT_EQ(e.arg(0).op(), vc::Op::Pow);
  EXPECT_EQ(e.arg(1).op(), vc::Op::Sin);
  EXPECT_DOUBLE_EQ(vc::value(e, pt({2, 0})), 4.0);
}

TEST(Expr, UnknownVariableIsReported) {
  try {
    vc::parse("x3", kX12);
    FAIL() << "expected UnknownVariable";
  } catch (const vc::UnknownVariable& e) {
    EXPECT_EQ(e.name(), "x3");
  }
}

TEST(Expr, SyntaxErrorCarriesPosition) {
  try {
    vc::parse("x1 + * x2", kX12);
    FAIL() << "expected SyntaxError";
  } catch (const vc::SyntaxError& e) {
    EXPECT_EQ(e.position(), 5u);
  }
  EXPECT_THROW(vc::parse("", kX12), vc::SyntaxError);
  EXPECT_THROW(vc::parse("sin(x1", kX12), vc::SyntaxError);
  EXPECT_THROW(vc::parse("max(x1)", kX12), vc::SyntaxError);
}

TEST(Expr, MixedDecisionAndIndexVariables) {
  const std::vector<std::string> vars = {"x1", "s1"};
  const vc::Expr e = vc::parse("s1*x1", vars);
  EXPECT_EQ(e.op(), vc::Op::Mul);
  EXPECT_DOUBLE_EQ(vc::value(e, pt({3, 0.5})), 1.5);
  const vc::Gradient g = vc::grad(e, pt({0, 1}));
  EXPECT_DOUBLE_EQ(g.value[0], 1.0);
}

TEST(Expr, UnaryMinusBindsLooserThanPower) {
  const std::vector<std::string> vars = {"x1", "s1"};
  const vc::Expr e = vc::parse("-(s1-0.5)^2 + x1", vars);
  EXPECT_DOUBLE_EQ(vc::value(e, pt({0.25, 0.5})), 0.25);
  EXPECT_DOUBLE_EQ(vc::value(e, pt({0.0, 0.0})), -0.25);
  EXPECT_DOUBLE_EQ(vc::value(vc::parse("-x1^2", kX12), pt({3, 0})), -9.0);
  EXPECT_DOUBLE_EQ(vc::value(vc::parse("2^-1", kX12), pt({0, 0})), 0.5);
}

TEST(Expr, DomainViolations) {
  const vc::Evaluation ev = vc::eval(vc::parse("log(x1)", {"x1"}), pt({0}));
  EXPECT_TRUE(ev.domain_violation);
  EXPECT_TRUE(std::isinf(ev.value));
  EXPECT_TRUE(vc::eval(vc::parse("sqrt(x1)", {"x1"}), pt({-1})).domain_violation);
  EXPECT_TRUE(vc::eval(vc::parse("1/x1", {"x1"}), pt({0})).domain_violation);
  EXPECT_FALSE(vc::eval(vc::parse("sqrt(x1)", {"x1"}), pt({0})).domain_violation);
}

TEST(Expr, DimensionMismatchOnWrongPoint) {
  EXPECT_THROW(vc::eval(vc::parse("x1", kX12), pt({1})), vc::DimensionMismatch);
}

TEST(Expr, GradientExamples) {
  const vc::Gradient g = vc::grad(vc::parse("x1^2 + sin(x2)", kX12), pt({2, 0}));
  EXPECT_DOUBLE_EQ(g.value[0], 4.0);
  EXPECT_DOUBLE_EQ(g.value[1], 1.0);
  EXPECT_FALSE(g.kink);
  const vc::Gradient c = vc::grad(vc::parse("7", kX12), pt({5, -3}));
  EXPECT_EQ(c.value, vc::Vector::Zero(2));
}

TEST(Expr, KinkUsesFirstBranch) {
  const vc::Gradient a = vc::grad(vc::parse("abs(x1)", {"x1"}), pt({0}));
  EXPECT_TRUE(a.kink);
  EXPECT_DOUBLE_EQ(a.value[0], -1.0);
  const vc::Gradient m = vc::grad(vc::parse("max(x1, x2)", kX12), pt({1, 1}));
  EXPECT_TRUE(m.kink);
  EXPECT_DOUBLE_EQ(m.value[0], 1.0);
  EXPECT_DOUBLE_EQ(m.value[1], 0.0);
  EXPECT_FALSE(vc::grad(vc::parse("abs(x1)", {"x1"}), pt({2})).kink);
}

TEST(Expr, RoundTripIsStructurallyIdentical) {
  std::mt19937_64 rng(42);
  for (int k = 0; k < 200; ++k) {
    const vc::Expr e = vc::parse(random_expr(rng, 3, 4), vc::numbered_names("x", 3));
    const vc::Expr again = vc::parse(e.to_string(), e.variables());
    EXPECT_EQ(e, again) << e.to_string();
  }
  const vc::Expr neg = vc::parse("-3 * x1", kX12);
  EXPECT_EQ(vc::parse(neg.to_string(), kX12), neg);
}

TEST(Expr, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> box(-1.0, 1.0);
  const auto vars = vc::numbered_names("x", 3);
  for (int k = 0; k < 100; ++k) {
    const vc::Expr e = vc::parse(random_expr(rng, 3, 4), vars);
    vc::Vector x(3);
    for (int i = 0; i < 3; ++i) x[i] = box(rng);
    const vc::Gradient g = vc::grad(e, x);
    ASSERT_FALSE(g.domain_violation);
    for (int i = 0; i < 3; ++i) {
      vc::Vector xp = x;
      vc::Vector xm = x;
      xp[i] += 1e-6;
      xm[i] -= 1e-6;
      const double fd = (vc::value(e, xp) - vc::value(e, xm)) / 2e-6;
      EXPECT_NEAR(g.value[i], fd, 1e-5) << e.to_string();
    }
  }
}

TEST(Expr, GradientIsAdditiveAndFollowsChainRule) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> box(-1.0, 1.0);
  const auto vars = vc::numbered_names("x", 2);
  for (int k = 0; k < 50; ++k) {
    const std::string a = random_expr(rng, 2, 3);
    const std::string b = random_expr(rng, 2, 3);
    vc::Vector x(2);
    x << box(rng), box(rng);
    const vc::Vector ga = vc::grad(vc::parse(a, vars), x).value;
    const vc::Vector gb = vc::grad(vc::parse(b, vars), x).value;
    const vc::Vector gs = vc::grad(vc::parse("(" + a + ") + (" + b + ")", vars), x).value;
    EXPECT_LT((gs - ga - gb).norm(), 1e-12);
    const double inner = vc::value(vc::parse(a, vars), x);
    const vc::Vector gc = vc::grad(vc::parse("sin(cos(" + a + "))", vars), x).value;
    const vc::Vector expect = std::cos(std::cos(inner)) * -std::sin(inner) * ga;
    EXPECT_LT((gc - expect).norm(), 1e-12);
  }
}

TEST(SmoothMap, ValueAndJacobianShapes) {
  const std::vector<std::string> texts = {"x1*x2", "x1 - x2", "exp(x1)"};
  for (auto policy : {vc::CachePolicy::None, vc::CachePolicy::LastPoint}) {
    const vc::SmoothMap f = vc::SmoothMap::parse(texts, kX12, policy);
    const vc::Vector x = pt({1, 2});
    EXPECT_EQ(f.eval(x).size(), 3);
    const vc::Matrix j = f.jacobian(x);
    EXPECT_EQ(j.rows(), 3);
    EXPECT_EQ(j.cols(), 2);
    EXPECT_DOUBLE_EQ(j(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(j(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(j(2, 0), std::exp(1.0));
    EXPECT_DOUBLE_EQ(f.jacobian(x)(1, 1), -1.0);
    EXPECT_DOUBLE_EQ(f.eval(pt({0, 0}))[2], 1.0);
  }
}

TEST(SmoothMap, AffineAndIdentity) {
  vc::Matrix a(2, 2);
  a << 1, 2, 3, 4;
  const vc::Vector b = pt({1, -1});
  const vc::SmoothMap f = vc::SmoothMap::affine(a, b);
  const vc::Vector x = pt({0.5, -2});
  EXPECT_LT((f.eval(x) - (a * x + b)).norm(), 1e-14);
  EXPECT_LT((f.jacobian(x) - a).norm(), 1e-14);
  const vc::SmoothMap id = vc::SmoothMap::identity(3);
  EXPECT_EQ(id.jacobian(pt({1, 2, 3})), vc::Matrix::Identity(3, 3));
}
