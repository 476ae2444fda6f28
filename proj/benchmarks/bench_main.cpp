#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "varcert/calculus.hpp"
#include "varcert/funcspace.hpp"
#include "varcert/sdp.hpp"
#include "varcert/sip.hpp"
#include "varcert/solvers.hpp"

namespace vc = varcert;

namespace {

vc::Matrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g;
  vc::Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  }
  return m;
}

// min cᵀx over [−1,1]ⁿ cut by n random halfspaces.
void BM_LpSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  vc::Matrix a(3 * n, n);
  a << random_matrix(rng, n, n), vc::Matrix::Identity(n, n), -vc::Matrix::Identity(n, n);
  vc::Vector b = vc::Vector::Ones(3 * n);
  const vc::LPProblem p = vc::LPProblem::make(
      random_matrix(rng, n, 1).col(0), a, b,
      std::vector<vc::RowSense>(static_cast<std::size_t>(3 * n), vc::RowSense::Le));
  for (auto _ : state) benchmark::DoNotOptimize(vc::lp_solve(p));
}
BENCHMARK(BM_LpSolve)->Arg(4)->Arg(16)->Arg(64);

void BM_Eigh(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  const vc::Matrix r = random_matrix(rng, m, m);
  const vc::Matrix a = r + r.transpose();
  for (auto _ : state) benchmark::DoNotOptimize(vc::eigh(a));
}
BENCHMARK(BM_Eigh)->Arg(3)->Arg(10)->Arg(30);

void BM_SampledSubderivative(benchmark::State& state) {
  const vc::FnObject phi = vc::FnObject::composite(
      vc::FnObject::distance(vc::Polyhedron::nonpositive_orthant(2)),
      vc::SmoothMap::parse(std::vector<std::string>{"x1^2 - x2", "x1 + x2^3"},
                           vc::numbered_names("x", 2)));
  const vc::Vector x = vc::Vector::Zero(2);
  const vc::Vector u = vc::Vector::Ones(2).normalized();
  for (auto _ : state) benchmark::DoNotOptimize(vc::subderivative_sampled(phi, x, u));
}
BENCHMARK(BM_SampledSubderivative);

void BM_SipCertify(benchmark::State& state) {
  const vc::SIProblem p = vc::SIProblem::parse(
      2, "-x1 - x2", "cos(s1)*x1 + sin(s1)*x2 - 1",
      {vc::Vector::Constant(1, 0.0), vc::Vector::Constant(1, 1.5707963267948966)});
  vc::Vector x(2);
  x << 0.7071067811865476, 0.7071067811865476;
  vc::SipOptions o;
  o.kappa = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(vc::certify(p, x, o));
}
BENCHMARK(BM_SipCertify)->Unit(benchmark::kMillisecond);

void BM_SdpCertify(benchmark::State& state) {
  const vc::SDProblem p = vc::SDProblem::parse(
      2, "-x1 - x2", 3, {"x1", "0", "0", "x2", "0", "-1"});
  vc::SdpOptions o;
  o.kappa = 1.0;
  const vc::Vector x = vc::Vector::Zero(2);
  for (auto _ : state) benchmark::DoNotOptimize(vc::certify(p, x, o));
}
BENCHMARK(BM_SdpCertify)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
