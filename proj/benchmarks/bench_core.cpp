#include <vector>

#include <benchmark/benchmark.h>

#include "orthant/active_dims.hpp"
#include "orthant/bench.hpp"
#include "orthant/gauss.hpp"
#include "orthant/qmc.hpp"
#include "orthant/remainder.hpp"

namespace {

using namespace orthant;

GaussianSpec equicorrelated(int d, double rho) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(d, d, rho);
  c.diagonal().setOnes();
  return GaussianSpec(Eigen::VectorXd::Zero(d), c);
}

void BM_SobolPoints(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(lowdiscrepancy_points({dim, SequenceKind::Sobol, 0}, 4096));
  state.SetItemsProcessed(state.iterations() * 4096);
}
BENCHMARK(BM_SobolPoints)->Arg(10)->Arg(100);

void BM_MvnCdf(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const GaussianSpec spec = equicorrelated(d, 0.5);
  const Eigen::VectorXd upper = Eigen::VectorXd::Constant(d, 1.0);
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(mvn_cdf(spec, upper, {}, rng).value);
}
BENCHMARK(BM_MvnCdf)->Arg(10)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_TruncatedDraws(benchmark::State& state) {
  const GaussianSpec spec = equicorrelated(static_cast<int>(state.range(0)), 0.5);
  TruncatedSampler sampler(spec, 1.5, Rng(2));
  for (auto _ : state) benchmark::DoNotOptimize(sampler.draw(256));
  state.counters["acceptance"] = sampler.acceptance_rate();
}
BENCHMARK(BM_TruncatedDraws)->Arg(5)->Arg(20);

// One inner round of the remainder sampler over 1024 anchors.
void BM_InnerDraws(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const GaussianSpec spec = equicorrelated(d, 0.5);
  std::vector<int> active{0, 1, 2, 3, 4};
  GaussianNestedSampler sampler(spec, active, 2.0, Rng(3));
  sampler.setup();
  sampler.draw_outer(1024);
  sampler.prepare_inner(0, 1024);
  std::vector<Rng> rngs;
  for (int i = 0; i < 1024; ++i) rngs.emplace_back(i);
  std::vector<double> g(1024);
  for (auto _ : state) {
    sampler.draw_inner(0, 1024, rngs, g);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_InnerDraws)->Arg(50)->Arg(200);

void BM_ChooseQ(benchmark::State& state) {
  bench::TestcaseParams p;
  p.d = static_cast<int>(state.range(0));
  const bench::Testcase tc = bench::make_testcase(p);
  for (auto _ : state)
    benchmark::DoNotOptimize(choose_q(tc.spec, 5.0, {}, {}, Stream(4)).q());
}
BENCHMARK(BM_ChooseQ)->Arg(300)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
