#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "hybridsim/scenario.hpp"

using namespace hybridsim;

namespace {

const SolvedNetwork& four_bus() {
  static const SolvedNetwork net = solve_network(build_four_bus(0.1));
  return net;
}

void BM_EmtStep(benchmark::State& state) {
  EmtSystem emt(four_bus(), {});
  for (auto _ : state) emt.step();
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EmtStep);

void BM_EstimatePhasor(benchmark::State& state) {
  const double dt = 20e-6;
  std::vector<double> x(2000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(kTwoPi * 60.0 * dt * static_cast<double>(i) + 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_phasor(x, 0.0, dt, x.size() - 1, 60.0, 1.0, 1.0));
}
BENCHMARK(BM_EstimatePhasor);

void BM_TsSolve(benchmark::State& state) {
  SeqNetwork ts(four_bus(), {3, 4}, TsMode::ThreeSeq, {3});
  for (auto _ : state) {
    ts.inject(3, Sequence::Zero, {0.01, 0.0});
    benchmark::DoNotOptimize(ts.solve_step());
  }
}
BENCHMARK(BM_TsSolve);

void BM_PowerFlow(benchmark::State& state) {
  const NetworkModel m = build_four_bus(0.1);
  for (auto _ : state) benchmark::DoNotOptimize(solve_power_flow(m));
}
BENCHMARK(BM_PowerFlow);

void BM_HybridRun(benchmark::State& state) {
  HybridOptions opt;
  opt.emt.t_start = -0.1;
  opt.pipelined = state.range(0) != 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(run_hybrid(four_bus(), {1, 2, 3}, BoundarySpec{}, {}, 0.1, opt));
}
BENCHMARK(BM_HybridRun)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
