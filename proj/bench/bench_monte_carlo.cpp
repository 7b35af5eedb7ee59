// Serial vs OpenMP Monte-Carlo on a small cactus network.
#include <benchmark/benchmark.h>

#include "gasflow/generators.hpp"
#include "gasflow/monte_carlo.hpp"

using namespace gasflow;

namespace {

const Instance& instance() {
  static const Instance inst = [] {
    Rng rng(11);
    GeneratorOptions o;
    o.compressor_prob = 0.3;
    return random_cactus(rng, 2, 5, 5, o);
  }();
  return inst;
}

McConfig config(std::size_t samples, int jobs) {
  const Instance& in = instance();
  McConfig cfg;
  cfg.q0 = in.q;
  cfg.n_samples = samples;
  cfg.sigma = 0.3;
  cfg.balancing = in.net.num_nodes() - 1;
  cfg.seed = 42;
  cfg.jobs = jobs;
  cfg.record_timing = false;
  return cfg;
}

void BM_Serial(benchmark::State& state) {
  const McConfig cfg = config(std::size_t(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(run_monte_carlo_serial(instance().net, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Parallel(benchmark::State& state) {
  const McConfig cfg = config(std::size_t(state.range(0)), int(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(run_monte_carlo(instance().net, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.counters["threads"] = double(state.range(1));
}

}  // namespace

BENCHMARK(BM_Serial)->Arg(32)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Parallel)
    ->ArgsProduct({{32}, {1, 2, 4}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

BENCHMARK_MAIN();
