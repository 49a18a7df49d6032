#include <benchmark/benchmark.h>

#include "lapkit/envs.hpp"

namespace {

// One env step with uniform random actions; resets are excluded from timing.
void BM_EnvStep(benchmark::State& state) {
  const auto id = static_cast<lapkit::EnvId>(state.range(0));
  auto env = lapkit::make_env(id);
  lapkit::Rng rng(7);
  std::uint64_t seed = 0;
  env->reset(seed);
  std::vector<double> action(env->action_dim());
  for (auto _ : state) {
    if (env->done()) {
      state.PauseTiming();
      env->reset(++seed);
      state.ResumeTiming();
    }
    for (double& a : action) a = rng.uniform(-1.0, 1.0);
    benchmark::DoNotOptimize(env->step(action));
  }
  state.SetLabel(lapkit::to_string(id));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EnvStep)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);

void BM_EnvReset(benchmark::State& state) {
  const auto id = static_cast<lapkit::EnvId>(state.range(0));
  auto env = lapkit::make_env(id);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(env->reset(++seed));
  state.SetLabel(lapkit::to_string(id));
}
BENCHMARK(BM_EnvReset)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);

}  // namespace
