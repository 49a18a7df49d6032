#include <benchmark/benchmark.h>

#include "lapkit/envs.hpp"
#include "lapkit/planner.hpp"

namespace {

void BM_RrtDeflect(benchmark::State& state) {
  lapkit::DeflectSpheresEnv env(lapkit::default_config(lapkit::EnvId::kDeflectSpheres));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    state.PauseTiming();
    env.reset(++seed);
    const lapkit::PlanRequest request = lapkit::deflect_plan_request(env, seed);
    state.ResumeTiming();
    benchmark::DoNotOptimize(lapkit::rrt_plan(request));
  }
}
BENCHMARK(BM_RrtDeflect)->Unit(benchmark::kMillisecond);

void BM_SegmentFree(benchmark::State& state) {
  lapkit::DeflectSpheresEnv env(lapkit::default_config(lapkit::EnvId::kDeflectSpheres));
  env.reset(1);
  const lapkit::PlanRequest request = lapkit::deflect_plan_request(env, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lapkit::segment_free(request.start, request.goal, request.space,
                                                  request.world, request.step_size / 4.0));
  }
}
BENCHMARK(BM_SegmentFree)->Unit(benchmark::kMicrosecond);

}  // namespace
