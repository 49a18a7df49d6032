#include <benchmark/benchmark.h>

#include "lapkit/envcore.hpp"
#include "lapkit/kinematics.hpp"

namespace {

void BM_PtsdToPose(benchmark::State& state) {
  lapkit::Rng rng(1);
  const lapkit::RcmFrame rcm{lapkit::Vec3(10, -80, 120), lapkit::Vec3(40, 5, 0)};
  const lapkit::PtsdState q{rng.uniform(-60, 60), rng.uniform(-60, 60), rng.uniform(-180, 180),
                            rng.uniform(20, 200)};
  for (auto _ : state) benchmark::DoNotOptimize(lapkit::ptsd_to_pose(q, rcm));
}
BENCHMARK(BM_PtsdToPose);

void BM_ClampAction(benchmark::State& state) {
  const lapkit::RcmFrame rcm{lapkit::Vec3(0, -90, 140), lapkit::Vec3(30, 0, 0)};
  lapkit::InstrumentLimits limits;
  lapkit::PtsdState q{5, -3, 0, 90};
  const double action[4] = {0.3, -0.2, 0.1, 0.5};
  for (auto _ : state) {
    benchmark::DoNotOptimize(lapkit::clamp_action(q, action, limits, rcm, 0.1));
  }
}
BENCHMARK(BM_ClampAction);

}  // namespace
