#include <benchmark/benchmark.h>

#include "lapkit/envs.hpp"
#include "lapkit/sensors.hpp"

namespace {

void BM_RenderEnv(benchmark::State& state) {
  lapkit::EnvConfig config = lapkit::default_config(lapkit::EnvId::kDeflectSpheres);
  config.resolution = static_cast<int>(state.range(0));
  config.observation_type = lapkit::ObservationType::kRgbd;
  auto env = lapkit::make_env(lapkit::EnvId::kDeflectSpheres, config);
  env->reset(3);
  const lapkit::RenderScene scene = env->scene();
  const lapkit::CameraModel camera = env->camera();
  for (auto _ : state) benchmark::DoNotOptimize(lapkit::render(scene, camera));
  state.counters["triangles"] = static_cast<double>(scene.triangles().size());
}
BENCHMARK(BM_RenderEnv)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_PointCloud(benchmark::State& state) {
  auto env = lapkit::make_env(lapkit::EnvId::kTissueManipulation);
  env->reset(1);
  const lapkit::CameraModel camera = env->camera();
  const lapkit::FrameBuffer frame = env->render();
  for (auto _ : state) benchmark::DoNotOptimize(lapkit::depth_to_pointcloud(frame, camera));
}
BENCHMARK(BM_PointCloud)->Unit(benchmark::kMicrosecond);

}  // namespace
