#include <algorithm>
#include <cmath>

#include "internal.hpp"
#include "lapkit/error.hpp"

namespace lapkit {

namespace {

constexpr double kStillThreshold = 0.01;  // mm per step
constexpr int kStuckSteps = 50;
constexpr double kTissueRadius = 0.5;  // mm

}  // namespace

TissueManipulationEnv::TissueManipulationEnv(EnvConfig config)
    : Environment(EnvId::kTissueManipulation, std::move(config)),
      params_(std::get<TissueManipulationParams>(this->config().params)) {
  if (!this->config().cartesian) {
    fail(ErrorCode::kInvalidConfig, "tissue_manipulation needs cartesian limits");
  }
  limits_ = *this->config().cartesian;
  const auto& p = params_;
  if (p.grid_resolution < 4 || p.grid_resolution > 64) {
    fail(ErrorCode::kInvalidConfig, "grid_resolution must lie in [4, 64]");
  }
  if (!(p.grid_spacing > 0.0) || !(p.tissue_mass > 0.0)) {
    fail(ErrorCode::kInvalidConfig, "grid_spacing and tissue_mass must be positive");
  }
  if (!(p.tissue_stiffness > 0.0) || p.tissue_stiffness > 1.0) {
    fail(ErrorCode::kInvalidConfig, "tissue_stiffness must lie in (0, 1]");
  }
  if (!(p.success_threshold > 0.0) || p.min_reset_distance < 0.0) {
    fail(ErrorCode::kInvalidConfig, "success_threshold must be positive, min_reset_distance >= 0");
  }
}

ToolCapsule TissueManipulationEnv::grasper_capsule() const {
  ToolCapsule c;
  c.endpoint_a = grasper_ + Vec3(0.0, 0.0, 60.0);
  c.endpoint_b = grasper_;
  c.radius = 2.0;
  c.jaw_closed = true;
  return c;
}

void TissueManipulationEnv::on_reset(Rng& rng) {
  const auto& p = params_;
  const auto n = static_cast<std::uint32_t>(p.grid_resolution);
  const double width = p.grid_spacing * (n - 1);
  world_ = SoftWorld{};
  world_.ground_height = 0.0;

  PatchSpec spec;
  spec.name = "tissue";
  spec.origin = Vec3(-0.5 * width, 0.0, kTissueRadius);
  spec.resolution = n;
  spec.spacing = p.grid_spacing;
  spec.total_mass = p.tissue_mass;
  spec.stiffness = p.tissue_stiffness;
  spec.collision_radius = kTissueRadius;
  const BodyId tissue = add_patch(world_, spec);
  const std::uint32_t first = world_.body(tissue).first;

  const std::uint32_t grasp_index = first + (n - 1) * n + n / 2;
  grasper_ = world_.particles()[grasp_index].position;
  world_.register_tool();
  attach(world_, 0, grasp_index, grasper_capsule());

  // Landmark and displacement are drawn together: rows near the fixed edge
  // move little, so a small fraction cannot reach the minimum distance.
  bool placed = false;
  for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
    std::uint32_t row = n / 2;
    std::uint32_t col = n / 2;
    if (p.randomize_landmark) {
      row = 2 + static_cast<std::uint32_t>(rng.index(n - 3));  // [2, n-2]
      col = 1 + static_cast<std::uint32_t>(rng.index(n - 2));  // [1, n-2]
    }
    landmark_particle_ = first + row * n + col;
    const double fraction = static_cast<double>(row) / (n - 1);
    const Vec3 d(rng.uniform(-15.0, 15.0), rng.uniform(-10.0, 15.0), rng.uniform(0.0, 15.0));
    target_ = landmark() + fraction * d;
    placed = image_distance() >= p.min_reset_distance;
  }
  if (!placed) {
    fail(ErrorCode::kInvalidConfig, "no target satisfies min_reset_distance = " +
                                        std::to_string(p.min_reset_distance));
  }
  const Vec3 rest = landmark();
  previous_landmark_ = rest;
  still_steps_ = 0;
}

Vec3 TissueManipulationEnv::landmark() const {
  return world_.particles()[landmark_particle_].position;
}

double TissueManipulationEnv::image_distance() const {
  const CameraModel cam = camera();
  const Vec3 l = to_camera_frame(landmark(), cam);
  const Vec3 t = to_camera_frame(target_, cam);
  if (l.z() <= cam.near || t.z() <= cam.near) return 1e3;
  const double du = l.x() / l.z() - t.x() / t.z();
  const double dv = l.y() / l.z() - t.y() / t.z();
  return std::hypot(du, dv) * t.z();
}

void TissueManipulationEnv::apply_frame(std::span<const double> action, double dt, FrameFlags& flags) {
  const Vec3 before = grasper_;
  Vec3 next = grasper_;
  for (int i = 0; i < 3; ++i) next[i] += action[static_cast<std::size_t>(i)] * limits_.max_speed * dt;
  if (limits_.workspace.contains(next)) {
    grasper_ = next;
  } else {
    flags.workspace_violated = true;
  }
  const ToolCapsule tool = grasper_capsule();
  const SoftWorld backup = world_;
  try {
    step_world(world_, std::span<const ToolCapsule>(&tool, 1), dt, config().solver);
  } catch (const Error&) {
    world_ = backup;
    grasper_ = before;
    throw;
  }
}

Evaluation TissueManipulationEnv::evaluate(const FrameFlags& flags) {
  Evaluation ev;
  const Vec3 now = landmark();
  still_steps_ = (now - previous_landmark_).norm() < kStillThreshold ? still_steps_ + 1 : 0;
  previous_landmark_ = now;
  const double d = image_distance();
  ev.success = d < params_.success_threshold;
  using detail::set_feature;
  set_feature(ev.features, "distance_to_target", d);
  set_feature(ev.features, "policy_stuck", still_steps_ >= kStuckSteps ? 1.0 : 0.0);
  set_feature(ev.features, features::kWorkspaceViolation, flags.workspace_violated ? 1.0 : 0.0);
  set_feature(ev.features, features::kUnstable, flags.unstable ? 1.0 : 0.0);
  set_feature(ev.features, features::kSuccess, ev.success ? 1.0 : 0.0);
  return ev;
}

std::vector<float> TissueManipulationEnv::state_vector() const {
  std::vector<float> s;
  s.reserve(9);
  append_vec3(s, grasper_);
  append_vec3(s, landmark());
  append_vec3(s, target_);
  return s;
}

RenderScene TissueManipulationEnv::scene() const {
  RenderScene scene;
  const auto n = static_cast<std::uint32_t>(params_.grid_resolution);
  const auto particles = world_.particles();
  const std::uint32_t first = world_.bodies().front().first;
  auto at = [&](std::uint32_t r, std::uint32_t c) { return particles[first + r * n + c].position; };
  for (std::uint32_t r = 0; r + 1 < n; ++r) {
    for (std::uint32_t c = 0; c + 1 < n; ++c) {
      scene.add_quad(at(r, c), at(r, c + 1), at(r + 1, c + 1), at(r + 1, c), 1, detail::kTissueColor);
    }
  }
  scene.add_sphere(landmark() + Vec3(0, 0, 0.2), 1.5, 2, Color{40, 80, 220});
  scene.add_sphere(target_, 1.5, 3, detail::kTargetGreen);
  const ToolCapsule tool = grasper_capsule();
  scene.add_capsule(tool.endpoint_a, tool.endpoint_b, tool.radius, 4, detail::kInstrumentGray);
  return scene;
}

CameraModel TissueManipulationEnv::camera() const {
  const double mid = 0.5 * params_.grid_spacing * (params_.grid_resolution - 1);
  return detail::look_at_camera(Vec3(0, mid, 150), Vec3(0, mid, 0), config());
}

}  // namespace lapkit
