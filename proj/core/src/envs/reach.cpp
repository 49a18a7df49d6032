#include <algorithm>

#include "internal.hpp"
#include "lapkit/error.hpp"

namespace lapkit {

ReachEnv::ReachEnv(EnvConfig config)
    : Environment(EnvId::kReach, std::move(config)),
      params_(std::get<ReachParams>(this->config().params)) {
  if (!this->config().cartesian) fail(ErrorCode::kInvalidConfig, "reach needs cartesian limits");
  limits_ = *this->config().cartesian;
  if (!(params_.success_threshold > 0.0)) {
    fail(ErrorCode::kInvalidConfig, "success_threshold must be positive");
  }
  const Vec3 extent = limits_.workspace.max - limits_.workspace.min;
  if ((extent.array() <= 0.0).any()) fail(ErrorCode::kInvalidConfig, "empty workspace");
  if (params_.min_reset_distance >= extent.norm()) {
    fail(ErrorCode::kInvalidConfig, "min_reset_distance exceeds the workspace diagonal");
  }
}

void ReachEnv::on_reset(Rng& rng) {
  const Aabb& w = limits_.workspace;
  auto sample = [&] {
    return Vec3(rng.uniform(w.min.x(), w.max.x()), rng.uniform(w.min.y(), w.max.y()),
                rng.uniform(w.min.z(), w.max.z()));
  };
  end_effector_ = params_.randomize_start ? sample() : Vec3(0.5 * (w.min + w.max));
  do {
    target_ = sample();
  } while ((target_ - end_effector_).norm() < params_.min_reset_distance);
  previous_distance_ = distance();
}

void ReachEnv::apply_frame(std::span<const double> action, double dt, FrameFlags& flags) {
  Vec3 next = end_effector_;
  for (int i = 0; i < 3; ++i) next[i] += action[static_cast<std::size_t>(i)] * limits_.max_speed * dt;
  if (limits_.workspace.contains(next)) {
    end_effector_ = next;
  } else {
    flags.workspace_violated = true;
  }
}

Evaluation ReachEnv::evaluate(const FrameFlags& flags) {
  Evaluation ev;
  const double d = distance();
  ev.success = d < params_.success_threshold;
  detail::set_feature(ev.features, "distance_to_target", d);
  detail::set_feature(ev.features, "delta_distance_to_target", d - previous_distance_);
  detail::set_feature(ev.features, "time_step_cost", 1.0);
  detail::set_feature(ev.features, features::kWorkspaceViolation, flags.workspace_violated ? 1.0 : 0.0);
  detail::set_feature(ev.features, features::kSuccess, ev.success ? 1.0 : 0.0);
  previous_distance_ = d;
  return ev;
}

std::vector<float> ReachEnv::state_vector() const {
  std::vector<float> s;
  s.reserve(6);
  append_vec3(s, end_effector_);
  append_vec3(s, target_);
  return s;
}

RenderScene ReachEnv::scene() const {
  RenderScene scene;
  const Aabb& w = limits_.workspace;
  scene.add_box({Vec3(w.min.x(), w.min.y(), w.min.z() - 4.0), Vec3(w.max.x(), w.max.y(), w.min.z())},
                1, detail::kBoardColor);
  scene.add_sphere(target_, params_.target_radius, 2, detail::kTargetGreen);
  scene.add_sphere(end_effector_, 2.0, 3, Color{220, 220, 230});
  scene.add_capsule(end_effector_ + Vec3(0.0, 0.0, 60.0), end_effector_, 1.5, 3, detail::kInstrumentGray);
  return scene;
}

CameraModel ReachEnv::camera() const {
  const Aabb& w = limits_.workspace;
  const Vec3 center = 0.5 * (w.min + w.max);
  const double span = (w.max - w.min).norm();
  return detail::look_at_camera(center + Vec3(0.0, -0.9 * span, 0.8 * span), center, config());
}

}  // namespace lapkit
