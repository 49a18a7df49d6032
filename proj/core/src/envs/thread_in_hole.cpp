#include <algorithm>
#include <cmath>
#include <numbers>

#include "internal.hpp"
#include "lapkit/error.hpp"

namespace lapkit {

namespace {

constexpr double kThreadRadius = 0.8;  // mm
constexpr double kThreadMass = 0.5;    // g
constexpr int kShaftSamples = 32;
constexpr int kRingSegments = 16;
const Vec3 kStartTip(0.0, -25.0, 100.0);

}  // namespace

ThreadGeometry thread_geometry(ThreadPreset preset) {
  ThreadGeometry g;
  switch (preset) {
    case ThreadPreset::kNormal: break;
    case ThreadPreset::kFlexible: g.bend_stiffness = 0.02; break;
    case ThreadPreset::kInverted:
      g.bend_stiffness = 0.8;
      g.hole_inner_radius = 4.5;
      g.hole_outer_radius = 6.5;
      break;
  }
  return g;
}

ThreadInHoleEnv::ThreadInHoleEnv(EnvConfig config)
    : Environment(EnvId::kThreadInHole, std::move(config)),
      params_(std::get<ThreadInHoleParams>(this->config().params)),
      geometry_(thread_geometry(params_.preset)) {
  const auto& p = params_;
  if (!(p.insertion_ratio > 0.0) || p.insertion_ratio > 1.0) {
    fail(ErrorCode::kInvalidConfig, "insertion_ratio must lie in (0, 1]");
  }
  if (p.thread_particles < 4 || p.thread_particles > 512) {
    fail(ErrorCode::kInvalidConfig, "thread_particles must lie in [4, 512]");
  }
  if (p.instrument_noise < 0.0 || p.hole_position_noise < 0.0) {
    fail(ErrorCode::kInvalidConfig, "noise parameters must be >= 0");
  }
  if (this->config().instruments.size() != 1) {
    fail(ErrorCode::kInvalidConfig, "thread_in_hole needs exactly one instrument limit set");
  }
}

void ThreadInHoleEnv::on_reset(Rng& rng) {
  const auto& p = params_;
  world_ = SoftWorld{};
  world_.ground_height = 0.0;

  Vec3 base = Vec3::Zero();
  if (p.hole_position_noise > 0.0) {
    base.x() = std::clamp(rng.normal(0.0, p.hole_position_noise), -15.0, 15.0);
    base.y() = std::clamp(rng.normal(0.0, p.hole_position_noise), -15.0, 15.0);
  }
  world_.cylinders.push_back(HollowCylinder{base, geometry_.hole_inner_radius,
                                            geometry_.hole_outer_radius, geometry_.hole_height, true});

  grasper_ = Instrument{};
  grasper_.rcm = rcm_looking_at(Vec3(0, -90, 160), Vec3(0, 0, 60));
  grasper_.limits = config().instruments.front();
  auto s = pose_to_ptsd(kStartTip, grasper_.rcm, 0.0).as_array();
  for (std::size_t a = 0; a < 4; ++a) {
    if (p.instrument_noise > 0.0) s[a] += rng.normal(0.0, p.instrument_noise);
    s[a] = std::clamp(s[a], grasper_.limits.ptsd_low.as_array()[a], grasper_.limits.ptsd_high.as_array()[a]);
  }
  grasper_.state = PtsdState::from_array(s);

  camera_offset_ = Vec3::Zero();
  if (p.camera_pose_noise) {
    camera_offset_ = Vec3(rng.normal(0.0, 5.0), rng.normal(0.0, 5.0), rng.normal(0.0, 5.0));
  }

  const Vec3 tip = grasper_.tip();
  ChainSpec spec;
  spec.name = "thread";
  spec.kind = BodyKind::kRope;
  spec.start = tip;
  spec.end = tip - Vec3(0.0, 0.0, geometry_.length);
  spec.particles = static_cast<std::uint32_t>(p.thread_particles);
  spec.total_mass = kThreadMass;
  spec.bend_stiffness = geometry_.bend_stiffness;
  spec.graspable = true;
  spec.collides_with_tools = false;
  spec.collision_radius = kThreadRadius;
  thread_ = add_chain(world_, spec);

  ToolCapsule tool = grasper_.capsule();
  tool.jaw_closed = true;
  world_.register_tool();
  attach(world_, 0, world_.body(thread_).first, tool);

  previous_grasper_tip_ = tip;
  previous_tip_distance_ = (thread_tip() - hole_opening()).norm();
  previous_com_distance_ = (thread_center_of_mass() - hole_opening()).norm();
  previous_ratio_ = ratio_in_hole();
}

Vec3 ThreadInHoleEnv::hole_opening() const {
  const HollowCylinder& h = hole();
  return h.base + Vec3(0.0, 0.0, h.height);
}

Vec3 ThreadInHoleEnv::thread_tip() const {
  const Body& b = world_.body(thread_);
  return world_.particles()[b.first + b.count - 1].position;
}

double ThreadInHoleEnv::ratio_in_hole() const {
  const Body& b = world_.body(thread_);
  const HollowCylinder& h = hole();
  std::size_t inside = 0;
  for (std::uint32_t i = 0; i < b.count; ++i) {
    const Vec3 q = world_.particles()[b.first + i].position - h.base;
    if (std::hypot(q.x(), q.y()) < h.inner_radius && q.z() > 0.0 && q.z() < h.height) ++inside;
  }
  return static_cast<double>(inside) / b.count;
}

bool ThreadInHoleEnv::gripper_collides() const {
  const HollowCylinder& h = hole();
  const ToolCapsule c = grasper_.capsule();
  const double r = c.radius;
  for (int k = 0; k <= kShaftSamples; ++k) {
    const double t = static_cast<double>(k) / kShaftSamples;
    const Vec3 q = c.endpoint_a + t * (c.endpoint_b - c.endpoint_a) - h.base;
    const double radial = std::hypot(q.x(), q.y());
    if (q.z() < h.height + r && q.z() > -r && radial > h.inner_radius - r &&
        radial < h.outer_radius + r) {
      return true;
    }
  }
  return false;
}

void ThreadInHoleEnv::apply_frame(std::span<const double> action, double dt, FrameFlags& flags) {
  const Instrument before = grasper_;
  const ClampFlags f = grasper_.apply(action, dt);
  flags.state_limit_violated |= f.state_limit_violated;
  flags.workspace_violated |= f.workspace_violated;
  ToolCapsule tool = grasper_.capsule();
  tool.jaw_closed = true;
  const SoftWorld backup = world_;
  try {
    step_world(world_, std::span<const ToolCapsule>(&tool, 1), dt, config().solver);
  } catch (const Error&) {
    world_ = backup;
    grasper_ = before;
    throw;
  }
}

Evaluation ThreadInHoleEnv::evaluate(const FrameFlags& flags) {
  Evaluation ev;
  const Vec3 opening = hole_opening();
  const double tip_distance = (thread_tip() - opening).norm();
  const double com_distance = (thread_center_of_mass() - opening).norm();
  const double ratio = ratio_in_hole();
  const Body& b = world_.body(thread_);
  double speed = 0.0;
  for (std::uint32_t i = 0; i < b.count; ++i) speed += world_.particles()[b.first + i].velocity.norm();
  speed /= b.count;
  const Vec3 tip = grasper_.tip();
  const double grasper_speed = (tip - previous_grasper_tip_).norm() / config().sim.observation_interval();
  ev.success = ratio >= params_.insertion_ratio;

  using detail::set_feature;
  set_feature(ev.features, "tip_hole_distance", tip_distance);
  set_feature(ev.features, "delta_tip_hole_distance", tip_distance - previous_tip_distance_);
  set_feature(ev.features, "com_hole_distance", com_distance);
  set_feature(ev.features, "delta_com_hole_distance", com_distance - previous_com_distance_);
  set_feature(ev.features, features::kUnstable, flags.unstable ? 1.0 : 0.0);
  set_feature(ev.features, "thread_velocity", speed);
  set_feature(ev.features, "grasper_velocity", grasper_speed);
  set_feature(ev.features, features::kStateLimitViolation, flags.state_limit_violated ? 1.0 : 0.0);
  set_feature(ev.features, features::kWorkspaceViolation, flags.workspace_violated ? 1.0 : 0.0);
  set_feature(ev.features, "ratio_in_hole", ratio);
  set_feature(ev.features, "delta_ratio_in_hole", ratio - previous_ratio_);
  set_feature(ev.features, "gripper_collision", gripper_collides() ? 1.0 : 0.0);
  set_feature(ev.features, features::kSuccess, ev.success ? 1.0 : 0.0);

  previous_grasper_tip_ = tip;
  previous_tip_distance_ = tip_distance;
  previous_com_distance_ = com_distance;
  previous_ratio_ = ratio;
  return ev;
}

std::vector<float> ThreadInHoleEnv::state_vector() const {
  std::vector<float> s;
  s.reserve(29);
  append_instrument_state(s, grasper_);
  append_vec3(s, thread_center_of_mass());
  append_vec3(s, hole_opening());
  const Body& b = world_.body(thread_);
  const std::uint32_t n = b.count;
  for (std::uint32_t i : {n / 4, n / 2, 3 * n / 4, n - 1}) {
    append_vec3(s, world_.particles()[b.first + i].position);
  }
  return s;
}

RenderScene ThreadInHoleEnv::scene() const {
  RenderScene scene;
  scene.add_box({Vec3(-60, -60, -3), Vec3(60, 60, 0)}, 1, detail::kBoardColor);
  const HollowCylinder& h = hole();
  const Color hole_color{200, 200, 210};
  for (int k = 0; k < kRingSegments; ++k) {
    const double a0 = 2.0 * std::numbers::pi * k / kRingSegments;
    const double a1 = 2.0 * std::numbers::pi * (k + 1) / kRingSegments;
    const Vec3 d0(std::cos(a0), std::sin(a0), 0.0);
    const Vec3 d1(std::cos(a1), std::sin(a1), 0.0);
    const Vec3 up(0.0, 0.0, h.height);
    for (double r : {h.inner_radius, h.outer_radius}) {
      scene.add_quad(h.base + r * d0, h.base + r * d1, h.base + r * d1 + up, h.base + r * d0 + up, 2,
                     hole_color);
    }
    scene.add_quad(h.base + h.inner_radius * d0 + up, h.base + h.inner_radius * d1 + up,
                   h.base + h.outer_radius * d1 + up, h.base + h.outer_radius * d0 + up, 2, hole_color);
  }
  const auto particles = world_.particles();
  const Body& b = world_.body(thread_);
  for (std::uint32_t i = 0; i + 1 < b.count; ++i) {
    scene.add_capsule(particles[b.first + i].position, particles[b.first + i + 1].position,
                      kThreadRadius, 3, Color{70, 160, 230});
  }
  const Pose pose = grasper_.pose();
  const double shown = std::min(grasper_.state.depth, 100.0);
  scene.add_capsule(pose.position - pose.axis() * shown, pose.position, grasper_.shaft_radius, 4,
                    detail::kInstrumentGray);
  return scene;
}

CameraModel ThreadInHoleEnv::camera() const {
  return detail::look_at_camera(Vec3(0, -130, 110) + camera_offset_, Vec3(0, 0, 30), config());
}

}  // namespace lapkit
