#include <algorithm>
#include <cmath>
#include <limits>

#include "internal.hpp"
#include "lapkit/error.hpp"

namespace lapkit {

namespace {

constexpr double kRopeRadius = 1.0;     // mm
constexpr double kCutLength = 6.0;      // mm of active electrode behind the tip
constexpr double kCutRadius = 3.5;      // mm, reaches ropes resting against the shaft
constexpr double kStartDepth = 60.0;    // mm
constexpr Color kRopeColor{225, 205, 160};
constexpr Color kCutRopeColor{90, 80, 70};
constexpr Color kWallColor{140, 140, 150};

}  // namespace

RopeCuttingEnv::RopeCuttingEnv(EnvConfig config)
    : Environment(EnvId::kRopeCutting, std::move(config)),
      params_(std::get<RopeCuttingParams>(this->config().params)) {
  const auto& p = params_;
  if (p.num_ropes < 1 || p.num_ropes > 64) fail(ErrorCode::kInvalidConfig, "num_ropes must lie in [1, 64]");
  if (p.ropes_to_cut < 1 || p.ropes_to_cut > p.num_ropes) {
    fail(ErrorCode::kInvalidConfig, "ropes_to_cut must lie in [1, num_ropes]");
  }
  if (p.rope_particles < 4 || p.rope_particles > 512) {
    fail(ErrorCode::kInvalidConfig, "rope_particles must lie in [4, 512]");
  }
  if (p.points_per_rope < 1 || p.points_per_rope >= p.rope_particles) {
    fail(ErrorCode::kInvalidConfig, "points_per_rope must lie in [1, rope_particles)");
  }
  if (!(p.rope_mass > 0.0) || !(p.rope_stiffness > 0.0) || p.rope_stiffness > 1.0) {
    fail(ErrorCode::kInvalidConfig, "rope_mass must be positive, rope_stiffness in (0, 1]");
  }
  if (p.min_rope_distance < 0.0 || !(p.wall_half_distance > 0.0) || !(p.wall_height > 0.0)) {
    fail(ErrorCode::kInvalidConfig, "rope layout parameters out of range");
  }
  if (this->config().instruments.size() != 1) {
    fail(ErrorCode::kInvalidConfig, "rope_cutting needs exactly one instrument limit set");
  }
}

std::size_t RopeCuttingEnv::state_dim() const {
  const auto per_rope = 3 * static_cast<std::size_t>(params_.points_per_rope);
  return 12 + per_rope * (static_cast<std::size_t>(params_.num_ropes) + 1);
}

void RopeCuttingEnv::on_reset(Rng& rng) {
  const auto& p = params_;
  const auto n = static_cast<std::size_t>(p.num_ropes);
  world_ = SoftWorld{};

  const double z_low = std::min(25.0, 0.3 * p.wall_height);
  const double z_high = std::max(z_low + 1.0, std::min(65.0, p.wall_height - 10.0));
  std::vector<Vec3> anchors;  // (0, y, z)
  int attempts = 0;
  while (anchors.size() < n) {
    if (++attempts > 100000) {
      fail(ErrorCode::kInvalidConfig, "cannot place ropes with the requested spacing");
    }
    const Vec3 c(0.0, rng.uniform(-30.0, 30.0), rng.uniform(z_low, z_high));
    bool ok = true;
    for (const auto& a : anchors) ok = ok && (a - c).norm() >= p.min_rope_distance;
    if (ok) anchors.push_back(c);
  }

  ropes_.clear();
  initial_constraints_.clear();
  for (std::size_t r = 0; r < n; ++r) {
    ChainSpec spec;
    spec.name = "rope_" + std::to_string(r);
    spec.kind = BodyKind::kRope;
    spec.start = Vec3(-p.wall_half_distance, anchors[r].y(), anchors[r].z());
    spec.end = Vec3(p.wall_half_distance, anchors[r].y(), anchors[r].z());
    spec.particles = static_cast<std::uint32_t>(p.rope_particles);
    spec.total_mass = p.rope_mass;
    spec.stretch_stiffness = p.rope_stiffness;
    spec.pinned_head = 1;
    spec.pin_tail = true;
    spec.collision_radius = kRopeRadius;
    const BodyId id = add_chain(world_, spec);
    ropes_.push_back(id);
    initial_constraints_.push_back(world_.constraint_count_in(id));
  }

  hook_ = Instrument{};
  hook_.rcm = rcm_looking_at(Vec3(0, -110, 130), Vec3(0, 0, 40));
  hook_.limits = config().instruments.front();
  hook_.state = PtsdState{0.0, 0.0, 0.0, kStartDepth};
  hook_.shaft_radius = 2.0;
  world_.register_tool();
  active_flag_ = false;

  cut_.assign(n, false);
  correct_ = 0;
  incorrect_ = 0;
  active_ = rng.index(n);
  previous_distance_ = distance_to_rope(active_);
}

ToolCapsule RopeCuttingEnv::cutting_capsule() const {
  const Pose pose = hook_.pose();
  ToolCapsule c;
  c.endpoint_a = pose.position - pose.axis() * kCutLength;
  c.endpoint_b = pose.position;
  c.radius = kCutRadius;
  c.active = true;
  return c;
}

Vec3 RopeCuttingEnv::rope_point(std::size_t rope, std::size_t k) const {
  const Body& b = world_.body(ropes_.at(rope));
  return world_.particles()[b.first + k].position;
}

double RopeCuttingEnv::distance_to_rope(std::size_t rope) const {
  const Body& b = world_.body(ropes_.at(rope));
  const Vec3 tip = hook_.tip();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t i = 0; i < b.count; ++i) {
    best = std::min(best, (world_.particles()[b.first + i].position - tip).norm());
  }
  return best;
}

std::vector<std::uint32_t> RopeCuttingEnv::observed_particles(std::size_t rope) const {
  const Body& b = world_.body(ropes_.at(rope));
  const auto points = static_cast<std::uint32_t>(params_.points_per_rope);
  std::vector<std::uint32_t> out;
  for (std::uint32_t k = 1; k <= points; ++k) out.push_back(b.first + k * b.count / (points + 1));
  return out;
}

void RopeCuttingEnv::sever_rope(std::size_t rope) {
  const Body& b = world_.body(ropes_.at(rope));
  const Vec3 mid = world_.particles()[b.first + b.count / 2].position;
  ToolCapsule c;
  c.endpoint_a = mid - Vec3(0, 0, 2);
  c.endpoint_b = mid + Vec3(0, 0, 2);
  c.radius = 0.5;
  c.active = true;
  cut(world_, c);
}

void RopeCuttingEnv::apply_frame(std::span<const double> action, double dt, FrameFlags& flags) {
  const Instrument before = hook_;
  const ClampFlags f = hook_.apply(action.first(4), dt);
  flags.state_limit_violated |= f.state_limit_violated;
  flags.workspace_violated |= f.workspace_violated;
  active_flag_ = action[4] > 0.0;
  const ToolCapsule shaft = hook_.capsule();
  const SoftWorld backup = world_;
  try {
    step_world(world_, std::span<const ToolCapsule>(&shaft, 1), dt, config().solver);
  } catch (const Error&) {
    world_ = backup;
    hook_ = before;
    throw;
  }
  if (active_flag_) cut(world_, cutting_capsule());
}

Evaluation RopeCuttingEnv::evaluate(const FrameFlags& flags) {
  Evaluation ev;
  double cut_active = 0.0;
  double cut_inactive = 0.0;
  for (std::size_t r = 0; r < ropes_.size(); ++r) {
    if (cut_[r] || world_.constraint_count_in(ropes_[r]) >= initial_constraints_[r]) continue;
    cut_[r] = true;
    if (r == active_) {
      cut_active += 1.0;
      ++correct_;
    } else {
      cut_inactive += 1.0;
      ++incorrect_;
    }
  }
  const int remaining = static_cast<int>(std::count(cut_.begin(), cut_.end(), false));
  ev.success = correct_ >= params_.ropes_to_cut;
  ev.failure = !ev.success && remaining < params_.ropes_to_cut - correct_;

  bool switched = false;
  if (cut_active > 0.0 && !ev.success && !ev.failure) {
    std::vector<std::size_t> candidates;
    for (std::size_t r = 0; r < cut_.size(); ++r) {
      if (!cut_[r]) candidates.push_back(r);
    }
    active_ = candidates[rng().index(candidates.size())];
    switched = true;
  }

  const double distance = distance_to_rope(active_);
  using detail::set_feature;
  set_feature(ev.features, "distance_to_active_rope", distance);
  set_feature(ev.features, "delta_distance_to_active_rope",
              switched ? 0.0 : distance - previous_distance_);
  set_feature(ev.features, "cut_active_rope", cut_active);
  set_feature(ev.features, "cut_inactive_rope", cut_inactive);
  set_feature(ev.features, features::kStateLimitViolation, flags.state_limit_violated ? 1.0 : 0.0);
  set_feature(ev.features, features::kWorkspaceViolation, flags.workspace_violated ? 1.0 : 0.0);
  set_feature(ev.features, "failed_task", ev.failure ? 1.0 : 0.0);
  set_feature(ev.features, features::kSuccess, ev.success ? 1.0 : 0.0);
  previous_distance_ = distance;
  return ev;
}

std::vector<float> RopeCuttingEnv::state_vector() const {
  std::vector<float> s;
  s.reserve(state_dim());
  append_instrument_state(s, hook_);
  s.push_back(active_flag_ ? 1.0f : 0.0f);
  const auto particles = world_.particles();
  for (std::size_t r = 0; r < ropes_.size(); ++r) {
    for (auto i : observed_particles(r)) append_vec3(s, particles[i].position);
  }
  for (auto i : observed_particles(active_)) append_vec3(s, particles[i].position);
  return s;
}

RenderScene RopeCuttingEnv::scene() const {
  RenderScene scene;
  const double w = params_.wall_half_distance;
  scene.add_box({Vec3(-w - 4.0, -40, 0), Vec3(-w, 40, params_.wall_height)}, 1, kWallColor);
  scene.add_box({Vec3(w, -40, 0), Vec3(w + 4.0, 40, params_.wall_height)}, 1, kWallColor);
  const auto particles = world_.particles();
  for (std::size_t r = 0; r < ropes_.size(); ++r) {
    const Body& b = world_.body(ropes_[r]);
    Color color = cut_[r] ? kCutRopeColor : kRopeColor;
    if (r == active_ && !cut_[r]) color = detail::kTargetGreen;
    for (const auto& c : world_.distance_constraints()) {
      if (!b.contains(c.i)) continue;
      scene.add_capsule(particles[c.i].position, particles[c.j].position, kRopeRadius,
                        static_cast<std::uint32_t>(10 + r), color);
    }
  }
  const Pose pose = hook_.pose();
  const double shown = std::min(hook_.state.depth, 100.0);
  scene.add_capsule(pose.position - pose.axis() * shown, pose.position - pose.axis() * kCutLength,
                    hook_.shaft_radius, 200, detail::kInstrumentGray);
  scene.add_capsule(pose.position - pose.axis() * kCutLength, pose.position, 1.5, 201,
                    active_flag_ ? Color{240, 80, 40} : Color{200, 200, 120});
  return scene;
}

CameraModel RopeCuttingEnv::camera() const {
  return detail::look_at_camera(Vec3(0, -150, 120), Vec3(0, 0, 40), config());
}

}  // namespace lapkit
