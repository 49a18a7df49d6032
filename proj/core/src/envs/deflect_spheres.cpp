#include <algorithm>
#include <cmath>

#include "internal.hpp"
#include "lapkit/error.hpp"
#include "lapkit/geometry.hpp"

namespace lapkit {

namespace {

constexpr Color kInstrumentColors[2] = {{60, 110, 230}, {230, 70, 60}};
constexpr Color kIdleSphere{230, 230, 230};
constexpr Color kStalkColor{120, 170, 110};
constexpr double kTouchMargin = 1.0;  // mm
constexpr double kStartDepth = 90.0;  // mm

std::vector<RcmFrame> rcm_frames(bool bimanual) {
  if (!bimanual) return {rcm_looking_at(Vec3(0, -90, 140), Vec3::Zero())};
  return {rcm_looking_at(Vec3(-60, -80, 140), Vec3::Zero()),
          rcm_looking_at(Vec3(60, -80, 140), Vec3::Zero())};
}

}  // namespace

DeflectSpheresEnv::DeflectSpheresEnv(EnvConfig config)
    : Environment(EnvId::kDeflectSpheres, std::move(config)),
      params_(std::get<DeflectSpheresParams>(this->config().params)) {
  const auto& p = params_;
  if (p.num_spheres < 1 || p.num_spheres > 64) fail(ErrorCode::kInvalidConfig, "num_spheres must lie in [1, 64]");
  if (p.deflections_to_win < 1 || p.deflections_to_win > 1000) {
    fail(ErrorCode::kInvalidConfig, "deflections_to_win must lie in [1, 1000]");
  }
  if (!p.sample_with_replacement && p.deflections_to_win > p.num_spheres) {
    fail(ErrorCode::kInvalidConfig, "deflections_to_win exceeds num_spheres without replacement");
  }
  if (p.stalk_stiffness < 0.0 || p.stalk_stiffness > 1.0) {
    fail(ErrorCode::kInvalidConfig, "stalk_stiffness must lie in [0, 1]");
  }
  if (!(p.sphere_radius > 0.0) || !(p.stalk_height > 0.0) || !(p.min_deflection > 0.0)) {
    fail(ErrorCode::kInvalidConfig, "sphere_radius, stalk_height and min_deflection must be positive");
  }
  if (p.min_sphere_spacing < 0.0 || p.instrument_noise < 0.0) {
    fail(ErrorCode::kInvalidConfig, "min_sphere_spacing and instrument_noise must be >= 0");
  }
  if (!(p.board_half_x > 10.0) || !(p.board_half_y > 10.0)) {
    fail(ErrorCode::kInvalidConfig, "board half extents must exceed 10 mm");
  }
  const std::size_t expected = p.bimanual ? 2 : 1;
  if (this->config().instruments.size() != expected) {
    fail(ErrorCode::kInvalidConfig,
         "deflect_spheres needs " + std::to_string(expected) + " instrument limit sets");
  }
}

std::size_t DeflectSpheresEnv::state_dim() const {
  const std::size_t spheres = 3 * static_cast<std::size_t>(params_.num_spheres) + 3;
  return params_.bimanual ? spheres + 22 + 1 : spheres + 11;
}

void DeflectSpheresEnv::on_reset(Rng& rng) {
  const auto& p = params_;
  const auto n = static_cast<std::size_t>(p.num_spheres);
  world_ = SoftWorld{};
  world_.gravity = Vec3::Zero();
  world_.ground_height = 0.0;

  // Sphere bases, rejection-sampled for spacing.
  std::vector<Vec3> bases;
  const double margin = 10.0;
  int attempts = 0;
  while (bases.size() < n) {
    if (++attempts > 100000) {
      fail(ErrorCode::kInvalidConfig, "cannot place spheres with the requested spacing");
    }
    const Vec3 c(rng.uniform(-p.board_half_x + margin, p.board_half_x - margin),
                 rng.uniform(-p.board_half_y + margin, p.board_half_y - margin), 0.0);
    bool ok = true;
    for (const auto& b : bases) ok = ok && (b - c).norm() >= p.min_sphere_spacing;
    if (ok) bases.push_back(c);
  }

  tip_particle_.clear();
  base_particle_.clear();
  rest_.clear();
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3& b = bases[k];
    const double h = p.stalk_height;
    const auto p0 = world_.add_particle(b, 0.0);
    const auto p1 = world_.add_particle(b + Vec3(0, 0, h / 3.0), 0.0);
    const auto p2 = world_.add_particle(b + Vec3(0, 0, 2.0 * h / 3.0), 2.0);
    const auto p3 = world_.add_particle(b + Vec3(0, 0, h), 1.0);
    world_.add_distance(p0, p1, 1.0);
    world_.add_distance(p1, p2, 1.0);
    world_.add_distance(p2, p3, 1.0);
    world_.add_bending(p0, p1, p2, p.stalk_stiffness);
    world_.add_bending(p1, p2, p3, p.stalk_stiffness);
    Body stalk;
    stalk.name = "stalk_" + std::to_string(k);
    stalk.kind = BodyKind::kStalk;
    stalk.first = p0;
    stalk.count = 3;
    stalk.collision_radius = 1.5;
    world_.add_body(stalk);
    Body sphere;
    sphere.name = "sphere_" + std::to_string(k);
    sphere.kind = BodyKind::kOther;
    sphere.first = p3;
    sphere.count = 1;
    sphere.collision_radius = p.sphere_radius;
    world_.add_body(sphere);
    base_particle_.push_back(p0);
    tip_particle_.push_back(p3);
    rest_.push_back(b + Vec3(0, 0, h));
  }

  const auto frames = rcm_frames(p.bimanual);
  instruments_.clear();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    Instrument inst;
    inst.rcm = frames[i];
    inst.limits = config().instruments[i];
    std::array<double, 4> s{0.0, 0.0, 0.0, kStartDepth};
    if (p.instrument_noise > 0.0) {
      for (auto& v : s) v += rng.normal(0.0, p.instrument_noise);
    }
    for (std::size_t a = 0; a < 4; ++a) {
      s[a] = std::clamp(s[a], inst.limits.ptsd_low.as_array()[a], inst.limits.ptsd_high.as_array()[a]);
    }
    inst.state = PtsdState::from_array(s);
    instruments_.push_back(inst);
    world_.register_tool();
  }

  done_sphere_.assign(n, false);
  sphere_instrument_.assign(n, 0);
  step_flags_.assign(instruments_.size(), ClampFlags{});
  completed_ = 0;
  active_ = n;  // none yet
  pick_active(rng);
  previous_distance_ = (instruments_[active_instrument()].tip() - sphere_position(active_)).norm();
  previous_deflection_ = deflection(active_);
}

void DeflectSpheresEnv::pick_active(Rng& rng) {
  const std::size_t n = rest_.size();
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < n; ++k) {
    if (params_.sample_with_replacement) {
      if (k != active_ || n == 1) candidates.push_back(k);
    } else if (!done_sphere_[k]) {
      candidates.push_back(k);
    }
  }
  if (candidates.empty()) return;
  active_ = candidates[rng.index(candidates.size())];
  done_sphere_[active_] = false;
  sphere_instrument_[active_] = params_.bimanual ? rng.index(2) : 0;
}

Vec3 DeflectSpheresEnv::sphere_position(std::size_t k) const {
  return world_.particles()[tip_particle_.at(k)].position;
}

double DeflectSpheresEnv::deflection(std::size_t k) const {
  return (sphere_position(k) - rest_.at(k)).norm();
}

bool DeflectSpheresEnv::instrument_touches(std::size_t instrument, std::size_t sphere) const {
  const Instrument& inst = instruments_[instrument];
  const ToolCapsule c = inst.capsule();
  const double d = geom::point_segment_distance(sphere_position(sphere), c.endpoint_a, c.endpoint_b);
  return d <= params_.sphere_radius + inst.shaft_radius + kTouchMargin;
}

std::vector<std::pair<Vec3, Vec3>> DeflectSpheresEnv::stalk_segments() const {
  std::vector<std::pair<Vec3, Vec3>> out;
  for (std::size_t k = 0; k < rest_.size(); ++k) {
    out.emplace_back(world_.particles()[base_particle_[k]].position, sphere_position(k));
  }
  return out;
}

void DeflectSpheresEnv::apply_frame(std::span<const double> action, double dt, FrameFlags& flags) {
  std::vector<ToolCapsule> tools;
  for (std::size_t i = 0; i < instruments_.size(); ++i) {
    const ClampFlags f = instruments_[i].apply(action.subspan(4 * i, 4), dt);
    step_flags_[i].state_limit_violated |= f.state_limit_violated;
    step_flags_[i].workspace_violated |= f.workspace_violated;
    flags.state_limit_violated |= f.state_limit_violated;
    flags.workspace_violated |= f.workspace_violated;
    tools.push_back(instruments_[i].capsule());
  }
  const SoftWorld backup = world_;
  try {
    step_world(world_, tools, dt, config().solver);
  } catch (const Error&) {
    world_ = backup;
    throw;
  }
}

Evaluation DeflectSpheresEnv::evaluate(const FrameFlags&) {
  Evaluation ev;
  double workspace = 0.0;
  double state_limit = 0.0;
  for (auto& f : step_flags_) {
    workspace += f.workspace_violated ? 1.0 : 0.0;
    state_limit += f.state_limit_violated ? 1.0 : 0.0;
    f = ClampFlags{};
  }

  bool switched = false;
  double done_now = 0.0;
  if (deflection(active_) > params_.min_deflection && instrument_touches(active_instrument(), active_)) {
    done_sphere_[active_] = true;
    ++completed_;
    done_now = 1.0;
    ev.success = completed_ >= params_.deflections_to_win;
    if (!ev.success) {
      pick_active(rng());
      switched = true;
    }
  }

  double collision = 0.0;
  if (instruments_.size() == 2) {
    const ToolCapsule a = instruments_[0].capsule();
    const ToolCapsule b = instruments_[1].capsule();
    const auto pair = geom::closest_points_segments(a.endpoint_a, a.endpoint_b, b.endpoint_a, b.endpoint_b);
    collision = pair.distance < a.radius + b.radius ? 1.0 : 0.0;
  }

  const double distance = (instruments_[active_instrument()].tip() - sphere_position(active_)).norm();
  const double active_deflection = deflection(active_);
  double inactive = 0.0;
  for (std::size_t k = 0; k < rest_.size(); ++k) {
    if (k != active_) inactive += deflection(k);
  }

  using detail::set_feature;
  set_feature(ev.features, "workspace_violations", workspace);
  set_feature(ev.features, "state_limit_violations", state_limit);
  set_feature(ev.features, "instrument_collision", collision);
  set_feature(ev.features, "distance_to_active_sphere", distance);
  set_feature(ev.features, "delta_distance_to_active_sphere",
              switched ? 0.0 : distance - previous_distance_);
  set_feature(ev.features, "inactive_deflection_sum", inactive);
  set_feature(ev.features, "active_deflection", active_deflection);
  set_feature(ev.features, "delta_active_deflection",
              switched ? 0.0 : active_deflection - previous_deflection_);
  set_feature(ev.features, "done_with_active_sphere", done_now);
  set_feature(ev.features, features::kSuccess, ev.success ? 1.0 : 0.0);

  previous_distance_ = distance;
  previous_deflection_ = active_deflection;
  return ev;
}

std::vector<float> DeflectSpheresEnv::state_vector() const {
  std::vector<float> s;
  s.reserve(state_dim());
  for (std::size_t k = 0; k < rest_.size(); ++k) append_vec3(s, sphere_position(k));
  append_vec3(s, sphere_position(active_));
  for (const auto& inst : instruments_) append_instrument_state(s, inst);
  if (params_.bimanual) s.push_back(static_cast<float>(active_instrument()));
  return s;
}

RenderScene DeflectSpheresEnv::scene() const {
  RenderScene scene;
  scene.add_box({Vec3(-params_.board_half_x, -params_.board_half_y, -3.0),
                 Vec3(params_.board_half_x, params_.board_half_y, 0.0)},
                1, detail::kBoardColor);
  const auto particles = world_.particles();
  for (std::size_t k = 0; k < rest_.size(); ++k) {
    const auto id = static_cast<std::uint32_t>(10 + k);
    for (std::uint32_t i = base_particle_[k]; i < tip_particle_[k]; ++i) {
      scene.add_capsule(particles[i].position, particles[i + 1].position, 1.5, id, kStalkColor);
    }
    Color c = kIdleSphere;
    if (done_sphere_[k]) c = detail::kTargetGreen;
    if (k == active_) c = kInstrumentColors[sphere_instrument_[k]];
    scene.add_sphere(sphere_position(k), params_.sphere_radius, static_cast<std::uint32_t>(100 + k), c);
  }
  for (std::size_t i = 0; i < instruments_.size(); ++i) {
    const Pose pose = instruments_[i].pose();
    const double shown = std::min(instruments_[i].state.depth, 100.0);
    scene.add_capsule(pose.position - pose.axis() * shown, pose.position, instruments_[i].shaft_radius,
                      static_cast<std::uint32_t>(200 + i), kInstrumentColors[i]);
  }
  return scene;
}

CameraModel DeflectSpheresEnv::camera() const {
  return detail::look_at_camera(Vec3(0, -160, 200), Vec3(0, 0, 20), config());
}

}  // namespace lapkit
