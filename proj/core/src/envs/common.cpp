#include <algorithm>
#include <cmath>

#include "lapkit/envs.hpp"
#include "lapkit/error.hpp"
#include "lapkit/geometry.hpp"

namespace lapkit {

RewardSpec default_reward_spec(EnvId id) {
  switch (id) {
    case EnvId::kReach:
      return {{{"distance_to_target", -1.0},
               {"delta_distance_to_target", -10.0},
               {"time_step_cost", 0.0},
               {features::kWorkspaceViolation, 0.0},
               {features::kSuccess, 100.0}}};
    case EnvId::kDeflectSpheres:
      return {{{"workspace_violations", 0.0},
               {"state_limit_violations", 0.0},
               {"instrument_collision", 0.0},
               {"distance_to_active_sphere", 0.0},
               {"delta_distance_to_active_sphere", -5.0},
               {"inactive_deflection_sum", -0.005},
               {"active_deflection", 0.0},
               {"delta_active_deflection", 1.0},
               {"done_with_active_sphere", 10.0},
               {features::kSuccess, 100.0}}};
    case EnvId::kTissueManipulation:
      return {{{"distance_to_target", -1.0},
               {"policy_stuck", -5.0},
               {features::kWorkspaceViolation, 0.0},
               {features::kUnstable, 0.0},
               {features::kSuccess, 10.0}}};
    case EnvId::kRopeCutting:
      return {{{"distance_to_active_rope", 0.0},
               {"delta_distance_to_active_rope", -5.0},
               {"cut_active_rope", 5.0},
               {"cut_inactive_rope", -5.0},
               {features::kStateLimitViolation, 0.0},
               {features::kWorkspaceViolation, 0.0},
               {"failed_task", -20.0},
               {features::kSuccess, 10.0}}};
    case EnvId::kThreadInHole:
      return {{{"tip_hole_distance", -0.1},
               {"delta_tip_hole_distance", -0.1},
               {"com_hole_distance", -0.0},
               {"delta_com_hole_distance", -0.0},
               {features::kUnstable, 0.0},
               {"thread_velocity", 0.0},
               {"grasper_velocity", 0.0},
               {features::kStateLimitViolation, 0.0},
               {features::kWorkspaceViolation, 0.0},
               {"ratio_in_hole", 0.1},
               {"delta_ratio_in_hole", 1.0},
               {"gripper_collision", -0.1},
               {features::kSuccess, 100.0}}};
  }
  return {};
}

EnvParams default_params(EnvId id) {
  switch (id) {
    case EnvId::kReach: return ReachParams{};
    case EnvId::kDeflectSpheres: return DeflectSpheresParams{};
    case EnvId::kTissueManipulation: return TissueManipulationParams{};
    case EnvId::kRopeCutting: return RopeCuttingParams{};
    case EnvId::kThreadInHole: return ThreadInHoleParams{};
  }
  return ReachParams{};
}

SimParams default_sim_params(const EnvParams& params) {
  switch (env_id_of(params)) {
    case EnvId::kReach: return {0.1, 1, 500};
    case EnvId::kDeflectSpheres:
      // Saturates for out-of-range M; the env constructor rejects those.
      return {0.1, 1,
              static_cast<int>(std::clamp<long long>(
                  500LL * std::get<DeflectSpheresParams>(params).deflections_to_win, 1, 1 << 30))};
    case EnvId::kTissueManipulation: return {0.1, 1, 500};
    case EnvId::kRopeCutting:
      return {0.1, 1,
              static_cast<int>(std::clamp<long long>(
                  200LL * std::get<RopeCuttingParams>(params).ropes_to_cut, 400, 1 << 30))};
    case EnvId::kThreadInHole: return {0.01, 10, 300};
  }
  return {};
}

namespace {

InstrumentLimits tpsd_limits(double angle_range, double depth_min, double depth_max,
                             const Aabb& box, const PtsdState& velocity) {
  InstrumentLimits l;
  l.ptsd_low = {-angle_range, -angle_range, -180.0, depth_min};
  l.ptsd_high = {angle_range, angle_range, 180.0, depth_max};
  l.cartesian_box = box;
  l.velocity_limits = velocity;
  return l;
}

}  // namespace

EnvConfig default_config(const EnvParams& params) {
  EnvConfig c;
  const EnvId id = env_id_of(params);
  c.params = params;
  c.reward = default_reward_spec(id);
  c.sim = default_sim_params(params);
  switch (id) {
    case EnvId::kReach:
      c.cartesian = CartesianLimits{{Vec3(-60, -60, 0), Vec3(60, 60, 80)}, 30.0};
      c.solver = {1, 1, 1e5, 0.0};
      break;
    case EnvId::kDeflectSpheres: {
      const auto& p = std::get<DeflectSpheresParams>(params);
      const InstrumentLimits l = tpsd_limits(50.0, 30.0, 230.0,
                                             {Vec3(-90, -80, 2), Vec3(90, 80, 160)},
                                             {15.0, 15.0, 30.0, 30.0});
      c.instruments.assign(p.bimanual ? 2 : 1, l);
      c.solver = {4, 10, 1e5, 2.0};
      break;
    }
    case EnvId::kTissueManipulation:
      c.cartesian = CartesianLimits{{Vec3(-30, 25, 0.5), Vec3(30, 75, 40)}, 20.0};
      c.solver = {8, 10, 1e5, 2.0};
      break;
    case EnvId::kRopeCutting:
      c.instruments.assign(1, tpsd_limits(45.0, 20.0, 220.0,
                                          {Vec3(-60, -70, 5), Vec3(60, 60, 120)},
                                          {15.0, 15.0, 30.0, 30.0}));
      c.solver = {4, 15, 1e5, 1.0};
      break;
    case EnvId::kThreadInHole:
      c.instruments.assign(1, tpsd_limits(45.0, 20.0, 220.0,
                                          {Vec3(-50, -60, 15), Vec3(50, 50, 150)},
                                          {10.0, 10.0, 20.0, 20.0}));
      c.solver = {2, 20, 1e5, 1.0};
      break;
  }
  return c;
}

EnvConfig default_config(EnvId id) { return default_config(default_params(id)); }

std::unique_ptr<Environment> make_env(EnvId id, const EnvConfig& config) {
  switch (id) {
    case EnvId::kReach: return std::make_unique<ReachEnv>(config);
    case EnvId::kDeflectSpheres: return std::make_unique<DeflectSpheresEnv>(config);
    case EnvId::kTissueManipulation: return std::make_unique<TissueManipulationEnv>(config);
    case EnvId::kRopeCutting: return std::make_unique<RopeCuttingEnv>(config);
    case EnvId::kThreadInHole: return std::make_unique<ThreadInHoleEnv>(config);
  }
  fail(ErrorCode::kUnknownEnv, "unknown environment");
}

std::unique_ptr<Environment> make_env(EnvId id) { return make_env(id, default_config(id)); }

ToolCapsule Instrument::capsule() const {
  ToolCapsule c;
  c.endpoint_a = rcm.position;
  c.endpoint_b = tip();
  c.radius = shaft_radius;
  return c;
}

ClampFlags Instrument::apply(std::span<const double> tpsd_action, double dt) {
  const ClampResult r = clamp_action(state, tpsd_action, limits, rcm, dt);
  state = r.state;
  return r.flags;
}

void append_vec3(std::vector<float>& out, const Vec3& v) {
  out.push_back(static_cast<float>(v.x()));
  out.push_back(static_cast<float>(v.y()));
  out.push_back(static_cast<float>(v.z()));
}

void append_instrument_state(std::vector<float>& out, const Instrument& instrument) {
  const Pose pose = instrument.pose();
  append_vec3(out, pose.position);
  out.push_back(static_cast<float>(pose.orientation.x()));
  out.push_back(static_cast<float>(pose.orientation.y()));
  out.push_back(static_cast<float>(pose.orientation.z()));
  out.push_back(static_cast<float>(pose.orientation.w()));
  for (double v : instrument.state.as_array()) out.push_back(static_cast<float>(v));
}

namespace {

double clip_unit(double v) { return std::clamp(v, -1.0, 1.0); }

// TPSD action driving the instrument tip toward `goal` at full proportional gain.
std::vector<double> tpsd_action_toward(const Instrument& inst, const Vec3& goal, double interval) {
  const PtsdState want = pose_to_ptsd(goal, inst.rcm, inst.state.spin);
  const auto cur = inst.state.as_array();
  const auto des = want.as_array();
  const auto vel = inst.limits.velocity_limits.as_array();
  std::vector<double> a(4, 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    if (i == 2) continue;  // spin does not move the tip
    double diff = des[i] - cur[i];
    if (i < 3) diff = wrap_degrees(diff);
    a[i] = vel[i] > 0.0 ? clip_unit(diff / (vel[i] * interval)) : 0.0;
  }
  return a;
}

std::vector<double> reach_expert(const ReachEnv& env) {
  const Vec3 delta = env.target() - env.end_effector();
  std::vector<double> a(3, 0.0);
  if (delta.norm() < env.params().success_threshold) return a;
  const double step = env.config().cartesian->max_speed * env.config().sim.observation_interval();
  for (int i = 0; i < 3; ++i) a[i] = clip_unit(delta[i] / step);
  return a;
}

// Approach the active sphere from the side facing away from its instrument's
// RCM, then push through it along the same line.
std::vector<double> deflect_expert(const DeflectSpheresEnv& env) {
  const auto& p = env.params();
  const std::size_t inst_index = env.active_instrument();
  const Instrument& inst = env.instruments()[inst_index];
  const std::size_t sphere = env.active_sphere();
  const Vec3 rest = env.sphere_rest(sphere);
  const double interval = env.config().sim.observation_interval();

  std::vector<double> action(env.action_dim(), 0.0);
  if (env.done()) return action;

  Vec3 u = rest - inst.rcm.position;
  u.z() = 0.0;
  u = u.norm() > 1e-9 ? Vec3(u.normalized()) : Vec3(Vec3::UnitX());

  const double standoff = p.sphere_radius + inst.shaft_radius + 6.0;
  const Vec3 approach = rest - u * standoff;
  const double push_end = p.min_deflection + p.sphere_radius + 6.0;
  const Vec3 hover = rest - u * (standoff + 4.0) + Vec3(0.0, 0.0, p.sphere_radius + 15.0);

  const Vec3 tip = inst.tip();
  const Vec3 rel = tip - rest;
  const double along = rel.x() * u.x() + rel.y() * u.y();
  const double lateral = (Vec3(rel.x(), rel.y(), 0.0) - along * u).norm();
  const bool aligned = lateral < 4.0 && std::abs(rel.z()) < 4.0;

  Vec3 goal = hover;
  if (aligned && along > -standoff - 2.0) {
    // Advance in short increments so the arc of the TPSD motion stays on the line.
    goal = rest + u * std::min(along + 3.0, push_end);
  } else if (along < -standoff + 4.0) {
    goal = approach;
  }

  const auto a = tpsd_action_toward(inst, goal, interval);
  std::copy(a.begin(), a.end(), action.begin() + 4 * static_cast<std::ptrdiff_t>(inst_index));
  return action;
}

}  // namespace

std::vector<double> scripted_expert(const Environment& env) {
  if (const auto* reach = dynamic_cast<const ReachEnv*>(&env)) return reach_expert(*reach);
  if (const auto* deflect = dynamic_cast<const DeflectSpheresEnv*>(&env)) {
    return deflect_expert(*deflect);
  }
  fail(ErrorCode::kUnsupportedEnv,
       "no scripted expert for '" + to_string(env.id()) + "' (supported: reach, deflect_spheres)");
}

}  // namespace lapkit
