#pragma once

// The five shipped environments. Each env card under docs/envs/ documents the
// action space, state layout, parameters and reward table.
//
// State vectors serialize a pose as position (3) followed by the orientation
// quaternion in (x, y, z, w) order.

#include <memory>
#include <optional>
#include <vector>

#include "lapkit/envcore.hpp"

namespace lapkit {

// Feature ids per environment, in reward-table order.
namespace features {
inline constexpr const char* kSuccess = "successful_task";
inline constexpr const char* kWorkspaceViolation = "workspace_violation";
inline constexpr const char* kStateLimitViolation = "state_limit_violation";
inline constexpr const char* kUnstable = "unstable_simulation";
}  // namespace features

// Default reward terms (feature id, weight) for an environment.
RewardSpec default_reward_spec(EnvId id);
SimParams default_sim_params(const EnvParams& params);
EnvParams default_params(EnvId id);
// Full default configuration; `params` overrides the env parameters and the
// time limit follows from them.
EnvConfig default_config(EnvId id);
EnvConfig default_config(const EnvParams& params);

std::unique_ptr<Environment> make_env(EnvId id, const EnvConfig& config);
std::unique_ptr<Environment> make_env(EnvId id);

// Laparoscopic instrument under an RCM constraint.
struct Instrument {
  RcmFrame rcm;
  InstrumentLimits limits;
  PtsdState state;
  double shaft_radius = 2.5;  // mm

  Pose pose() const { return ptsd_to_pose(state, rcm); }
  Vec3 tip() const { return pose().position; }
  // Shaft from the RCM to the tip.
  ToolCapsule capsule() const;
  ClampFlags apply(std::span<const double> tpsd_action, double dt);
};

// Appends position (3) + quaternion xyzw (4) + TPSD (4).
void append_instrument_state(std::vector<float>& out, const Instrument& instrument);
void append_vec3(std::vector<float>& out, const Vec3& v);

class ReachEnv final : public Environment {
 public:
  explicit ReachEnv(EnvConfig config);

  std::size_t action_dim() const override { return 3; }
  std::size_t state_dim() const override { return 6; }
  std::vector<float> state_vector() const override;
  RenderScene scene() const override;
  CameraModel camera() const override;

  const ReachParams& params() const { return params_; }
  const Vec3& end_effector() const { return end_effector_; }
  const Vec3& target() const { return target_; }
  void set_end_effector(const Vec3& p) { end_effector_ = p; }
  double distance() const { return (end_effector_ - target_).norm(); }

 protected:
  void on_reset(Rng& rng) override;
  void apply_frame(std::span<const double> action, double dt, FrameFlags& flags) override;
  Evaluation evaluate(const FrameFlags& flags) override;

 private:
  ReachParams params_;
  CartesianLimits limits_;
  Vec3 end_effector_ = Vec3::Zero();
  Vec3 target_ = Vec3::Zero();
  double previous_distance_ = 0.0;
};

class DeflectSpheresEnv final : public Environment {
 public:
  explicit DeflectSpheresEnv(EnvConfig config);

  std::size_t action_dim() const override { return params_.bimanual ? 8 : 4; }
  std::size_t state_dim() const override;
  std::vector<float> state_vector() const override;
  RenderScene scene() const override;
  CameraModel camera() const override;

  const DeflectSpheresParams& params() const { return params_; }
  const std::vector<Instrument>& instruments() const { return instruments_; }
  std::size_t active_sphere() const { return active_; }
  // Instrument that has to deflect the active sphere.
  std::size_t active_instrument() const { return sphere_instrument_[active_]; }
  Vec3 sphere_position(std::size_t k) const;
  const Vec3& sphere_rest(std::size_t k) const { return rest_[k]; }
  double deflection(std::size_t k) const;
  int completed() const { return completed_; }
  const SoftWorld& world() const { return world_; }
  // Static obstacle proxies (stalk + sphere capsules and the board) used for planning.
  std::vector<std::pair<Vec3, Vec3>> stalk_segments() const;

 protected:
  void on_reset(Rng& rng) override;
  void apply_frame(std::span<const double> action, double dt, FrameFlags& flags) override;
  Evaluation evaluate(const FrameFlags& flags) override;

 private:
  bool instrument_touches(std::size_t instrument, std::size_t sphere) const;
  void pick_active(Rng& rng);

  DeflectSpheresParams params_;
  SoftWorld world_;
  std::vector<Instrument> instruments_;
  std::vector<std::uint32_t> tip_particle_;
  std::vector<std::uint32_t> base_particle_;
  std::vector<Vec3> rest_;
  std::vector<std::size_t> sphere_instrument_;
  std::vector<bool> done_sphere_;
  std::vector<ClampFlags> step_flags_;
  std::size_t active_ = 0;
  int completed_ = 0;
  double previous_distance_ = 0.0;
  double previous_deflection_ = 0.0;
};

class TissueManipulationEnv final : public Environment {
 public:
  explicit TissueManipulationEnv(EnvConfig config);

  std::size_t action_dim() const override { return 3; }
  std::size_t state_dim() const override { return 9; }
  std::vector<float> state_vector() const override;
  RenderScene scene() const override;
  CameraModel camera() const override;

  const TissueManipulationParams& params() const { return params_; }
  const Vec3& grasper() const { return grasper_; }
  Vec3 landmark() const;
  const Vec3& target() const { return target_; }
  // Image-plane distance between landmark and target, in mm at the target's depth.
  double image_distance() const;
  const SoftWorld& world() const { return world_; }

 protected:
  void on_reset(Rng& rng) override;
  void apply_frame(std::span<const double> action, double dt, FrameFlags& flags) override;
  Evaluation evaluate(const FrameFlags& flags) override;

 private:
  ToolCapsule grasper_capsule() const;

  TissueManipulationParams params_;
  CartesianLimits limits_;
  SoftWorld world_;
  Vec3 grasper_ = Vec3::Zero();
  std::uint32_t landmark_particle_ = 0;
  Vec3 target_ = Vec3::Zero();
  Vec3 previous_landmark_ = Vec3::Zero();
  int still_steps_ = 0;
};

class RopeCuttingEnv final : public Environment {
 public:
  explicit RopeCuttingEnv(EnvConfig config);

  std::size_t action_dim() const override { return 5; }
  std::size_t state_dim() const override;
  std::vector<float> state_vector() const override;
  RenderScene scene() const override;
  CameraModel camera() const override;

  const RopeCuttingParams& params() const { return params_; }
  const Instrument& hook() const { return hook_; }
  std::size_t active_rope() const { return active_; }
  bool rope_cut(std::size_t rope) const { return cut_[rope]; }
  int correct_cuts() const { return correct_; }
  int incorrect_cuts() const { return incorrect_; }
  std::size_t rope_count() const { return ropes_.size(); }
  Vec3 rope_point(std::size_t rope, std::size_t k) const;
  const SoftWorld& world() const { return world_; }
  // Cuts the rope at its midpoint with an active capsule, as the hook would.
  // The next step() accounts for the cut.
  void sever_rope(std::size_t rope);

 protected:
  void on_reset(Rng& rng) override;
  void apply_frame(std::span<const double> action, double dt, FrameFlags& flags) override;
  Evaluation evaluate(const FrameFlags& flags) override;

 private:
  ToolCapsule cutting_capsule() const;
  double distance_to_rope(std::size_t rope) const;
  std::vector<std::uint32_t> observed_particles(std::size_t rope) const;

  RopeCuttingParams params_;
  SoftWorld world_;
  Instrument hook_;
  bool active_flag_ = false;
  std::vector<BodyId> ropes_;
  std::vector<std::size_t> initial_constraints_;
  std::vector<bool> cut_;
  std::size_t active_ = 0;
  int correct_ = 0;
  int incorrect_ = 0;
  double previous_distance_ = 0.0;
};

struct ThreadGeometry {
  double length = 60.0;  // mm
  double bend_stiffness = 0.2;
  double hole_inner_radius = 6.0;
  double hole_outer_radius = 8.0;
  double hole_height = 25.0;
};
ThreadGeometry thread_geometry(ThreadPreset preset);

class ThreadInHoleEnv final : public Environment {
 public:
  explicit ThreadInHoleEnv(EnvConfig config);

  std::size_t action_dim() const override { return 4; }
  std::size_t state_dim() const override { return 29; }
  std::vector<float> state_vector() const override;
  RenderScene scene() const override;
  CameraModel camera() const override;

  const ThreadInHoleParams& params() const { return params_; }
  const Instrument& grasper() const { return grasper_; }
  const HollowCylinder& hole() const { return world_.cylinders.front(); }
  Vec3 hole_opening() const;
  Vec3 thread_tip() const;
  Vec3 thread_center_of_mass() const { return world_.center_of_mass(thread_); }
  double ratio_in_hole() const;
  bool gripper_collides() const;
  const SoftWorld& world() const { return world_; }

 protected:
  void on_reset(Rng& rng) override;
  void apply_frame(std::span<const double> action, double dt, FrameFlags& flags) override;
  Evaluation evaluate(const FrameFlags& flags) override;

 private:
  ThreadInHoleParams params_;
  ThreadGeometry geometry_;
  SoftWorld world_;
  Instrument grasper_;
  BodyId thread_ = 0;
  Vec3 camera_offset_ = Vec3::Zero();
  Vec3 previous_grasper_tip_ = Vec3::Zero();
  double previous_tip_distance_ = 0.0;
  double previous_com_distance_ = 0.0;
  double previous_ratio_ = 0.0;
};

// Greedy proportional controller for reach and deflect_spheres. Throws
// UnsupportedEnv for the other environments.
std::vector<double> scripted_expert(const Environment& env);

}  // namespace lapkit
