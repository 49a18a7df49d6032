#pragma once

// Environment lifecycle shared by all tasks: reset/step with frame skipping,
// time limits, action-space handling and the weighted-feature reward.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lapkit/kinematics.hpp"
#include "lapkit/sensors.hpp"
#include "lapkit/softbody.hpp"

namespace lapkit {

enum class EnvId { kReach, kDeflectSpheres, kTissueManipulation, kRopeCutting, kThreadInHole };

std::string to_string(EnvId id);
// Throws UnknownEnv naming the valid ids.
EnvId env_id_from_string(const std::string& name);
const std::vector<EnvId>& all_env_ids();
std::string env_id_list();

// Seeded generator with platform-independent distributions. std::
// distributions are implementation-defined, so they are not used here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Integer in [0, n); n > 0.
  std::size_t index(std::size_t n);
  double normal(double mean, double stddev);

 private:
  std::mt19937_64 engine_;
};

struct SimParams {
  double delta_t_s = 0.1;  // s
  int frame_skip = 1;
  int time_limit = 500;  // steps

  double observation_interval() const { return delta_t_s * frame_skip; }
  void validate() const;
  bool operator==(const SimParams&) const = default;
};

struct RewardTerm {
  std::string feature;
  double weight = 0.0;
  bool operator==(const RewardTerm&) const = default;
};

struct RewardSpec {
  std::vector<RewardTerm> terms;

  void validate() const;
  // Throws InvalidConfig for an unknown feature id.
  void set_weight(const std::string& feature, double weight);
  bool operator==(const RewardSpec&) const = default;
};

struct Feature {
  std::string id;
  double value = 0.0;
  bool operator==(const Feature&) const = default;
};
using Features = std::vector<Feature>;

struct RewardBreakdown {
  double reward = 0.0;
  Features terms;  // w_i * psi_i, in table order
};

// reward = sum_i w_i * psi_i, accumulated in table order. Throws MissingFeature.
RewardBreakdown compute_reward(std::span<const Feature> features, const RewardSpec& spec);

enum class ActionMode { kContinuous, kDiscrete };

// Index 0 is the no-op; 2k+1 / 2k+2 push axis k by +step / -step. `step_sizes`
// holds one value for all axes or one per axis.
std::vector<double> discretize_action(std::size_t index, std::size_t dims,
                                      std::span<const double> step_sizes);
inline std::size_t discrete_action_count(std::size_t dims) { return 2 * dims + 1; }

struct CameraSettings {
  double fov_deg = 45.0;
  double near = 1.0;
  double far = 1000.0;
  bool operator==(const CameraSettings&) const = default;
};

// Cartesian end-effector limits for environments without TPSD control.
struct CartesianLimits {
  Aabb workspace;
  double max_speed = 30.0;  // mm/s per axis
  bool operator==(const CartesianLimits&) const = default;
};

struct ReachParams {
  double target_radius = 3.0;      // mm, visual
  double success_threshold = 3.0;  // mm
  bool randomize_start = true;
  double min_reset_distance = 20.0;  // mm
  bool operator==(const ReachParams&) const = default;
};

struct DeflectSpheresParams {
  int num_spheres = 5;
  int deflections_to_win = 1;
  double min_sphere_spacing = 25.0;  // mm
  double stalk_stiffness = 0.3;      // bending, [0, 1]
  bool bimanual = false;
  double min_deflection = 8.0;  // mm
  double sphere_radius = 5.0;   // mm
  double stalk_height = 40.0;   // mm
  double board_half_x = 70.0;   // mm
  double board_half_y = 50.0;   // mm
  double instrument_noise = 0.0;  // deg / mm stddev on the reset TPSD state
  bool sample_with_replacement = false;
  bool operator==(const DeflectSpheresParams&) const = default;
};

struct TissueManipulationParams {
  double success_threshold = 5.0;  // mm-equivalent in the image plane at target depth
  bool randomize_landmark = true;
  double min_reset_distance = 8.0;  // mm-equivalent
  int grid_resolution = 9;
  double grid_spacing = 6.0;  // mm
  double tissue_mass = 5.0;   // g
  double tissue_stiffness = 0.8;
  bool operator==(const TissueManipulationParams&) const = default;
};

struct RopeCuttingParams {
  int num_ropes = 5;
  int ropes_to_cut = 3;
  double rope_mass = 1.0;  // g
  double rope_stiffness = 1.0;
  double min_rope_distance = 8.0;  // mm
  double wall_half_distance = 50.0;  // mm, walls at x = +-this
  double wall_height = 80.0;         // mm
  int rope_particles = 16;
  int points_per_rope = 3;
  bool operator==(const RopeCuttingParams&) const = default;
};

enum class ThreadPreset { kNormal, kFlexible, kInverted };
std::string to_string(ThreadPreset preset);
ThreadPreset thread_preset_from_string(const std::string& name);

struct ThreadInHoleParams {
  ThreadPreset preset = ThreadPreset::kNormal;
  double insertion_ratio = 0.5;
  bool camera_pose_noise = false;
  double instrument_noise = 2.0;  // deg / mm stddev on reset
  double hole_position_noise = 5.0;  // mm stddev
  int thread_particles = 20;
  bool operator==(const ThreadInHoleParams&) const = default;
};

using EnvParams = std::variant<ReachParams, DeflectSpheresParams, TissueManipulationParams,
                               RopeCuttingParams, ThreadInHoleParams>;

EnvId env_id_of(const EnvParams& params);

struct EnvConfig {
  ObservationType observation_type = ObservationType::kState;
  int resolution = 64;
  ActionMode action_mode = ActionMode::kContinuous;
  std::vector<double> discrete_step_size{0.5};
  std::vector<InstrumentLimits> instruments;  // TPSD-controlled environments
  std::optional<CartesianLimits> cartesian;   // Cartesian-controlled environments
  RewardSpec reward;
  SimParams sim;
  SolverSettings solver;
  CameraSettings camera;
  EnvParams params;

  bool operator==(const EnvConfig&) const = default;
};

struct StepInfo {
  Features features;
  Features contributions;  // w_i * psi_i
  bool success = false;
  bool failure = false;
  bool state_limit_violated = false;
  bool workspace_violated = false;
  bool unstable = false;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  StepInfo info;
};

// Flags gathered over the frames of one step.
struct FrameFlags {
  bool state_limit_violated = false;
  bool workspace_violated = false;
  bool unstable = false;
};

struct Evaluation {
  Features features;
  bool success = false;
  bool failure = false;
};

class Environment {
 public:
  Environment(EnvId id, EnvConfig config);
  virtual ~Environment() = default;
  Environment(const Environment&) = delete;
  Environment& operator=(const Environment&) = delete;

  EnvId id() const { return id_; }
  const EnvConfig& config() const { return config_; }

  Observation reset(std::uint64_t seed);
  // Continuous action in [-1, 1]^action_dim, applied for frame_skip frames.
  StepResult step(std::span<const double> action);
  // Discrete action index (see discretize_action).
  StepResult step_discrete(std::size_t index);

  virtual std::size_t action_dim() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::vector<float> state_vector() const = 0;
  virtual RenderScene scene() const = 0;
  virtual CameraModel camera() const = 0;

  Observation observe() const;
  FrameBuffer render() const { return lapkit::render(scene(), camera()); }

  bool is_reset() const { return reset_; }
  bool done() const { return done_; }
  int step_count() const { return steps_; }
  double sim_time() const { return steps_ * config_.sim.observation_interval(); }
  std::uint64_t seed() const { return seed_; }

 protected:
  virtual void on_reset(Rng& rng) = 0;
  // Applies the action for one simulation frame of length dt and advances the
  // world. May throw UnstableSimulation after restoring its pre-frame state.
  virtual void apply_frame(std::span<const double> action, double dt, FrameFlags& flags) = 0;
  virtual Evaluation evaluate(const FrameFlags& flags) = 0;

  Rng& rng() { return rng_; }

 private:
  EnvId id_;
  EnvConfig config_;
  Rng rng_{0};
  std::uint64_t seed_ = 0;
  int steps_ = 0;
  bool reset_ = false;
  bool done_ = false;
};

}  // namespace lapkit
