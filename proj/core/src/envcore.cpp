#include "lapkit/envcore.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "lapkit/error.hpp"

namespace lapkit {

std::string to_string(EnvId id) {
  switch (id) {
    case EnvId::kReach: return "reach";
    case EnvId::kDeflectSpheres: return "deflect_spheres";
    case EnvId::kTissueManipulation: return "tissue_manipulation";
    case EnvId::kRopeCutting: return "rope_cutting";
    case EnvId::kThreadInHole: return "thread_in_hole";
  }
  return "reach";
}

const std::vector<EnvId>& all_env_ids() {
  static const std::vector<EnvId> ids = {EnvId::kReach, EnvId::kDeflectSpheres,
                                         EnvId::kTissueManipulation, EnvId::kRopeCutting,
                                         EnvId::kThreadInHole};
  return ids;
}

std::string env_id_list() {
  std::string out;
  for (EnvId id : all_env_ids()) {
    if (!out.empty()) out += ", ";
    out += to_string(id);
  }
  return out;
}

EnvId env_id_from_string(const std::string& name) {
  for (EnvId id : all_env_ids()) {
    if (to_string(id) == name) return id;
  }
  fail(ErrorCode::kUnknownEnv, "unknown environment '" + name + "'; valid ids: " + env_id_list());
}

std::string to_string(ThreadPreset preset) {
  switch (preset) {
    case ThreadPreset::kNormal: return "normal";
    case ThreadPreset::kFlexible: return "flexible";
    case ThreadPreset::kInverted: return "inverted";
  }
  return "normal";
}

ThreadPreset thread_preset_from_string(const std::string& name) {
  if (name == "normal") return ThreadPreset::kNormal;
  if (name == "flexible") return ThreadPreset::kFlexible;
  if (name == "inverted") return ThreadPreset::kInverted;
  fail(ErrorCode::kInvalidConfig,
       "unknown thread preset '" + name + "' (normal, flexible, inverted)");
}

EnvId env_id_of(const EnvParams& params) {
  switch (params.index()) {
    case 0: return EnvId::kReach;
    case 1: return EnvId::kDeflectSpheres;
    case 2: return EnvId::kTissueManipulation;
    case 3: return EnvId::kRopeCutting;
    default: return EnvId::kThreadInHole;
  }
}

std::size_t Rng::index(std::size_t n) {
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return static_cast<std::size_t>(x % range);
}

double Rng::normal(double mean, double stddev) {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void SimParams::validate() const {
  if (!(delta_t_s > 0.0)) fail(ErrorCode::kInvalidConfig, "sim.delta_t_s must be positive");
  if (frame_skip < 1 || frame_skip > 1000) fail(ErrorCode::kInvalidConfig, "sim.frame_skip must lie in [1, 1000]");
  if (time_limit < 1) fail(ErrorCode::kInvalidConfig, "sim.time_limit must be >= 1");
}

void RewardSpec::validate() const {
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (!std::isfinite(terms[i].weight)) {
      fail(ErrorCode::kInvalidConfig, "reward weight for '" + terms[i].feature + "' is not finite");
    }
    for (std::size_t j = i + 1; j < terms.size(); ++j) {
      if (terms[i].feature == terms[j].feature) {
        fail(ErrorCode::kInvalidConfig, "duplicate reward feature '" + terms[i].feature + "'");
      }
    }
  }
}

void RewardSpec::set_weight(const std::string& feature, double weight) {
  for (auto& t : terms) {
    if (t.feature == feature) {
      t.weight = weight;
      return;
    }
  }
  fail(ErrorCode::kInvalidConfig, "unknown reward feature '" + feature + "'");
}

RewardBreakdown compute_reward(std::span<const Feature> features, const RewardSpec& spec) {
  RewardBreakdown out;
  out.terms.reserve(spec.terms.size());
  for (const auto& term : spec.terms) {
    const Feature* found = nullptr;
    for (const auto& f : features) {
      if (f.id == term.feature) {
        found = &f;
        break;
      }
    }
    if (!found) fail(ErrorCode::kMissingFeature, "missing reward feature '" + term.feature + "'");
    const double contribution = term.weight * found->value;
    out.terms.push_back({term.feature, contribution});
    out.reward += contribution;
  }
  return out;
}

std::vector<double> discretize_action(std::size_t index, std::size_t dims,
                                      std::span<const double> step_sizes) {
  if (index >= discrete_action_count(dims)) {
    fail(ErrorCode::kIndexOutOfRange, "discrete action " + std::to_string(index) +
                                          " out of range for " + std::to_string(dims) + " axes");
  }
  if (step_sizes.size() != 1 && step_sizes.size() != dims) {
    fail(ErrorCode::kInvalidConfig, "discrete step size needs 1 or " + std::to_string(dims) +
                                        " entries");
  }
  std::vector<double> action(dims, 0.0);
  if (index == 0) return action;
  const std::size_t axis = (index - 1) / 2;
  const double step = step_sizes.size() == 1 ? step_sizes[0] : step_sizes[axis];
  action[axis] = (index % 2 == 1) ? step : -step;
  return action;
}

Environment::Environment(EnvId id, EnvConfig config) : id_(id), config_(std::move(config)) {
  config_.sim.validate();
  config_.reward.validate();
  for (double s : config_.discrete_step_size) {
    if (!(s > 0.0) || s > 1.0) {
      fail(ErrorCode::kInvalidConfig, "discrete_step_size entries must lie in (0, 1]");
    }
  }
  if (config_.discrete_step_size.empty()) {
    fail(ErrorCode::kInvalidConfig, "discrete_step_size must not be empty");
  }
  if (config_.resolution < 8 || config_.resolution > 1024) {
    fail(ErrorCode::kInvalidConfig, "resolution must lie in [8, 1024]");
  }
  for (const auto& limits : config_.instruments) limits.validate();
  if (env_id_of(config_.params) != id_) {
    fail(ErrorCode::kInvalidConfig, "parameters belong to '" + to_string(env_id_of(config_.params)) +
                                        "', not '" + to_string(id_) + "'");
  }
}

Observation Environment::reset(std::uint64_t seed) {
  seed_ = seed;
  rng_ = Rng(seed);
  steps_ = 0;
  done_ = false;
  on_reset(rng_);
  reset_ = true;
  return observe();
}

Observation Environment::observe() const {
  if (config_.observation_type == ObservationType::kState) {
    Observation obs;
    obs.type = ObservationType::kState;
    obs.state = state_vector();
    return obs;
  }
  const CameraModel cam = camera();
  return image_observation(lapkit::render(scene(), cam), cam, config_.observation_type);
}

StepResult Environment::step(std::span<const double> action) {
  if (!reset_) fail(ErrorCode::kNotReset, "step called before reset");
  if (done_) fail(ErrorCode::kNotReset, "episode has ended; call reset");
  if (action.size() != action_dim()) {
    fail(ErrorCode::kActionShapeMismatch, "expected " + std::to_string(action_dim()) +
                                              " action components, got " +
                                              std::to_string(action.size()));
  }
  for (double a : action) {
    if (!std::isfinite(a) || a < -1.0 || a > 1.0) {
      fail(ErrorCode::kInvalidAction, "action component outside [-1, 1]: " + std::to_string(a));
    }
  }

  FrameFlags flags;
  for (int frame = 0; frame < config_.sim.frame_skip; ++frame) {
    try {
      apply_frame(action, config_.sim.delta_t_s, flags);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUnstableSimulation) throw;
      flags.unstable = true;
      break;
    }
  }
  ++steps_;

  Evaluation ev = evaluate(flags);
  RewardBreakdown breakdown = compute_reward(ev.features, config_.reward);

  StepResult result;
  result.reward = breakdown.reward;
  result.terminated = ev.success || ev.failure;
  result.truncated = !result.terminated && steps_ >= config_.sim.time_limit;
  result.info.features = std::move(ev.features);
  result.info.contributions = std::move(breakdown.terms);
  result.info.success = ev.success;
  result.info.failure = ev.failure;
  result.info.state_limit_violated = flags.state_limit_violated;
  result.info.workspace_violated = flags.workspace_violated;
  result.info.unstable = flags.unstable;
  done_ = result.terminated || result.truncated;
  result.observation = observe();
  return result;
}

StepResult Environment::step_discrete(std::size_t index) {
  if (config_.action_mode != ActionMode::kDiscrete) {
    fail(ErrorCode::kActionShapeMismatch, "environment is configured for continuous actions");
  }
  const auto action = discretize_action(index, action_dim(), config_.discrete_step_size);
  return step(action);
}

}  // namespace lapkit
