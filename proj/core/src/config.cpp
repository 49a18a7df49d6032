#include "lapkit/config.hpp"

#include <fstream>
#include <set>

#include "lapkit/envs.hpp"
#include "lapkit/error.hpp"

namespace lapkit {

using nlohmann::json;

std::string to_string(ActionMode mode) {
  return mode == ActionMode::kContinuous ? "continuous" : "discrete";
}

ActionMode action_mode_from_string(const std::string& name) {
  if (name == "continuous") return ActionMode::kContinuous;
  if (name == "discrete") return ActionMode::kDiscrete;
  fail(ErrorCode::kInvalidConfig, "unknown action_mode '" + name + "' (continuous, discrete)");
}

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json ptsd(const PtsdState& s) { return json::array({s.tilt, s.pan, s.spin, s.depth}); }

// Reads members of one JSON object and rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(ErrorCode::kInvalidConfig, path_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::kInvalidConfig, "bad type for " + path_ + "." + key);
    }
  }

  void get(const char* key, Vec3& out) {
    std::vector<double> v;
    get(key, v);
    if (!obj_.contains(key)) return;
    if (v.size() != 3) fail(ErrorCode::kInvalidConfig, path_ + "." + key + " needs 3 numbers");
    out = Vec3(v[0], v[1], v[2]);
  }

  void get(const char* key, PtsdState& out) {
    std::vector<double> v;
    get(key, v);
    if (!obj_.contains(key)) return;
    if (v.size() != 4) fail(ErrorCode::kInvalidConfig, path_ + "." + key + " needs 4 numbers");
    out = PtsdState{v[0], v[1], v[2], v[3]};
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) fail(ErrorCode::kInvalidConfig, "unknown key " + path_ + "." + key);
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_params(Reader& r, ReachParams& p) {
  r.get("target_radius", p.target_radius);
  r.get("success_threshold", p.success_threshold);
  r.get("randomize_start", p.randomize_start);
  r.get("min_reset_distance", p.min_reset_distance);
}

void read_params(Reader& r, DeflectSpheresParams& p) {
  r.get("num_spheres", p.num_spheres);
  r.get("deflections_to_win", p.deflections_to_win);
  r.get("min_sphere_spacing", p.min_sphere_spacing);
  r.get("stalk_stiffness", p.stalk_stiffness);
  r.get("bimanual", p.bimanual);
  r.get("min_deflection", p.min_deflection);
  r.get("sphere_radius", p.sphere_radius);
  r.get("stalk_height", p.stalk_height);
  r.get("board_half_x", p.board_half_x);
  r.get("board_half_y", p.board_half_y);
  r.get("instrument_noise", p.instrument_noise);
  r.get("sample_with_replacement", p.sample_with_replacement);
}

void read_params(Reader& r, TissueManipulationParams& p) {
  r.get("success_threshold", p.success_threshold);
  r.get("randomize_landmark", p.randomize_landmark);
  r.get("min_reset_distance", p.min_reset_distance);
  r.get("grid_resolution", p.grid_resolution);
  r.get("grid_spacing", p.grid_spacing);
  r.get("tissue_mass", p.tissue_mass);
  r.get("tissue_stiffness", p.tissue_stiffness);
}

void read_params(Reader& r, RopeCuttingParams& p) {
  r.get("num_ropes", p.num_ropes);
  r.get("ropes_to_cut", p.ropes_to_cut);
  r.get("rope_mass", p.rope_mass);
  r.get("rope_stiffness", p.rope_stiffness);
  r.get("min_rope_distance", p.min_rope_distance);
  r.get("wall_half_distance", p.wall_half_distance);
  r.get("wall_height", p.wall_height);
  r.get("rope_particles", p.rope_particles);
  r.get("points_per_rope", p.points_per_rope);
}

void read_params(Reader& r, ThreadInHoleParams& p) {
  std::string preset = to_string(p.preset);
  r.get("preset", preset);
  p.preset = thread_preset_from_string(preset);
  r.get("insertion_ratio", p.insertion_ratio);
  r.get("camera_pose_noise", p.camera_pose_noise);
  r.get("instrument_noise", p.instrument_noise);
  r.get("hole_position_noise", p.hole_position_noise);
  r.get("thread_particles", p.thread_particles);
}

}  // namespace

json params_to_json(const EnvParams& params) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ReachParams>) {
          return {{"target_radius", p.target_radius},
                  {"success_threshold", p.success_threshold},
                  {"randomize_start", p.randomize_start},
                  {"min_reset_distance", p.min_reset_distance}};
        } else if constexpr (std::is_same_v<T, DeflectSpheresParams>) {
          return {{"num_spheres", p.num_spheres},
                  {"deflections_to_win", p.deflections_to_win},
                  {"min_sphere_spacing", p.min_sphere_spacing},
                  {"stalk_stiffness", p.stalk_stiffness},
                  {"bimanual", p.bimanual},
                  {"min_deflection", p.min_deflection},
                  {"sphere_radius", p.sphere_radius},
                  {"stalk_height", p.stalk_height},
                  {"board_half_x", p.board_half_x},
                  {"board_half_y", p.board_half_y},
                  {"instrument_noise", p.instrument_noise},
                  {"sample_with_replacement", p.sample_with_replacement}};
        } else if constexpr (std::is_same_v<T, TissueManipulationParams>) {
          return {{"success_threshold", p.success_threshold},
                  {"randomize_landmark", p.randomize_landmark},
                  {"min_reset_distance", p.min_reset_distance},
                  {"grid_resolution", p.grid_resolution},
                  {"grid_spacing", p.grid_spacing},
                  {"tissue_mass", p.tissue_mass},
                  {"tissue_stiffness", p.tissue_stiffness}};
        } else if constexpr (std::is_same_v<T, RopeCuttingParams>) {
          return {{"num_ropes", p.num_ropes},
                  {"ropes_to_cut", p.ropes_to_cut},
                  {"rope_mass", p.rope_mass},
                  {"rope_stiffness", p.rope_stiffness},
                  {"min_rope_distance", p.min_rope_distance},
                  {"wall_half_distance", p.wall_half_distance},
                  {"wall_height", p.wall_height},
                  {"rope_particles", p.rope_particles},
                  {"points_per_rope", p.points_per_rope}};
        } else {
          return {{"preset", to_string(p.preset)},
                  {"insertion_ratio", p.insertion_ratio},
                  {"camera_pose_noise", p.camera_pose_noise},
                  {"instrument_noise", p.instrument_noise},
                  {"hole_position_noise", p.hole_position_noise},
                  {"thread_particles", p.thread_particles}};
        }
      },
      params);
}

json config_to_json(const EnvConfig& c) {
  json j;
  j["observation_type"] = to_string(c.observation_type);
  j["resolution"] = c.resolution;
  j["action_mode"] = to_string(c.action_mode);
  j["discrete_step_size"] = c.discrete_step_size;
  json instruments = json::array();
  for (const auto& l : c.instruments) {
    instruments.push_back({{"ptsd_low", ptsd(l.ptsd_low)},
                           {"ptsd_high", ptsd(l.ptsd_high)},
                           {"cartesian_low", vec(l.cartesian_box.min)},
                           {"cartesian_high", vec(l.cartesian_box.max)},
                           {"velocity_limits", ptsd(l.velocity_limits)}});
  }
  j["instruments"] = instruments;
  if (c.cartesian) {
    j["cartesian"] = {{"workspace_low", vec(c.cartesian->workspace.min)},
                      {"workspace_high", vec(c.cartesian->workspace.max)},
                      {"max_speed", c.cartesian->max_speed}};
  }
  json weights = json::object();
  for (const auto& t : c.reward.terms) weights[t.feature] = t.weight;
  j["reward_weights"] = weights;
  j["sim"] = {{"delta_t_s", c.sim.delta_t_s},
              {"frame_skip", c.sim.frame_skip},
              {"time_limit", c.sim.time_limit}};
  j["solver"] = {{"substeps", c.solver.substeps},
                 {"iterations", c.solver.iterations},
                 {"max_speed", c.solver.max_speed},
                 {"damping", c.solver.damping}};
  j["camera"] = {{"fov_deg", c.camera.fov_deg}, {"near", c.camera.near}, {"far", c.camera.far}};
  j["params"] = params_to_json(c.params);
  return j;
}

EnvConfig config_from_json(EnvId id, const json& doc) {
  Reader top(doc, "config");

  EnvParams params = default_params(id);
  if (const json* p = top.child("params")) {
    Reader r(*p, "config.params");
    std::visit([&](auto& typed) { read_params(r, typed); }, params);
    r.finish();
  }
  EnvConfig c = default_config(params);

  std::string obs = to_string(c.observation_type);
  top.get("observation_type", obs);
  c.observation_type = observation_type_from_string(obs);
  top.get("resolution", c.resolution);
  std::string mode = to_string(c.action_mode);
  top.get("action_mode", mode);
  c.action_mode = action_mode_from_string(mode);
  top.get("discrete_step_size", c.discrete_step_size);

  if (const json* list = top.child("instruments")) {
    if (!list->is_array() || list->size() != c.instruments.size()) {
      fail(ErrorCode::kInvalidConfig, "config.instruments must be an array of " +
                                          std::to_string(c.instruments.size()) + " entries");
    }
    for (std::size_t i = 0; i < list->size(); ++i) {
      Reader r((*list)[i], "config.instruments[" + std::to_string(i) + "]");
      auto& l = c.instruments[i];
      r.get("ptsd_low", l.ptsd_low);
      r.get("ptsd_high", l.ptsd_high);
      r.get("cartesian_low", l.cartesian_box.min);
      r.get("cartesian_high", l.cartesian_box.max);
      r.get("velocity_limits", l.velocity_limits);
      r.finish();
    }
  }
  if (const json* cart = top.child("cartesian")) {
    if (!c.cartesian) {
      fail(ErrorCode::kInvalidConfig, "config.cartesian does not apply to '" + to_string(id) + "'");
    }
    Reader r(*cart, "config.cartesian");
    r.get("workspace_low", c.cartesian->workspace.min);
    r.get("workspace_high", c.cartesian->workspace.max);
    r.get("max_speed", c.cartesian->max_speed);
    r.finish();
    if (!(c.cartesian->max_speed > 0.0)) {
      fail(ErrorCode::kInvalidConfig, "config.cartesian.max_speed must be positive");
    }
  }
  if (const json* w = top.child("reward_weights")) {
    if (!w->is_object()) fail(ErrorCode::kInvalidConfig, "config.reward_weights must be an object");
    for (const auto& [feature, value] : w->items()) {
      if (!value.is_number()) {
        fail(ErrorCode::kInvalidConfig, "reward weight for '" + feature + "' must be a number");
      }
      c.reward.set_weight(feature, value.get<double>());
    }
  }
  if (const json* s = top.child("sim")) {
    Reader r(*s, "config.sim");
    r.get("delta_t_s", c.sim.delta_t_s);
    r.get("frame_skip", c.sim.frame_skip);
    r.get("time_limit", c.sim.time_limit);
    r.finish();
  }
  if (const json* s = top.child("solver")) {
    Reader r(*s, "config.solver");
    r.get("substeps", c.solver.substeps);
    r.get("iterations", c.solver.iterations);
    r.get("max_speed", c.solver.max_speed);
    r.get("damping", c.solver.damping);
    r.finish();
    if (c.solver.substeps < 1 || c.solver.substeps > 64 || c.solver.iterations < 1 ||
        c.solver.iterations > 1000 || !(c.solver.max_speed > 0.0) ||
        c.solver.damping < 0.0) {
      fail(ErrorCode::kInvalidConfig, "config.solver values out of range");
    }
  }
  if (const json* s = top.child("camera")) {
    Reader r(*s, "config.camera");
    r.get("fov_deg", c.camera.fov_deg);
    r.get("near", c.camera.near);
    r.get("far", c.camera.far);
    r.finish();
    if (!(c.camera.fov_deg > 0.0 && c.camera.fov_deg < 180.0) || !(c.camera.near > 0.0) ||
        !(c.camera.far > c.camera.near)) {
      fail(ErrorCode::kInvalidConfig, "config.camera values out of range");
    }
  }
  top.finish();
  return c;
}

EnvConfig load_config_file(EnvId id, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kInvalidConfig, "config file " + path.string() + ": " + e.what());
  }
  return config_from_json(id, doc);
}

}  // namespace lapkit
