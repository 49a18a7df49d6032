#include "lapkit/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "lapkit/envs.hpp"
#include "lapkit/error.hpp"
#include "lapkit/geometry.hpp"

namespace lapkit {

using nlohmann::json;

std::string to_string(PlanSpace space) {
  return space == PlanSpace::kCartesian ? "cartesian" : "tpsd";
}

PlanSpace plan_space_from_string(const std::string& name) {
  if (name == "cartesian") return PlanSpace::kCartesian;
  if (name == "tpsd") return PlanSpace::kTpsd;
  fail(ErrorCode::kInvalidConfig, "unknown planning space '" + name + "' (cartesian, tpsd)");
}

std::size_t space_dims(PlanSpace space) { return space == PlanSpace::kCartesian ? 3 : 4; }

std::vector<double> metric_weights(PlanSpace space, const CollisionWorld& world) {
  if (!world.metric_weights.empty()) return world.metric_weights;
  if (space == PlanSpace::kCartesian) return {1.0, 1.0, 1.0};
  return {1.0, 1.0, 1.0, 0.1};
}

namespace {

double weighted_distance(const Configuration& a, const Configuration& b,
                         const std::vector<double>& w) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = w[i] * (a[i] - b[i]);
    sum += d * d;
  }
  return std::sqrt(sum);
}

Configuration lerp(const Configuration& a, const Configuration& b, double t) {
  Configuration out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + t * (b[i] - a[i]);
  return out;
}

std::pair<Configuration, Configuration> space_bounds(PlanSpace space, const CollisionWorld& world) {
  if (space == PlanSpace::kCartesian) {
    const Aabb& b = world.bounds;
    return {{b.min.x(), b.min.y(), b.min.z()}, {b.max.x(), b.max.y(), b.max.z()}};
  }
  const auto lo = world.limits.ptsd_low.as_array();
  const auto hi = world.limits.ptsd_high.as_array();
  return {Configuration(lo.begin(), lo.end()), Configuration(hi.begin(), hi.end())};
}

bool segment_hits_obstacles(const Vec3& a, const Vec3& b, double radius, const CollisionWorld& world) {
  for (const auto& c : world.capsules) {
    if (geom::closest_points_segments(a, b, c.a, c.b).distance < radius + c.radius) return true;
  }
  for (const auto& box : world.boxes) {
    if (geom::segment_aabb_distance(a, b, box) < radius) return true;
  }
  return false;
}

}  // namespace

double config_distance(const Configuration& a, const Configuration& b, PlanSpace space,
                       const CollisionWorld& world) {
  return weighted_distance(a, b, metric_weights(space, world));
}

bool in_collision(const Configuration& q, PlanSpace space, const CollisionWorld& world) {
  if (q.size() != space_dims(space)) return true;
  const auto [lo, hi] = space_bounds(space, world);
  constexpr double kTol = 1e-9;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!std::isfinite(q[i]) || q[i] < lo[i] - kTol || q[i] > hi[i] + kTol) return true;
  }
  if (space == PlanSpace::kCartesian) {
    const Vec3 p(q[0], q[1], q[2]);
    return segment_hits_obstacles(p, p, world.point_radius, world);
  }
  const Vec3 tip = ptsd_to_pose(PtsdState{q[0], q[1], q[2], q[3]}, world.rcm).position;
  if (!world.limits.cartesian_box.contains(tip)) return true;
  return segment_hits_obstacles(world.rcm.position, tip, world.tool_radius, world);
}

bool segment_free(const Configuration& a, const Configuration& b, PlanSpace space,
                  const CollisionWorld& world, double resolution) {
  const double d = config_distance(a, b, space, world);
  const int n = std::max(1, static_cast<int>(std::ceil(d / resolution)));
  for (int k = 0; k <= n; ++k) {
    if (in_collision(lerp(a, b, static_cast<double>(k) / n), space, world)) return false;
  }
  return true;
}

void PlanRequest::validate() const {
  const std::size_t dims = space_dims(space);
  if (start.size() != dims || goal.size() != dims) {
    fail(ErrorCode::kInvalidConfig, "start and goal need " + std::to_string(dims) + " values");
  }
  if (!(step_size > 0.0)) fail(ErrorCode::kInvalidConfig, "step_size must be positive");
  if (!(goal_tolerance >= 0.0)) fail(ErrorCode::kInvalidConfig, "goal_tolerance must be >= 0");
  if (!(goal_bias >= 0.0 && goal_bias <= 1.0)) {
    fail(ErrorCode::kInvalidConfig, "goal_bias must lie in [0, 1]");
  }
  if (max_iterations < 1) fail(ErrorCode::kInvalidConfig, "max_iterations must be >= 1");
  const auto w = metric_weights(space, world);
  if (w.size() != dims) fail(ErrorCode::kInvalidConfig, "metric_weights needs one entry per axis");
  for (double v : w) {
    if (!(v > 0.0)) fail(ErrorCode::kInvalidConfig, "metric weights must be positive");
  }
  if (space == PlanSpace::kTpsd) world.limits.validate();
  const auto [lo, hi] = space_bounds(space, world);
  for (std::size_t i = 0; i < dims; ++i) {
    if (start[i] < lo[i] || start[i] > hi[i] || goal[i] < lo[i] || goal[i] > hi[i]) {
      fail(ErrorCode::kInvalidConfig, "start and goal must lie within the limits");
    }
  }
}

Path rrt_plan(const PlanRequest& request) {
  request.validate();
  const PlanSpace space = request.space;
  const CollisionWorld& world = request.world;
  const double eps = request.step_size / 4.0;
  if (in_collision(request.start, space, world)) {
    fail(ErrorCode::kStartInCollision, "start configuration is in collision");
  }
  if (config_distance(request.start, request.goal, space, world) <= request.goal_tolerance) {
    return {request.start};
  }
  if (in_collision(request.goal, space, world)) {
    fail(ErrorCode::kNotFound, "goal configuration is in collision");
  }

  const auto [lo, hi] = space_bounds(space, world);
  Rng rng(request.seed);
  std::vector<Configuration> nodes{request.start};
  std::vector<std::size_t> parent{0};

  auto extract = [&](std::size_t last) {
    Path path;
    for (std::size_t i = last;; i = parent[i]) {
      path.push_back(nodes[i]);
      if (i == 0) break;
    }
    std::reverse(path.begin(), path.end());
    return path;
  };

  for (int it = 0; it < request.max_iterations; ++it) {
    Configuration sample(lo.size());
    if (rng.uniform() < request.goal_bias) {
      sample = request.goal;
    } else {
      for (std::size_t i = 0; i < lo.size(); ++i) sample[i] = rng.uniform(lo[i], hi[i]);
    }
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double d = config_distance(nodes[i], sample, space, world);
      if (d < best) {
        best = d;
        nearest = i;
      }
    }
    if (best <= 0.0) continue;
    const Configuration next =
        best <= request.step_size ? sample : lerp(nodes[nearest], sample, request.step_size / best);
    if (!segment_free(nodes[nearest], next, space, world, eps)) continue;
    nodes.push_back(next);
    parent.push_back(nearest);
    const std::size_t added = nodes.size() - 1;

    const double to_goal = config_distance(next, request.goal, space, world);
    if (to_goal <= request.goal_tolerance) return extract(added);
    if (to_goal <= request.step_size && segment_free(next, request.goal, space, world, eps)) {
      nodes.push_back(request.goal);
      parent.push_back(added);
      return extract(nodes.size() - 1);
    }
  }
  fail(ErrorCode::kNotFound,
       "no path found within " + std::to_string(request.max_iterations) + " iterations");
}

bool validate_path(const Path& path, const PlanRequest& request, double resolution) {
  if (path.empty() || !(resolution > 0.0)) return false;
  const PlanSpace space = request.space;
  const CollisionWorld& world = request.world;
  if (path.front() != request.start) return false;
  if (config_distance(path.back(), request.goal, space, world) > request.goal_tolerance + 1e-9) {
    return false;
  }
  if (in_collision(path.front(), space, world)) return false;
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (config_distance(path[i - 1], path[i], space, world) > request.step_size + 1e-9) return false;
    if (!segment_free(path[i - 1], path[i], space, world, resolution)) return false;
  }
  return true;
}

Path shortcut_smooth(const Path& path, const PlanRequest& request, int attempts,
                     std::uint64_t seed) {
  Path out = path;
  Rng rng(seed);
  const double eps = request.step_size / 4.0;
  for (int a = 0; a < attempts && out.size() > 2; ++a) {
    std::size_t i = rng.index(out.size());
    std::size_t j = rng.index(out.size());
    if (i > j) std::swap(i, j);
    if (j < i + 2) continue;
    const double d = config_distance(out[i], out[j], request.space, request.world);
    const auto segments = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(d / request.step_size)));
    if (segments - 1 >= j - i - 1) continue;  // not shorter
    if (!segment_free(out[i], out[j], request.space, request.world, eps)) continue;
    Path next(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(i) + 1);
    for (std::size_t k = 1; k < segments; ++k) {
      next.push_back(lerp(out[i], out[j], static_cast<double>(k) / segments));
    }
    next.insert(next.end(), out.begin() + static_cast<std::ptrdiff_t>(j), out.end());
    out = std::move(next);
  }
  return out;
}

CollisionWorld deflect_planning_world(const DeflectSpheresEnv& env, std::size_t instrument) {
  CollisionWorld w;
  const auto& p = env.params();
  for (const auto& [base, top] : env.stalk_segments()) {
    w.capsules.push_back({base, top, 1.5});
    w.capsules.push_back({top, top, p.sphere_radius});
  }
  w.boxes.push_back({Vec3(-p.board_half_x, -p.board_half_y, -3.0), Vec3(p.board_half_x, p.board_half_y, 0.0)});
  const Instrument& inst = env.instruments().at(instrument);
  w.rcm = inst.rcm;
  w.limits = inst.limits;
  w.tool_radius = inst.shaft_radius;
  return w;
}

PlanRequest deflect_plan_request(const DeflectSpheresEnv& env, std::uint64_t seed) {
  PlanRequest r;
  r.space = PlanSpace::kTpsd;
  const std::size_t inst = env.active_instrument();
  r.world = deflect_planning_world(env, inst);
  const Instrument& instrument = env.instruments()[inst];
  const auto s = instrument.state.as_array();
  r.start.assign(s.begin(), s.end());
  const Vec3 goal_tip = env.sphere_rest(env.active_sphere()) + Vec3(0, 0, env.params().sphere_radius + 10.0);
  const auto g = pose_to_ptsd(goal_tip, instrument.rcm, instrument.state.spin).as_array();
  r.goal.assign(g.begin(), g.end());
  r.step_size = 2.0;
  r.goal_tolerance = 0.5;
  r.goal_bias = 0.1;
  r.max_iterations = 20000;
  r.seed = seed;
  return r;
}

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json ptsd(const PtsdState& s) { return json::array({s.tilt, s.pan, s.spin, s.depth}); }

void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) fail(ErrorCode::kInvalidConfig, where + " must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) fail(ErrorCode::kInvalidConfig, "unknown key " + where + "." + k);
  }
}

std::vector<double> numbers(const json& j, std::size_t n, const std::string& where) {
  if (!j.is_array() || (n != 0 && j.size() != n)) {
    fail(ErrorCode::kInvalidConfig, where + " needs " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) fail(ErrorCode::kInvalidConfig, where + " must contain numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

Vec3 vec_from(const json& j, const std::string& where) {
  const auto v = numbers(j, 3, where);
  return Vec3(v[0], v[1], v[2]);
}

PtsdState ptsd_from(const json& j, const std::string& where) {
  const auto v = numbers(j, 4, where);
  return PtsdState{v[0], v[1], v[2], v[3]};
}

template <typename T>
T number_at(const json& obj, const char* key, T fallback, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) fail(ErrorCode::kInvalidConfig, where + "." + key + " must be a number");
  return it->get<T>();
}

json limits_json(const InstrumentLimits& l) {
  return {{"ptsd_low", ptsd(l.ptsd_low)},
          {"ptsd_high", ptsd(l.ptsd_high)},
          {"cartesian_low", vec(l.cartesian_box.min)},
          {"cartesian_high", vec(l.cartesian_box.max)},
          {"velocity_limits", ptsd(l.velocity_limits)}};
}

InstrumentLimits limits_from(const json& j) {
  only_keys(j, {"ptsd_low", "ptsd_high", "cartesian_low", "cartesian_high", "velocity_limits"},
            "world.limits");
  InstrumentLimits l;
  if (j.contains("ptsd_low")) l.ptsd_low = ptsd_from(j["ptsd_low"], "world.limits.ptsd_low");
  if (j.contains("ptsd_high")) l.ptsd_high = ptsd_from(j["ptsd_high"], "world.limits.ptsd_high");
  if (j.contains("cartesian_low")) l.cartesian_box.min = vec_from(j["cartesian_low"], "cartesian_low");
  if (j.contains("cartesian_high")) l.cartesian_box.max = vec_from(j["cartesian_high"], "cartesian_high");
  if (j.contains("velocity_limits")) {
    l.velocity_limits = ptsd_from(j["velocity_limits"], "world.limits.velocity_limits");
  }
  return l;
}

}  // namespace

json plan_request_to_json(const PlanRequest& r) {
  json capsules = json::array();
  for (const auto& c : r.world.capsules) {
    capsules.push_back({{"a", vec(c.a)}, {"b", vec(c.b)}, {"radius", c.radius}});
  }
  json boxes = json::array();
  for (const auto& b : r.world.boxes) boxes.push_back({{"min", vec(b.min)}, {"max", vec(b.max)}});
  json world = {{"capsules", capsules},
                {"boxes", boxes},
                {"rcm", {{"position", vec(r.world.rcm.position)},
                         {"orientation", vec(r.world.rcm.orientation)}}},
                {"limits", limits_json(r.world.limits)},
                {"tool_radius", r.world.tool_radius},
                {"bounds", {{"min", vec(r.world.bounds.min)}, {"max", vec(r.world.bounds.max)}}},
                {"point_radius", r.world.point_radius},
                {"metric_weights", r.world.metric_weights}};
  return {{"space", to_string(r.space)},      {"start", r.start},
          {"goal", r.goal},                   {"step_size", r.step_size},
          {"goal_tolerance", r.goal_tolerance}, {"goal_bias", r.goal_bias},
          {"max_iterations", r.max_iterations}, {"seed", r.seed},
          {"world", world}};
}

PlanRequest plan_request_from_json(const json& doc) {
  only_keys(doc, {"space", "start", "goal", "step_size", "goal_tolerance", "goal_bias",
                  "max_iterations", "seed", "world"},
            "request");
  PlanRequest r;
  if (!doc.contains("space") || !doc["space"].is_string()) {
    fail(ErrorCode::kInvalidConfig, "request.space must be \"cartesian\" or \"tpsd\"");
  }
  r.space = plan_space_from_string(doc["space"].get<std::string>());
  if (!doc.contains("start") || !doc.contains("goal")) {
    fail(ErrorCode::kInvalidConfig, "request needs start and goal");
  }
  r.start = numbers(doc["start"], space_dims(r.space), "request.start");
  r.goal = numbers(doc["goal"], space_dims(r.space), "request.goal");
  r.step_size = number_at(doc, "step_size", r.step_size, "request");
  r.goal_tolerance = number_at(doc, "goal_tolerance", r.goal_tolerance, "request");
  r.goal_bias = number_at(doc, "goal_bias", r.goal_bias, "request");
  r.max_iterations = number_at(doc, "max_iterations", r.max_iterations, "request");
  r.seed = number_at<std::uint64_t>(doc, "seed", r.seed, "request");
  if (doc.contains("world")) {
    const json& w = doc["world"];
    only_keys(w, {"capsules", "boxes", "rcm", "limits", "tool_radius", "bounds", "point_radius",
                  "metric_weights"},
              "world");
    if (w.contains("capsules")) {
      for (const auto& c : w["capsules"]) {
        only_keys(c, {"a", "b", "radius"}, "world.capsules[]");
        r.world.capsules.push_back({vec_from(c.at("a"), "capsule.a"), vec_from(c.at("b"), "capsule.b"),
                                    number_at(c, "radius", 1.0, "capsule")});
      }
    }
    if (w.contains("boxes")) {
      for (const auto& b : w["boxes"]) {
        only_keys(b, {"min", "max"}, "world.boxes[]");
        r.world.boxes.push_back({vec_from(b.at("min"), "box.min"), vec_from(b.at("max"), "box.max")});
      }
    }
    if (w.contains("rcm")) {
      only_keys(w["rcm"], {"position", "orientation"}, "world.rcm");
      if (w["rcm"].contains("position")) r.world.rcm.position = vec_from(w["rcm"]["position"], "rcm.position");
      if (w["rcm"].contains("orientation")) {
        r.world.rcm.orientation = vec_from(w["rcm"]["orientation"], "rcm.orientation");
      }
    }
    if (w.contains("limits")) r.world.limits = limits_from(w["limits"]);
    r.world.tool_radius = number_at(w, "tool_radius", r.world.tool_radius, "world");
    if (w.contains("bounds")) {
      only_keys(w["bounds"], {"min", "max"}, "world.bounds");
      r.world.bounds = {vec_from(w["bounds"].at("min"), "bounds.min"),
                        vec_from(w["bounds"].at("max"), "bounds.max")};
    }
    r.world.point_radius = number_at(w, "point_radius", r.world.point_radius, "world");
    if (w.contains("metric_weights")) r.world.metric_weights = numbers(w["metric_weights"], 0, "metric_weights");
  }
  r.validate();
  return r;
}

PlanRequest load_plan_request(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open plan request " + path.string());
  try {
    return plan_request_from_json(json::parse(in));
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidConfig, "plan request " + path.string() + ": " + e.what());
  }
}

void write_path_file(const std::filesystem::path& path, const Path& configs,
                     const PlanRequest& request) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  json header = {{"space", to_string(request.space)},
                 {"seed", request.seed},
                 {"step_size", request.step_size},
                 {"count", configs.size()}};
  if (request.space == PlanSpace::kTpsd) {
    header["limits"] = limits_json(request.world.limits);
    header["rcm"] = {{"position", vec(request.world.rcm.position)},
                     {"orientation", vec(request.world.rcm.orientation)}};
  } else {
    header["limits"] = {{"min", vec(request.world.bounds.min)}, {"max", vec(request.world.bounds.max)}};
  }
  out << header.dump() << '\n';
  for (const auto& q : configs) out << json{{"q", q}}.dump() << '\n';
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

Path read_path_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  Path out;
  std::size_t line_no = 0;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    ++line_no;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorCode::kCorrupt, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (line_no == 1) {
      expected = j.value("count", std::size_t{0});
      continue;
    }
    if (!j.contains("q")) fail(ErrorCode::kCorrupt, path.string() + ":" + std::to_string(line_no) + ": missing q");
    out.push_back(j["q"].get<Configuration>());
  }
  if (line_no == 0) fail(ErrorCode::kCorrupt, path.string() + ":1: empty file");
  if (out.size() != expected) {
    fail(ErrorCode::kCorrupt, path.string() + ":" + std::to_string(line_no + 1) + ": expected " +
                                  std::to_string(expected) + " configurations");
  }
  return out;
}

}  // namespace lapkit
