#pragma once

// RRT motion planning in Cartesian (x, y, z) or TPSD (tilt, pan, spin, depth)
// space against static capsule and box obstacles.
//
// Distances use a weighted Euclidean metric. In TPSD space the default
// weights are 1/deg for the angles and 0.1/mm for depth, so step_size and
// goal_tolerance are in "metric units" (deg-equivalent).

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "lapkit/kinematics.hpp"

namespace lapkit {

class DeflectSpheresEnv;

enum class PlanSpace { kCartesian, kTpsd };
std::string to_string(PlanSpace space);
PlanSpace plan_space_from_string(const std::string& name);

using Configuration = std::vector<double>;
using Path = std::vector<Configuration>;

struct CapsuleObstacle {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 1.0;
};

struct CollisionWorld {
  std::vector<CapsuleObstacle> capsules;
  std::vector<Aabb> boxes;
  // TPSD space: instrument under this RCM; its shaft (RCM to tip) is checked.
  RcmFrame rcm;
  InstrumentLimits limits;
  double tool_radius = 2.5;
  // Cartesian space: a sphere of this radius moving inside `bounds`.
  Aabb bounds{Vec3(-100, -100, -100), Vec3(100, 100, 100)};
  double point_radius = 1.0;
  // Per-axis metric weights; empty selects the defaults for the space.
  std::vector<double> metric_weights;
};

struct PlanRequest {
  PlanSpace space = PlanSpace::kTpsd;
  Configuration start;
  Configuration goal;
  double step_size = 2.0;
  double goal_tolerance = 1.0;
  double goal_bias = 0.1;
  int max_iterations = 20000;
  CollisionWorld world;
  std::uint64_t seed = 0;

  // Throws InvalidConfig.
  void validate() const;
};

std::size_t space_dims(PlanSpace space);
std::vector<double> metric_weights(PlanSpace space, const CollisionWorld& world);
double config_distance(const Configuration& a, const Configuration& b, PlanSpace space,
                       const CollisionWorld& world);
// True when the configuration is outside its limits or touches an obstacle.
bool in_collision(const Configuration& q, PlanSpace space, const CollisionWorld& world);
// Checks a straight segment at spacing `resolution` (metric units), endpoints included.
bool segment_free(const Configuration& a, const Configuration& b, PlanSpace space,
                  const CollisionWorld& world, double resolution);

// Throws StartInCollision, NotFound.
Path rrt_plan(const PlanRequest& request);
bool validate_path(const Path& path, const PlanRequest& request, double resolution);
Path shortcut_smooth(const Path& path, const PlanRequest& request, int attempts,
                     std::uint64_t seed);

// Static proxies of a reset DeflectSpheresEnv (stalks, spheres, board) for
// instrument `instrument`.
CollisionWorld deflect_planning_world(const DeflectSpheresEnv& env, std::size_t instrument = 0);
// Start at the current instrument state, goal with the tip 10 mm above the
// top of the active sphere.
PlanRequest deflect_plan_request(const DeflectSpheresEnv& env, std::uint64_t seed);

nlohmann::json plan_request_to_json(const PlanRequest& request);
PlanRequest plan_request_from_json(const nlohmann::json& doc);
PlanRequest load_plan_request(const std::filesystem::path& path);

// JSON Lines: a header line {"space", "limits", "seed", ...} then one
// {"q": [...]} line per configuration.
void write_path_file(const std::filesystem::path& path, const Path& configs,
                     const PlanRequest& request);
Path read_path_file(const std::filesystem::path& path);

}  // namespace lapkit
