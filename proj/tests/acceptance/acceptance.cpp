// Acceptance checks, one PASS/FAIL line each.
//
//   lapkit_acceptance                 run everything
//   lapkit_acceptance --only NAME...  run a subset
//   lapkit_acceptance --list          print the check names
//
// --dump-stream ENV SEED STEPS OBS is used internally by the determinism
// check: it prints the bit patterns of a seeded random rollout.

#include <fmt/format.h>

#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lapkit/envs.hpp"
#include "lapkit/envserver.hpp"
#include "lapkit/error.hpp"
#include "lapkit/planner.hpp"
#include "lapkit/sensors.hpp"
#include "lapkit/serialize.hpp"
#include "lapkit/softbody.hpp"
#include "lapkit/trajstore.hpp"
#include "tables.hpp"

namespace lapkit {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Plain row-major 4x4 products, kept apart from the Eigen code under test.
using M4 = std::array<double, 16>;

M4 mul(const M4& a, const M4& b) {
  M4 c{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += a[i * 4 + k] * b[k * 4 + j];
      c[i * 4 + j] = s;
    }
  }
  return c;
}

M4 rot(int axis, double deg) {
  const double r = deg * 3.14159265358979323846 / 180.0;
  const double c = std::cos(r), s = std::sin(r);
  switch (axis) {
    case 0:
      return {1, 0, 0, 0, 0, c, -s, 0, 0, s, c, 0, 0, 0, 0, 1};
    case 1:
      return {c, 0, s, 0, 0, 1, 0, 0, -s, 0, c, 0, 0, 0, 0, 1};
    default:
      return {c, -s, 0, 0, s, c, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  }
}

M4 trans(double x, double y, double z) { return {1, 0, 0, x, 0, 1, 0, y, 0, 0, 1, z, 0, 0, 0, 1}; }

M4 oracle_forward(const RcmFrame& rcm, const PtsdState& q) {
  M4 m = trans(rcm.position.x(), rcm.position.y(), rcm.position.z());
  m = mul(m, rot(0, rcm.orientation.x()));
  m = mul(m, rot(1, rcm.orientation.y()));
  m = mul(m, rot(2, rcm.orientation.z()));
  m = mul(m, rot(0, q.tilt));
  m = mul(m, rot(1, q.pan));
  m = mul(m, rot(2, q.spin));
  return mul(m, trans(0, 0, q.depth));
}

RcmFrame random_rcm(Rng& rng) {
  RcmFrame f;
  for (int i = 0; i < 3; ++i) f.position[i] = rng.uniform() * 400.0 - 200.0;
  for (int i = 0; i < 3; ++i) f.orientation[i] = rng.uniform() * 360.0 - 180.0;
  return f;
}

PtsdState random_ptsd(Rng& rng) {
  return {rng.uniform() * 180.0 - 90.0, rng.uniform() * 180.0 - 90.0, rng.uniform() * 360.0 - 180.0,
          rng.uniform() * 300.0};
}

std::vector<double> random_action(Rng& rng, std::size_t dim) {
  std::vector<double> a(dim);
  for (auto& v : a) v = rng.uniform() * 2.0 - 1.0;
  return a;
}

Outcome rcm_invariant() {
  const auto t0 = Clock::now();
  Rng rng(1);
  double worst = 0.0;
  constexpr int kStates = 100000;
  for (int n = 0; n < kStates; ++n) {
    const RcmFrame rcm = random_rcm(rng);
    PtsdState q = random_ptsd(rng);
    q.depth = 1.0 + q.depth;  // keep the tip off the RCM so the line is defined
    const Pose pose = ptsd_to_pose(q, rcm);
    const Vec3 axis = pose.axis();
    const Vec3 d = rcm.position - pose.position;
    worst = std::max(worst, (d - d.dot(axis) * axis).norm());
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-9 && t < 5.0,
          fmt::format("max distance {:.3e} mm over {} states in {:.2f} s (limit 1e-9 mm, 5 s)",
                      worst, kStates, t)};
}

Outcome forward_oracle() {
  Rng rng(2);
  double worst = 0.0;
  constexpr int kInputs = 10000;
  for (int n = 0; n < kInputs; ++n) {
    const RcmFrame rcm = random_rcm(rng);
    const PtsdState q = random_ptsd(rng);
    const M4 expect = oracle_forward(rcm, q);
    const Mat4 got = ptsd_to_pose(q, rcm).matrix();
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) worst = std::max(worst, std::abs(got(i, j) - expect[i * 4 + j]));
    }
  }
  return {worst <= 1e-9,
          fmt::format("max entry error {:.3e} over {} inputs (limit 1e-9)", worst, kInputs)};
}

Outcome reward_tables() {
  const auto rows =
      testing::load_reward_table(std::string(LAPKIT_TEST_DATA_DIR) + "/reward_table.tsv");
  std::size_t checked = 0;
  std::vector<std::string> problems;
  for (EnvId id : all_env_ids()) {
    std::vector<testing::RewardRow> expect;
    for (const auto& r : rows) {
      if (r.env == to_string(id)) expect.push_back(r);
    }
    const RewardSpec spec = default_reward_spec(id);
    if (spec.terms.size() != expect.size()) {
      problems.push_back(fmt::format("{}: {} terms, table has {}", to_string(id), spec.terms.size(),
                                     expect.size()));
      continue;
    }
    for (std::size_t i = 0; i < expect.size(); ++i) {
      const auto& t = spec.terms[i];
      const bool same =
          t.feature == expect[i].feature &&
          std::bit_cast<std::uint64_t>(t.weight) == std::bit_cast<std::uint64_t>(expect[i].weight);
      if (!same) {
        problems.push_back(fmt::format("{}[{}]: {}={} vs {}={}", to_string(id), i, t.feature,
                                       t.weight, expect[i].feature, expect[i].weight_text));
      }
      ++checked;
    }
  }
  if (!problems.empty()) return {false, problems.front()};
  return {checked == rows.size(), fmt::format("{} of {} table rows equal", checked, rows.size())};
}

Outcome sim_defaults() {
  std::vector<std::string> problems;
  auto check = [&](const std::string& what, const SimParams& got, SimParams want) {
    if (got.delta_t_s != want.delta_t_s || got.frame_skip != want.frame_skip ||
        got.time_limit != want.time_limit) {
      problems.push_back(fmt::format("{}: ({}, {}, {}) expected ({}, {}, {})", what, got.delta_t_s,
                                     got.frame_skip, got.time_limit, want.delta_t_s,
                                     want.frame_skip, want.time_limit));
    }
    if (std::abs(got.frame_skip * got.delta_t_s - 0.1) > 1e-12) {
      problems.push_back(fmt::format("{}: N*dt = {}", what, got.frame_skip * got.delta_t_s));
    }
  };
  check("reach", default_config(EnvId::kReach).sim, {0.1, 1, 500});
  check("tissue_manipulation", default_config(EnvId::kTissueManipulation).sim, {0.1, 1, 500});
  check("thread_in_hole", default_config(EnvId::kThreadInHole).sim, {0.01, 10, 300});
  int cases = 3;
  for (int m : {1, 2, 3, 5, 10}) {
    DeflectSpheresParams p;
    p.num_spheres = std::max(p.num_spheres, m);
    p.deflections_to_win = m;
    check(fmt::format("deflect_spheres M={}", m), default_config(p).sim, {0.1, 1, 500 * m});
    check(fmt::format("deflect_spheres M={} via make_env", m),
          make_env(EnvId::kDeflectSpheres, default_config(p))->config().sim, {0.1, 1, 500 * m});
    ++cases;
  }
  for (int c : {1, 2, 3, 4, 5}) {
    RopeCuttingParams p;
    p.ropes_to_cut = c;
    check(fmt::format("rope_cutting C={}", c), default_config(p).sim,
          {0.1, 1, std::max(400, 200 * c)});
    ++cases;
  }
  if (!problems.empty()) return {false, problems.front()};
  return {true, fmt::format("{} configurations match, N*dt = 0.1 s for all", cases)};
}

Outcome state_lengths() {
  struct Case {
    std::string name;
    EnvConfig config;
    EnvId id;
    std::size_t want;
  };
  std::vector<Case> cases{
      {"reach", default_config(EnvId::kReach), EnvId::kReach, 6},
      {"deflect_spheres", default_config(EnvId::kDeflectSpheres), EnvId::kDeflectSpheres, 29},
      {"tissue_manipulation", default_config(EnvId::kTissueManipulation),
       EnvId::kTissueManipulation, 9},
      {"rope_cutting R=5", default_config(RopeCuttingParams{.num_ropes = 5, .ropes_to_cut = 3}),
       EnvId::kRopeCutting, 66},
      {"rope_cutting R=10", default_config(RopeCuttingParams{.num_ropes = 10, .ropes_to_cut = 3}),
       EnvId::kRopeCutting, 111},
      {"thread_in_hole", default_config(EnvId::kThreadInHole), EnvId::kThreadInHole, 29},
  };
  std::string summary;
  for (const auto& c : cases) {
    auto env = make_env(c.id, c.config);
    const Observation obs = env->reset(0);
    const double a0 = 0.0;
    std::vector<double> zero(env->action_dim(), a0);
    const StepResult r = env->step(zero);
    if (obs.state.size() != c.want || r.observation.state.size() != c.want ||
        env->state_dim() != c.want) {
      return {false,
              fmt::format("{}: reset {} step {} declared {}, expected {}", c.name, obs.state.size(),
                          r.observation.state.size(), env->state_dim(), c.want)};
    }
    summary += fmt::format("{}{} {}", summary.empty() ? "" : ", ", c.name, c.want);
  }
  return {true, summary};
}

double expert_success_rate(EnvId id, const EnvConfig& config, int episodes) {
  auto env = make_env(id, config);
  int wins = 0;
  for (int seed = 0; seed < episodes; ++seed) {
    env->reset(static_cast<std::uint64_t>(seed));
    StepResult r;
    while (!env->done()) r = env->step(scripted_expert(*env));
    wins += r.terminated && r.info.success;
  }
  return static_cast<double>(wins) / episodes;
}

Outcome expert_solvability() {
  const auto t0 = Clock::now();
  const EnvConfig reach = default_config(EnvId::kReach);
  const double reach_rate = expert_success_rate(EnvId::kReach, reach, 100);
  DeflectSpheresParams dp;
  dp.num_spheres = 5;
  dp.deflections_to_win = 1;
  dp.bimanual = false;
  const double deflect_rate = expert_success_rate(EnvId::kDeflectSpheres, default_config(dp), 100);
  const double t = seconds_since(t0);
  const double threshold = std::get<ReachParams>(reach.params).success_threshold;
  return {reach_rate >= 0.95 && deflect_rate >= 0.80 && t < 300.0,
          fmt::format(
              "reach {:.0f}% (threshold {} mm, limit {} steps), deflect_spheres N=5 M=1 {:.0f}% "
              "in {:.2f} s (need 95% / 80%, 300 s)",
              100 * reach_rate, threshold, reach.sim.time_limit, 100 * deflect_rate, t)};
}

Outcome rope_failure() {
  RopeCuttingEnv env(default_config(RopeCuttingParams{.num_ropes = 5, .ropes_to_cut = 3}));
  int episodes = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    env.reset(seed);
    std::vector<std::size_t> inactive;
    for (std::size_t r = 0; r < env.rope_count(); ++r) {
      if (r != env.active_rope()) inactive.push_back(r);
    }
    const std::vector<double> idle(env.action_dim(), 0.0);
    StepResult r;
    for (int k = 0; k < 3; ++k) {
      env.sever_rope(inactive[static_cast<std::size_t>(k)]);
      r = env.step(idle);
      if (k < 2 && (r.terminated || r.info.failure)) {
        return {false, fmt::format("seed {}: episode ended after {} inactive cuts", seed, k + 1)};
      }
    }
    double penalty = 0.0;
    for (const auto& f : r.info.contributions) {
      if (f.id == "failed_task") penalty = f.value;
    }
    if (!r.terminated || !r.info.failure || r.info.success || penalty != -20.0 ||
        env.incorrect_cuts() != 3) {
      return {false, fmt::format("seed {}: terminated={} failure={} failed_task contribution {}",
                                 seed, r.terminated, r.info.failure, penalty)};
    }
    ++episodes;
  }
  return {true, fmt::format("{} seeds: third inactive cut terminates with failure, failed_task -20",
                            episodes)};
}

Outcome physics_stability() {
  SoftWorld world;
  ChainSpec spec;
  spec.start = Vec3(0, 0, 100);
  spec.end = Vec3(45, 0, 100);
  spec.particles = 10;
  spec.pinned_head = 1;
  add_chain(world, spec);
  const SolverSettings solver{4, 20, 1e5, 2.0};
  double violation = 0.0;
  int settled_at = -1;
  for (int i = 0; i < 200; ++i) {
    step_world(world, {}, 0.01, solver);
    violation = 0.0;
    for (const auto& c : world.distance_constraints()) {
      const double len = (world.particles()[c.i].position - world.particles()[c.j].position).norm();
      violation = std::max(violation, std::abs(len - c.rest_length) / c.rest_length);
    }
    if (violation >= 0.01)
      settled_at = -1;
    else if (settled_at < 0)
      settled_at = i + 1;
  }

  auto env = make_env(EnvId::kThreadInHole);
  Rng rng(7);
  int unstable = 0, episodes = 0;
  std::string error;
  constexpr int kSteps = 10000;
  try {
    env->reset(0);
    for (int s = 0; s < kSteps; ++s) {
      if (env->done()) env->reset(static_cast<std::uint64_t>(++episodes));
      const StepResult r = env->step(random_action(rng, env->action_dim()));
      unstable += r.info.unstable;
    }
  } catch (const Error& e) {
    error = e.what();
  }
  const bool pass = violation < 0.01 && settled_at > 0 && unstable == 0 && error.empty();
  return {pass, fmt::format(
                    "rope violation {:.3e} after 200 steps (below 1% from step {}); thread_in_hole "
                    "{} random steps, {} episodes, {} unstable{}",
                    violation, settled_at, kSteps, episodes + 1, unstable,
                    error.empty() ? "" : ", error: " + error)};
}

void append_bits(std::string& out, std::span<const float> v) {
  for (float f : v) out += fmt::format("{:08x}", std::bit_cast<std::uint32_t>(f));
}

std::string dump_stream(EnvId id, std::uint64_t seed, int steps, ObservationType type) {
  EnvConfig config = default_config(id);
  config.observation_type = type;
  config.resolution = 16;
  auto env = make_env(id, config);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::string out;
  auto put_obs = [&](const Observation& o) {
    out += "o ";
    append_bits(out, o.state);
    out += ' ';
    for (std::uint8_t b : o.rgb) out += fmt::format("{:02x}", b);
    out += ' ';
    append_bits(out, o.depth);
    out += '\n';
  };
  put_obs(env->reset(seed));
  for (int s = 0; s < steps; ++s) {
    if (env->done()) put_obs(env->reset(seed + static_cast<std::uint64_t>(s)));
    const StepResult r = env->step(random_action(rng, env->action_dim()));
    out += fmt::format("r {:016x} {}{}\n", std::bit_cast<std::uint64_t>(r.reward),
                       int(r.terminated), int(r.truncated));
    put_obs(r.observation);
  }
  return out;
}

std::string run_capture(const std::string& command) {
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) fail(ErrorCode::kIo, "cannot run " + command);
  std::string out;
  std::array<char, 1 << 16> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = pclose(pipe);
  if (status != 0) fail(ErrorCode::kIo, command + " exited with status " + std::to_string(status));
  return out;
}

Outcome determinism() {
  const std::string self = fs::read_symlink("/proc/self/exe").string();
  std::string summary;
  constexpr int kSteps = 120;
  for (EnvId id : all_env_ids()) {
    for (const char* type : {"STATE", "RGBD"}) {
      const std::string cmd =
          fmt::format("'{}' --dump-stream {} 31 {} {}", self, to_string(id), kSteps, type);
      const std::string a = run_capture(cmd);
      const std::string b = run_capture(cmd);
      const std::string local = dump_stream(id, 31, kSteps, observation_type_from_string(type));
      if (a.empty() || a != b)
        return {false, fmt::format("{} {}: process runs differ", to_string(id), type)};
      if (a != local)
        return {false,
                fmt::format("{} {}: process run differs from in-process run", to_string(id), type)};
    }
    summary += fmt::format("{}{}", summary.empty() ? "" : ", ", to_string(id));
  }
  return {true, fmt::format("{} steps, STATE and RGBD, two processes bitwise equal: {}", kSteps,
                            summary)};
}

double analytic_depth(const CameraModel& cam, int x, int y, const Vec3& center, double r) {
  const double f = cam.focal_px();
  const double c = cam.principal_point();
  const Vec3 dir((x + 0.5 - c) / f, (y + 0.5 - c) / f, 1.0);
  const double a = dir.squaredNorm();
  const double b = dir.dot(center);
  const double disc = b * b - a * (center.squaredNorm() - r * r);
  return (b - std::sqrt(disc)) / a;  // camera z, since dir.z = 1
}

Outcome renderer() {
  double worst_center = 0.0;
  for (int res : {65, 64, 128}) {
    for (double radius : {5.0, 10.0, 20.0}) {
      CameraModel cam;
      cam.resolution = res;
      RenderScene scene;
      const Vec3 center(0, 0, 100);
      scene.add_sphere(center, radius, 1, Color{200, 50, 50});
      const FrameBuffer fb = render(scene, cam);
      const int mid = res / 2;
      const double expect =
          (res % 2 == 1) ? 100.0 - radius : analytic_depth(cam, mid, mid, center, radius);
      worst_center = std::max(worst_center, std::abs(fb.depth[mid * res + mid] - expect));
    }
  }

  double worst_px = 0.0;
  std::size_t points = 0;
  for (EnvId id : all_env_ids()) {
    EnvConfig config = default_config(id);
    config.resolution = 96;
    auto env = make_env(id, config);
    env->reset(3);
    const CameraModel cam = env->camera();
    const FrameBuffer fb = env->render();
    const auto cloud = depth_to_pointcloud(fb, cam);
    std::size_t k = 0;
    for (int y = 0; y < fb.resolution; ++y) {
      for (int x = 0; x < fb.resolution; ++x) {
        if (!(fb.depth[static_cast<std::size_t>(y * fb.resolution + x)] < cam.far)) continue;
        const PixelCoord p = project(cloud[k++].position, cam);
        worst_px = std::max(worst_px, std::hypot(p.u - (x + 0.5), p.v - (y + 0.5)));
      }
    }
    if (k != cloud.size()) return {false, fmt::format("{}: cloud size mismatch", to_string(id))};
    points += k;
  }
  return {worst_center <= 0.1 && worst_px <= 0.5 && points > 0,
          fmt::format(
              "center depth error {:.3e} mm (limit 0.1); round trip {:.3e} px over {} cloud points "
              "(limit 0.5)",
              worst_center, worst_px, points)};
}

Outcome planner() {
  const auto t0 = Clock::now();
  int valid = 0;
  std::string first_problem;
  std::size_t nodes = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    DeflectSpheresEnv env(default_config(EnvId::kDeflectSpheres));
    env.reset(seed);
    const PlanRequest request = deflect_plan_request(env, seed);
    try {
      const Path path = rrt_plan(request);
      nodes += path.size();
      if (validate_path(path, request, request.step_size / 4.0)) {
        ++valid;
      } else if (first_problem.empty()) {
        first_problem = fmt::format("seed {}: path fails validation", seed);
      }
    } catch (const Error& e) {
      if (first_problem.empty()) first_problem = fmt::format("seed {}: {}", seed, e.what());
    }
  }
  const double t = seconds_since(t0);
  return {valid == 100 && t < 60.0,
          fmt::format("{}/100 paths valid at eps = step/4, {} waypoints, {:.2f} s (limit 60 s){}",
                      valid, nodes, t, first_problem.empty() ? "" : "; " + first_problem)};
}

bool same_bits(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

json fuzz_value(Rng& rng, int depth) {
  switch (rng.index(depth > 2 ? 6 : 8)) {
    case 0:
      return nullptr;
    case 1:
      return rng.uniform() < 0.5;
    case 2:
      return static_cast<std::int64_t>(rng.index(2000)) - 1000;
    case 3:
      return (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.index(40)) - 10.0);
    case 4: {
      static const char* words[] = {"reach", "rope_cutting", "RGBD", "", "tpsd", "éè", "seed", "x"};
      return words[rng.index(8)];
    }
    case 5:
      return std::numeric_limits<std::uint64_t>::max() - rng.index(5);
    case 6: {
      json a = json::array();
      for (std::size_t i = rng.index(6); i > 0; --i) a.push_back(fuzz_value(rng, depth + 1));
      return a;
    }
    default: {
      static const char* keys[] = {"env",        "config", "seed",       "action",
                                   "discrete",   "name",   "source",     "params",
                                   "resolution", "sim",    "time_limit", "num_ropes"};
      json o = json::object();
      for (std::size_t i = rng.index(4); i > 0; --i)
        o[keys[rng.index(12)]] = fuzz_value(rng, depth + 1);
      return o;
    }
  }
}

std::string fuzz_frame(Rng& rng) {
  static const char* types[] = {"hello",        "make",        "reset", "step", "render",
                                "record_start", "record_stop", "close", "bogus"};
  const std::string valid =
      make_request(types[rng.index(9)], static_cast<std::int64_t>(rng.index(100)),
                   fuzz_value(rng, 1))
          .dump();
  switch (rng.index(5)) {
    case 0: {  // random bytes
      std::string s(rng.index(200), '\0');
      for (auto& c : s) c = static_cast<char>(rng.index(256));
      return s;
    }
    case 1: {  // valid request with flipped bytes
      std::string s = valid;
      for (std::size_t i = 1 + rng.index(4); i > 0 && !s.empty(); --i) {
        s[rng.index(s.size())] = static_cast<char>(rng.index(256));
      }
      return s;
    }
    case 2:
      return valid.substr(0, rng.index(valid.size() + 1));
    case 3: {  // structurally odd envelopes
      json j = json::object();
      j["type"] = rng.uniform() < 0.7 ? json(types[rng.index(9)]) : fuzz_value(rng, 1);
      j["id"] = rng.uniform() < 0.7 ? json(rng.index(10)) : fuzz_value(rng, 1);
      if (rng.uniform() < 0.8) j["payload"] = fuzz_value(rng, 1);
      return j.dump();
    }
    default:
      return valid;
  }
}

Outcome protocol() {
  ServerOptions options;
  options.port = 0;
  options.record_dir = fs::temp_directory_path() / "lapkit_acceptance_records";
  Server server(options);
  server.start();
  std::thread thread([&] { server.run(); });
  struct Stop {
    Server& s;
    std::thread& t;
    ~Stop() {
      s.stop();
      t.join();
    }
  } stop{server, thread};

  // Remote vs in-process rollouts.
  int rollouts = 0;
  for (const char* name : {"reach", "deflect_spheres", "rope_cutting"}) {
    for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
      TcpClient client("127.0.0.1", server.port());
      auto local = make_env(env_id_from_string(name));
      std::int64_t id = 0;
      client.request(make_request("make", ++id, {{"env", name}}));
      const json reset = client.request(make_request("reset", ++id, {{"seed", seed}}));
      const Observation local_obs = local->reset(seed);
      if (!same_bits(observation_from_json(reset.at("payload").at("observation")).state,
                     local_obs.state)) {
        return {false, fmt::format("{} seed {}: reset observation differs", name, seed)};
      }
      Rng rng(seed + 100);
      for (int s = 0; s < 60 && !local->done(); ++s) {
        const auto action = random_action(rng, local->action_dim());
        const json remote =
            client.request(make_request("step", ++id, {{"action", action}})).at("payload");
        const StepResult r = local->step(action);
        const bool same =
            std::bit_cast<std::uint64_t>(remote.at("reward").get<double>()) ==
                std::bit_cast<std::uint64_t>(r.reward) &&
            remote.at("terminated").get<bool>() == r.terminated &&
            remote.at("truncated").get<bool>() == r.truncated &&
            same_bits(observation_from_json(remote.at("observation")).state, r.observation.state);
        if (!same) return {false, fmt::format("{} seed {}: step {} differs", name, seed, s)};
      }
      ++rollouts;
    }
  }

  // Fuzzing.
  Rng rng(2024);
  auto client = std::make_unique<TcpClient>("127.0.0.1", server.port());
  int answered = 0, dropped = 0, closed = 0, unanswered = 0;
  std::string first_unanswered;
  constexpr int kFrames = 1000;
  for (int f = 0; f < kFrames; ++f) {
    try {
      const std::size_t kind = rng.index(20);
      if (kind == 0) {  // length prefix beyond the limit: answered, then dropped
        client->send_bytes(std::string("\x7f\xff\xff\xff", 4));
        if (json::parse(client->receive_frame()).at("type") == "error") ++answered;
        client = std::make_unique<TcpClient>("127.0.0.1", server.port());
        continue;
      }
      if (kind == 1) {  // frame cut short by a disconnect
        client->send_bytes(std::string("\x00\x00\x01\x00{\"type\"", 12));
        client->close();
        client = std::make_unique<TcpClient>("127.0.0.1", server.port());
        ++dropped;
        continue;
      }
      client->send_frame(fuzz_frame(rng));
      const json r = json::parse(client->receive_frame());
      const std::string type = r.at("type").get<std::string>();
      if (type != "ok" && type != "error" && type != "frame")
        return {false, "unexpected response " + r.dump()};
      ++answered;
      if (r.at("type") == "ok" && r.at("payload").empty()) {
        // Only close answers with an empty payload; the server then hangs up.
        ++closed;
        client = std::make_unique<TcpClient>("127.0.0.1", server.port());
      }
    } catch (const std::exception& e) {
      // Every complete frame must be answered; a dropped connection here is a failure.
      ++unanswered;
      if (first_unanswered.empty()) first_unanswered = fmt::format("frame {}: {}", f, e.what());
      client = std::make_unique<TcpClient>("127.0.0.1", server.port());
    }
  }
  TcpClient probe("127.0.0.1", server.port());
  const json hello = probe.request(make_request("hello", 1));
  const bool alive = hello.at("type") == "ok";
  if (unanswered > 0) {
    return {false,
            fmt::format("{} fuzz frames got no answer, first {}", unanswered, first_unanswered)};
  }
  return {
      alive && rollouts == 9,
      fmt::format(
          "{} TCP rollouts bitwise equal to in-process; {} fuzz frames ({} answered, {} cut short, "
          "{} sessions closed), server {}",
          rollouts, kFrames, answered, dropped, closed,
          alive ? "still serving" : "not responding")};
}

Outcome trajectory_round_trip() {
  const fs::path dir = fs::temp_directory_path() / "lapkit_acceptance_traj";
  fs::create_directories(dir);
  std::size_t steps = 0;
  for (EnvId id : all_env_ids()) {
    for (ObservationType type : {ObservationType::kState, ObservationType::kRgbd}) {
      EnvConfig config = default_config(id);
      config.observation_type = type;
      config.resolution = 24;
      auto env = make_env(id, config);
      env->reset(77);
      auto rng = std::make_shared<Rng>(77);
      const TrajectoryRecord rec = record(
          *env,
          [rng](const Environment& e, const Observation&) {
            return random_action(*rng, e.action_dim());
          },
          {}, TrajectorySource::kAgent, 80);
      const fs::path file = dir / (to_string(id) + "_" + to_string(type) + ".lgtraj");
      write_trajectory(rec, file);
      const TrajectoryRecord back = read_trajectory(file);
      if (!(back == rec))
        return {false,
                fmt::format("{} {}: read differs from written", to_string(id), to_string(type))};
      const ReplayOutcome out = replay(back);
      if (!out.rewards_match) {
        return {false, fmt::format("{} {}: replay reward differs at step {}", to_string(id),
                                   to_string(type), out.first_mismatch)};
      }
      steps += rec.steps.size();
    }
  }
  fs::remove_all(dir);
  return {true,
          fmt::format("10 recordings, {} steps: read == written, replayed rewards exact", steps)};
}

struct Check {
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Check>& checks() {
  static const std::vector<Check> all{
      {"rcm_invariant", rcm_invariant},
      {"forward_oracle", forward_oracle},
      {"reward_tables", reward_tables},
      {"sim_defaults", sim_defaults},
      {"state_lengths", state_lengths},
      {"expert_solvability", expert_solvability},
      {"rope_failure", rope_failure},
      {"physics_stability", physics_stability},
      {"determinism", determinism},
      {"renderer", renderer},
      {"planner", planner},
      {"protocol", protocol},
      {"trajectory_round_trip", trajectory_round_trip},
  };
  return all;
}

int main_impl(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (!args.empty() && args[0] == "--dump-stream") {
    if (args.size() != 5) return 1;
    std::cout << dump_stream(env_id_from_string(args[1]), std::stoull(args[2]), std::stoi(args[3]),
                             observation_type_from_string(args[4]));
    return 0;
  }
  if (!args.empty() && args[0] == "--list") {
    for (const auto& c : checks()) std::cout << c.name << '\n';
    return 0;
  }
  std::vector<std::string> only;
  if (!args.empty() && args[0] == "--only")
    only.assign(args.begin() + 1, args.end());
  else if (!args.empty()) {
    std::cerr << "usage: lapkit_acceptance [--list | --only NAME...]\n";
    return 2;
  }
  for (const auto& name : only) {
    const bool known = std::any_of(checks().begin(), checks().end(),
                                   [&](const Check& c) { return name == c.name; });
    if (!known) {
      std::cerr << "unknown check '" << name << "'\n";
      return 2;
    }
  }
  int failed = 0, ran = 0;
  for (const auto& c : checks()) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << std::endl;
    failed += !o.pass;
    ++ran;
  }
  std::cout << fmt::format("{} of {} checks passed", ran - failed, ran) << std::endl;
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace lapkit

int main(int argc, char** argv) { return lapkit::main_impl(argc, argv); }
