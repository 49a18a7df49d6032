#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <memory>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include "lapkit/config.hpp"
#include "lapkit/envs.hpp"
#include "lapkit/envserver.hpp"
#include "lapkit/error.hpp"
#include "lapkit/planner.hpp"
#include "lapkit/trajstore.hpp"
#include "lapkit/version.hpp"

namespace lapkit::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Thrown for argument problems found after parsing (bad env id, bad address...).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

EnvId parse_env(const std::string& name) {
  try {
    return env_id_from_string(name);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

EnvConfig load_env_config(EnvId id, const std::string& config_path) {
  if (config_path.empty()) return default_config(id);
  return load_config_file(id, config_path);
}

// Uniform random actions; the generator is separate from the env's own RNG.
class RandomPolicy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed ^ 0x5851f42d4c957f2dULL) {}

  std::vector<double> operator()(const Environment& env) {
    std::vector<double> a(env.action_dim());
    if (env.config().action_mode == ActionMode::kDiscrete) {
      const auto index = rng_.index(discrete_action_count(env.action_dim()));
      return discretize_action(index, env.action_dim(), env.config().discrete_step_size);
    }
    for (double& v : a) v = rng_.uniform(-1.0, 1.0);
    return a;
  }

 private:
  Rng rng_;
};

fs::path episode_record_path(const fs::path& base, int episode, int episodes) {
  if (episodes == 1) return base;
  fs::path p = base;
  p.replace_filename(fmt::format("{}-{}{}", base.stem().string(), episode,
                                 base.has_extension() ? base.extension().string() : ".lgtraj"));
  return p;
}

struct RunOptions {
  std::string env;
  std::string config;
  std::string policy = "random";
  std::uint64_t seed = 0;
  int episodes = 1;
  std::string record;
};

int cmd_run(const RunOptions& o, bool as_json, std::ostream& out) {
  const EnvId id = parse_env(o.env);
  const bool scripted = o.policy == "scripted";
  const EnvConfig config = load_env_config(id, o.config);
  if (scripted && config.action_mode == ActionMode::kDiscrete) {
    throw UsageError("the scripted policy needs continuous actions");
  }
  auto env = make_env(id, config);
  if (scripted && id != EnvId::kReach && id != EnvId::kDeflectSpheres) {
    throw UsageError("no scripted policy for '" + o.env + "' (supported: reach, deflect_spheres)");
  }

  json episodes = json::array();
  double return_sum = 0.0;
  int successes = 0;
  long total_steps = 0;
  for (int k = 0; k < o.episodes; ++k) {
    const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(k);
    env->reset(seed);
    RandomPolicy random(seed);
    const TrajectoryPolicy policy = [&](const Environment& e, const Observation&) {
      return scripted ? scripted_expert(e) : random(e);
    };
    const TrajectoryRecord rec =
        record(*env, policy, {}, scripted ? TrajectorySource::kScripted : TrajectorySource::kAgent);
    double ret = 0.0;
    for (const auto& s : rec.steps) ret += s.reward;
    const bool success = !rec.steps.empty() && rec.steps.back().terminated &&
                         std::any_of(rec.steps.back().features.begin(),
                                     rec.steps.back().features.end(), [](const Feature& f) {
                                       return f.id == features::kSuccess && f.value > 0.0;
                                     });
    if (!o.record.empty()) write_trajectory(rec, episode_record_path(o.record, k, o.episodes));

    return_sum += ret;
    successes += success ? 1 : 0;
    total_steps += static_cast<long>(rec.steps.size());
    if (as_json) {
      episodes.push_back({{"episode", k},
                          {"seed", seed},
                          {"steps", rec.steps.size()},
                          {"return", ret},
                          {"success", success}});
    } else {
      fmt::print(out, "episode {} seed {} steps {} return {:.6f} success {}\n", k, seed,
                 rec.steps.size(), ret, success ? "yes" : "no");
    }
  }

  const double n = o.episodes;
  if (as_json) {
    json doc{{"env", to_string(id)},
             {"policy", o.policy},
             {"episodes", episodes},
             {"summary",
              {{"episodes", o.episodes},
               {"success_rate", successes / n},
               {"mean_return", return_sum / n},
               {"mean_steps", total_steps / n}}}};
    out << doc.dump(2) << '\n';
  } else {
    fmt::print(out, "summary env {} policy {} episodes {} success_rate {:.3f} mean_return {:.6f} "
                    "mean_steps {:.1f}\n",
               to_string(id), o.policy, o.episodes, successes / n, return_sum / n,
               total_steps / n);
  }
  return kExitOk;
}

struct BenchmarkOptions {
  std::string env;
  std::string config;
  long steps = 1000;
  std::uint64_t seed = 0;
};

int cmd_benchmark(const BenchmarkOptions& o, bool as_json, std::ostream& out) {
  const EnvId id = parse_env(o.env);
  auto env = make_env(id, load_env_config(id, o.config));
  RandomPolicy policy(o.seed);
  std::uint64_t seed = o.seed;
  env->reset(seed);
  int resets = 1;
  const auto t0 = std::chrono::steady_clock::now();
  for (long i = 0; i < o.steps; ++i) {
    if (env->done()) {
      env->reset(++seed);
      ++resets;
    }
    env->step(policy(*env));
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double rate = seconds > 0.0 ? o.steps / seconds : 0.0;
  if (as_json) {
    out << json{{"env", to_string(id)},
                {"steps", o.steps},
                {"episodes", resets},
                {"seconds", seconds},
                {"steps_per_sec", rate}}
               .dump(2)
        << '\n';
  } else {
    fmt::print(out, "env {} steps {} episodes {} seconds {:.3f} steps/sec {:.1f}\n",
               to_string(id), o.steps, resets, seconds, rate);
  }
  return kExitOk;
}

struct PlanOptions {
  std::string space;
  std::string request;
  std::string out;
  int smoothing = 200;
};

double path_length(const Path& path, const PlanRequest& request) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    len += config_distance(path[i - 1], path[i], request.space, request.world);
  }
  return len;
}

int cmd_plan(const PlanOptions& o, bool as_json, std::ostream& out) {
  PlanSpace space;
  try {
    space = plan_space_from_string(o.space);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const PlanRequest request = load_plan_request(o.request);
  if (request.space != space) {
    throw UsageError("--space " + o.space + " does not match the request's space '" +
                     to_string(request.space) + "'");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const Path raw = rrt_plan(request);
  const Path path = o.smoothing > 0 ? shortcut_smooth(raw, request, o.smoothing, request.seed) : raw;
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool valid = validate_path(path, request, request.step_size / 4.0);
  if (!valid) fail(ErrorCode::kNotFound, "planned path failed validation");
  write_path_file(o.out, path, request);
  if (as_json) {
    out << json{{"space", to_string(space)},
                {"waypoints", path.size()},
                {"raw_waypoints", raw.size()},
                {"length", path_length(path, request)},
                {"seconds", seconds},
                {"out", o.out}}
               .dump(2)
        << '\n';
  } else {
    fmt::print(out, "space {} waypoints {} (raw {}) length {:.3f} seconds {:.3f} -> {}\n",
               to_string(space), path.size(), raw.size(), path_length(path, request), seconds,
               o.out);
  }
  return kExitOk;
}

struct ReplayOptions {
  std::string traj;
  std::string frames;
};

int cmd_replay(const ReplayOptions& o, bool as_json, std::ostream& out) {
  const TrajectoryRecord rec = read_trajectory(o.traj);
  fs::create_directories(o.frames);
  std::size_t written = 0;
  const ReplayOutcome outcome = replay(rec, [&](const Environment& env, std::size_t index) {
    write_ppm(fs::path(o.frames) / fmt::format("frame_{:05d}.ppm", index), env.render());
    ++written;
  });
  if (as_json) {
    json doc{{"steps", rec.steps.size()}, {"frames", written}, {"rewards_match", outcome.rewards_match}};
    if (!outcome.rewards_match) doc["first_mismatch"] = outcome.first_mismatch;
    out << doc.dump(2) << '\n';
  } else {
    fmt::print(out, "env {} seed {} steps {} frames {} rewards_match {}\n", to_string(rec.header.env),
               rec.header.seed, rec.steps.size(), written, outcome.rewards_match ? "yes" : "no");
  }
  if (!outcome.rewards_match) {
    fail(ErrorCode::kCorrupt,
         fmt::format("replayed reward differs from the recording at step {}", outcome.first_mismatch));
  }
  return kExitOk;
}

struct ServeOptions {
  std::string addr;
  std::string transport = "tcp";
  std::string record_dir = ".";
  int max_sessions = 16;
};

ServerOptions parse_serve(const ServeOptions& o) {
  ServerOptions s;
  try {
    s.transport = transport_from_string(o.transport);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  s.port = default_port();
  if (!o.addr.empty()) {
    const auto colon = o.addr.rfind(':');
    if (colon == std::string::npos) throw UsageError("--addr must be host:port, got '" + o.addr + "'");
    s.host = o.addr.substr(0, colon);
    const std::string port = o.addr.substr(colon + 1);
    unsigned long value = 0;
    try {
      std::size_t used = 0;
      value = std::stoul(port, &used);
      if (used != port.size()) throw std::invalid_argument(port);
    } catch (const std::exception&) {
      throw UsageError("invalid port in --addr: '" + port + "'");
    }
    if (value > 65535) throw UsageError("port out of range: " + port);
    s.port = static_cast<std::uint16_t>(value);
    if (s.host.empty()) s.host = "127.0.0.1";
  }
  s.max_sessions = o.max_sessions;
  s.record_dir = o.record_dir;
  return s;
}

int cmd_serve(const ServeOptions& o, std::ostream& out) {
  const ServerOptions options = parse_serve(o);
  // Block the stop signals before any thread exists so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Server server(options);
  server.start();
  fmt::print(out, "lapkit {} serving protocol v{} over {} on {}:{}\n", kVersion, kProtocolVersion,
             to_string(options.transport), options.host, server.port());
  out.flush();
  std::thread io([&] { server.run(); });
  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  io.join();
  fmt::print(out, "stopped\n");
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"lapkit: laparoscopic manipulation environments"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "Machine-readable output");

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Roll out a policy and report returns");
  run_cmd->add_option("--env", run.env, "Environment id (" + env_id_list() + ")")->required();
  run_cmd->add_option("--config", run.config, "Environment config JSON file");
  run_cmd->add_option("--policy", run.policy, "Policy")
      ->check(CLI::IsMember({"random", "scripted"}))
      ->capture_default_str();
  run_cmd->add_option("--seed", run.seed, "Seed of the first episode")->capture_default_str();
  run_cmd->add_option("--episodes", run.episodes, "Number of episodes")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run_cmd->add_option("--record", run.record, "Write the rollout as .lgtraj");

  BenchmarkOptions bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Measure stepping throughput");
  bench_cmd->add_option("--env", bench.env, "Environment id (" + env_id_list() + ")")->required();
  bench_cmd->add_option("--steps", bench.steps, "Number of steps")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--config", bench.config, "Environment config JSON file");
  bench_cmd->add_option("--seed", bench.seed, "Seed")->capture_default_str();

  PlanOptions plan;
  auto* plan_cmd = app.add_subcommand("plan", "Plan a collision-free path");
  plan_cmd->add_option("--space", plan.space, "Planning space")
      ->required()
      ->check(CLI::IsMember({"cartesian", "tpsd"}));
  plan_cmd->add_option("--request", plan.request, "Plan request JSON")
      ->required()
      ->check(CLI::ExistingFile);
  plan_cmd->add_option("--out", plan.out, "Output path file")->required();
  plan_cmd->add_option("--smoothing", plan.smoothing, "Shortcut attempts (0 disables)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  ReplayOptions rep;
  auto* replay_cmd = app.add_subcommand("replay", "Re-simulate a trajectory and dump PPM frames");
  replay_cmd->add_option("--traj", rep.traj, "Trajectory file")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--frames", rep.frames, "Output directory")->required();

  ServeOptions serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the environment server");
  serve_cmd->add_option("--addr", serve.addr, "host:port (port defaults to $LAPKIT_PORT or 7801)");
  serve_cmd->add_option("--transport", serve.transport, "tcp or websocket")
      ->check(CLI::IsMember({"tcp", "ws", "websocket"}))
      ->capture_default_str();
  serve_cmd->add_option("--record-dir", serve.record_dir, "Directory for recordings")
      ->capture_default_str();
  serve_cmd->add_option("--max-sessions", serve.max_sessions, "Concurrent session cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run, as_json, out);
    if (*bench_cmd) return cmd_benchmark(bench, as_json, out);
    if (*plan_cmd) return cmd_plan(plan, as_json, out);
    if (*replay_cmd) return cmd_replay(rep, as_json, out);
    if (*serve_cmd) return cmd_serve(serve, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace lapkit::cli
