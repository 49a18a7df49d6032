#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "cli.hpp"
#include "lapkit/envs.hpp"
#include "lapkit/envserver.hpp"
#include "lapkit/planner.hpp"
#include "lapkit/trajstore.hpp"

namespace lapkit {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lapkit_cli_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"fly"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"run"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"run", "--env", "juggling"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"run", "--env", "reach", "--policy", "smart"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"run", "--env", "rope_cutting", "--policy", "scripted"}).code,
            cli::kExitUsage);
  EXPECT_EQ(run_cli({"benchmark", "--env", "reach", "--steps", "0"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"replay", "--traj", path("missing.lgtraj"), "--frames", path("f")}).code,
            cli::kExitUsage);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kExitOk);
}

TEST_F(Cli, RunPrintsSummaryAndRecords) {
  const Outcome o = run_cli({"run", "--env", "reach", "--policy", "scripted", "--seed", "3",
                             "--episodes", "2", "--record", path("reach.lgtraj")});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  EXPECT_NE(o.out.find("episode 0 seed 3"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("episode 1 seed 4"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("success_rate 1"), std::string::npos) << o.out;
  for (const char* f : {"reach-0.lgtraj", "reach-1.lgtraj"}) {
    const TrajectoryRecord rec = read_trajectory(dir_ / f);
    EXPECT_EQ(rec.header.source, TrajectorySource::kScripted);
    EXPECT_TRUE(replay(rec).rewards_match);
  }
}

TEST_F(Cli, RunJsonAndConfig) {
  {
    std::ofstream(path("c.json")) << R"({"sim": {"time_limit": 5}})";
  }
  const Outcome o = run_cli(
      {"--json", "run", "--env", "thread_in_hole", "--config", path("c.json"), "--seed", "1"});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  const json j = json::parse(o.out);
  EXPECT_EQ(j["env"], "thread_in_hole");
  EXPECT_EQ(j["policy"], "random");
  EXPECT_EQ(j["episodes"][0]["steps"], 5);
  {
    std::ofstream(path("bad.json")) << R"({"sim": {"time_limit": "x"}})";
  }
  EXPECT_EQ(run_cli({"run", "--env", "reach", "--config", path("bad.json")}).code,
            cli::kExitRuntime);
  EXPECT_EQ(run_cli({"run", "--env", "reach", "--config", path("none.json")}).code,
            cli::kExitRuntime);
}

TEST_F(Cli, RandomRunIsReproducible) {
  const auto a = run_cli({"run", "--env", "rope_cutting", "--seed", "7"});
  const auto b = run_cli({"run", "--env", "rope_cutting", "--seed", "7"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
}

TEST_F(Cli, Benchmark) {
  const Outcome o = run_cli({"benchmark", "--env", "reach", "--steps", "200"});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  EXPECT_NE(o.out.find("steps/sec"), std::string::npos);
  const json j =
      json::parse(run_cli({"--json", "benchmark", "--env", "reach", "--steps", "50"}).out);
  EXPECT_GT(j["steps_per_sec"].get<double>(), 0.0);
}

TEST_F(Cli, PlanWritesValidPath) {
  auto env = std::make_unique<DeflectSpheresEnv>(default_config(EnvId::kDeflectSpheres));
  env->reset(6);
  const PlanRequest request = deflect_plan_request(*env, 6);
  {
    std::ofstream(path("req.json")) << plan_request_to_json(request).dump();
  }
  const Outcome o =
      run_cli({"plan", "--space", "tpsd", "--request", path("req.json"), "--out", path("p.jsonl")});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  EXPECT_TRUE(validate_path(read_path_file(path("p.jsonl")), request, request.step_size / 4.0));
  EXPECT_EQ(run_cli({"plan", "--space", "cartesian", "--request", path("req.json"), "--out",
                     path("q.jsonl")})
                .code,
            cli::kExitUsage);
  PlanRequest blocked = request;
  blocked.start = request.goal;
  blocked.goal = request.start;
  blocked.world.capsules.push_back({Vec3(-500, -500, -500), Vec3(500, 500, 500), 1000.0});
  {
    std::ofstream(path("blocked.json")) << plan_request_to_json(blocked).dump();
  }
  EXPECT_EQ(run_cli({"plan", "--space", "tpsd", "--request", path("blocked.json"), "--out",
                     path("b.jsonl")})
                .code,
            cli::kExitRuntime);
}

// Teleoperation flow: a client records 100 steps over the websocket
// transport, then the CLI replays them into 100 frames.
TEST_F(Cli, TeleopRecordingReplaysToFrames) {
  ServerOptions o;
  o.port = 0;
  o.transport = Transport::kWebSocket;
  o.record_dir = dir_;
  Server server(o);
  server.start();
  std::thread thread([&] { server.run(); });
  std::string file;
  {
    WebSocketClient client("127.0.0.1", server.port());
    std::int64_t id = 0;
    client.request(
        make_request("make", ++id, {{"env", "reach"}, {"config", {{"resolution", 32}}}}));
    file =
        client.request(make_request("record_start", ++id, {{"name", "teleop"}}))["payload"]["file"];
    client.request(make_request("reset", ++id, {{"seed", 12}}));
    for (int i = 0; i < 100; ++i) {
      const double s = std::sin(i * 0.1);
      const json r = client.request(make_request("step", ++id, {{"action", {s, 0.3 * s, -0.2}}}));
      ASSERT_EQ(r["type"], "ok") << r.dump();
    }
    EXPECT_EQ(client.request(make_request("record_stop", ++id))["payload"]["steps"], 100);
    client.close();
  }
  server.stop();
  thread.join();

  const Outcome r = run_cli({"replay", "--traj", file, "--frames", path("frames")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  std::size_t count = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "frames"))
    count += e.path().extension() == ".ppm";
  EXPECT_EQ(count, 100u);
  std::ifstream ppm(dir_ / "frames" / "frame_00000.ppm", std::ios::binary);
  std::string magic;
  int w = 0, h = 0;
  ppm >> magic >> w >> h;
  EXPECT_EQ(magic, "P6");
  EXPECT_EQ(w, 32);
  EXPECT_EQ(h, 32);
}

TEST_F(Cli, ReplayRejectsTamperedTrajectory) {
  auto env = make_env(EnvId::kReach);
  env->reset(0);
  TrajectoryRecord rec = record(
      *env, [](const Environment&, const Observation&) { return std::vector<double>{1, 0, 0}; }, {},
      TrajectorySource::kAgent, 4);
  rec.steps[2].reward = 123.0;
  write_trajectory(rec, path("t.lgtraj"));
  EXPECT_EQ(run_cli({"replay", "--traj", path("t.lgtraj"), "--frames", path("f")}).code,
            cli::kExitRuntime);
  {
    std::ofstream(path("junk.lgtraj")) << "garbage\n";
  }
  EXPECT_EQ(run_cli({"replay", "--traj", path("junk.lgtraj"), "--frames", path("f")}).code,
            cli::kExitRuntime);
}

TEST_F(Cli, ServeRejectsBadAddress) {
  EXPECT_EQ(run_cli({"serve", "--addr", "localhost:notaport"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"serve", "--transport", "udp"}).code, cli::kExitUsage);
}

}  // namespace
}  // namespace lapkit
