#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include "lapkit/envs.hpp"
#include "lapkit/envserver.hpp"
#include "lapkit/error.hpp"
#include "lapkit/serialize.hpp"

namespace lapkit {
namespace {

using nlohmann::json;

class RunningServer {
 public:
  explicit RunningServer(Transport transport, int max_sessions = 16) {
    ServerOptions o;
    o.port = 0;
    o.transport = transport;
    o.max_sessions = max_sessions;
    o.record_dir = std::filesystem::temp_directory_path() / "lapkit_server_test";
    server_ = std::make_unique<Server>(o);
    server_->start();
    thread_ = std::thread([this] { server_->run(); });
  }
  ~RunningServer() {
    server_->stop();
    thread_.join();
  }
  std::uint16_t port() const { return server_->port(); }
  Server& server() { return *server_; }

 private:
  std::unique_ptr<Server> server_;
  std::thread thread_;
};

template <class Client>
std::vector<std::string> rollout(Client& client, const std::string& env, std::uint64_t seed,
                                 int steps) {
  std::vector<std::string> out;
  std::int64_t id = 0;
  const json made = client.request(make_request("make", ++id, {{"env", env}}));
  const std::size_t dim = made.at("payload").at("action_dim").get<std::size_t>();
  out.push_back(
      client.request(make_request("reset", ++id, {{"seed", seed}}))["payload"]["observation"]
          .dump());
  Rng rng(seed);
  for (int i = 0; i < steps; ++i) {
    json a = json::array();
    for (std::size_t k = 0; k < dim; ++k) a.push_back(rng.uniform() * 2 - 1);
    const json r = client.request(make_request("step", ++id, {{"action", a}}));
    out.push_back(r.at("payload").dump());
    if (r["payload"]["terminated"].get<bool>() || r["payload"]["truncated"].get<bool>()) break;
  }
  return out;
}

std::vector<std::string> local_rollout(const std::string& env_name, std::uint64_t seed, int steps) {
  auto env = make_env(env_id_from_string(env_name));
  std::vector<std::string> out{observation_to_json(env->reset(seed)).dump()};
  Rng rng(seed);
  for (int i = 0; i < steps; ++i) {
    std::vector<double> a(env->action_dim());
    for (auto& v : a) v = rng.uniform() * 2 - 1;
    const StepResult r = env->step(a);
    out.push_back(step_result_to_json(r).dump());
    if (r.terminated || r.truncated) break;
  }
  return out;
}

TEST(Server, TcpRolloutMatchesInProcess) {
  RunningServer server(Transport::kTcp);
  TcpClient client("127.0.0.1", server.port());
  for (const char* env : {"reach", "rope_cutting", "thread_in_hole"}) {
    EXPECT_EQ(rollout(client, env, 5, 20), local_rollout(env, 5, 20)) << env;
  }
}

TEST(Server, WebSocketRolloutMatchesInProcess) {
  RunningServer server(Transport::kWebSocket);
  WebSocketClient client("127.0.0.1", server.port());
  EXPECT_EQ(client.request(make_request("hello", 1))["type"], "ok");
  for (const char* env : {"deflect_spheres", "tissue_manipulation"}) {
    EXPECT_EQ(rollout(client, env, 8, 15), local_rollout(env, 8, 15)) << env;
  }
  client.send_text("not json");
  EXPECT_EQ(json::parse(client.receive_text())["payload"]["code"], "BAD_MESSAGE");
  EXPECT_EQ(client.request(make_request("close", 2))["type"], "ok");
}

TEST(Server, SessionsAreIndependent) {
  RunningServer server(Transport::kTcp);
  TcpClient a("127.0.0.1", server.port());
  TcpClient b("127.0.0.1", server.port());
  a.request(make_request("make", 1, {{"env", "reach"}}));
  EXPECT_EQ(b.request(make_request("reset", 1))["payload"]["code"], "NOT_READY");
  b.request(make_request("make", 2, {{"env", "rope_cutting"}}));
  const json ra = a.request(make_request("reset", 2, {{"seed", 1}}));
  const json rb = b.request(make_request("reset", 3, {{"seed", 1}}));
  EXPECT_EQ(ra["payload"]["observation"]["state"].size(), 6u);
  EXPECT_EQ(rb["payload"]["observation"]["state"].size(), 66u);
}

TEST(Server, OversizedFrameGetsBadMessage) {
  RunningServer server(Transport::kTcp);
  TcpClient client("127.0.0.1", server.port());
  client.send_bytes(std::string("\x7f\xff\xff\xff", 4));
  EXPECT_EQ(json::parse(client.receive_frame())["payload"]["code"], "BAD_MESSAGE");
  TcpClient again("127.0.0.1", server.port());
  EXPECT_EQ(again.request(make_request("hello", 1))["type"], "ok");
}

TEST(Server, MaxSessionsRefusesExtraClients) {
  RunningServer server(Transport::kTcp, 1);
  TcpClient a("127.0.0.1", server.port());
  EXPECT_EQ(a.request(make_request("hello", 1))["type"], "ok");
  TcpClient b("127.0.0.1", server.port());
  const json busy = json::parse(b.receive_frame());
  EXPECT_EQ(busy["type"], "error");
  EXPECT_EQ(busy["payload"]["code"], "INTERNAL");
}

TEST(Server, BindFailure) {
  RunningServer first(Transport::kTcp);
  ServerOptions o;
  o.port = first.port();
  Server clash(o);
  try {
    clash.start();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBindFailure);
  }
}

TEST(Server, DefaultPortHonoursEnvironment) {
  unsetenv("LAPKIT_PORT");
  EXPECT_EQ(default_port(), 7801);
  setenv("LAPKIT_PORT", "9123", 1);
  EXPECT_EQ(default_port(), 9123);
  setenv("LAPKIT_PORT", "99999", 1);
  EXPECT_EQ(default_port(), 7801);
  setenv("LAPKIT_PORT", "12ab", 1);
  EXPECT_EQ(default_port(), 7801);
  unsetenv("LAPKIT_PORT");
  EXPECT_EQ(transport_from_string("ws"), Transport::kWebSocket);
  EXPECT_THROW(transport_from_string("udp"), Error);
}

}  // namespace
}  // namespace lapkit
