#pragma once

// TCP (4-byte big-endian length prefix + UTF-8 JSON) and websocket (one JSON
// document per text message) transports over Boost.Asio / Boost.Beast.
// Each connection runs its own Session on a dedicated thread.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "lapkit/protocol.hpp"

namespace lapkit {

inline constexpr std::uint16_t kDefaultPort = 7801;
inline constexpr std::size_t kMaxFrameBytes = 64u << 20;

// LAPKIT_PORT if set and valid, else 7801.
std::uint16_t default_port();

enum class Transport { kTcp, kWebSocket };
std::string to_string(Transport transport);
Transport transport_from_string(const std::string& name);

struct ServerOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = kDefaultPort;  // 0 picks a free port
  Transport transport = Transport::kTcp;
  int max_sessions = 16;
  std::filesystem::path record_dir = ".";
};

class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and listens. Throws BindFailure.
  void start();
  // Accepts connections until stop(). Call after start().
  void run();
  // Thread-safe. Closes the listener and all open sessions.
  void stop();

  std::uint16_t port() const { return port_; }
  int active_sessions() const { return active_.load(); }

 private:
  void accept_next();
  void serve_connection(std::shared_ptr<boost::asio::ip::tcp::socket> socket);

  ServerOptions options_;
  boost::asio::io_context io_;
  boost::asio::ip::tcp::acceptor acceptor_;
  std::uint16_t port_ = 0;
  std::atomic<int> active_{0};
  std::atomic<bool> stopping_{false};
  struct Connection {
    std::shared_ptr<boost::asio::ip::tcp::socket> socket;
    std::shared_ptr<std::atomic<bool>> finished;
    std::thread thread;
  };
  void reap_finished();

  std::mutex mutex_;
  std::vector<Connection> connections_;
};

// Blocking clients, mainly for tests and scripted agents.
class TcpClient {
 public:
  TcpClient(const std::string& host, std::uint16_t port);
  nlohmann::json request(const nlohmann::json& message);
  void send_frame(std::string_view payload);
  // Raw bytes without framing, for malformed-input tests.
  void send_bytes(std::string_view bytes);
  std::string receive_frame();
  void close();

 private:
  boost::asio::io_context io_;
  boost::asio::ip::tcp::socket socket_;
};

class WebSocketClient {
 public:
  WebSocketClient(const std::string& host, std::uint16_t port);
  nlohmann::json request(const nlohmann::json& message);
  void send_text(std::string_view text);
  std::string receive_text();
  void close();

 private:
  boost::asio::io_context io_;
  boost::beast::websocket::stream<boost::asio::ip::tcp::socket> ws_;
};

}  // namespace lapkit
