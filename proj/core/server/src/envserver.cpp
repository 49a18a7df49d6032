#include "lapkit/envserver.hpp"

#include <array>
#include <cstdlib>

#include "lapkit/error.hpp"

namespace lapkit {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using asio::ip::tcp;
using nlohmann::json;

std::uint16_t default_port() {
  if (const char* env = std::getenv("LAPKIT_PORT")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v < 65536) return static_cast<std::uint16_t>(v);
  }
  return kDefaultPort;
}

std::string to_string(Transport transport) {
  return transport == Transport::kTcp ? "tcp" : "websocket";
}

Transport transport_from_string(const std::string& name) {
  if (name == "tcp") return Transport::kTcp;
  if (name == "websocket" || name == "ws") return Transport::kWebSocket;
  fail(ErrorCode::kInvalidConfig, "unknown transport '" + name + "' (tcp, websocket)");
}

namespace {

std::string encode_length(std::size_t n) {
  std::string out(4, '\0');
  out[0] = static_cast<char>((n >> 24) & 0xff);
  out[1] = static_cast<char>((n >> 16) & 0xff);
  out[2] = static_cast<char>((n >> 8) & 0xff);
  out[3] = static_cast<char>(n & 0xff);
  return out;
}

void write_frame(tcp::socket& socket, std::string_view payload) {
  const std::string header = encode_length(payload.size());
  std::array<asio::const_buffer, 2> buffers{asio::buffer(header), asio::buffer(payload)};
  asio::write(socket, buffers);
}

std::string too_large_error() {
  return json{{"type", "error"},
              {"id", nullptr},
              {"payload", {{"code", wire::kBadMessage}, {"message", "frame exceeds size limit"}}}}
      .dump();
}

void serve_tcp(tcp::socket& socket, Session& session) {
  for (;;) {
    std::array<unsigned char, 4> header{};
    asio::read(socket, asio::buffer(header));
    const std::size_t n = (std::size_t{header[0]} << 24) | (std::size_t{header[1]} << 16) |
                          (std::size_t{header[2]} << 8) | std::size_t{header[3]};
    if (n > kMaxFrameBytes) {
      // The stream cannot be resynchronized; answer and drop the connection.
      write_frame(socket, too_large_error());
      return;
    }
    std::string payload(n, '\0');
    asio::read(socket, asio::buffer(payload));
    write_frame(socket, session.handle_text(payload));
    if (session.closed()) return;
  }
}

void serve_websocket(tcp::socket& socket, Session& session) {
  websocket::stream<tcp::socket&> ws(socket);
  ws.read_message_max(kMaxFrameBytes);
  ws.accept();
  for (;;) {
    beast::flat_buffer buffer;
    ws.read(buffer);
    const std::string text = beast::buffers_to_string(buffer.data());
    ws.text(true);
    ws.write(asio::buffer(session.handle_text(text)));
    if (session.closed()) {
      ws.close(websocket::close_code::normal);
      return;
    }
  }
}

}  // namespace

Server::Server(ServerOptions options) : options_(std::move(options)), acceptor_(io_) {}

Server::~Server() { stop(); }

void Server::start() {
  try {
    const auto address = asio::ip::make_address(options_.host);
    const tcp::endpoint endpoint(address, options_.port);
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(asio::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen();
    port_ = acceptor_.local_endpoint().port();
  } catch (const boost::system::system_error& e) {
    fail(ErrorCode::kBindFailure,
         "cannot bind " + options_.host + ":" + std::to_string(options_.port) + ": " + e.what());
  }
  accept_next();
}

void Server::accept_next() {
  auto socket = std::make_shared<tcp::socket>(io_);
  acceptor_.async_accept(*socket, [this, socket](const boost::system::error_code& ec) {
    if (ec || stopping_) return;
    boost::system::error_code ignored;
    socket->set_option(tcp::no_delay(true), ignored);
    std::lock_guard lock(mutex_);
    reap_finished();
    if (active_.load() >= options_.max_sessions) {
      try {
        const std::string busy =
            json{{"type", "error"},
                 {"id", nullptr},
                 {"payload", {{"code", wire::kInternal}, {"message", "server is at max_sessions"}}}}
                .dump();
        if (options_.transport == Transport::kTcp) write_frame(*socket, busy);
      } catch (const std::exception&) {
      }
      socket->close(ignored);
    } else {
      ++active_;
      auto finished = std::make_shared<std::atomic<bool>>(false);
      std::thread worker([this, socket, finished] {
        serve_connection(socket);
        finished->store(true);
      });
      connections_.push_back({socket, finished, std::move(worker)});
    }
    accept_next();
  });
}

void Server::serve_connection(std::shared_ptr<tcp::socket> socket) {
  Session session(SessionOptions{options_.record_dir});
  try {
    if (options_.transport == Transport::kTcp) {
      serve_tcp(*socket, session);
    } else {
      serve_websocket(*socket, session);
    }
  } catch (const std::exception&) {
    // Disconnects and transport errors end only this session.
  }
  boost::system::error_code ignored;
  // The descriptor is closed when the connection is reaped, after the join.
  socket->shutdown(tcp::socket::shutdown_both, ignored);
  --active_;
}

void Server::reap_finished() {
  for (auto it = connections_.begin(); it != connections_.end();) {
    if (it->finished->load()) {
      it->thread.join();
      it = connections_.erase(it);
    } else {
      ++it;
    }
  }
}

void Server::run() {
  io_.run();
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  asio::post(io_, [this] {
    boost::system::error_code ignored;
    acceptor_.close(ignored);
  });
  io_.stop();
  std::vector<Connection> connections;
  {
    std::lock_guard lock(mutex_);
    for (auto& c : connections_) {
      boost::system::error_code ignored;
      c.socket->shutdown(tcp::socket::shutdown_both, ignored);
    }
    connections.swap(connections_);
  }
  for (auto& c : connections) {
    if (c.thread.joinable()) c.thread.join();
  }
  boost::system::error_code ignored;
  acceptor_.close(ignored);
}

TcpClient::TcpClient(const std::string& host, std::uint16_t port) : socket_(io_) {
  tcp::resolver resolver(io_);
  asio::connect(socket_, resolver.resolve(host, std::to_string(port)));
  socket_.set_option(tcp::no_delay(true));
}

void TcpClient::send_frame(std::string_view payload) { write_frame(socket_, payload); }

void TcpClient::send_bytes(std::string_view bytes) { asio::write(socket_, asio::buffer(bytes)); }

std::string TcpClient::receive_frame() {
  std::array<unsigned char, 4> header{};
  asio::read(socket_, asio::buffer(header));
  const std::size_t n = (std::size_t{header[0]} << 24) | (std::size_t{header[1]} << 16) |
                        (std::size_t{header[2]} << 8) | std::size_t{header[3]};
  std::string payload(n, '\0');
  asio::read(socket_, asio::buffer(payload));
  return payload;
}

json TcpClient::request(const json& message) {
  send_frame(message.dump());
  return json::parse(receive_frame());
}

void TcpClient::close() {
  boost::system::error_code ignored;
  socket_.shutdown(tcp::socket::shutdown_both, ignored);
  socket_.close(ignored);
}

WebSocketClient::WebSocketClient(const std::string& host, std::uint16_t port) : ws_(io_) {
  tcp::resolver resolver(io_);
  asio::connect(ws_.next_layer(), resolver.resolve(host, std::to_string(port)));
  ws_.read_message_max(kMaxFrameBytes);
  ws_.handshake(host + ":" + std::to_string(port), "/");
  ws_.text(true);
}

void WebSocketClient::send_text(std::string_view text) { ws_.write(asio::buffer(text)); }

std::string WebSocketClient::receive_text() {
  beast::flat_buffer buffer;
  ws_.read(buffer);
  return beast::buffers_to_string(buffer.data());
}

json WebSocketClient::request(const json& message) {
  send_text(message.dump());
  return json::parse(receive_text());
}

void WebSocketClient::close() {
  boost::system::error_code ignored;
  ws_.close(websocket::close_code::normal, ignored);
}

}  // namespace lapkit
