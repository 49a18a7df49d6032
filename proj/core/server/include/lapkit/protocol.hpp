#pragma once

// Protocol version 1 session logic, independent of the transport. Requests
// are {"type", "id", "payload"}; every request gets exactly one response
// ({"type": "ok" | "error" | "frame", "id", "payload"}) with the same id.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "lapkit/envcore.hpp"
#include "lapkit/trajstore.hpp"

namespace lapkit {

// Wire error codes.
namespace wire {
inline constexpr const char* kBadMessage = "BAD_MESSAGE";
inline constexpr const char* kNotReady = "NOT_READY";
inline constexpr const char* kInvalidConfig = "INVALID_CONFIG";
inline constexpr const char* kActionShape = "ACTION_SHAPE";
inline constexpr const char* kInternal = "INTERNAL";
}  // namespace wire

struct SessionOptions {
  std::filesystem::path record_dir = ".";
};

class Session {
 public:
  explicit Session(SessionOptions options = {});
  ~Session();

  nlohmann::json handle(const nlohmann::json& request);
  // Parses the text first; malformed JSON yields a BAD_MESSAGE response.
  std::string handle_text(std::string_view text);
  // Set once a close request was answered.
  bool closed() const { return closed_; }

 private:
  nlohmann::json dispatch(const std::string& type, const nlohmann::json& payload);
  nlohmann::json make(const nlohmann::json& payload);
  nlohmann::json reset(const nlohmann::json& payload);
  nlohmann::json step(const nlohmann::json& payload);
  nlohmann::json record_start(const nlohmann::json& payload);
  nlohmann::json record_stop();
  void begin_recording();

  SessionOptions options_;
  std::unique_ptr<Environment> env_;
  std::optional<std::filesystem::path> record_path_;
  TrajectorySource record_source_ = TrajectorySource::kHuman;
  std::unique_ptr<TrajectoryWriter> writer_;
  bool armed_ = false;  // start recording at the next reset
  std::size_t recorded_steps_ = 0;
  bool closed_ = false;
};

nlohmann::json make_request(const std::string& type, std::int64_t id,
                            nlohmann::json payload = nlohmann::json::object());

// Keeps [A-Za-z0-9._-], replaces everything else by '_' and strips leading dots.
std::string sanitize_filename(std::string_view name);

}  // namespace lapkit
