#include "lapkit/protocol.hpp"

#include "lapkit/config.hpp"
#include "lapkit/envs.hpp"
#include "lapkit/error.hpp"
#include "lapkit/serialize.hpp"
#include "lapkit/version.hpp"

namespace lapkit {

using nlohmann::json;

namespace {

struct WireError {
  const char* code;
  std::string message;
};

bool non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

json response(const char* type, const json& id, json payload) {
  return {{"type", type}, {"id", id}, {"payload", std::move(payload)}};
}

json error_response(const json& id, const char* code, const std::string& message) {
  return response("error", id, {{"code", code}, {"message", message}});
}

const char* wire_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kUnknownEnv: return wire::kInvalidConfig;
    case ErrorCode::kActionShapeMismatch:
    case ErrorCode::kInvalidAction:
    case ErrorCode::kIndexOutOfRange: return wire::kActionShape;
    case ErrorCode::kNotReset: return wire::kNotReady;
    default: return wire::kInternal;
  }
}

}  // namespace

json make_request(const std::string& type, std::int64_t id, json payload) {
  return {{"type", type}, {"id", id}, {"payload", std::move(payload)}};
}

std::string sanitize_filename(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '.' || c == '_' || c == '-';
    out += ok ? c : '_';
  }
  const auto first = out.find_first_not_of('.');
  out = first == std::string::npos ? "" : out.substr(first);
  return out.empty() ? "trajectory" : out;
}

Session::Session(SessionOptions options) : options_(std::move(options)) {}

Session::~Session() = default;

std::string Session::handle_text(std::string_view text) {
  // Error messages may quote invalid UTF-8 from the request; replace it rather than throw.
  auto dump = [](const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); };
  json request;
  try {
    request = json::parse(text);
  } catch (const json::exception& e) {
    return dump(error_response(nullptr, wire::kBadMessage, std::string("malformed JSON: ") + e.what()));
  }
  return dump(handle(request));
}

json Session::handle(const json& request) {
  if (!request.is_object()) return error_response(nullptr, wire::kBadMessage, "message must be an object");
  const auto id_it = request.find("id");
  if (id_it == request.end() || !id_it->is_number_integer()) {
    return error_response(nullptr, wire::kBadMessage, "message needs an integer id");
  }
  const json id = *id_it;
  const auto type_it = request.find("type");
  if (type_it == request.end() || !type_it->is_string()) {
    return error_response(id, wire::kBadMessage, "message needs a string type");
  }
  json payload = json::object();
  if (const auto p = request.find("payload"); p != request.end()) {
    if (!p->is_object()) return error_response(id, wire::kBadMessage, "payload must be an object");
    payload = *p;
  }
  const std::string type = type_it->get<std::string>();
  try {
    json out = dispatch(type, payload);
    const char* kind = type == "render" ? "frame" : "ok";
    return response(kind, id, std::move(out));
  } catch (const WireError& e) {
    return error_response(id, e.code, e.message);
  } catch (const Error& e) {
    return error_response(id, wire_code(e.code()), e.what());
  } catch (const json::exception& e) {
    return error_response(id, wire::kBadMessage, e.what());
  } catch (const std::exception& e) {
    return error_response(id, wire::kInternal, e.what());
  }
}

json Session::dispatch(const std::string& type, const json& payload) {
  if (type == "hello") {
    json ids = json::array();
    for (EnvId id : all_env_ids()) ids.push_back(to_string(id));
    return {{"server_version", kVersion},
            {"protocol_version", kProtocolVersion},
            {"env_ids", ids}};
  }
  if (type == "make") return make(payload);
  if (type == "reset") return reset(payload);
  if (type == "step") return step(payload);
  if (type == "render") {
    if (!env_ || !env_->is_reset()) throw WireError{wire::kNotReady, "render needs make and reset"};
    return frame_to_json(env_->render());
  }
  if (type == "record_start") return record_start(payload);
  if (type == "record_stop") return record_stop();
  if (type == "close") {
    if (writer_) writer_->close();
    writer_.reset();
    record_path_.reset();
    closed_ = true;
    return json::object();
  }
  throw WireError{wire::kBadMessage, "unknown message type '" + type + "'"};
}

json Session::make(const json& payload) {
  const auto env_it = payload.find("env");
  if (env_it == payload.end() || !env_it->is_string()) {
    throw WireError{wire::kInvalidConfig, "make needs an env id; valid ids: " + env_id_list()};
  }
  const EnvId id = env_id_from_string(env_it->get<std::string>());
  const json config_doc = payload.value("config", json::object());
  EnvConfig config = config_from_json(id, config_doc);
  auto env = make_env(id, config);
  if (writer_) writer_->close();
  writer_.reset();
  record_path_.reset();
  armed_ = false;
  env_ = std::move(env);
  return {{"env", to_string(id)},
          {"action_dim", env_->action_dim()},
          {"state_dim", env_->state_dim()},
          {"discrete_actions", discrete_action_count(env_->action_dim())},
          {"observation_type", to_string(env_->config().observation_type)},
          {"action_mode", to_string(env_->config().action_mode)},
          {"config", config_to_json(env_->config())}};
}

void Session::begin_recording() {
  armed_ = false;
  recorded_steps_ = 0;
  writer_ = std::make_unique<TrajectoryWriter>(*record_path_, make_header(*env_, record_source_));
}

json Session::reset(const json& payload) {
  if (!env_) throw WireError{wire::kNotReady, "reset before make"};
  const auto seed_it = payload.find("seed");
  std::uint64_t seed = 0;
  if (seed_it != payload.end()) {
    if (!non_negative_integer(*seed_it)) {
      throw WireError{wire::kBadMessage, "seed must be a non-negative integer"};
    }
    seed = seed_it->get<std::uint64_t>();
  }
  const Observation obs = env_->reset(seed);
  if (writer_) {
    writer_->close();
    writer_.reset();
  }
  if (armed_) begin_recording();
  return {{"observation", observation_to_json(obs)}, {"seed", seed}};
}

json Session::step(const json& payload) {
  if (!env_) throw WireError{wire::kNotReady, "step before make"};
  if (!env_->is_reset()) throw WireError{wire::kNotReady, "step before reset"};
  if (env_->done()) throw WireError{wire::kNotReady, "episode has ended; reset first"};
  std::vector<double> action;
  if (const auto d = payload.find("discrete"); d != payload.end()) {
    if (!non_negative_integer(*d)) {
      throw WireError{wire::kActionShape, "discrete must be a non-negative integer"};
    }
    action = discretize_action(d->get<std::size_t>(), env_->action_dim(), env_->config().discrete_step_size);
  } else {
    const auto a = payload.find("action");
    if (a == payload.end() || !a->is_array()) throw WireError{wire::kActionShape, "step needs an action array"};
    for (const auto& v : *a) {
      if (!v.is_number()) throw WireError{wire::kActionShape, "action entries must be numbers"};
      action.push_back(v.get<double>());
    }
  }
  const std::size_t index = static_cast<std::size_t>(env_->step_count());
  const StepResult result = env_->step(action);
  if (writer_ && !writer_->finished()) {
    writer_->append(make_step(index, action, result));
    recorded_steps_ = writer_->steps();
    if (writer_->finished()) writer_->close();
  }
  return step_result_to_json(result);
}

json Session::record_start(const json& payload) {
  if (!env_) throw WireError{wire::kNotReady, "record_start before make"};
  std::string name = payload.value("name", std::string());
  if (name.empty()) name = "trajectory_" + to_string(env_->id());
  std::string file = sanitize_filename(name);
  if (!file.ends_with(".lgtraj")) file += ".lgtraj";
  record_source_ = trajectory_source_from_string(payload.value("source", std::string("human")));
  if (writer_) writer_->close();
  writer_.reset();
  std::filesystem::create_directories(options_.record_dir);
  record_path_ = options_.record_dir / file;
  // Recording starts now at the beginning of an episode, otherwise at the next reset.
  const bool active = env_->is_reset() && env_->step_count() == 0 && !env_->done();
  recorded_steps_ = 0;
  if (active) {
    begin_recording();
  } else {
    armed_ = true;
  }
  return {{"file", record_path_->string()}, {"active", active}};
}

json Session::record_stop() {
  if (!record_path_) throw WireError{wire::kNotReady, "not recording"};
  if (writer_) {
    writer_->close();
    writer_.reset();
  }
  json out = {{"file", record_path_->string()}, {"steps", recorded_steps_}};
  record_path_.reset();
  armed_ = false;
  return out;
}

}  // namespace lapkit
