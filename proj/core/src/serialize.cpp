#include "lapkit/serialize.hpp"

#include <bit>

#include "lapkit/base64.hpp"
#include "lapkit/error.hpp"

namespace lapkit {

using nlohmann::json;

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::vector<std::uint8_t> decode_checked(const json& j, const char* encoding, std::size_t width) {
  if (!j.is_object() || !j.contains("data") || !j.contains("shape") || !j.contains("encoding")) {
    fail(ErrorCode::kCorrupt, "image plane needs data, shape and encoding");
  }
  if (j["encoding"] != encoding) {
    fail(ErrorCode::kCorrupt, std::string("expected encoding ") + encoding);
  }
  const auto shape = j["shape"].get<std::vector<std::size_t>>();
  auto bytes = base64_decode(j["data"].get<std::string>());
  if (bytes.size() != element_count(shape) * width) {
    fail(ErrorCode::kCorrupt, "image plane size does not match its shape");
  }
  return bytes;
}

template <typename T>
json encode_words(std::span<const T> values, std::vector<std::size_t> shape, const char* encoding) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(values.size() * 4);
  for (T v : values) {
    const auto w = std::bit_cast<std::uint32_t>(v);
    for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<std::uint8_t>(w >> (8 * k)));
  }
  return {{"shape", shape}, {"encoding", encoding}, {"data", base64_encode(bytes)}};
}

template <typename T>
std::vector<T> decode_words(const json& j, const char* encoding) {
  const auto bytes = decode_checked(j, encoding, 4);
  std::vector<T> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t w = 0;
    for (int k = 0; k < 4; ++k) w |= static_cast<std::uint32_t>(bytes[4 * i + k]) << (8 * k);
    out[i] = std::bit_cast<T>(w);
  }
  return out;
}

}  // namespace

json encode_plane(std::span<const std::uint8_t> bytes, std::vector<std::size_t> shape) {
  return {{"shape", shape}, {"encoding", "u8"}, {"data", base64_encode(bytes)}};
}

json encode_plane(std::span<const float> values, std::vector<std::size_t> shape) {
  return encode_words(values, std::move(shape), "f32le");
}

json encode_plane(std::span<const std::uint32_t> values, std::vector<std::size_t> shape) {
  return encode_words(values, std::move(shape), "u32le");
}

std::vector<std::uint8_t> decode_u8_plane(const json& j) { return decode_checked(j, "u8", 1); }
std::vector<float> decode_f32_plane(const json& j) { return decode_words<float>(j, "f32le"); }
std::vector<std::uint32_t> decode_u32_plane(const json& j) {
  return decode_words<std::uint32_t>(j, "u32le");
}

json observation_to_json(const Observation& obs) {
  json j;
  j["type"] = to_string(obs.type);
  if (obs.type == ObservationType::kState) {
    j["state"] = obs.state;
    return j;
  }
  const auto r = static_cast<std::size_t>(obs.resolution);
  j["resolution"] = obs.resolution;
  j["rgb"] = encode_plane(std::span<const std::uint8_t>(obs.rgb), {r, r, 3});
  if (obs.type == ObservationType::kRgbd) {
    j["depth"] = encode_plane(std::span<const float>(obs.depth), {r, r});
  }
  return j;
}

Observation observation_from_json(const json& j) {
  try {
    Observation obs;
    obs.type = observation_type_from_string(j.at("type").get<std::string>());
    if (obs.type == ObservationType::kState) {
      obs.state = j.at("state").get<std::vector<float>>();
      return obs;
    }
    obs.resolution = j.at("resolution").get<int>();
    obs.rgb = decode_u8_plane(j.at("rgb"));
    if (obs.type == ObservationType::kRgbd) obs.depth = decode_f32_plane(j.at("depth"));
    return obs;
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorrupt, std::string("bad observation: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorrupt) throw;
    fail(ErrorCode::kCorrupt, std::string("bad observation: ") + e.what());
  }
}

json features_to_json(const Features& features) {
  json out = json::array();
  for (const auto& f : features) out.push_back(json::array({f.id, f.value}));
  return out;
}

Features features_from_json(const json& j) {
  Features out;
  if (!j.is_array()) fail(ErrorCode::kCorrupt, "features must be an array");
  for (const auto& item : j) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_string() || !item[1].is_number()) {
      fail(ErrorCode::kCorrupt, "feature entries must be [id, value]");
    }
    out.push_back({item[0].get<std::string>(), item[1].get<double>()});
  }
  return out;
}

json step_result_to_json(const StepResult& r) {
  return {{"observation", observation_to_json(r.observation)},
          {"reward", r.reward},
          {"terminated", r.terminated},
          {"truncated", r.truncated},
          {"info",
           {{"features", features_to_json(r.info.features)},
            {"contributions", features_to_json(r.info.contributions)},
            {"success", r.info.success},
            {"failure", r.info.failure},
            {"state_limit_violated", r.info.state_limit_violated},
            {"workspace_violated", r.info.workspace_violated},
            {"unstable", r.info.unstable}}}};
}

json frame_to_json(const FrameBuffer& frame) {
  const auto r = static_cast<std::size_t>(frame.resolution);
  return {{"shape", {r, r}},
          {"rgb", encode_plane(std::span<const std::uint8_t>(frame.rgb), {r, r, 3})},
          {"depth", encode_plane(std::span<const float>(frame.depth), {r, r})},
          {"segmentation", encode_plane(std::span<const std::uint32_t>(frame.segmentation), {r, r})}};
}

}  // namespace lapkit
