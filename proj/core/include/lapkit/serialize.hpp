#pragma once

// JSON encodings shared by trajectory files and the wire protocol.
//
// Observations: STATE inline as a number array; image planes as base64 of the
// raw little-endian bytes with an explicit shape and encoding tag
// ("u8" for RGB, "f32le" for depth, "u32le" for segmentation).

#include <nlohmann/json.hpp>

#include "lapkit/envcore.hpp"

namespace lapkit {

nlohmann::json observation_to_json(const Observation& obs);
// Throws Corrupt.
Observation observation_from_json(const nlohmann::json& j);

// [[id, value], ...] preserving order.
nlohmann::json features_to_json(const Features& features);
Features features_from_json(const nlohmann::json& j);

nlohmann::json step_result_to_json(const StepResult& result);
nlohmann::json frame_to_json(const FrameBuffer& frame);

nlohmann::json encode_plane(std::span<const std::uint8_t> bytes, std::vector<std::size_t> shape);
nlohmann::json encode_plane(std::span<const float> values, std::vector<std::size_t> shape);
nlohmann::json encode_plane(std::span<const std::uint32_t> values, std::vector<std::size_t> shape);
std::vector<std::uint8_t> decode_u8_plane(const nlohmann::json& j);
std::vector<float> decode_f32_plane(const nlohmann::json& j);
std::vector<std::uint32_t> decode_u32_plane(const nlohmann::json& j);

}  // namespace lapkit
