#pragma once

// JSON form of EnvConfig. Every object level rejects unknown keys; omitted
// keys keep the environment defaults. See docs/config.md for the schema.

#include <filesystem>

#include <nlohmann/json.hpp>

#include "lapkit/envcore.hpp"

namespace lapkit {

nlohmann::json config_to_json(const EnvConfig& config);
// Starts from default_config(id) (with "params" applied first, so the time
// limit follows them) and overrides what the document sets.
EnvConfig config_from_json(EnvId id, const nlohmann::json& doc);
EnvConfig load_config_file(EnvId id, const std::filesystem::path& path);

nlohmann::json params_to_json(const EnvParams& params);

std::string to_string(ActionMode mode);
ActionMode action_mode_from_string(const std::string& name);

}  // namespace lapkit
