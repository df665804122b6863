#pragma once

#include "ocorl/ocorl_loop.hpp"

#include <map>
#include <string>

namespace ocorl {

/// Flat `section.key = value` pairs; `#` starts a comment.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::string& path);

/// Applies one `key=value` override.
void apply_override(ConfigMap& map, const std::string& assignment);

/// Applies OCORL_SEED from the environment when set.
void apply_env_overrides(ConfigMap& map);

/// Throws ConfigError naming the field on unknown keys or malformed values.
ExperimentConfig config_from_map(const ConfigMap& map);

/// Canonical form with every key present.
ConfigMap config_to_map(const ExperimentConfig& cfg);

/// FNV-1a over the canonical sorted form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace ocorl
