#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mustgan/training.hpp"

namespace mustgan {

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& given, const nlohmann::json& known, const std::string& prefix) {
  if (!given.is_object() || !known.is_object()) return;
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!known.contains(it.key())) fail("unknown_key", path);
    reject_unknown_keys(it.value(), known.at(it.key()), path);
  }
}

inline std::string canonical_key(const std::string& key) {
  if (key.rfind("ablation.", 0) == 0) return "model." + key;
  return key;
}

}  // namespace detail

/// Parses an experiment config, rejecting keys the schema does not know. Missing keys keep
/// their defaults.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail("invalid_config", "config must be a JSON object");
  detail::reject_unknown_keys(j, nlohmann::json(ExperimentConfig{}), "");
  try {
    return j.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    fail("invalid_config", e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json(path, "missing_config"));
}

/// Applies "a.b.c=value" to a config. The value is parsed as JSON when possible and
/// otherwise taken as a string. "ablation.x" is shorthand for "model.ablation.x".
inline ExperimentConfig apply_override(const ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) fail("invalid_override", "expected key=value, got '" + assignment + "'");
  const std::string key = detail::canonical_key(assignment.substr(0, eq));
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json j = cfg;
  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) fail("unknown_key", key);
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  *node = value;
  return config_from_json(j);
}

inline ExperimentConfig apply_overrides(ExperimentConfig cfg, const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) cfg = apply_override(cfg, a);
  return cfg;
}

/// Resolved-config snapshot written next to every command's outputs.
inline void write_config_snapshot(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  write_file_atomic(path, nlohmann::json(cfg).dump(2) + "\n");
}

}  // namespace mustgan
