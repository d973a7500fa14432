#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "rmpc/env.hpp"
#include "rmpc/mpc.hpp"
#include "rmpc/ppo.hpp"
#include "rmpc/robot.hpp"
#include "rmpc/types.hpp"

namespace rmpc {

/// INI-style configuration: [section] headers, key = value lines, '#' or ';'
/// comments. All module settings are read from one shared file.
class Config {
 public:
  Config() = default;
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_str(const std::string& section, const std::string& key,
                      const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

  void set(const std::string& section, const std::string& key, const std::string& value);

  /// Canonical serialization (sections and keys sorted).
  std::string serialize() const;
  void save(const std::string& path) const;

  /// FNV-1a over the canonical serialization.
  uint64_t hash() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

ModelParams model_from_config(const Config& cfg);
MpcSettings mpc_settings_from_config(const Config& cfg);
EnvConfig env_config_from_config(const Config& cfg, const ModelParams& model);
PpoConfig ppo_config_from_config(const Config& cfg);

}  // namespace rmpc
