#pragma once

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pripro/catalog.hpp"
#include "pripro/service.hpp"

namespace pripro {

inline constexpr const char* kConfigEnvVar = "PRIPRO_CONFIG";

// Service configuration file. Relative paths resolve against the file's
// own directory.
//
//   {
//     "schema_version": 1,
//     "catalogs": ["university.json"],
//     "authenticators": [{"authenticator_device_id": "door-lab",
//                         "sphere_id": "univali", "environment_id": "lab"}],
//     "data_dir": "data",
//     "listen": "127.0.0.1:8080",
//     "enable_tick_endpoint": false,
//     "virtual_clock_start": "2018-01-01T00:00:00Z",
//     "tick_interval_seconds": 60
//   }
struct ServiceConfig {
  std::vector<std::filesystem::path> catalogs;
  std::map<DeviceId, AuthenticatorBinding> authenticators;
  std::optional<std::filesystem::path> data_dir;
  std::string listen = "127.0.0.1:8080";
  bool enable_tick_endpoint = false;
  std::optional<Timestamp> virtual_clock_start;
  int tick_interval_seconds = 60;
};

inline ServiceConfig service_config_from_json(const nlohmann::json& j,
                                              const std::filesystem::path& base_dir) {
  detail::check_schema_version(j);
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  ServiceConfig cfg;
  for (const auto& c : detail::require(j, "catalogs")) cfg.catalogs.push_back(resolve(c.get<std::string>()));
  for (const auto& a : j.value("authenticators", nlohmann::json::array())) {
    DeviceId dev(detail::field<std::string>(a, "authenticator_device_id"));
    AuthenticatorBinding b{SphereId(detail::field<std::string>(a, "sphere_id")),
                           EnvironmentId(detail::field<std::string>(a, "environment_id"))};
    if (!cfg.authenticators.emplace(dev, b).second) {
      throw Error(ErrorCode::InvalidConfig, "authenticator '" + dev.str() + "' mapped twice");
    }
  }
  if (j.contains("data_dir")) cfg.data_dir = resolve(detail::field<std::string>(j, "data_dir"));
  cfg.listen = detail::field_or<std::string>(j, "listen", cfg.listen);
  cfg.enable_tick_endpoint = detail::field_or<bool>(j, "enable_tick_endpoint", false);
  if (j.contains("virtual_clock_start")) {
    cfg.virtual_clock_start = parse_rfc3339(detail::field<std::string>(j, "virtual_clock_start"));
  }
  cfg.tick_interval_seconds = detail::field_or<int>(j, "tick_interval_seconds", 60);
  if (cfg.tick_interval_seconds <= 0) throw Error(ErrorCode::InvalidConfig, "tick_interval_seconds must be > 0");
  return cfg;
}

inline ServiceConfig load_service_config(const std::filesystem::path& path) {
  auto j = read_json_file(path);
  try {
    return service_config_from_json(j, path.parent_path());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

// `--config` wins; otherwise PRIPRO_CONFIG; otherwise nothing.
inline std::optional<std::filesystem::path> config_path(const std::string& flag_value) {
  if (!flag_value.empty()) return std::filesystem::path(flag_value);
  if (const char* env = std::getenv(kConfigEnvVar); env && *env) return std::filesystem::path(env);
  return std::nullopt;
}

// host:port, or a bare port bound to 127.0.0.1.
inline std::pair<std::string, int> parse_listen_address(const std::string& text) {
  auto colon = text.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : text.substr(0, colon);
  std::string port = colon == std::string::npos ? text : text.substr(colon + 1);
  try {
    std::size_t used = 0;
    int p = std::stoi(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw std::out_of_range("port");
    return {host.empty() ? "127.0.0.1" : host, p};
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidConfig, "bad listen address '" + text + "'");
  }
}

}  // namespace pripro
