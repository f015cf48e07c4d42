#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "pripro/errors.hpp"
#include "pripro/ids.hpp"
#include "pripro/profile_level.hpp"
#include "pripro/rules.hpp"
#include "pripro/time.hpp"

namespace pripro {

inline constexpr int kSchemaVersion = 1;

struct DirectoryEntry {
  DeviceId user_device_id;
  UserId user_id;
  // Overrides the environment's base profile when set.
  std::optional<ProfileLevel> base_profile;
};

struct ResourceGrant {
  std::vector<std::string> resources;
  std::vector<std::string> services;
};

// Everything a sphere knows up front: its zone, environments and rules,
// user directory, and what each profile unlocks in each environment.
struct SphereCatalog {
  SphereId sphere_id;
  std::string timezone = "UTC";
  std::map<EnvironmentId, EnvironmentRules> environments;
  std::map<DeviceId, DirectoryEntry> directory;
  std::map<std::pair<EnvironmentId, ProfileLevel>, ResourceGrant> resources;

  const EnvironmentRules& environment(const EnvironmentId& id) const {
    auto it = environments.find(id);
    if (it == environments.end()) {
      throw Error(ErrorCode::NotFound, "sphere '" + sphere_id.str() +
                                           "' has no environment '" + id.str() + "'");
    }
    return it->second;
  }

  const DirectoryEntry* find_device(const DeviceId& device) const {
    auto it = directory.find(device);
    return it == directory.end() ? nullptr : &it->second;
  }

  // Blocked profiles never unlock anything.
  ResourceGrant grants(const EnvironmentId& env, ProfileLevel level) const {
    if (level == ProfileLevel::Blocked) return {};
    auto it = resources.find({env, level});
    return it == resources.end() ? ResourceGrant{} : it->second;
  }

  void add_environment(EnvironmentRules rules) {
    if (rules.sphere_id.empty()) rules.sphere_id = sphere_id;
    if (rules.sphere_id != sphere_id) {
      throw Error(ErrorCode::InvalidRules, "environment '" + rules.environment_id.str() +
                                               "' belongs to sphere '" + rules.sphere_id.str() + "'");
    }
    rules.validate();
    environments.insert_or_assign(rules.environment_id, std::move(rules));
  }

  void add_user(DirectoryEntry entry) {
    if (entry.user_device_id.empty() || entry.user_id.empty()) {
      throw Error(ErrorCode::InvalidArgument, "directory entry needs a device and a user id");
    }
    directory.insert_or_assign(entry.user_device_id, std::move(entry));
  }

  void grant(const EnvironmentId& env, ProfileLevel level, ResourceGrant grant) {
    environment(env);
    if (level == ProfileLevel::Blocked && (!grant.resources.empty() || !grant.services.empty())) {
      throw Error(ErrorCode::InvalidConfig, "Blocked profiles cannot be granted resources");
    }
    resources.insert_or_assign({env, level}, std::move(grant));
  }

  void validate() const {
    if (sphere_id.empty()) throw Error(ErrorCode::InvalidConfig, "catalog without sphere_id");
    Zone::load(timezone);
    for (const auto& [id, rules] : environments) {
      if (rules.sphere_id != sphere_id) {
        throw Error(ErrorCode::InvalidConfig, "environment '" + id.str() + "' has sphere_id '" +
                                                  rules.sphere_id.str() + "'");
      }
      rules.validate();
    }
  }
};

// ---------------------------------------------------------------------------
// JSON (schema_version 1)

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::Parse, std::string("missing field '") + key + "'");
  return *it;
}

template <typename T>
T field(const nlohmann::json& obj, const char* key) {
  try {
    return require(obj, key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const nlohmann::json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return field<T>(obj, key);
}

inline void check_schema_version(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::Parse, "expected a JSON object");
  auto v = field_or<int>(doc, "schema_version", kSchemaVersion);
  if (v != kSchemaVersion) {
    throw Error(ErrorCode::Parse, "unsupported schema_version " + std::to_string(v));
  }
}

}  // namespace detail

inline nlohmann::ordered_json rules_to_json(const EnvironmentRules& r) {
  nlohmann::ordered_json periods = nlohmann::ordered_json::array();
  for (auto k : r.valence_periods) periods.push_back(std::string(to_string(k)));
  return {
      {"environment_id", r.environment_id.str()},
      {"name", r.display_name()},
      {"expected_hours", r.expected_hours.to_double()},
      {"valence_periods", periods},
      {"block_below", r.block_below},
      {"reduce_below", r.reduce_below},
      {"evolve_above", r.evolve_above},
      {"evolve_inclusive", r.evolve_inclusive},
      {"base_profile", std::string(to_string(r.base_profile))},
  };
}

inline EnvironmentRules rules_from_json(const nlohmann::json& j, const SphereId& sphere) {
  using detail::field;
  using detail::field_or;
  EnvironmentRules r;
  r.sphere_id = sphere;
  r.environment_id = EnvironmentId(field<std::string>(j, "environment_id"));
  r.name = field_or<std::string>(j, "name", "");
  // Hours are kept exact to the second.
  r.expected_hours = Rational::from_double(field<double>(j, "expected_hours"), 3600);
  r.valence_periods.clear();
  for (const auto& p : detail::require(j, "valence_periods")) {
    r.valence_periods.push_back(parse_period_kind(p.get<std::string>()));
  }
  r.block_below = field_or<double>(j, "block_below", r.block_below);
  r.reduce_below = field_or<double>(j, "reduce_below", r.reduce_below);
  r.evolve_above = field_or<double>(j, "evolve_above", r.evolve_above);
  r.evolve_inclusive = field_or<bool>(j, "evolve_inclusive", true);
  r.base_profile = parse_profile_level(field_or<std::string>(j, "base_profile", "Guest"));
  return r;
}

inline nlohmann::ordered_json catalog_to_json(const SphereCatalog& c) {
  nlohmann::ordered_json envs = nlohmann::ordered_json::array();
  for (const auto& [_, r] : c.environments) envs.push_back(rules_to_json(r));

  nlohmann::ordered_json dir = nlohmann::ordered_json::array();
  for (const auto& [_, e] : c.directory) {
    nlohmann::ordered_json entry = {{"user_device_id", e.user_device_id.str()},
                                    {"user_id", e.user_id.str()}};
    if (e.base_profile) entry["base_profile"] = std::string(to_string(*e.base_profile));
    dir.push_back(std::move(entry));
  }

  nlohmann::ordered_json res = nlohmann::ordered_json::array();
  for (const auto& [key, g] : c.resources) {
    res.push_back({{"environment_id", key.first.str()},
                   {"profile", std::string(to_string(key.second))},
                   {"resources", g.resources},
                   {"services", g.services}});
  }

  return {{"schema_version", kSchemaVersion},
          {"sphere_id", c.sphere_id.str()},
          {"timezone", c.timezone},
          {"environments", envs},
          {"directory", dir},
          {"resources", res}};
}

inline SphereCatalog catalog_from_json(const nlohmann::json& j) {
  using detail::field;
  using detail::field_or;
  detail::check_schema_version(j);
  SphereCatalog c;
  c.sphere_id = SphereId(field<std::string>(j, "sphere_id"));
  c.timezone = field_or<std::string>(j, "timezone", "UTC");
  for (const auto& e : j.value("environments", nlohmann::json::array())) {
    auto rules = rules_from_json(e, c.sphere_id);
    if (e.contains("sphere_id")) rules.sphere_id = SphereId(field<std::string>(e, "sphere_id"));
    c.add_environment(std::move(rules));
  }
  for (const auto& d : j.value("directory", nlohmann::json::array())) {
    DirectoryEntry entry{DeviceId(field<std::string>(d, "user_device_id")),
                         UserId(field<std::string>(d, "user_id")), std::nullopt};
    if (d.contains("base_profile")) {
      entry.base_profile = parse_profile_level(field<std::string>(d, "base_profile"));
    }
    c.add_user(std::move(entry));
  }
  for (const auto& g : j.value("resources", nlohmann::json::array())) {
    c.grant(EnvironmentId(field<std::string>(g, "environment_id")),
            parse_profile_level(field<std::string>(g, "profile")),
            ResourceGrant{field_or<std::vector<std::string>>(g, "resources", {}),
                          field_or<std::vector<std::string>>(g, "services", {})});
  }
  c.validate();
  return c;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp);
    out << text;
    if (!out) throw Error(ErrorCode::Io, "short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline SphereCatalog load_catalog(const std::filesystem::path& path) {
  try {
    return catalog_from_json(read_json_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

inline void save_catalog(const std::filesystem::path& path, const SphereCatalog& c) {
  write_text_file(path, catalog_to_json(c).dump(2) + "\n");
}

}  // namespace pripro
