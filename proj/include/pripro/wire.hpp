#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "pripro/attendance.hpp"
#include "pripro/errors.hpp"
#include "pripro/evolution.hpp"
#include "pripro/ids.hpp"
#include "pripro/profile_level.hpp"
#include "pripro/time.hpp"

namespace pripro {

// Body of POST /v1/authenticate. Devices send exactly these three fields.
struct AuthRequest {
  DeviceId user_device_id;
  AuthAction action = AuthAction::Enter;
  DeviceId authenticator_device_id;

  friend bool operator==(const AuthRequest&, const AuthRequest&) = default;
};

struct AuthResponse {
  UserId user_id;
  ProfileLevel profile = ProfileLevel::Guest;
  SphereId sphere_id;
  EnvironmentId environment_id;
  std::string environment_name;
  std::vector<std::string> resources;
  std::vector<std::string> services;
  DecisionReason reason = DecisionReason::Maintained;
  std::optional<double> frequency_used;
  Timestamp timestamp;

  friend bool operator==(const AuthResponse&, const AuthResponse&) = default;
};

inline nlohmann::ordered_json auth_request_to_json(const AuthRequest& r) {
  return {{"user_device_id", r.user_device_id.str()},
          {"action", std::string(to_string(r.action))},
          {"authenticator_device_id", r.authenticator_device_id.str()}};
}

inline AuthRequest auth_request_from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& why) { return Error(ErrorCode::BadRequest, why); };
  if (!j.is_object()) throw bad("request body must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "user_device_id" && key != "action" && key != "authenticator_device_id") {
      throw bad("unexpected field '" + key + "'");
    }
  }
  auto text = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
      throw bad(std::string("field '") + key + "' must be a non-empty string");
    }
    return it->get<std::string>();
  };
  AuthRequest r;
  r.user_device_id = DeviceId(text("user_device_id"));
  const auto action = text("action");
  auto parsed = try_parse_action(action);
  if (!parsed) throw bad("action must be \"enter\" or \"exit\", got \"" + action + "\"");
  r.action = *parsed;
  r.authenticator_device_id = DeviceId(text("authenticator_device_id"));
  return r;
}

inline AuthRequest parse_auth_request(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::BadRequest, std::string("malformed JSON: ") + e.what());
  }
  return auth_request_from_json(j);
}

// Field order and names are frozen at schema_version 1.
inline nlohmann::ordered_json auth_response_to_json(const AuthResponse& r) {
  return {
      {"user_id", r.user_id.str()},
      {"profile", std::string(to_string(r.profile))},
      {"environment",
       {{"sphere_id", r.sphere_id.str()},
        {"environment_id", r.environment_id.str()},
        {"name", r.environment_name}}},
      {"resources", r.resources},
      {"services", r.services},
      {"decision",
       {{"reason", std::string(to_string(r.reason))},
        {"frequency_used", r.frequency_used ? nlohmann::ordered_json(*r.frequency_used)
                                            : nlohmann::ordered_json(nullptr)}}},
      {"timestamp", format_rfc3339(r.timestamp)},
  };
}

inline AuthResponse auth_response_from_json(const nlohmann::json& j) {
  try {
    AuthResponse r;
    r.user_id = UserId(j.at("user_id").get<std::string>());
    r.profile = parse_profile_level(j.at("profile").get<std::string>());
    const auto& env = j.at("environment");
    r.sphere_id = SphereId(env.at("sphere_id").get<std::string>());
    r.environment_id = EnvironmentId(env.at("environment_id").get<std::string>());
    r.environment_name = env.at("name").get<std::string>();
    r.resources = j.at("resources").get<std::vector<std::string>>();
    r.services = j.at("services").get<std::vector<std::string>>();
    const auto& d = j.at("decision");
    r.reason = parse_decision_reason(d.at("reason").get<std::string>());
    if (!d.at("frequency_used").is_null()) r.frequency_used = d.at("frequency_used").get<double>();
    r.timestamp = parse_rfc3339(j.at("timestamp").get<std::string>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("bad AuthResponse: ") + e.what());
  }
}

inline nlohmann::ordered_json error_body(ErrorCode code, std::string_view message) {
  return {{"error", std::string(to_string(code))}, {"message", std::string(message)}};
}

}  // namespace pripro
