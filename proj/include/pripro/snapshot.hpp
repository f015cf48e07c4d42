#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "pripro/catalog.hpp"
#include "pripro/store.hpp"

namespace pripro {

// Snapshot files hold materialized state (profiles, histories, frequency
// records, watermarks) for one or more spheres. Frequencies are written both
// as a double and as an exact [numerator, denominator] pair.

namespace detail {

inline nlohmann::ordered_json rational_to_json(const Rational& r) {
  return nlohmann::ordered_json::array({r.num(), r.den()});
}

inline Rational rational_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::Parse, "exact frequency must be [num, den]");
  return Rational(j[0].get<std::int64_t>(), j[1].get<std::int64_t>());
}

inline nlohmann::ordered_json optional_frequency(const std::optional<Rational>& f) {
  return f ? nlohmann::ordered_json(f->to_double()) : nlohmann::ordered_json(nullptr);
}

}  // namespace detail

inline nlohmann::ordered_json decision_to_json(const EvolutionDecision& d) {
  nlohmann::ordered_json j = {{"previous", std::string(to_string(d.previous))},
                              {"next", std::string(to_string(d.next))},
                              {"reason", std::string(to_string(d.reason))},
                              {"frequency_used", detail::optional_frequency(d.frequency_used)}};
  if (d.frequency_used) j["frequency_exact"] = detail::rational_to_json(*d.frequency_used);
  return j;
}

inline EvolutionDecision decision_from_json(const nlohmann::json& j) {
  EvolutionDecision d;
  d.previous = parse_profile_level(detail::field<std::string>(j, "previous"));
  d.next = parse_profile_level(detail::field<std::string>(j, "next"));
  d.reason = parse_decision_reason(detail::field<std::string>(j, "reason"));
  if (j.contains("frequency_exact")) d.frequency_used = detail::rational_from_json(j["frequency_exact"]);
  return d;
}

inline nlohmann::ordered_json profile_to_json(const ProfileState& p) {
  nlohmann::ordered_json history = nlohmann::ordered_json::array();
  for (const auto& h : p.history) {
    auto entry = decision_to_json(h.decision);
    entry["at"] = format_rfc3339(h.at);
    history.push_back(std::move(entry));
  }
  return {{"user_id", p.user_id.str()},
          {"level", std::string(to_string(p.level))},
          {"last_update", format_rfc3339(p.last_update)},
          {"history", history}};
}

inline ProfileState profile_from_json(const nlohmann::json& j, const SphereId& sphere,
                                      const EnvironmentId& env) {
  ProfileState p;
  p.sphere_id = sphere;
  p.environment_id = env;
  p.user_id = UserId(detail::field<std::string>(j, "user_id"));
  p.level = parse_profile_level(detail::field<std::string>(j, "level"));
  p.last_update = parse_rfc3339(detail::field<std::string>(j, "last_update"));
  for (const auto& h : detail::require(j, "history")) {
    p.history.push_back({parse_rfc3339(detail::field<std::string>(h, "at")), decision_from_json(h)});
  }
  return p;
}

inline nlohmann::ordered_json frequency_to_json(const FrequencyRecord& r) {
  return {{"user_id", r.user_id.str()},
          {"period_kind", std::string(to_string(r.period_kind))},
          {"period_start", format_rfc3339(r.period_start)},
          {"frequency", r.frequency.to_double()},
          {"frequency_exact", detail::rational_to_json(r.frequency)},
          {"computed_at", format_rfc3339(r.computed_at)}};
}

inline FrequencyRecord frequency_from_json(const nlohmann::json& j, const SphereId& sphere,
                                           const EnvironmentId& env) {
  FrequencyRecord r;
  r.sphere_id = sphere;
  r.environment_id = env;
  r.user_id = UserId(detail::field<std::string>(j, "user_id"));
  r.period_kind = parse_period_kind(detail::field<std::string>(j, "period_kind"));
  r.period_start = parse_rfc3339(detail::field<std::string>(j, "period_start"));
  r.frequency = detail::rational_from_json(detail::require(j, "frequency_exact"));
  r.computed_at = parse_rfc3339(detail::field<std::string>(j, "computed_at"));
  return r;
}

inline nlohmann::ordered_json snapshot_to_json(const std::vector<SphereSnapshot>& spheres) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& s : spheres) {
    nlohmann::ordered_json envs = nlohmann::ordered_json::array();
    for (const auto& e : s.environments) {
      nlohmann::ordered_json profiles = nlohmann::ordered_json::array();
      for (const auto& p : e.profiles) profiles.push_back(profile_to_json(p));
      nlohmann::ordered_json freqs = nlohmann::ordered_json::array();
      for (const auto& r : e.frequencies) freqs.push_back(frequency_to_json(r));
      envs.push_back({{"environment_id", e.environment_id.str()},
                      {"watermark_start", e.watermark_start ? nlohmann::ordered_json(format_rfc3339(*e.watermark_start))
                                                            : nlohmann::ordered_json(nullptr)},
                      {"profiles", profiles},
                      {"frequencies", freqs}});
    }
    arr.push_back({{"sphere_id", s.sphere_id.str()},
                   {"last_event_id", s.last_event_id},
                   {"environments", envs}});
  }
  return {{"schema_version", kSchemaVersion}, {"spheres", arr}};
}

inline std::vector<SphereSnapshot> snapshot_from_json(const nlohmann::json& j) {
  detail::check_schema_version(j);
  std::vector<SphereSnapshot> out;
  for (const auto& s : detail::require(j, "spheres")) {
    SphereSnapshot snap;
    snap.sphere_id = SphereId(detail::field<std::string>(s, "sphere_id"));
    snap.last_event_id = detail::field_or<EventId>(s, "last_event_id", 0);
    for (const auto& e : detail::require(s, "environments")) {
      EnvironmentSnapshot es;
      es.environment_id = EnvironmentId(detail::field<std::string>(e, "environment_id"));
      if (e.contains("watermark_start") && !e["watermark_start"].is_null()) {
        es.watermark_start = parse_rfc3339(e["watermark_start"].get<std::string>());
      }
      for (const auto& p : e.value("profiles", nlohmann::json::array())) {
        es.profiles.push_back(profile_from_json(p, snap.sphere_id, es.environment_id));
      }
      for (const auto& r : e.value("frequencies", nlohmann::json::array())) {
        es.frequencies.push_back(frequency_from_json(r, snap.sphere_id, es.environment_id));
      }
      snap.environments.push_back(std::move(es));
    }
    out.push_back(std::move(snap));
  }
  return out;
}

inline void save_snapshot(const std::filesystem::path& path, const std::vector<SphereSnapshot>& spheres) {
  write_text_file(path, snapshot_to_json(spheres).dump(2) + "\n");
}

inline std::vector<SphereSnapshot> load_snapshot(const std::filesystem::path& path) {
  try {
    return snapshot_from_json(read_json_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "SHA-256 failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

// Content digest of profiles and frequency records. Two states have equal
// digests iff their compact snapshot serializations are byte-identical.
inline std::string state_digest(const std::vector<SphereSnapshot>& spheres) {
  return sha256_hex(snapshot_to_json(spheres).dump());
}

}  // namespace pripro
