#pragma once

#include <chrono>
#include <string>
#include <string_view>

#include <absl/time/civil_time.h>
#include <absl/time/time.h>

#include "pripro/errors.hpp"

namespace pripro {

// UTC instant at second precision.
using Timestamp = std::chrono::sys_seconds;
using Seconds = std::chrono::seconds;

inline absl::Time to_absl(Timestamp t) {
  return absl::FromUnixSeconds(t.time_since_epoch().count());
}

inline Timestamp from_absl(absl::Time t) {
  return Timestamp{Seconds{absl::ToUnixSeconds(t)}};
}

inline Timestamp from_unix(std::int64_t seconds) { return Timestamp{Seconds{seconds}}; }

// An IANA time zone. Civil days, weeks, months and semesters are all
// measured in the zone configured for the sphere.
class Zone {
 public:
  Zone() : tz_(absl::UTCTimeZone()), name_("UTC") {}

  static Zone load(std::string_view name) {
    Zone z;
    if (name == "UTC" || name == "Etc/UTC") {
      z.name_ = std::string(name);
      return z;
    }
    if (!absl::LoadTimeZone(std::string(name), &z.tz_)) {
      throw Error(ErrorCode::InvalidConfig, "unknown time zone: " + std::string(name));
    }
    z.name_ = std::string(name);
    return z;
  }

  static Zone utc() { return Zone{}; }

  const absl::TimeZone& tz() const noexcept { return tz_; }
  const std::string& name() const noexcept { return name_; }

  absl::CivilDay civil_day(Timestamp t) const { return absl::ToCivilDay(to_absl(t), tz_); }
  absl::CivilSecond civil_second(Timestamp t) const {
    return absl::ToCivilSecond(to_absl(t), tz_);
  }

  // Skipped local times map forward past the gap; repeated ones take the
  // earlier instant. Both keep the mapping monotone.
  Timestamp at(absl::CivilSecond local) const { return from_absl(absl::FromCivil(local, tz_)); }
  Timestamp start_of(absl::CivilDay day) const { return at(absl::CivilSecond(day)); }

 private:
  absl::TimeZone tz_;
  std::string name_;
};

inline std::string format_rfc3339(Timestamp t) {
  return absl::FormatTime("%Y-%m-%dT%H:%M:%SZ", to_absl(t), absl::UTCTimeZone());
}

inline Timestamp parse_rfc3339(std::string_view text) {
  absl::Time t;
  std::string err;
  if (!absl::ParseTime(absl::RFC3339_full, std::string(text), &t, &err)) {
    throw Error(ErrorCode::Parse, "bad RFC 3339 timestamp '" + std::string(text) + "': " + err);
  }
  return from_absl(t);
}

inline std::string format_date(absl::CivilDay day) { return absl::FormatCivilTime(day); }

inline absl::CivilDay parse_date(std::string_view text) {
  absl::CivilDay day;
  if (!absl::ParseCivilTime(std::string(text), &day)) {
    throw Error(ErrorCode::Parse, "bad civil date '" + std::string(text) + "'");
  }
  return day;
}

}  // namespace pripro
