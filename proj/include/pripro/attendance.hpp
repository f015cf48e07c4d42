#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pripro/errors.hpp"
#include "pripro/ids.hpp"
#include "pripro/period.hpp"
#include "pripro/rational.hpp"
#include "pripro/time.hpp"

namespace pripro {

enum class AuthAction : std::uint8_t { Enter, Exit };

constexpr std::string_view to_string(AuthAction a) noexcept {
  return a == AuthAction::Enter ? "enter" : "exit";
}

inline std::optional<AuthAction> try_parse_action(std::string_view text) {
  if (text == "enter") return AuthAction::Enter;
  if (text == "exit") return AuthAction::Exit;
  return std::nullopt;
}

// One authentication reported by an authenticator device. Immutable once
// appended to a sphere's log.
struct AuthEvent {
  EventId event_id = 0;
  SphereId sphere_id;
  EnvironmentId environment_id;
  DeviceId user_device_id;
  DeviceId authenticator_device_id;
  AuthAction action = AuthAction::Enter;
  Timestamp timestamp;

  friend bool operator==(const AuthEvent&, const AuthEvent&) = default;
};

struct TimeInterval {
  Timestamp entry;
  Timestamp exit;

  Seconds duration() const noexcept { return exit - entry; }
  friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

enum class PairingIssue : std::uint8_t {
  UnclosedEntry,   // closed at the period end
  OrphanExit,      // discarded
  DuplicateEnter,  // the later enter is ignored
  OutsidePeriod,   // event at or after the period end, ignored
};

constexpr std::string_view to_string(PairingIssue w) noexcept {
  switch (w) {
    case PairingIssue::UnclosedEntry: return "unclosed_entry";
    case PairingIssue::OrphanExit: return "orphan_exit";
    case PairingIssue::DuplicateEnter: return "duplicate_enter";
    case PairingIssue::OutsidePeriod: return "outside_period";
  }
  return "unknown";
}

struct PairingWarning {
  PairingIssue issue;
  Timestamp at;
  friend bool operator==(const PairingWarning&, const PairingWarning&) = default;
};

struct Pairing {
  std::vector<TimeInterval> intervals;
  std::vector<PairingWarning> warnings;
};

// Pairs time-ordered enter/exit events of one user in one environment into
// attendance intervals clipped to `period`. Events before the period start
// only matter through the state they leave behind (an open entry is carried
// in at the period start). Zero-length intervals are dropped.
inline Pairing pair_events(std::span<const AuthEvent> events, const PeriodInstance& period) {
  Pairing out;
  std::optional<Timestamp> open;

  auto emit = [&](Timestamp entry, Timestamp exit) {
    entry = std::max(entry, period.start);
    exit = std::min(exit, period.end);
    if (exit > entry) out.intervals.push_back({entry, exit});
  };

  for (const auto& e : events) {
    const bool inside = e.timestamp >= period.start;
    if (e.timestamp >= period.end) {
      out.warnings.push_back({PairingIssue::OutsidePeriod, e.timestamp});
      continue;
    }
    if (e.action == AuthAction::Enter) {
      if (open) {
        if (inside) out.warnings.push_back({PairingIssue::DuplicateEnter, e.timestamp});
      } else {
        open = e.timestamp;
      }
    } else if (open) {
      emit(*open, e.timestamp);
      open.reset();
    } else if (inside) {
      out.warnings.push_back({PairingIssue::OrphanExit, e.timestamp});
    }
  }
  if (open) {
    out.warnings.push_back({PairingIssue::UnclosedEntry, std::max(*open, period.start)});
    emit(*open, period.end);
  }
  return out;
}

inline Rational attended_hours(std::span<const TimeInterval> intervals) {
  std::int64_t seconds = 0;
  for (const auto& iv : intervals) {
    if (iv.exit < iv.entry) {
      throw Error(ErrorCode::InvalidArgument, "interval exit precedes entry");
    }
    seconds += iv.duration().count();
  }
  return Rational(seconds, 3600);
}

// Attendance in the innermost period: attended hours over expected hours.
// Not clamped; values above 1 mean the user stayed longer than expected.
inline Rational inferior_frequency(std::span<const TimeInterval> intervals,
                                   const Rational& expected_hours) {
  if (expected_hours <= Rational{0}) {
    throw Error(ErrorCode::InvalidRules, "expected_hours must be positive");
  }
  return attended_hours(intervals) / expected_hours;
}

// Mean of the n immediately-inferior frequencies of a coarser period. Fewer
// than n values may be passed; the missing instances count as zero.
inline Rational superior_frequency(std::span<const Rational> inferior, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "superior_frequency with n = 0");
  if (inferior.size() > n) {
    throw Error(ErrorCode::InvalidArgument, "more inferior frequencies than instances");
  }
  Rational sum{0};
  for (const auto& f : inferior) sum += f;
  return sum / Rational(static_cast<std::int64_t>(n));
}

}  // namespace pripro
