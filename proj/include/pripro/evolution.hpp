#pragma once

#include <optional>
#include <string_view>

#include "pripro/errors.hpp"
#include "pripro/period.hpp"
#include "pripro/profile_level.hpp"
#include "pripro/rational.hpp"
#include "pripro/rules.hpp"
#include "pripro/time.hpp"

namespace pripro {

enum class DecisionReason : std::uint8_t {
  Blocked,
  Reduced,
  Maintained,
  Evolved,
  TooSoon,
  Bootstrapped,
};

constexpr std::string_view to_string(DecisionReason r) noexcept {
  switch (r) {
    case DecisionReason::Blocked: return "Blocked";
    case DecisionReason::Reduced: return "Reduced";
    case DecisionReason::Maintained: return "Maintained";
    case DecisionReason::Evolved: return "Evolved";
    case DecisionReason::TooSoon: return "TooSoon";
    case DecisionReason::Bootstrapped: return "Bootstrapped";
  }
  return "Maintained";
}

inline DecisionReason parse_decision_reason(std::string_view text) {
  for (auto r : {DecisionReason::Blocked, DecisionReason::Reduced, DecisionReason::Maintained,
                 DecisionReason::Evolved, DecisionReason::TooSoon, DecisionReason::Bootstrapped}) {
    if (text == to_string(r)) return r;
  }
  throw Error(ErrorCode::Parse, "unknown decision reason '" + std::string(text) + "'");
}

// Frequencies within this distance of a band edge count as equal to it.
inline constexpr double kFrequencyTolerance = 1e-9;

struct EvolutionDecision {
  ProfileLevel previous = ProfileLevel::Guest;
  ProfileLevel next = ProfileLevel::Guest;
  DecisionReason reason = DecisionReason::Maintained;
  std::optional<Rational> frequency_used;

  friend bool operator==(const EvolutionDecision&, const EvolutionDecision&) = default;
};

// Maps a frequency onto one of the four bands of `rules`. Returns Blocked,
// Reduced, Maintained or Evolved.
inline DecisionReason classify(double frequency, const EnvironmentRules& rules) {
  if (frequency < 0.0) throw Error(ErrorCode::InvalidArgument, "negative frequency");
  const double eps = kFrequencyTolerance;
  if (frequency < rules.block_below - eps) return DecisionReason::Blocked;
  if (frequency < rules.reduce_below - eps) return DecisionReason::Reduced;
  if (frequency < rules.evolve_above - eps) return DecisionReason::Maintained;
  if (frequency <= rules.evolve_above + eps) {
    return rules.evolve_inclusive ? DecisionReason::Evolved : DecisionReason::Maintained;
  }
  return DecisionReason::Evolved;
}

inline DecisionReason classify(const Rational& frequency, const EnvironmentRules& rules) {
  return classify(frequency.to_double(), rules);
}

inline EvolutionDecision bootstrap_decision(ProfileLevel base) {
  return {base, base, DecisionReason::Bootstrapped, std::nullopt};
}

// One evaluation of the profile flow: at most one change per innermost
// valence period, then the frequency band picks block/reduce/keep/raise.
inline EvolutionDecision evolve(ProfileLevel current, std::optional<Timestamp> last_update,
                                Timestamp now, const std::optional<Rational>& latest_frequency,
                                const EnvironmentRules& rules, const Zone& zone) {
  if (last_update) {
    if (now < *last_update) {
      throw Error(ErrorCode::InvalidArgument, "evaluation time precedes last update");
    }
    const auto period = period_instance(rules.innermost(), *last_update, zone);
    if (now - *last_update < period.duration()) {
      return {current, current, DecisionReason::TooSoon, std::nullopt};
    }
  }
  if (!latest_frequency) {
    return {current, current, DecisionReason::Maintained, std::nullopt};
  }

  const auto reason = classify(*latest_frequency, rules);
  ProfileLevel next = current;
  switch (reason) {
    case DecisionReason::Blocked: next = ProfileLevel::Blocked; break;
    case DecisionReason::Reduced: next = lower(current); break;
    case DecisionReason::Evolved: next = raise(current); break;
    default: break;
  }
  return {current, next, reason, latest_frequency};
}

}  // namespace pripro
