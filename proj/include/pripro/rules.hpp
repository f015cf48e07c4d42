#pragma once

#include <string>
#include <vector>

#include "pripro/errors.hpp"
#include "pripro/ids.hpp"
#include "pripro/period.hpp"
#include "pripro/profile_level.hpp"
#include "pripro/rational.hpp"

namespace pripro {

// Per-environment attendance policy.
//
// Frequencies are classified against three ascending cut points:
//
//   f < block_below                       -> Blocked
//   block_below  <= f < reduce_below      -> Reduced
//   reduce_below <= f <= evolve_above     -> Maintained
//   f > evolve_above                      -> Evolved
//
// With evolve_inclusive set, f == evolve_above also evolves.
struct EnvironmentRules {
  EnvironmentId environment_id;
  SphereId sphere_id;
  std::string name;

  // Hours a user is expected to attend per innermost period.
  Rational expected_hours{8};

  // Innermost first, strictly coarser afterwards.
  std::vector<PeriodKind> valence_periods{PeriodKind::Day};

  double block_below = 0.55;
  double reduce_below = 0.75;
  double evolve_above = 0.95;
  bool evolve_inclusive = true;

  ProfileLevel base_profile = ProfileLevel::Guest;

  PeriodKind innermost() const { return valence_periods.front(); }

  const std::string& display_name() const {
    return name.empty() ? environment_id.str() : name;
  }

  void validate() const {
    auto fail = [&](const std::string& why) {
      throw Error(ErrorCode::InvalidRules,
                  "environment '" + environment_id.str() + "': " + why);
    };
    if (environment_id.empty()) fail("empty environment_id");
    if (!(block_below > 0.0)) fail("block_below must be > 0");
    if (!(block_below <= reduce_below)) fail("block_below must be <= reduce_below");
    if (!(reduce_below <= evolve_above)) fail("reduce_below must be <= evolve_above");
    if (!(evolve_above <= 1.0)) fail("evolve_above must be <= 1");
    if (valence_periods.empty()) fail("valence_periods is empty");
    for (std::size_t i = 1; i < valence_periods.size(); ++i) {
      if (!is_finer(valence_periods[i - 1], valence_periods[i])) {
        fail("valence_periods must be strictly increasing in granularity");
      }
    }
    if (expected_hours <= Rational{0}) fail("expected_hours must be > 0");
    if (expected_hours > Rational{minimum_hours(innermost())}) {
      fail("expected_hours exceeds the length of the innermost period");
    }
  }
};

}  // namespace pripro
