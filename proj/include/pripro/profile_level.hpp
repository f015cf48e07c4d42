#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "pripro/errors.hpp"

namespace pripro {

enum class ProfileLevel : std::uint8_t {
  Blocked = 0,
  Guest = 1,
  Basic = 2,
  Advanced = 3,
  Administrator = 4,
};

inline constexpr std::array<ProfileLevel, 5> kAllProfileLevels = {
    ProfileLevel::Blocked, ProfileLevel::Guest, ProfileLevel::Basic,
    ProfileLevel::Advanced, ProfileLevel::Administrator};

constexpr int ordinal(ProfileLevel level) noexcept { return static_cast<int>(level); }

// One step up, saturating at Administrator.
constexpr ProfileLevel raise(ProfileLevel level) noexcept {
  return level == ProfileLevel::Administrator
             ? level
             : static_cast<ProfileLevel>(ordinal(level) + 1);
}

// One step down, saturating at Blocked.
constexpr ProfileLevel lower(ProfileLevel level) noexcept {
  return level == ProfileLevel::Blocked
             ? level
             : static_cast<ProfileLevel>(ordinal(level) - 1);
}

constexpr std::string_view to_string(ProfileLevel level) noexcept {
  switch (level) {
    case ProfileLevel::Blocked: return "Blocked";
    case ProfileLevel::Guest: return "Guest";
    case ProfileLevel::Basic: return "Basic";
    case ProfileLevel::Advanced: return "Advanced";
    case ProfileLevel::Administrator: return "Administrator";
  }
  return "Blocked";
}

inline std::optional<ProfileLevel> try_parse_profile_level(std::string_view text) {
  auto lower_eq = [](std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      auto ca = static_cast<unsigned char>(a[i]);
      auto cb = static_cast<unsigned char>(b[i]);
      if (std::tolower(ca) != std::tolower(cb)) return false;
    }
    return true;
  };
  for (auto level : kAllProfileLevels) {
    if (lower_eq(text, to_string(level))) return level;
  }
  return std::nullopt;
}

inline ProfileLevel parse_profile_level(std::string_view text) {
  if (auto level = try_parse_profile_level(text)) return *level;
  throw Error(ErrorCode::Parse, "unknown profile level '" + std::string(text) + "'");
}

}  // namespace pripro
