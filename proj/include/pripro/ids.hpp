#pragma once

#include <compare>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>

namespace pripro {

// Opaque string identifier tagged by the kind of entity it names, so a
// SphereId cannot be passed where an EnvironmentId is expected.
template <typename Tag>
class Id {
 public:
  Id() = default;
  explicit Id(std::string value) : value_(std::move(value)) {}
  explicit Id(const char* value) : value_(value) {}

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend auto operator<=>(const Id&, const Id&) = default;
  friend bool operator==(const Id&, const Id&) = default;

  friend std::ostream& operator<<(std::ostream& os, const Id& id) {
    return os << id.value_;
  }

 private:
  std::string value_;
};

using SphereId = Id<struct SphereTag>;
using EnvironmentId = Id<struct EnvironmentTag>;
using UserId = Id<struct UserTag>;
using DeviceId = Id<struct DeviceTag>;

using EventId = std::uint64_t;

}  // namespace pripro
