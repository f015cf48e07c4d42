#pragma once

#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <absl/time/civil_time.h>

#include "pripro/errors.hpp"
#include "pripro/time.hpp"

namespace pripro {

// Calendar granularities, ordered finest to coarsest.
enum class PeriodKind : std::uint8_t {
  Day = 0,
  Week = 1,
  Month = 2,
  Semester = 3,
};

constexpr std::string_view to_string(PeriodKind kind) noexcept {
  switch (kind) {
    case PeriodKind::Day: return "day";
    case PeriodKind::Week: return "week";
    case PeriodKind::Month: return "month";
    case PeriodKind::Semester: return "semester";
  }
  return "day";
}

inline PeriodKind parse_period_kind(std::string_view text) {
  std::string lowered;
  for (char c : text) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (auto kind : {PeriodKind::Day, PeriodKind::Week, PeriodKind::Month, PeriodKind::Semester}) {
    if (lowered == to_string(kind)) return kind;
  }
  throw Error(ErrorCode::Parse, "unknown valence period '" + std::string(text) + "'");
}

constexpr bool is_finer(PeriodKind a, PeriodKind b) noexcept {
  return static_cast<int>(a) < static_cast<int>(b);
}

// Shortest possible length of an instance, in hours (DST ignored).
constexpr std::int64_t minimum_hours(PeriodKind kind) noexcept {
  switch (kind) {
    case PeriodKind::Day: return 24;
    case PeriodKind::Week: return 7 * 24;
    case PeriodKind::Month: return 28 * 24;
    case PeriodKind::Semester: return 181 * 24;
  }
  return 24;
}

// Half-open [start, end) instance of a valence period. `first_day` is the
// civil date (in the sphere's zone) on which the instance begins.
struct PeriodInstance {
  PeriodKind kind = PeriodKind::Day;
  absl::CivilDay first_day;
  Timestamp start;
  Timestamp end;

  Seconds duration() const noexcept { return end - start; }
  bool contains(Timestamp t) const noexcept { return start <= t && t < end; }

  friend bool operator==(const PeriodInstance& a, const PeriodInstance& b) noexcept {
    return a.kind == b.kind && a.start == b.start && a.end == b.end;
  }
};

namespace detail {

inline absl::CivilDay floor_day(PeriodKind kind, absl::CivilDay day) {
  switch (kind) {
    case PeriodKind::Day:
      return day;
    case PeriodKind::Week:
      // absl numbers weekdays from Monday = 0.
      return day - static_cast<int>(absl::GetWeekday(day));
    case PeriodKind::Month:
      return absl::CivilDay(absl::CivilMonth(day));
    case PeriodKind::Semester:
      return absl::CivilDay(day.year(), day.month() <= 6 ? 1 : 7, 1);
  }
  return day;
}

inline absl::CivilDay shift_first_day(PeriodKind kind, absl::CivilDay first, int steps) {
  switch (kind) {
    case PeriodKind::Day: return first + steps;
    case PeriodKind::Week: return first + 7 * steps;
    case PeriodKind::Month: return absl::CivilDay(absl::CivilMonth(first) + steps);
    case PeriodKind::Semester: return absl::CivilDay(absl::CivilMonth(first) + 6 * steps);
  }
  return first;
}

}  // namespace detail

// The instance of `kind` that begins on the civil day `first`. `first` must be
// a canonical first day (a Monday for weeks, the 1st for months, ...).
inline PeriodInstance instance_starting(PeriodKind kind, absl::CivilDay first, const Zone& zone) {
  return PeriodInstance{kind, first, zone.start_of(first),
                        zone.start_of(detail::shift_first_day(kind, first, 1))};
}

inline PeriodInstance next_instance(const PeriodInstance& inst, const Zone& zone) {
  return instance_starting(inst.kind, detail::shift_first_day(inst.kind, inst.first_day, 1), zone);
}

inline PeriodInstance previous_instance(const PeriodInstance& inst, const Zone& zone) {
  return instance_starting(inst.kind, detail::shift_first_day(inst.kind, inst.first_day, -1), zone);
}

// The unique instance of `kind` containing t. Instances of one kind
// partition the timeline: when a DST transition repeats local midnight,
// the repeated hour belongs to the later day.
inline PeriodInstance period_instance(PeriodKind kind, Timestamp t, const Zone& zone) {
  auto inst = instance_starting(kind, detail::floor_day(kind, zone.civil_day(t)), zone);
  while (t >= inst.end) inst = next_instance(inst, zone);
  while (t < inst.start) inst = previous_instance(inst, zone);
  return inst;
}

inline bool is_canonical(const PeriodInstance& inst, const Zone& zone) {
  return detail::floor_day(inst.kind, inst.first_day) == inst.first_day &&
         instance_starting(inst.kind, inst.first_day, zone) == inst;
}

// Instances of `inferior` whose start lies inside `superior`, in order.
inline std::vector<PeriodInstance> contained_instances(const PeriodInstance& superior,
                                                       PeriodKind inferior, const Zone& zone) {
  if (!is_finer(inferior, superior.kind)) {
    throw Error(ErrorCode::InvalidArgument,
                std::string("period '") + std::string(to_string(inferior)) +
                    "' is not finer than '" + std::string(to_string(superior.kind)) + "'");
  }
  const auto limit = detail::shift_first_day(superior.kind, superior.first_day, 1);
  auto first = detail::floor_day(inferior, superior.first_day);
  if (first < superior.first_day) first = detail::shift_first_day(inferior, first, 1);

  std::vector<PeriodInstance> out;
  for (; first < limit; first = detail::shift_first_day(inferior, first, 1)) {
    out.push_back(instance_starting(inferior, first, zone));
  }
  return out;
}

inline std::size_t contained_count(const PeriodInstance& superior, PeriodKind inferior,
                                   const Zone& zone) {
  return contained_instances(superior, inferior, zone).size();
}

}  // namespace pripro
