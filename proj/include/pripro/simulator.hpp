#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "pripro/catalog.hpp"
#include "pripro/service.hpp"

namespace pripro {

// Local clock times, in minutes after midnight.
struct SessionWindow {
  int enter_minute = 8 * 60;
  int exit_minute = 12 * 60;

  friend bool operator==(const SessionWindow&, const SessionWindow&) = default;
};

// Population of users who all keep the same daily sessions. Each user leaves
// early by a fixed number of hours (their departure constant); on any day,
// with probability early_leave_probability, they also leave up to
// early_leave_max_hours earlier still. Early departures shorten the day's
// last session first and spill into earlier ones.
struct SimConfig {
  std::uint64_t seed = 2018;
  int num_users = 15;
  absl::CivilDay start_date{2018, 1, 1};
  absl::CivilDay end_date{2018, 1, 31};
  std::string timezone = "America/Sao_Paulo";
  std::vector<SessionWindow> sessions{{8 * 60, 12 * 60}, {14 * 60, 18 * 60}};
  std::vector<double> per_user_constants;
  double early_leave_probability = 0.5;
  double early_leave_max_hours = 1.0;
  EnvironmentRules rules = default_rules();

  static EnvironmentRules default_rules() {
    EnvironmentRules r;
    r.environment_id = EnvironmentId("lab");
    r.sphere_id = SphereId("simulation");
    r.name = "Laboratory";
    r.expected_hours = Rational(8);
    r.valence_periods = {PeriodKind::Day, PeriodKind::Week, PeriodKind::Month, PeriodKind::Semester};
    r.base_profile = ProfileLevel::Guest;
    return r;
  }

  void validate() const {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
    if (num_users <= 0) fail("num_users must be positive");
    if (per_user_constants.size() != static_cast<std::size_t>(num_users)) {
      fail("per_user_constants must have one entry per user");
    }
    for (double c : per_user_constants) {
      if (!(c >= 0.0)) fail("departure constants must be >= 0");
    }
    if (!(early_leave_probability >= 0.0 && early_leave_probability <= 1.0)) {
      fail("early_leave_probability must be in [0, 1]");
    }
    if (!(early_leave_max_hours > 0.0)) fail("early_leave_max_hours must be positive");
    if (end_date < start_date) fail("end_date precedes start_date");
    if (sessions.empty()) fail("at least one session is required");
    int previous_exit = -1;
    for (const auto& s : sessions) {
      if (s.enter_minute < 0 || s.exit_minute > 24 * 60 || s.enter_minute >= s.exit_minute) {
        fail("each session needs 00:00 <= enter < exit <= 24:00");
      }
      if (s.enter_minute <= previous_exit) fail("sessions must be ordered and disjoint");
      previous_exit = s.exit_minute;
    }
    Zone::load(timezone);
    rules.validate();
  }
};

// Departure constants spread evenly over [lo, hi], first user lowest.
inline std::vector<double> evenly_spread(int n, double lo, double hi) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return out;
}

// The month of January 2018 with fifteen users spread over [0, 4.5] hours.
inline SimConfig default_sim_config() {
  SimConfig cfg;
  cfg.per_user_constants = evenly_spread(cfg.num_users, 0.0, 4.5);
  return cfg;
}

struct TrajectoryPoint {
  absl::CivilDay date;
  ProfileLevel level = ProfileLevel::Guest;

  friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

struct UserTrajectory {
  UserId user_id;
  std::vector<TrajectoryPoint> days;

  friend bool operator==(const UserTrajectory&, const UserTrajectory&) = default;
};

struct SimReport {
  std::vector<UserTrajectory> trajectories;
  // Share of all authentication responses carrying each profile.
  std::map<ProfileLevel, double> distribution;
  std::size_t authentications = 0;
  std::vector<std::string> warnings;

  friend bool operator==(const SimReport&, const SimReport&) = default;
};

enum class ReportFormat { Csv, Json };

inline ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::Csv;
  if (text == "json") return ReportFormat::Json;
  throw Error(ErrorCode::InvalidArgument, "unknown report format '" + std::string(text) + "'");
}

inline std::string format_clock(int minute) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d:%02d", minute / 60, minute % 60);
  return buf;
}

inline int parse_clock(const std::string& text) {
  int h = -1;
  int m = -1;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d:%d%c", &h, &m, &tail) != 2 || h < 0 || h > 24 || m < 0 || m > 59 ||
      (h == 24 && m != 0)) {
    throw Error(ErrorCode::Parse, "bad clock time '" + text + "', expected HH:MM");
  }
  return h * 60 + m;
}

class Simulation {
 public:
  static inline const SphereId kSphere{"simulation"};
  static inline const DeviceId kAuthenticator{"door-lab"};

  explicit Simulation(SimConfig config) : config_(std::move(config)) {
    config_.validate();
    config_.rules.sphere_id = kSphere;

    SphereCatalog catalog;
    catalog.sphere_id = kSphere;
    catalog.timezone = config_.timezone;
    catalog.add_environment(config_.rules);
    for (int u = 0; u < config_.num_users; ++u) {
      catalog.add_user({device_of(u), user_of(u), std::nullopt});
    }
    sphere_ = &store_.add_sphere(std::move(catalog));
    service_ = std::make_unique<AuthService>(
        store_, std::map<DeviceId, AuthenticatorBinding>{
                    {kAuthenticator, {kSphere, config_.rules.environment_id}}});
  }

  static UserId user_of(int u) { return UserId(label("user", u)); }
  static DeviceId device_of(int u) { return DeviceId(label("tag", u)); }

  const Store& store() const noexcept { return store_; }
  const VirtualClock& clock() const noexcept { return clock_; }

  SimReport run() {
    const auto& zone = sphere_->zone();
    const auto& env = config_.rules.environment_id;

    // One generator per user, derived from the master seed and the user's
    // index, so adding users never perturbs existing streams.
    std::vector<std::mt19937_64> streams;
    for (int u = 0; u < config_.num_users; ++u) {
      std::seed_seq seq{static_cast<std::uint32_t>(config_.seed),
                        static_cast<std::uint32_t>(config_.seed >> 32), static_cast<std::uint32_t>(u)};
      streams.emplace_back(seq);
    }

    SimReport report;
    for (int u = 0; u < config_.num_users; ++u) report.trajectories.push_back({user_of(u), {}});
    std::map<ProfileLevel, std::size_t> counts;

    for (auto day = config_.start_date; day <= config_.end_date; ++day) {
      struct Planned {
        Timestamp at;
        int user;
        AuthAction action;
      };
      std::vector<Planned> plan;
      for (int u = 0; u < config_.num_users; ++u) {
        auto& gen = streams[static_cast<std::size_t>(u)];
        // Two draws per user-day keep every stream aligned across configs.
        const double apply_draw = unit(gen);
        const double amount_draw = unit(gen);
        std::int64_t cut = std::llround(config_.per_user_constants[static_cast<std::size_t>(u)] * 3600.0);
        if (apply_draw < config_.early_leave_probability) {
          cut += std::llround(amount_draw * config_.early_leave_max_hours * 3600.0);
        }
        std::vector<std::pair<std::int64_t, std::int64_t>> windows;
        for (const auto& s : config_.sessions) windows.emplace_back(s.enter_minute * 60LL, s.exit_minute * 60LL);
        for (auto it = windows.rbegin(); it != windows.rend() && cut > 0; ++it) {
          const auto take = std::min(cut, it->second - it->first);
          it->second -= take;
          cut -= take;
        }
        bool attended = false;
        for (const auto& [enter, exit] : windows) {
          if (exit <= enter) continue;
          attended = true;
          plan.push_back({zone.at(absl::CivilSecond(day) + enter), u, AuthAction::Enter});
          plan.push_back({zone.at(absl::CivilSecond(day) + exit), u, AuthAction::Exit});
        }
        if (!attended) {
          report.warnings.push_back(format_date(day) + ": " + user_of(u).str() + " did not attend");
        }
      }
      std::stable_sort(plan.begin(), plan.end(), [](const Planned& a, const Planned& b) {
        return std::tie(a.at, a.user) < std::tie(b.at, b.user);
      });

      for (const auto& p : plan) {
        clock_.set(p.at);
        note_tick(report, service_->tick(p.at));
        auto resp = service_->handle_authenticate({device_of(p.user), p.action, kAuthenticator}, p.at);
        ++counts[resp.profile];
        ++report.authentications;
      }

      for (int u = 0; u < config_.num_users; ++u) {
        if (auto state = sphere_->find_profile(env, user_of(u))) {
          report.trajectories[static_cast<std::size_t>(u)].days.push_back({day, state->level});
        }
      }
    }

    const auto horizon = zone.start_of(config_.end_date + 1);
    clock_.set(horizon);
    note_tick(report, service_->tick(horizon));

    for (auto level : kAllProfileLevels) {
      report.distribution[level] =
          report.authentications == 0
              ? 0.0
              : static_cast<double>(counts[level]) / static_cast<double>(report.authentications);
    }
    return report;
  }

 private:
  static std::string label(const char* prefix, int u) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%02d", prefix, u + 1);
    return buf;
  }

  // Uniform in [0, 1) from the top 53 bits; identical on every platform,
  // unlike std::uniform_real_distribution.
  static double unit(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
  }

  static void note_tick(SimReport& report, const TickSummary& summary) {
    for (const auto& e : summary.environments) {
      if (e.error) report.warnings.push_back("tick " + e.environment_id.str() + ": " + *e.error);
    }
  }

  SimConfig config_;
  Store store_;
  SphereStore* sphere_ = nullptr;
  std::unique_ptr<AuthService> service_;
  VirtualClock clock_;
};

inline SimReport run_simulation(const SimConfig& config) { return Simulation(config).run(); }

// ---------------------------------------------------------------------------
// Config and report files (schema_version 1)

inline SimConfig sim_config_from_json(const nlohmann::json& j) {
  using detail::field;
  using detail::field_or;
  detail::check_schema_version(j);
  SimConfig cfg;
  cfg.seed = field_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.num_users = field_or<int>(j, "num_users", cfg.num_users);
  if (j.contains("start_date")) cfg.start_date = parse_date(field<std::string>(j, "start_date"));
  if (j.contains("end_date")) cfg.end_date = parse_date(field<std::string>(j, "end_date"));
  cfg.timezone = field_or<std::string>(j, "timezone", cfg.timezone);
  if (j.contains("sessions")) {
    cfg.sessions.clear();
    for (const auto& s : j["sessions"]) {
      cfg.sessions.push_back({parse_clock(field<std::string>(s, "enter")), parse_clock(field<std::string>(s, "exit"))});
    }
  }
  if (j.contains("per_user_constants")) {
    cfg.per_user_constants = field<std::vector<double>>(j, "per_user_constants");
  } else {
    auto range = field_or<std::vector<double>>(j, "constant_range", {0.0, 4.5});
    if (range.size() != 2) throw Error(ErrorCode::InvalidConfig, "constant_range must be [lo, hi]");
    cfg.per_user_constants = evenly_spread(cfg.num_users, range[0], range[1]);
  }
  cfg.early_leave_probability = field_or<double>(j, "early_leave_probability", cfg.early_leave_probability);
  cfg.early_leave_max_hours = field_or<double>(j, "early_leave_max_hours", cfg.early_leave_max_hours);
  if (j.contains("environment")) cfg.rules = rules_from_json(j["environment"], Simulation::kSphere);
  cfg.validate();
  return cfg;
}

inline nlohmann::ordered_json sim_config_to_json(const SimConfig& cfg) {
  nlohmann::ordered_json sessions = nlohmann::ordered_json::array();
  for (const auto& s : cfg.sessions) {
    sessions.push_back({{"enter", format_clock(s.enter_minute)}, {"exit", format_clock(s.exit_minute)}});
  }
  return {{"schema_version", kSchemaVersion},
          {"seed", cfg.seed},
          {"num_users", cfg.num_users},
          {"start_date", format_date(cfg.start_date)},
          {"end_date", format_date(cfg.end_date)},
          {"timezone", cfg.timezone},
          {"sessions", sessions},
          {"per_user_constants", cfg.per_user_constants},
          {"early_leave_probability", cfg.early_leave_probability},
          {"early_leave_max_hours", cfg.early_leave_max_hours},
          {"environment", rules_to_json(cfg.rules)}};
}

inline nlohmann::ordered_json report_to_json(const SimReport& r) {
  nlohmann::ordered_json dist = nlohmann::ordered_json::object();
  for (const auto& [level, share] : r.distribution) dist[std::string(to_string(level))] = share;
  nlohmann::ordered_json trajectories = nlohmann::ordered_json::array();
  for (const auto& t : r.trajectories) {
    nlohmann::ordered_json days = nlohmann::ordered_json::array();
    for (const auto& d : t.days) {
      days.push_back({{"date", format_date(d.date)}, {"profile", std::string(to_string(d.level))}});
    }
    trajectories.push_back({{"user_id", t.user_id.str()}, {"days", days}});
  }
  return {{"schema_version", kSchemaVersion},
          {"authentications", r.authentications},
          {"distribution", dist},
          {"trajectories", trajectories},
          {"warnings", r.warnings}};
}

inline SimReport report_from_json(const nlohmann::json& j) {
  detail::check_schema_version(j);
  SimReport r;
  r.authentications = detail::field<std::size_t>(j, "authentications");
  for (const auto& [name, share] : detail::require(j, "distribution").items()) {
    r.distribution[parse_profile_level(name)] = share.get<double>();
  }
  for (const auto& t : detail::require(j, "trajectories")) {
    UserTrajectory traj{UserId(detail::field<std::string>(t, "user_id")), {}};
    for (const auto& d : detail::require(t, "days")) {
      traj.days.push_back({parse_date(detail::field<std::string>(d, "date")),
                           parse_profile_level(detail::field<std::string>(d, "profile"))});
    }
    r.trajectories.push_back(std::move(traj));
  }
  r.warnings = detail::field_or<std::vector<std::string>>(j, "warnings", {});
  return r;
}

// csv: header plus one row per (user, date), users in id order then dates
// ascending. json: the whole report.
inline std::string render_report(const SimReport& r, ReportFormat format) {
  if (format == ReportFormat::Json) return report_to_json(r).dump(2) + "\n";
  std::ostringstream out;
  out << "user_id,date,profile,ordinal\n";
  for (const auto& t : r.trajectories) {
    for (const auto& d : t.days) {
      out << t.user_id.str() << ',' << format_date(d.date) << ',' << to_string(d.level) << ','
          << ordinal(d.level) << '\n';
    }
  }
  return out.str();
}

}  // namespace pripro
