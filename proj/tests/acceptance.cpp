// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "test_support.hpp"

using namespace pripro;
using testing::local;

namespace {

struct Failure {
  std::string why;
};

void require(bool ok, const std::string& why) {
  if (!ok) throw Failure{why};
}

template <typename T>
std::string str(const T& v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

int failures = 0;

void criterion(const std::string& name, double limit_seconds, const std::function<void()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string why;
  try {
    body();
  } catch (const Failure& f) {
    why = f.why;
  } catch (const std::exception& e) {
    why = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (why.empty() && secs >= limit_seconds) why = "took " + str(secs) + " s, limit " + str(limit_seconds) + " s";
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.3f s", secs);
  if (why.empty()) {
    std::cout << "PASS " << name << " (" << timing << ")\n";
  } else {
    ++failures;
    std::cout << "FAIL " << name << " (" << timing << "): " << why << "\n";
  }
  std::cout.flush();
}

// --- day frequency ---------------------------------------------------------------

void day_frequency_suite() {
  const auto zone = Zone::load("America/Sao_Paulo");
  const auto d = local(zone, 2018, 1, 2);
  auto at = [&](int h, int m = 0) { return d + std::chrono::hours(h) + std::chrono::minutes(m); };
  std::vector<TimeInterval> full{{at(8), at(12)}, {at(14), at(18)}};
  const auto f = inferior_frequency(full, Rational(8));
  require(f == Rational(1), "8h of 8h gave " + f.to_string());
  require(f.to_double() == 1.0, "8h of 8h is not exactly 1.0");
  std::vector<TimeInterval> boundary{{at(8), at(12)}, {at(14), at(17, 36)}};
  const double g = inferior_frequency(boundary, Rational(8)).to_double();
  require(std::abs(g - 0.95) <= 1e-12, "7.6h of 8h gave " + str(g));
}

// --- bands --------------------------------------------------------------------

void band_suite() {
  const std::vector<double> fs{0.40, 0.50, 0.549, 0.55, 0.60, 0.75, 0.80, 0.95, 0.951, 1.0, 1.25};
  using R = DecisionReason;
  const std::vector<R> on{R::Blocked, R::Blocked, R::Blocked, R::Reduced, R::Reduced, R::Maintained,
                          R::Maintained, R::Evolved, R::Evolved, R::Evolved, R::Evolved};
  auto off = on;
  off[7] = R::Maintained;
  auto rules = testing::lab_rules();
  for (bool inclusive : {true, false}) {
    rules.evolve_inclusive = inclusive;
    const auto& expected = inclusive ? on : off;
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const auto got = classify(fs[i], rules);
      require(got == expected[i], "f=" + str(fs[i]) + " inclusive=" + str(inclusive) + " gave " +
                                      std::string(to_string(got)));
      // The exact value must agree with the double.
      const auto exact = classify(Rational::from_double(fs[i], 1000), rules);
      require(exact == expected[i], "exact f=" + str(fs[i]) + " gave " + std::string(to_string(exact)));
    }
  }
}

// --- laboratory scenario ----------------------------------------------------------

void scenario_replay() {
  auto s = testing::lab_scenario();
  Store store;
  store.add_sphere(s.catalog);
  testing::authenticate_all(store, s.events);
  auto& sphere = store.sphere(SphereId("uni"));
  const auto state = sphere.find_profile(EnvironmentId("lab"), UserId("user-1")).value();

  using L = ProfileLevel;
  using R = DecisionReason;
  struct Expect {
    int day;
    L level;
    R reason;
  };
  const std::vector<Expect> expected{
      {1, L::Basic, R::Bootstrapped},        {2, L::Basic, R::Maintained},    {3, L::Basic, R::Maintained},
      {4, L::Advanced, R::Evolved},          {5, L::Advanced, R::Maintained}, {6, L::Administrator, R::Evolved},
      {7, L::Administrator, R::Maintained},  {8, L::Administrator, R::Maintained},
      {9, L::Administrator, R::Maintained},  {10, L::Advanced, R::Reduced},   {11, L::Basic, R::Reduced},
      {12, L::Basic, R::Maintained},         {13, L::Basic, R::Maintained},   {14, L::Basic, R::Maintained},
      {15, L::Basic, R::Maintained},         {16, L::Blocked, R::Blocked},
  };

  std::vector<Expect> got;
  std::size_t too_soon = 0;
  for (const auto& h : state.history) {
    if (h.decision.reason == R::TooSoon) {
      ++too_soon;
      continue;
    }
    const auto day = sphere.zone().civil_day(h.at);
    got.push_back({static_cast<int>(day - s.first_day) + 1, h.decision.next, h.decision.reason});
  }
  require(got.size() == expected.size(), "expected " + str(expected.size()) + " decisions, got " + str(got.size()));
  for (std::size_t i = 0; i < got.size(); ++i) {
    const auto& e = expected[i];
    const auto& g = got[i];
    require(e.day == g.day && e.level == g.level && e.reason == g.reason,
            "day " + str(e.day) + ": expected " + std::string(to_string(e.level)) + "/" +
                std::string(to_string(e.reason)) + ", got day " + str(g.day) + " " + std::string(to_string(g.level)) +
                "/" + std::string(to_string(g.reason)));
  }
  require(too_soon + expected.size() == s.events.size(), "every other swipe should be TooSoon");
  require(state.level == L::Blocked, "final level " + std::string(to_string(state.level)));
}

// --- ladder ------------------------------------------------------------------------

void ladder() {
  SimConfig cfg;
  cfg.num_users = 1;
  cfg.per_user_constants = {0.0};
  cfg.early_leave_probability = 0.0;
  cfg.start_date = absl::CivilDay(2018, 1, 1);
  cfg.end_date = absl::CivilDay(2018, 1, 10);
  cfg.rules.base_profile = ProfileLevel::Guest;
  Simulation sim(cfg);
  auto report = sim.run();
  const auto& days = report.trajectories.at(0).days;
  require(days.front().level == ProfileLevel::Guest, "day 1 should be Guest");
  int first_admin = -1;
  for (std::size_t i = 0; i < days.size(); ++i) {
    if (days[i].level == ProfileLevel::Administrator) {
      first_admin = static_cast<int>(i) + 1;
      break;
    }
  }
  require(first_admin == 4, "Administrator first reached on day " + str(first_admin));
  for (std::size_t i = 3; i < days.size(); ++i) require(days[i].level == ProfileLevel::Administrator, "fell back");

  const auto state = sim.store().sphere(Simulation::kSphere).find_profile(cfg.rules.environment_id, Simulation::user_of(0));
  int evaluated = 0;
  for (const auto& h : state->history) {
    if (h.decision.reason == DecisionReason::Bootstrapped || h.decision.reason == DecisionReason::TooSoon) continue;
    if (h.decision.previous == ProfileLevel::Administrator) break;
    require(h.decision.reason == DecisionReason::Evolved, "non-evolving step on the way up");
    ++evaluated;
  }
  require(evaluated == 3, "took " + str(evaluated) + " evaluated days");
}

// --- population shape ----------------------------------------------------------

void population_shape() {
  const auto cfg = default_sim_config();
  require(cfg.num_users == 15, "default population is not 15 users");
  require(cfg.end_date - cfg.start_date + 1 == 31, "default run is not 31 days");
  const auto report = run_simulation(cfg);

  std::ostringstream shares;
  for (const auto& [level, share] : report.distribution) shares << ' ' << to_string(level) << '=' << share;

  // Every user whose expected daily frequency is below the block threshold
  // ends the month Blocked.
  const double mean_cut = cfg.early_leave_probability * cfg.early_leave_max_hours / 2;
  for (int u = 0; u < cfg.num_users; ++u) {
    const double f = (8.0 - cfg.per_user_constants[static_cast<std::size_t>(u)] - mean_cut) / 8.0;
    const auto& t = report.trajectories[static_cast<std::size_t>(u)];
    if (f < cfg.rules.block_below) {
      require(t.days.back().level == ProfileLevel::Blocked,
              t.user_id.str() + " (steady f=" + str(f) + ") ends " + std::string(to_string(t.days.back().level)));
    }
  }

  const double admin = report.distribution.at(ProfileLevel::Administrator);
  require(admin > 0, "Administrator never assigned;" + shares.str());
  for (const auto& [level, share] : report.distribution) {
    if (level == ProfileLevel::Administrator || share == 0) continue;
    require(admin < share, "Administrator is not the rarest nonzero class;" + shares.str());
  }
}

// --- aggregate oracle ----------------------------------------------------------

// When the record of `p` (the instance at `level`) can be written: once its
// last inferior instance, which may reach past p.end, has itself closed.
Timestamp closing_time(const PeriodInstance& p, const std::vector<PeriodKind>& periods, std::size_t level,
                       const Zone& zone) {
  if (level == 0) return p.end;
  const auto children = contained_instances(p, periods[level - 1], zone);
  return closing_time(children.back(), periods, level - 1, zone);
}

struct RandomInstance {
  SphereCatalog catalog;
  std::vector<AuthEvent> events;
  Timestamp horizon;
};

RandomInstance random_instance(std::mt19937_64& gen) {
  static const std::vector<std::string> zones{"UTC", "America/Sao_Paulo", "Europe/Lisbon", "Asia/Kolkata"};
  static const std::vector<std::vector<PeriodKind>> ladders{
      {PeriodKind::Day, PeriodKind::Week},
      {PeriodKind::Day, PeriodKind::Month},
      {PeriodKind::Day, PeriodKind::Week, PeriodKind::Month},
      {PeriodKind::Day, PeriodKind::Week, PeriodKind::Month, PeriodKind::Semester}};
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(gen() % n); };

  RandomInstance inst;
  const int users = 1 + static_cast<int>(pick(5));
  inst.catalog = testing::lab_catalog(ladders[pick(ladders.size())], ProfileLevel::Guest, "uni", zones[pick(zones.size())],
                                      users);
  auto& rules = inst.catalog.environments.begin()->second;
  const std::int64_t expected_minutes[] = {240, 360, 450, 480, 600};
  rules.expected_hours = Rational(expected_minutes[pick(5)], 60);

  const auto zone = Zone::load(inst.catalog.timezone);
  // Start anywhere in 2018 but near month ends half the time, so months close.
  absl::CivilDay start(2018, 1 + static_cast<int>(pick(12)), 1 + static_cast<int>(pick(28)));
  if (gen() % 2) start = absl::CivilDay(absl::CivilMonth(start) + 1) - static_cast<int>(1 + pick(10));
  const int days = 1 + static_cast<int>(pick(28));

  std::vector<AuthEvent> events;
  for (int u = 1; u <= users; ++u) {
    const std::string dev = "tag-" + std::to_string(u);
    for (int d = 0; d < days; ++d) {
      if (gen() % 4 == 0) continue;  // absent
      int minute = static_cast<int>(pick(12 * 60));
      const int visits = 1 + static_cast<int>(pick(3));
      for (int v = 0; v < visits && minute < 24 * 60; ++v) {
        const auto when = [&](int m) { return zone.at(absl::CivilSecond(start + d) + m * 60 + static_cast<int>(pick(60))); };
        const int roll = static_cast<int>(pick(20));
        if (roll == 0) {
          events.push_back(testing::event(dev, AuthAction::Exit, when(minute)));  // orphan exit
        } else {
          events.push_back(testing::event(dev, AuthAction::Enter, when(minute)));
          if (roll == 1) events.push_back(testing::event(dev, AuthAction::Enter, when(minute + 5)));
          const int stay = 1 + static_cast<int>(pick(10 * 60));
          minute += stay;
          // Sometimes the exit is missed, sometimes it lands after midnight.
          if (roll != 2 && minute < 24 * 60 + 120) events.push_back(testing::event(dev, AuthAction::Exit, when(minute)));
        }
        minute += 10 + static_cast<int>(pick(180));
      }
    }
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const AuthEvent& a, const AuthEvent& b) { return a.timestamp < b.timestamp; });
  inst.events = std::move(events);

  // Far enough for the coarsest configured period holding the last day to close.
  const auto& periods = rules.valence_periods;
  inst.horizon = closing_time(period_instance(periods.back(), zone.start_of(start + days), zone), periods,
                              periods.size() - 1, zone);
  return inst;
}

std::size_t aggregate_oracle_checks = 0;

void aggregate_oracle() {
  std::mt19937_64 gen(20180131);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = random_instance(gen);
    const auto rules = inst.catalog.environments.begin()->second;
    auto store = testing::run_events({inst.catalog}, inst.events, inst.horizon);
    const auto& sphere = store->sphere(SphereId("uni"));
    const auto& zone = sphere.zone();
    const double expected_hours = rules.expected_hours.to_double();

    std::map<UserId, std::vector<testing::Stay>> stays;
    for (const auto& [device, entry] : inst.catalog.directory) {
      std::vector<AuthEvent> mine;
      for (const auto& e : inst.events) {
        if (e.user_device_id == device) mine.push_back(e);
      }
      stays[entry.user_id] = testing::oracle_stays(mine);
    }

    for (const auto& r : sphere.frequencies(EnvironmentId("lab"))) {
      const auto level = static_cast<std::size_t>(
          std::find(rules.valence_periods.begin(), rules.valence_periods.end(), r.period_kind) -
          rules.valence_periods.begin());
      require(level < rules.valence_periods.size(), "record for unconfigured period");
      const auto first = zone.civil_day(r.period_start);
      require(testing::oracle_first_day(r.period_kind, first) == first && zone.start_of(first) == r.period_start,
              "record starts off an instance boundary");
      const double want = testing::oracle_frequency(stays[r.user_id], zone, rules.valence_periods, level, first,
                                                    expected_hours);
      const double got = r.frequency.to_double();
      require(std::abs(got - want) < 1e-9, "trial " + str(trial) + " " + r.user_id.str() + " " +
                                                std::string(to_string(r.period_kind)) + " " +
                                                format_date(first) + ": got " + str(got) + ", oracle " + str(want));
      ++aggregate_oracle_checks;
    }
    // Every user who showed up has a record for each ended superior instance.
    for (std::size_t level = 1; level < rules.valence_periods.size(); ++level) {
      const auto kind = rules.valence_periods[level];
      for (const auto& [device, entry] : inst.catalog.directory) {
        if (stays[entry.user_id].empty()) continue;
        const auto first_seen = from_unix(stays[entry.user_id].front().from);
        auto p = period_instance(kind, first_seen, zone);
        for (; closing_time(p, rules.valence_periods, level, zone) <= inst.horizon; p = next_instance(p, zone)) {
          require(sphere.frequency(EnvironmentId("lab"), entry.user_id, kind, p.start).has_value(),
                  "trial " + str(trial) + ": missing " + std::string(to_string(kind)) + " record for " +
                      entry.user_id.str() + " at " + format_rfc3339(p.start));
        }
      }
    }
  }
  require(aggregate_oracle_checks > 1000, "too few records checked: " + str(aggregate_oracle_checks));
}

// --- determinism ----------------------------------------------------------------

void determinism() {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = random_instance(gen);
    const auto a = replay(inst.events, {inst.catalog}, inst.horizon);
    const auto b = replay(inst.events, {inst.catalog}, inst.horizon);
    require(a.digest == b.digest, "replay digests differ in trial " + str(trial));
  }
  auto s = testing::lab_scenario();
  require(replay(s.events, {s.catalog}).digest == replay(s.events, {s.catalog}).digest, "scenario digests differ");

  auto cfg = default_sim_config();
  for (auto fmt : {ReportFormat::Csv, ReportFormat::Json}) {
    require(render_report(run_simulation(cfg), fmt) == render_report(run_simulation(cfg), fmt),
            "simulator reports differ for equal seeds");
  }
}

// --- once per period over HTTP ----------------------------------------------------

void once_per_period_http() {
  Store store;
  auto& sphere = store.add_sphere(testing::lab_catalog());
  AuthService service(store, {{DeviceId("door-lab"), {SphereId("uni"), EnvironmentId("lab")}}});
  VirtualClock clock(local(sphere.zone(), 2018, 1, 1, 8));
  httplib::Server server;
  install_routes(server, service, clock, &clock);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  struct Stop {
    httplib::Server& s;
    std::thread& t;
    ~Stop() {
      s.stop();
      t.join();
    }
  } stop{server, thread};

  httplib::Client client("127.0.0.1", port);
  auto swipe = [&](const char* action) {
    auto res = client.Post("/v1/authenticate",
                           std::string(R"({"user_device_id":"tag-1","action":")") + action +
                               R"(","authenticator_device_id":"door-lab"})",
                           "application/json");
    require(res && res->status == 200, "authenticate failed");
    return nlohmann::json::parse(res->body);
  };
  auto tick_to = [&](Timestamp t) {
    auto res = client.Post("/v1/tick", nlohmann::json{{"now", format_rfc3339(t)}}.dump(), "application/json");
    require(res && res->status == 200, "tick failed");
  };

  // A perfect first day so the second day has something to act on.
  const auto& zone = sphere.zone();
  const std::pair<int, const char*> day_one[] = {{8, "enter"}, {12, "exit"}, {14, "enter"}, {18, "exit"}};
  for (const auto& [h, action] : day_one) {
    tick_to(local(zone, 2018, 1, 1, h));
    swipe(action);
  }

  const auto day_two = local(zone, 2018, 1, 2);
  int changes = 0;
  for (int i = 0; i < 100; ++i) {
    tick_to(day_two + Seconds(i * 800 + 1));
    auto body = swipe(i % 2 ? "exit" : "enter");
    if (body["decision"]["reason"] != "TooSoon") ++changes;
  }
  require(changes <= 1, str(changes) + " non-TooSoon decisions in one day");
  require(changes == 1, "the day's evaluation never happened");
}

// --- golden files -----------------------------------------------------------------

void golden_files() {
  const std::string dir = PRIPRO_GOLDEN_DIR;
  const auto request = testing::read_file(dir + "/auth_request.json");
  const AuthRequest req{DeviceId("tag-1"), AuthAction::Enter, DeviceId("door-lab")};
  require(auth_request_to_json(req).dump() == request, "AuthRequest serialization drifted");
  require(parse_auth_request(request) == req, "AuthRequest golden does not parse back");

  auto s = testing::lab_scenario();
  Store store;
  store.add_sphere(s.catalog);
  const auto responses = testing::authenticate_all(store, s.events);
  auto first_at = [&](const std::string& stamp) -> const AuthResponse& {
    for (const auto& r : responses) {
      if (format_rfc3339(r.timestamp) == stamp) return r;
    }
    throw Failure{"no response at " + stamp};
  };
  const std::pair<const char*, const char*> cases[] = {
      {"auth_response_bootstrapped.json", "2018-01-01T10:00:00Z"},
      {"auth_response_evolved.json", "2018-01-04T10:00:00Z"},
      {"auth_response_blocked.json", "2018-01-16T10:00:00Z"},
  };
  for (const auto& [file, stamp] : cases) {
    const auto want = testing::read_file(dir + "/" + file);
    const auto got = auth_response_to_json(first_at(stamp)).dump();
    require(got == want, std::string(file) + " differs:\n  want " + want + "\n  got  " + got);
  }
}

}  // namespace

int main() {
  criterion("day-frequency", 1, day_frequency_suite);
  criterion("band-edges", 1, band_suite);
  criterion("lab-scenario-replay", 5, scenario_replay);
  criterion("guest-to-administrator-ladder", 5, ladder);
  criterion("population-shape", 30, population_shape);
  criterion("aggregate-brute-force-oracle", 30, aggregate_oracle);
  criterion("determinism", 60, determinism);
  criterion("once-per-period-http", 60, once_per_period_http);
  criterion("wire-golden-files", 60, golden_files);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
