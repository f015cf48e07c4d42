#include <filesystem>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace pripro {
namespace {

using testing::event;
using testing::lab_catalog;
using testing::local;

class StoreTest : public ::testing::Test {
 protected:
  StoreTest()
      : sphere_(store_.add_sphere(lab_catalog({PeriodKind::Day, PeriodKind::Week, PeriodKind::Month}))),
        zone_(sphere_.zone()) {}

  PeriodInstance day(int d, int month = 1) {
    return period_instance(PeriodKind::Day, local(zone_, 2018, month, d, 12), zone_);
  }

  void attend(int d, int hours, const std::string& device = "tag-1", int month = 1) {
    sphere_.append_event(event(device, AuthAction::Enter, local(zone_, 2018, month, d, 8)));
    sphere_.append_event(event(device, AuthAction::Exit, local(zone_, 2018, month, d, 8 + hours)));
  }

  Store store_;
  SphereStore& sphere_;
  const Zone& zone_;
  const EnvironmentId lab_{"lab"};
  const UserId user1_{"user-1"};
};

TEST_F(StoreTest, AppendAssignsIncreasingIds) {
  EXPECT_EQ(sphere_.append_event(event("tag-1", AuthAction::Enter, local(zone_, 2018, 1, 1, 8))), 1u);
  EXPECT_EQ(sphere_.append_event(event("tag-2", AuthAction::Enter, local(zone_, 2018, 1, 1, 9))), 2u);
  EXPECT_EQ(sphere_.events().size(), 2u);
}

TEST_F(StoreTest, AppendErrors) {
  try {
    sphere_.append_event(event("tag-1", AuthAction::Enter, local(zone_, 2018, 1, 1, 8), "uni", "kitchen"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotFound);
  }
  try {
    sphere_.append_event(event("tag-9", AuthAction::Enter, local(zone_, 2018, 1, 1, 8)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownDevice);
  }
  try {
    sphere_.append_event(event("tag-1", AuthAction::Enter, local(zone_, 2018, 1, 1, 8), "other"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotFound);
  }
}

TEST_F(StoreTest, LateEventsAreRejected) {
  attend(1, 8);
  sphere_.materialize_period(lab_, day(1), local(zone_, 2018, 1, 2, 1));
  try {
    sphere_.append_event(event("tag-1", AuthAction::Enter, local(zone_, 2018, 1, 1, 20)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LateEvent);
  }
  EXPECT_NO_THROW(sphere_.append_event(event("tag-1", AuthAction::Enter, local(zone_, 2018, 1, 2, 8))));
}

TEST_F(StoreTest, MaterializeDay) {
  attend(1, 8);
  EXPECT_EQ(sphere_.materialize_period(lab_, day(1), day(1).end), 1u);
  auto rec = sphere_.latest_frequency(lab_, user1_);
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->frequency, Rational(1));
  EXPECT_EQ(rec->period_kind, PeriodKind::Day);
  EXPECT_EQ(rec->computed_at, day(1).end);
}

TEST_F(StoreTest, MaterializeErrors) {
  try {
    sphere_.materialize_period(lab_, day(1), day(1).end - Seconds(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooEarly);
  }
  auto week = period_instance(PeriodKind::Week, local(zone_, 2018, 1, 3), zone_);
  EXPECT_THROW(sphere_.materialize_period(lab_, week, week.end), Error);
}

TEST_F(StoreTest, EmptyEnvironmentWritesNothing) {
  EXPECT_EQ(sphere_.materialize_period(lab_, day(1), day(2).end), 0u);
  EXPECT_TRUE(sphere_.frequencies(lab_).empty());
}

TEST_F(StoreTest, MaterializationIsIdempotent) {
  attend(1, 6);
  attend(1, 3, "tag-2");
  sphere_.materialize_period(lab_, day(1), day(1).end);
  const auto once = sphere_.snapshot();
  sphere_.materialize_period(lab_, day(1), day(1).end);
  const auto twice = sphere_.snapshot();
  EXPECT_EQ(state_digest({once}), state_digest({twice}));
}

TEST_F(StoreTest, WeekRecordIsTheMeanOfItsDays) {
  const int hours[7] = {8, 7, 6, 0, 8, 2, 4};
  for (int d = 1; d <= 7; ++d) {
    if (hours[d - 1] > 0) attend(d, hours[d - 1]);
  }
  for (int d = 1; d <= 7; ++d) sphere_.materialize_period(lab_, day(d), day(7).end);
  auto week = sphere_.frequency(lab_, user1_, PeriodKind::Week, local(zone_, 2018, 1, 1));
  ASSERT_TRUE(week);
  double mean = 0;
  for (int h : hours) mean += h / 8.0 / 7.0;
  EXPECT_NEAR(week->frequency.to_double(), mean, 1e-12);
  // No month record until January is over.
  EXPECT_FALSE(sphere_.frequency(lab_, user1_, PeriodKind::Month, local(zone_, 2018, 1, 1)));
}

TEST_F(StoreTest, LatestFrequencyPicksTheNewestDay) {
  EXPECT_FALSE(sphere_.latest_frequency(lab_, user1_));
  attend(1, 8);
  attend(2, 4);
  sphere_.materialize_period(lab_, day(1), day(2).end);
  EXPECT_EQ(sphere_.latest_frequency(lab_, user1_)->frequency, Rational(1));
  sphere_.materialize_period(lab_, day(2), day(2).end);
  EXPECT_EQ(sphere_.latest_frequency(lab_, user1_)->frequency, Rational(1, 2));
  EXPECT_FALSE(sphere_.latest_frequency(lab_, UserId("nobody")));
}

TEST_F(StoreTest, WatermarkNeverMovesBack) {
  attend(1, 8);
  sphere_.materialize_period(lab_, day(3), day(3).end);
  EXPECT_EQ(sphere_.watermark(lab_)->start, day(3).start);
  sphere_.materialize_period(lab_, day(2), day(3).end);
  EXPECT_EQ(sphere_.watermark(lab_)->start, day(3).start);
}

TEST_F(StoreTest, BootstrapOnceThenLookup) {
  const auto t = local(zone_, 2018, 1, 1, 8);
  auto first = sphere_.lookup_or_bootstrap(lab_, DeviceId("tag-1"), t);
  EXPECT_TRUE(first.bootstrapped);
  EXPECT_EQ(first.state.level, ProfileLevel::Guest);
  ASSERT_EQ(first.state.history.size(), 1u);
  EXPECT_EQ(first.state.history[0].decision.reason, DecisionReason::Bootstrapped);
  auto second = sphere_.lookup_or_bootstrap(lab_, DeviceId("tag-1"), t + Seconds(60));
  EXPECT_FALSE(second.bootstrapped);
  EXPECT_EQ(second.state, first.state);
  EXPECT_EQ(sphere_.base_profile_fetches(), 1u);
  try {
    sphere_.lookup_or_bootstrap(lab_, DeviceId("tag-x"), t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownDevice);
  }
}

TEST_F(StoreTest, CommitDecision) {
  const auto t = local(zone_, 2018, 1, 1, 8);
  auto state = sphere_.lookup_or_bootstrap(lab_, DeviceId("tag-1"), t).state;

  auto maintained = sphere_.commit_decision(
      state, {ProfileLevel::Guest, ProfileLevel::Guest, DecisionReason::Maintained, std::nullopt}, t + std::chrono::hours(24));
  EXPECT_EQ(maintained.history.size(), 2u);
  EXPECT_EQ(maintained.last_update, t + std::chrono::hours(24));

  auto too_soon = sphere_.commit_decision(
      maintained, {ProfileLevel::Guest, ProfileLevel::Guest, DecisionReason::TooSoon, std::nullopt}, t + std::chrono::hours(25));
  EXPECT_EQ(too_soon.history.size(), 3u);
  EXPECT_EQ(too_soon.last_update, maintained.last_update);

  auto evolved = sphere_.commit_decision(
      too_soon, {ProfileLevel::Guest, ProfileLevel::Basic, DecisionReason::Evolved, Rational(1)}, t + std::chrono::hours(48));
  EXPECT_EQ(evolved.level, ProfileLevel::Basic);

  // `too_soon` is now stale.
  try {
    sphere_.commit_decision(too_soon, {ProfileLevel::Guest, ProfileLevel::Basic, DecisionReason::Evolved, Rational(1)},
                            t + std::chrono::hours(49));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Conflict);
    EXPECT_TRUE(e.retryable());
  }
  EXPECT_THROW(sphere_.commit_decision(evolved, {ProfileLevel::Basic, ProfileLevel::Basic, DecisionReason::Maintained, std::nullopt},
                                       t + std::chrono::hours(48)),
               Error);
}

TEST(StoreIsolation, SpheresNeverShareState) {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 30; ++trial) {
    Store store;
    auto& a = store.add_sphere(lab_catalog({PeriodKind::Day, PeriodKind::Week}, ProfileLevel::Guest, "a", "UTC"));
    auto& b = store.add_sphere(lab_catalog({PeriodKind::Day, PeriodKind::Week}, ProfileLevel::Basic, "b", "UTC"));
    Store alone;
    auto& a_only = alone.add_sphere(lab_catalog({PeriodKind::Day, PeriodKind::Week}, ProfileLevel::Guest, "a", "UTC"));

    AuthService both(store, {{DeviceId("door-a"), {SphereId("a"), EnvironmentId("lab")}},
                             {DeviceId("door-b"), {SphereId("b"), EnvironmentId("lab")}}});
    AuthService single(alone, {{DeviceId("door-a"), {SphereId("a"), EnvironmentId("lab")}}});

    auto t = from_unix(1514764800);  // 2018-01-01T00:00Z
    for (int i = 0; i < 200; ++i) {
      t += Seconds(static_cast<std::int64_t>(gen() % 20000));
      const auto dev = DeviceId("tag-" + std::to_string(1 + gen() % 3));
      const auto action = gen() % 2 ? AuthAction::Enter : AuthAction::Exit;
      both.tick(t);
      single.tick(t);
      if (gen() % 2) {
        auto r1 = both.handle_authenticate({dev, action, DeviceId("door-a")}, t);
        auto r2 = single.handle_authenticate({dev, action, DeviceId("door-a")}, t);
        ASSERT_EQ(r1, r2);
      } else {
        auto r = both.handle_authenticate({dev, action, DeviceId("door-b")}, t);
        EXPECT_EQ(r.sphere_id, SphereId("b"));
      }
    }
    EXPECT_EQ(state_digest({a.snapshot()}), state_digest({a_only.snapshot()}));
    for (const auto& e : b.events()) EXPECT_EQ(e.sphere_id, SphereId("b"));
    for (const auto& e : a.events()) EXPECT_EQ(e.sphere_id, SphereId("a"));
  }
}

TEST(StoreRegistry, DuplicateAndUnknownSpheres) {
  Store store;
  store.add_sphere(lab_catalog());
  EXPECT_THROW(store.add_sphere(lab_catalog()), Error);
  try {
    store.sphere(SphereId("nope"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotFound);
  }
}

TEST(Catalog, ValidationAndRoundTrip) {
  auto c = lab_catalog({PeriodKind::Day, PeriodKind::Week});
  auto again = catalog_from_json(nlohmann::json::parse(catalog_to_json(c).dump()));
  EXPECT_EQ(catalog_to_json(again).dump(), catalog_to_json(c).dump());

  auto bad = testing::lab_rules({PeriodKind::Week, PeriodKind::Day});
  EXPECT_THROW(bad.validate(), Error);
  bad = testing::lab_rules();
  bad.block_below = 0.8;
  EXPECT_THROW(bad.validate(), Error);
  bad = testing::lab_rules();
  bad.expected_hours = Rational(25);
  EXPECT_THROW(bad.validate(), Error);
  bad = testing::lab_rules();
  bad.sphere_id = SphereId("elsewhere");
  EXPECT_THROW(c.add_environment(bad), Error);

  EXPECT_TRUE(c.grants(EnvironmentId("lab"), ProfileLevel::Blocked).resources.empty());
  EXPECT_THROW(c.grant(EnvironmentId("lab"), ProfileLevel::Blocked, {{"door"}, {}}), Error);
  EXPECT_THROW(Zone::load("Mars/Olympus_Mons"), Error);
}

TEST(EventLog, RoundTripAndLineNumbers) {
  const auto zone = Zone::load("UTC");
  std::vector<AuthEvent> evs{event("tag-1", AuthAction::Enter, local(zone, 2018, 1, 1, 8)),
                             event("tag-1", AuthAction::Exit, local(zone, 2018, 1, 1, 12))};
  evs[0].event_id = 1;
  evs[1].event_id = 2;
  std::ostringstream out;
  write_event_log(out, evs);
  std::istringstream in(out.str() + "\n");
  auto back = read_event_log(in, "mem");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].timestamp, evs[1].timestamp);
  EXPECT_EQ(back[1].action, AuthAction::Exit);

  std::istringstream broken(out.str() + "{\"event_id\": 3}\n");
  try {
    read_event_log(broken, "mem");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Parse);
    EXPECT_NE(std::string(e.what()).find("mem:3"), std::string::npos) << e.what();
  }
}

TEST(EventLog, AttachedLogMirrorsAppends) {
  const auto path = std::filesystem::temp_directory_path() / "pripro-attach-test.jsonl";
  std::filesystem::remove(path);
  Store store;
  auto& s = store.add_sphere(lab_catalog());
  s.attach_log(path);
  s.append_event(event("tag-1", AuthAction::Enter, local(s.zone(), 2018, 1, 1, 8)));
  s.append_event(event("tag-1", AuthAction::Exit, local(s.zone(), 2018, 1, 1, 9)));
  auto back = read_event_log(path);
  EXPECT_EQ(back, s.events());
  std::filesystem::remove(path);
}

TEST(Snapshot, RoundTrip) {
  auto scenario = testing::lab_scenario();
  auto store = testing::run_events({scenario.catalog}, scenario.events);
  auto snap = store->snapshot();
  auto back = snapshot_from_json(nlohmann::json::parse(snapshot_to_json(snap).dump()));
  EXPECT_EQ(state_digest(back), state_digest(snap));
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace pripro
