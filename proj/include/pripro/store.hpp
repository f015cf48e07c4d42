#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <tuple>
#include <utility>
#include <vector>

#include "pripro/attendance.hpp"
#include "pripro/catalog.hpp"
#include "pripro/errors.hpp"
#include "pripro/event_log.hpp"
#include "pripro/evolution.hpp"
#include "pripro/ids.hpp"
#include "pripro/period.hpp"
#include "pripro/rules.hpp"
#include "pripro/time.hpp"

namespace pripro {

// Materialized attendance frequency for one user over one period instance.
struct FrequencyRecord {
  SphereId sphere_id;
  EnvironmentId environment_id;
  UserId user_id;
  PeriodKind period_kind = PeriodKind::Day;
  Timestamp period_start;
  Rational frequency;
  Timestamp computed_at;

  friend bool operator==(const FrequencyRecord&, const FrequencyRecord&) = default;
};

struct HistoryEntry {
  Timestamp at;
  EvolutionDecision decision;

  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

// Current profile of a user in one environment plus every decision that
// produced it. `level` always equals history.back().decision.next.
struct ProfileState {
  SphereId sphere_id;
  EnvironmentId environment_id;
  UserId user_id;
  ProfileLevel level = ProfileLevel::Guest;
  Timestamp last_update;
  std::vector<HistoryEntry> history;

  // Compare-and-commit token.
  std::size_t version() const noexcept { return history.size(); }

  friend bool operator==(const ProfileState&, const ProfileState&) = default;
};

struct BootstrapResult {
  UserId user_id;
  ProfileState state;
  bool bootstrapped = false;
};

struct EnvironmentSnapshot {
  EnvironmentId environment_id;
  std::optional<Timestamp> watermark_start;
  std::vector<ProfileState> profiles;
  std::vector<FrequencyRecord> frequencies;
};

struct SphereSnapshot {
  SphereId sphere_id;
  EventId last_event_id = 0;
  std::vector<EnvironmentSnapshot> environments;
};

// State of one sphere. Nothing here is ever keyed by, or reachable from,
// another sphere's identifiers.
//
// Thread safety: all members may be called concurrently. Appends are
// serialized; reads take a shared lock; materialization computes under a
// shared lock and installs its records only if no event arrived meanwhile.
class SphereStore {
 public:
  explicit SphereStore(SphereCatalog catalog)
      : catalog_(std::move(catalog)), zone_(Zone::load(catalog_.timezone)) {
    catalog_.validate();
    for (const auto& [id, _] : catalog_.environments) envs_[id];
  }

  SphereStore(const SphereStore&) = delete;
  SphereStore& operator=(const SphereStore&) = delete;

  const SphereId& id() const noexcept { return catalog_.sphere_id; }
  const SphereCatalog& catalog() const noexcept { return catalog_; }
  const Zone& zone() const noexcept { return zone_; }

  // Subsequent appends are also written to `path`, one JSON object per line.
  void attach_log(const std::filesystem::path& path) {
    std::unique_lock lock(mu_);
    writer_ = std::make_unique<EventLogWriter>(path);
  }

  // Throws LateEvent if an event at `t` would land inside an already
  // materialized innermost period.
  void check_not_late(const EnvironmentId& env, Timestamp t) const {
    std::shared_lock lock(mu_);
    check_not_late_locked(env_data(env), env, t);
  }

  EventId append_event(AuthEvent e) {
    std::unique_lock lock(mu_);
    if (e.sphere_id != id()) {
      throw Error(ErrorCode::NotFound, "event for sphere '" + e.sphere_id.str() +
                                           "' appended to sphere '" + id().str() + "'");
    }
    auto& env = env_data(e.environment_id);
    check_not_late_locked(env, e.environment_id, e.timestamp);
    const UserId user = resolve_user_locked(env, e.user_device_id);

    e.event_id = next_event_id_;
    if (writer_) writer_->append(e);
    ++next_event_id_;

    auto& evs = env.events_by_user[user];
    auto pos = std::upper_bound(evs.begin(), evs.end(), e, [](const AuthEvent& a, const AuthEvent& b) {
      return std::tie(a.timestamp, a.event_id) < std::tie(b.timestamp, b.event_id);
    });
    evs.insert(pos, e);
    note_activity(env, e.timestamp);
    ++env.version;
    log_.push_back(std::move(e));
    return log_.back().event_id;
  }

  // Computes the frequency of every user active in `period` (an ended
  // innermost instance), then cascades into each coarser configured period
  // whose last inferior instance this completes. Re-running yields identical
  // records. Returns the number of records written.
  std::size_t materialize_period(const EnvironmentId& env_id, const PeriodInstance& period,
                                 Timestamp now) {
    const auto& rules = catalog_.environment(env_id);
    if (period.kind != rules.innermost() || !is_canonical(period, zone_)) {
      throw Error(ErrorCode::InvalidArgument,
                  "materialize_period needs a canonical '" +
                      std::string(to_string(rules.innermost())) + "' instance");
    }
    if (period.end > now) {
      throw Error(ErrorCode::TooEarly, "period ending " + format_rfc3339(period.end) +
                                           " has not ended at " + format_rfc3339(now));
    }

    for (;;) {
      std::vector<FrequencyRecord> pending;
      std::uint64_t seen_version = 0;
      {
        std::shared_lock lock(mu_);
        const auto& env = env_data(env_id);
        seen_version = env.version;
        pending = compute_records_locked(env, env_id, rules, period);
      }
      std::unique_lock lock(mu_);
      auto& env = env_data(env_id);
      if (env.version != seen_version) continue;
      for (auto& r : pending) {
        env.frequencies.insert_or_assign(FreqKey{r.user_id, r.period_kind, r.period_start}, r);
      }
      if (!env.watermark || env.watermark->start < period.start) env.watermark = period;
      return pending.size();
    }
  }

  std::optional<PeriodInstance> watermark(const EnvironmentId& env) const {
    std::shared_lock lock(mu_);
    return env_data(env).watermark;
  }

  // Earliest event or bootstrap seen in the environment.
  std::optional<Timestamp> first_activity(const EnvironmentId& env) const {
    std::shared_lock lock(mu_);
    return env_data(env).first_activity;
  }

  // Most recent innermost-period record for the user.
  std::optional<FrequencyRecord> latest_frequency(const EnvironmentId& env_id,
                                                  const UserId& user) const {
    std::shared_lock lock(mu_);
    const auto& env = env_data(env_id);
    const auto kind = catalog_.environment(env_id).innermost();
    auto hi = env.frequencies.lower_bound(FreqKey{user, static_cast<PeriodKind>(static_cast<int>(kind) + 1), Timestamp::min()});
    auto lo = env.frequencies.lower_bound(FreqKey{user, kind, Timestamp::min()});
    if (lo == hi) return std::nullopt;
    return std::prev(hi)->second;
  }

  std::optional<FrequencyRecord> frequency(const EnvironmentId& env_id, const UserId& user,
                                           PeriodKind kind, Timestamp period_start) const {
    std::shared_lock lock(mu_);
    const auto& env = env_data(env_id);
    auto it = env.frequencies.find(FreqKey{user, kind, period_start});
    if (it == env.frequencies.end()) return std::nullopt;
    return it->second;
  }

  std::vector<FrequencyRecord> frequencies(const EnvironmentId& env_id) const {
    std::shared_lock lock(mu_);
    std::vector<FrequencyRecord> out;
    for (const auto& [_, r] : env_data(env_id).frequencies) out.push_back(r);
    return out;
  }

  std::optional<UserId> known_user(const EnvironmentId& env_id, const DeviceId& device) const {
    std::shared_lock lock(mu_);
    const auto& env = env_data(env_id);
    auto it = env.known_devices.find(device);
    if (it == env.known_devices.end()) return std::nullopt;
    return it->second;
  }

  // Returns the user's state in the environment, creating it at the base
  // profile (reason Bootstrapped) on first sight. Only the creation path
  // consults the sphere directory.
  BootstrapResult lookup_or_bootstrap(const EnvironmentId& env_id, const DeviceId& device,
                                      Timestamp at) {
    {
      std::shared_lock lock(mu_);
      const auto& env = env_data(env_id);
      if (auto it = env.known_devices.find(device); it != env.known_devices.end()) {
        return {it->second, env.profiles.at(it->second), false};
      }
    }
    std::unique_lock lock(mu_);
    auto& env = env_data(env_id);
    if (auto it = env.known_devices.find(device); it != env.known_devices.end()) {
      return {it->second, env.profiles.at(it->second), false};
    }
    ++base_profile_fetches_;
    const auto* entry = catalog_.find_device(device);
    if (!entry) {
      throw Error(ErrorCode::UnknownDevice, "device '" + device.str() + "' is not registered in sphere '" +
                                                id().str() + "'");
    }
    env.known_devices.emplace(device, entry->user_id);
    if (auto it = env.profiles.find(entry->user_id); it != env.profiles.end()) {
      return {entry->user_id, it->second, false};
    }
    const auto base = entry->base_profile.value_or(catalog_.environment(env_id).base_profile);
    ProfileState state{id(), env_id, entry->user_id, base, at, {{at, bootstrap_decision(base)}}};
    env.profiles.emplace(entry->user_id, state);
    note_activity(env, at);
    return {entry->user_id, std::move(state), true};
  }

  std::optional<ProfileState> find_profile(const EnvironmentId& env_id, const UserId& user) const {
    std::shared_lock lock(mu_);
    const auto& env = env_data(env_id);
    auto it = env.profiles.find(user);
    if (it == env.profiles.end()) return std::nullopt;
    return it->second;
  }

  std::vector<ProfileState> profiles(const EnvironmentId& env_id) const {
    std::shared_lock lock(mu_);
    std::vector<ProfileState> out;
    for (const auto& [_, p] : env_data(env_id).profiles) out.push_back(p);
    return out;
  }

  // Appends `decision` to the user's history if `expected` is still the
  // stored version, otherwise throws a retryable Conflict. TooSoon entries
  // leave level and last_update untouched.
  ProfileState commit_decision(const ProfileState& expected, const EvolutionDecision& decision,
                               Timestamp at) {
    std::unique_lock lock(mu_);
    auto& env = env_data(expected.environment_id);
    auto it = env.profiles.find(expected.user_id);
    if (expected.sphere_id != id() || it == env.profiles.end()) {
      throw Error(ErrorCode::NotFound, "no profile for user '" + expected.user_id.str() + "'");
    }
    auto& current = it->second;
    if (current.version() != expected.version()) {
      throw Error(ErrorCode::Conflict, "profile of '" + expected.user_id.str() +
                                           "' changed concurrently");
    }
    if (!current.history.empty() && at <= current.history.back().at) {
      throw Error(ErrorCode::InvalidArgument, "decision time must follow the last history entry");
    }
    if (decision.previous != current.level) {
      throw Error(ErrorCode::InvalidArgument, "decision was computed from a different level");
    }
    current.history.push_back({at, decision});
    if (decision.reason != DecisionReason::TooSoon) {
      current.level = decision.next;
      current.last_update = at;
    }
    return current;
  }

  std::vector<AuthEvent> events() const {
    std::shared_lock lock(mu_);
    return log_;
  }

  std::uint64_t base_profile_fetches() const noexcept { return base_profile_fetches_.load(); }

  SphereSnapshot snapshot() const {
    std::shared_lock lock(mu_);
    SphereSnapshot snap{id(), next_event_id_ - 1, {}};
    for (const auto& [env_id, env] : envs_) {
      EnvironmentSnapshot es{env_id, std::nullopt, {}, {}};
      if (env.watermark) es.watermark_start = env.watermark->start;
      for (const auto& [_, p] : env.profiles) es.profiles.push_back(p);
      for (const auto& [_, r] : env.frequencies) es.frequencies.push_back(r);
      snap.environments.push_back(std::move(es));
    }
    return snap;
  }

 private:
  using FreqKey = std::tuple<UserId, PeriodKind, Timestamp>;

  struct EnvData {
    std::map<UserId, std::vector<AuthEvent>> events_by_user;
    std::map<DeviceId, UserId> known_devices;
    std::map<UserId, ProfileState> profiles;
    std::map<FreqKey, FrequencyRecord> frequencies;
    std::optional<PeriodInstance> watermark;
    std::optional<Timestamp> first_activity;
    std::uint64_t version = 0;
  };

  EnvData& env_data(const EnvironmentId& env) {
    auto it = envs_.find(env);
    if (it == envs_.end()) {
      throw Error(ErrorCode::NotFound, "sphere '" + id().str() + "' has no environment '" + env.str() + "'");
    }
    return it->second;
  }
  const EnvData& env_data(const EnvironmentId& env) const {
    return const_cast<SphereStore*>(this)->env_data(env);
  }

  static void note_activity(EnvData& env, Timestamp t) {
    if (!env.first_activity || t < *env.first_activity) env.first_activity = t;
  }

  void check_not_late_locked(const EnvData& env, const EnvironmentId& env_id, Timestamp t) const {
    if (env.watermark && t < env.watermark->end) {
      throw Error(ErrorCode::LateEvent, "event at " + format_rfc3339(t) + " precedes the materialized period ending " +
                                            format_rfc3339(env.watermark->end) + " in '" + env_id.str() + "'");
    }
  }

  UserId resolve_user_locked(const EnvData& env, const DeviceId& device) const {
    if (auto it = env.known_devices.find(device); it != env.known_devices.end()) return it->second;
    if (const auto* entry = catalog_.find_device(device)) return entry->user_id;
    throw Error(ErrorCode::UnknownDevice, "device '" + device.str() + "' is not registered in sphere '" +
                                              id().str() + "'");
  }

  std::vector<FrequencyRecord> compute_records_locked(const EnvData& env, const EnvironmentId& env_id,
                                                      const EnvironmentRules& rules,
                                                      const PeriodInstance& period) const {
    std::vector<FrequencyRecord> pending;
    std::map<FreqKey, std::size_t> pending_index;

    auto make_record = [&](const UserId& user, PeriodKind kind, Timestamp start, Rational f) {
      FrequencyRecord r{id(), env_id, user, kind, start, f, period.end};
      pending_index[FreqKey{user, kind, start}] = pending.size();
      pending.push_back(std::move(r));
    };
    auto lookup = [&](const UserId& user, PeriodKind kind, Timestamp start) -> std::optional<Rational> {
      FreqKey key{user, kind, start};
      if (auto it = pending_index.find(key); it != pending_index.end()) return pending[it->second].frequency;
      if (auto it = env.frequencies.find(key); it != env.frequencies.end()) return it->second.frequency;
      return std::nullopt;
    };
    auto profile_known_before = [&](const UserId& user, Timestamp t) {
      auto it = env.profiles.find(user);
      return it != env.profiles.end() && !it->second.history.empty() && it->second.history.front().at < t;
    };

    std::set<UserId> users;
    for (const auto& [u, _] : env.events_by_user) users.insert(u);
    for (const auto& [u, _] : env.profiles) users.insert(u);

    // Innermost period.
    for (const auto& user : users) {
      std::span<const AuthEvent> relevant;
      bool active = false;
      if (auto it = env.events_by_user.find(user); it != env.events_by_user.end()) {
        const auto& evs = it->second;
        auto by_time = [](const AuthEvent& e, Timestamp t) { return e.timestamp < t; };
        auto lo = std::lower_bound(evs.begin(), evs.end(), period.start, by_time);
        auto hi = std::lower_bound(lo, evs.end(), period.end, by_time);
        auto begin = lo;
        if (lo != evs.begin() && std::prev(lo)->action == AuthAction::Enter) {
          begin = std::prev(lo);
          active = true;
        }
        active = active || lo != hi;
        relevant = std::span<const AuthEvent>(evs).subspan(static_cast<std::size_t>(begin - evs.begin()),
                                                           static_cast<std::size_t>(hi - begin));
      }
      if (!active && !profile_known_before(user, period.end)) continue;
      auto pairing = pair_events(relevant, period);
      make_record(user, period.kind, period.start, inferior_frequency(pairing.intervals, rules.expected_hours));
    }

    // Coarser periods whose last inferior instance just completed.
    PeriodInstance child = period;
    for (std::size_t level = 1; level < rules.valence_periods.size(); ++level) {
      const auto parent = period_instance(rules.valence_periods[level], child.start, zone_);
      if (next_instance(child, zone_).start < parent.end) break;
      const auto children = contained_instances(parent, rules.valence_periods[level - 1], zone_);
      for (const auto& user : users) {
        std::vector<Rational> values;
        bool any = false;
        for (const auto& c : children) {
          auto f = lookup(user, c.kind, c.start);
          any = any || f.has_value();
          values.push_back(f.value_or(Rational{0}));
        }
        if (!any && !profile_known_before(user, parent.end)) continue;
        make_record(user, parent.kind, parent.start, superior_frequency(values, children.size()));
      }
      child = parent;
    }
    return pending;
  }

  SphereCatalog catalog_;
  Zone zone_;

  mutable std::shared_mutex mu_;
  std::map<EnvironmentId, EnvData> envs_;
  std::vector<AuthEvent> log_;
  EventId next_event_id_ = 1;
  std::unique_ptr<EventLogWriter> writer_;
  std::atomic<std::uint64_t> base_profile_fetches_{0};
};

// Registry of isolated spheres. Spheres are added before use and never
// removed, so references handed out stay valid.
class Store {
 public:
  SphereStore& add_sphere(SphereCatalog catalog) {
    auto id = catalog.sphere_id;
    if (spheres_.contains(id)) {
      throw Error(ErrorCode::InvalidConfig, "duplicate sphere '" + id.str() + "'");
    }
    auto [it, _] = spheres_.emplace(id, std::make_unique<SphereStore>(std::move(catalog)));
    return *it->second;
  }

  SphereStore& sphere(const SphereId& id) {
    auto it = spheres_.find(id);
    if (it == spheres_.end()) throw Error(ErrorCode::NotFound, "unknown sphere '" + id.str() + "'");
    return *it->second;
  }
  const SphereStore& sphere(const SphereId& id) const {
    return const_cast<Store*>(this)->sphere(id);
  }

  bool contains(const SphereId& id) const { return spheres_.contains(id); }

  std::vector<SphereId> sphere_ids() const {
    std::vector<SphereId> ids;
    for (const auto& [id, _] : spheres_) ids.push_back(id);
    return ids;
  }

  std::vector<SphereSnapshot> snapshot() const {
    std::vector<SphereSnapshot> out;
    for (const auto& [_, s] : spheres_) out.push_back(s->snapshot());
    return out;
  }

 private:
  std::map<SphereId, std::unique_ptr<SphereStore>> spheres_;
};

}  // namespace pripro
