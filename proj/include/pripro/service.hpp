#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pripro/errors.hpp"
#include "pripro/evolution.hpp"
#include "pripro/store.hpp"
#include "pripro/wire.hpp"

namespace pripro {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override {
    return std::chrono::floor<Seconds>(std::chrono::system_clock::now());
  }
};

// Manually driven clock shared by tests, the simulator and /v1/tick.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(Timestamp start = Timestamp{}) : now_(start.time_since_epoch().count()) {}

  Timestamp now() const override { return from_unix(now_.load()); }
  void set(Timestamp t) { now_.store(t.time_since_epoch().count()); }
  void advance(Seconds d) { now_.fetch_add(d.count()); }

 private:
  std::atomic<std::int64_t> now_;
};

struct AuthenticatorBinding {
  SphereId sphere_id;
  EnvironmentId environment_id;
};

struct TickOutcome {
  SphereId sphere_id;
  EnvironmentId environment_id;
  std::size_t periods = 0;
  std::size_t records = 0;
  std::optional<std::string> error;
};

struct TickSummary {
  std::vector<TickOutcome> environments;

  std::size_t total_periods() const {
    std::size_t n = 0;
    for (const auto& e : environments) n += e.periods;
    return n;
  }
};

// The device-facing pipeline: resolve the authenticator, bootstrap or load
// the user's profile, evaluate it once per innermost period, commit the
// decision, append the event, answer with profile and grants.
class AuthService {
 public:
  AuthService(Store& store, std::map<DeviceId, AuthenticatorBinding> authenticators)
      : store_(store), authenticators_(std::move(authenticators)) {
    for (const auto& [dev, b] : authenticators_) {
      store_.sphere(b.sphere_id).catalog().environment(b.environment_id);
    }
  }

  Store& store() noexcept { return store_; }
  const Store& store() const noexcept { return store_; }

  const AuthenticatorBinding& resolve(const DeviceId& authenticator) const {
    auto it = authenticators_.find(authenticator);
    if (it == authenticators_.end()) {
      throw Error(ErrorCode::UnknownAuthenticator, "unknown authenticator '" + authenticator.str() + "'");
    }
    return it->second;
  }

  AuthResponse handle_authenticate(const AuthRequest& req, Timestamp now) {
    const auto& binding = resolve(req.authenticator_device_id);
    return authenticate_at(binding.sphere_id, binding.environment_id, req.user_device_id,
                           req.authenticator_device_id, req.action, now);
  }

  // Same pipeline with the environment already resolved; replay enters here
  // because logged events carry their sphere and environment.
  AuthResponse authenticate_at(const SphereId& sphere_id, const EnvironmentId& env_id,
                               const DeviceId& user_device, const DeviceId& authenticator,
                               AuthAction action, Timestamp now) {
    auto& sphere = store_.sphere(sphere_id);
    const auto& rules = sphere.catalog().environment(env_id);

    std::lock_guard guard(user_mutex(sphere_id, env_id, user_device));
    sphere.check_not_late(env_id, now);

    auto boot = sphere.lookup_or_bootstrap(env_id, user_device, now);
    ProfileState state = std::move(boot.state);
    EvolutionDecision decision = state.history.back().decision;

    if (!boot.bootstrapped) {
      for (int attempt = 0;; ++attempt) {
        if (now <= state.history.back().at) {
          // Same-second duplicate: report the committed state unchanged.
          decision = {state.level, state.level, DecisionReason::TooSoon, std::nullopt};
          break;
        }
        std::optional<Rational> latest;
        if (auto rec = sphere.latest_frequency(env_id, state.user_id)) latest = rec->frequency;
        decision = evolve(state.level, state.last_update, now, latest, rules, sphere.zone());
        try {
          state = sphere.commit_decision(state, decision, now);
          break;
        } catch (const Error& e) {
          if (!e.retryable() || attempt >= kMaxCommitAttempts) throw;
          state = sphere.find_profile(env_id, state.user_id).value();
        }
      }
    }

    sphere.append_event(AuthEvent{0, sphere_id, env_id, user_device, authenticator, action, now});

    auto grant = sphere.catalog().grants(env_id, state.level);
    AuthResponse resp;
    resp.user_id = state.user_id;
    resp.profile = state.level;
    resp.sphere_id = sphere_id;
    resp.environment_id = env_id;
    resp.environment_name = rules.display_name();
    resp.resources = std::move(grant.resources);
    resp.services = std::move(grant.services);
    resp.reason = decision.reason;
    if (decision.frequency_used) resp.frequency_used = decision.frequency_used->to_double();
    resp.timestamp = now;
    return resp;
  }

  // Materializes, in order, every innermost instance that ended by `now` and
  // lies beyond the environment's watermark. An environment starts at the
  // instance holding its first activity.
  TickSummary tick(Timestamp now) {
    std::lock_guard guard(tick_mu_);
    TickSummary summary;
    for (const auto& sphere_id : store_.sphere_ids()) {
      auto& sphere = store_.sphere(sphere_id);
      for (const auto& [env_id, rules] : sphere.catalog().environments) {
        TickOutcome outcome{sphere_id, env_id, 0, 0, std::nullopt};
        try {
          std::optional<PeriodInstance> next;
          if (auto wm = sphere.watermark(env_id)) {
            next = next_instance(*wm, sphere.zone());
          } else if (auto first = sphere.first_activity(env_id)) {
            next = period_instance(rules.innermost(), *first, sphere.zone());
          }
          while (next && next->end <= now) {
            outcome.records += sphere.materialize_period(env_id, *next, now);
            ++outcome.periods;
            next = next_instance(*next, sphere.zone());
          }
        } catch (const Error& e) {
          outcome.error = e.what();
        }
        summary.environments.push_back(std::move(outcome));
      }
    }
    return summary;
  }

 private:
  static constexpr int kMaxCommitAttempts = 16;
  static constexpr std::size_t kStripes = 64;

  std::mutex& user_mutex(const SphereId& s, const EnvironmentId& e, const DeviceId& d) {
    const auto h = std::hash<std::string>{}(s.str() + '\x1f' + e.str() + '\x1f' + d.str());
    return stripes_[h % kStripes];
  }

  Store& store_;
  std::map<DeviceId, AuthenticatorBinding> authenticators_;
  std::array<std::mutex, kStripes> stripes_;
  std::mutex tick_mu_;
};

inline nlohmann::ordered_json tick_summary_to_json(const TickSummary& s) {
  nlohmann::ordered_json envs = nlohmann::ordered_json::array();
  for (const auto& e : s.environments) {
    nlohmann::ordered_json j = {{"sphere_id", e.sphere_id.str()},
                                {"environment_id", e.environment_id.str()},
                                {"periods", e.periods},
                                {"records", e.records}};
    if (e.error) j["error"] = *e.error;
    envs.push_back(std::move(j));
  }
  return {{"materialized_periods", s.total_periods()}, {"environments", envs}};
}

}  // namespace pripro
