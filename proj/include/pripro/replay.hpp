#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pripro/catalog.hpp"
#include "pripro/event_log.hpp"
#include "pripro/service.hpp"
#include "pripro/snapshot.hpp"

namespace pripro {

// Feeds logged events, in order, through the same pipeline as live requests:
// each event advances virtual time to its timestamp (ticking first) and is
// then authenticated against its own sphere and environment.
inline void replay_events(AuthService& service, const std::vector<AuthEvent>& events) {
  std::optional<Timestamp> previous;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (previous && e.timestamp < *previous) {
      throw Error(ErrorCode::Parse, "event #" + std::to_string(i + 1) + " is out of time order");
    }
    previous = e.timestamp;
    try {
      service.tick(e.timestamp);
      service.authenticate_at(e.sphere_id, e.environment_id, e.user_device_id,
                              e.authenticator_device_id, e.action, e.timestamp);
    } catch (const Error& err) {
      throw Error(err.code(), "event #" + std::to_string(i + 1) + ": " + err.what());
    }
  }
}

// End of the innermost period holding each environment's last event; the
// latest of these is where a replay stops by default.
inline std::optional<Timestamp> default_replay_horizon(const Store& store,
                                                       const std::vector<AuthEvent>& events) {
  std::map<std::pair<SphereId, EnvironmentId>, Timestamp> last;
  for (const auto& e : events) last[{e.sphere_id, e.environment_id}] = e.timestamp;
  std::optional<Timestamp> horizon;
  for (const auto& [key, t] : last) {
    const auto& sphere = store.sphere(key.first);
    const auto kind = sphere.catalog().environment(key.second).innermost();
    const auto end = period_instance(kind, t, sphere.zone()).end;
    if (!horizon || end > *horizon) horizon = end;
  }
  return horizon;
}

struct ReplayResult {
  std::size_t events = 0;
  std::vector<SphereSnapshot> state;
  std::string digest;
  std::optional<Timestamp> horizon;
};

// Replays `events` into `store` and materializes everything that ended by
// `until` (or the default horizon). Returns the horizon used.
inline std::optional<Timestamp> replay_into(Store& store, const std::vector<AuthEvent>& events,
                                            std::optional<Timestamp> until = std::nullopt) {
  AuthService service(store, {});
  replay_events(service, events);
  auto horizon = until ? until : default_replay_horizon(store, events);
  if (horizon) service.tick(*horizon);
  return horizon;
}

inline ReplayResult replay(const std::vector<AuthEvent>& events, std::vector<SphereCatalog> catalogs,
                           std::optional<Timestamp> until = std::nullopt) {
  Store store;
  for (auto& c : catalogs) store.add_sphere(std::move(c));
  ReplayResult result;
  result.events = events.size();
  result.horizon = replay_into(store, events, until);
  result.state = store.snapshot();
  result.digest = state_digest(result.state);
  return result;
}

// Where a service keeps the event log of one sphere.
inline std::filesystem::path sphere_log_path(const std::filesystem::path& data_dir, const SphereId& sphere) {
  return data_dir / (sphere.str() + ".events.jsonl");
}

// Concatenates several logs into one time-ordered stream. Events sharing a
// timestamp keep their order of appearance.
inline std::vector<AuthEvent> read_event_logs(const std::vector<std::filesystem::path>& paths) {
  std::vector<AuthEvent> all;
  for (const auto& p : paths) {
    auto part = read_event_log(p);
    all.insert(all.end(), part.begin(), part.end());
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const AuthEvent& a, const AuthEvent& b) { return a.timestamp < b.timestamp; });
  return all;
}

}  // namespace pripro
