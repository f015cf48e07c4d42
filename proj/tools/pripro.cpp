// pripro: operator tool for the profile-evolution service.

#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include "CLI11.hpp"
#include "pripro/pripro.hpp"

namespace fs = std::filesystem;
using namespace pripro;

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

// A usage problem detected after CLI11 parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text_file(out_path, text);
  }
}

struct StateSource {
  std::string config;
  std::vector<std::string> catalogs;
  std::vector<std::string> logs;
  std::string until;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--catalog", catalogs, "Sphere catalog file (repeatable)");
    cmd->add_option("--log", logs, "Event log file (repeatable)");
    cmd->add_option("--until", until, "Materialize periods ending by this RFC 3339 instant");
  }

  // Either explicit catalogs and logs, or the catalogs and data directory of
  // a service configuration.
  std::unique_ptr<Store> load() const {
    std::vector<fs::path> catalog_paths(catalogs.begin(), catalogs.end());
    std::vector<fs::path> log_paths(logs.begin(), logs.end());
    if (catalog_paths.empty()) {
      auto path = config_path(config);
      if (!path) throw UsageError("need --catalog or a service config (--config or PRIPRO_CONFIG)");
      auto cfg = load_service_config(*path);
      catalog_paths = cfg.catalogs;
      if (cfg.data_dir && log_paths.empty()) {
        for (const auto& c : catalog_paths) {
          auto log = sphere_log_path(*cfg.data_dir, load_catalog(c).sphere_id);
          if (fs::exists(log)) log_paths.push_back(log);
        }
      }
    }
    auto store = std::make_unique<Store>();
    for (const auto& c : catalog_paths) store->add_sphere(load_catalog(c));
    std::optional<Timestamp> horizon;
    if (!until.empty()) horizon = parse_rfc3339(until);
    replay_into(*store, read_event_logs(log_paths), horizon);
    return store;
  }
};

int run_serve(const std::string& config_flag, const std::string& listen_flag) {
  auto path = config_path(config_flag);
  if (!path) throw UsageError("serve needs --config or PRIPRO_CONFIG");
  auto cfg = load_service_config(*path);
  if (!listen_flag.empty()) cfg.listen = listen_flag;
  const auto [host, port] = parse_listen_address(cfg.listen);

  Store store;
  for (const auto& c : cfg.catalogs) store.add_sphere(load_catalog(c));
  AuthService service(store, cfg.authenticators);

  if (cfg.data_dir) {
    std::vector<fs::path> logs;
    for (const auto& id : store.sphere_ids()) {
      auto log = sphere_log_path(*cfg.data_dir, id);
      if (fs::exists(log)) logs.push_back(log);
    }
    auto events = read_event_logs(logs);
    replay_events(service, events);
    std::cerr << "replayed " << events.size() << " events\n";
    for (const auto& id : store.sphere_ids()) store.sphere(id).attach_log(sphere_log_path(*cfg.data_dir, id));
  }

  SystemClock system_clock;
  std::unique_ptr<VirtualClock> virtual_clock;
  if (cfg.virtual_clock_start || cfg.enable_tick_endpoint) {
    virtual_clock = std::make_unique<VirtualClock>(cfg.virtual_clock_start.value_or(system_clock.now()));
  }
  const Clock& clock = virtual_clock ? static_cast<const Clock&>(*virtual_clock) : system_clock;

  httplib::Server server;
  install_routes(server, service, clock, cfg.enable_tick_endpoint ? virtual_clock.get() : nullptr);

  // Signals are taken synchronously by a dedicated thread.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });

  std::atomic<bool> running{true};
  std::thread ticker;
  if (!virtual_clock) {
    ticker = std::thread([&] {
      int elapsed = 0;
      while (running) {
        std::this_thread::sleep_for(std::chrono::seconds(1));
        if (++elapsed < cfg.tick_interval_seconds) continue;
        elapsed = 0;
        auto summary = service.tick(clock.now());
        for (const auto& e : summary.environments) {
          if (e.error) std::cerr << "tick " << e.sphere_id << "/" << e.environment_id << ": " << *e.error << "\n";
        }
      }
    });
  }

  std::cerr << "listening on " << host << ":" << port << "\n";
  const bool ok = server.listen(host, port);
  running = false;
  if (ticker.joinable()) ticker.join();
  if (!ok) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    throw Error(ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
  }
  waiter.join();

  if (cfg.data_dir) save_snapshot(*cfg.data_dir / "snapshot.json", store.snapshot());
  return 0;
}

EnvironmentRules rules_from_flags(const std::string& id, const std::string& name, double hours,
                                  const std::vector<std::string>& periods, double block, double reduce,
                                  double evolve, bool exclusive, const std::string& base) {
  EnvironmentRules r;
  r.environment_id = EnvironmentId(id);
  r.name = name;
  r.expected_hours = Rational::from_double(hours, 3600);
  r.valence_periods.clear();
  for (const auto& p : periods) r.valence_periods.push_back(parse_period_kind(p));
  r.block_below = block;
  r.reduce_below = reduce;
  r.evolve_above = evolve;
  r.evolve_inclusive = !exclusive;
  r.base_profile = parse_profile_level(base);
  return r;
}

SphereCatalog open_catalog(const std::string& path, const std::string& sphere, const std::string& tz) {
  if (fs::exists(path)) return load_catalog(path);
  if (sphere.empty()) throw UsageError(path + " does not exist; pass --sphere to create it");
  SphereCatalog c;
  c.sphere_id = SphereId(sphere);
  c.timezone = tz;
  Zone::load(tz);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Profile-evolution access control: service, simulator and operator tools"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config;
  app.add_option("--config", config, std::string("Service config file (default: $") + kConfigEnvVar + ")");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP authentication service");
  std::string listen;
  serve->add_option("--listen", listen, "host:port to bind, overrides the config");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run a seeded population simulation");
  std::string sim_config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
  simulate->add_option("--sim-config", sim_config, "Simulation config file (default: built-in January 2018 run)");
  simulate->add_option("--seed", seed, "Override the master seed");
  simulate->add_option("--out", out, "Write the report here instead of stdout");
  simulate->add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "json"}));

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "Replay event logs and print a state digest");
  StateSource replay_src;
  replay_src.add_to(replay_cmd);
  std::string snapshot_out;
  replay_cmd->add_option("--out", snapshot_out, "Write the final state snapshot here");

  // catalog-add-env
  auto* add_env = app.add_subcommand("catalog-add-env", "Add an environment to a sphere catalog");
  std::string catalog_path;
  std::string sphere;
  std::string timezone = "UTC";
  std::string env_id;
  std::string env_name;
  double hours = 8.0;
  std::vector<std::string> periods{"day"};
  double block = 0.55;
  double reduce = 0.75;
  double evolve = 0.95;
  bool exclusive = false;
  std::string base = "Guest";
  add_env->add_option("--catalog", catalog_path, "Catalog file")->required();
  add_env->add_option("--sphere", sphere, "Sphere id, when creating the catalog");
  add_env->add_option("--timezone", timezone, "IANA zone, when creating the catalog");
  add_env->add_option("--id", env_id, "Environment id")->required();
  add_env->add_option("--name", env_name, "Display name");
  add_env->add_option("--expected-hours", hours, "Expected hours per innermost period");
  add_env->add_option("--periods", periods, "Valence periods, finest first")->delimiter(',');
  add_env->add_option("--block-below", block);
  add_env->add_option("--reduce-below", reduce);
  add_env->add_option("--evolve-above", evolve);
  add_env->add_flag("--evolve-exclusive", exclusive, "Frequency exactly at the evolve threshold only maintains");
  add_env->add_option("--base", base, "Base profile for newcomers");

  // catalog-add-user
  auto* add_user = app.add_subcommand("catalog-add-user", "Register a user device in a sphere directory");
  std::string device;
  std::string user;
  std::string user_base;
  add_user->add_option("--catalog", catalog_path, "Catalog file")->required();
  add_user->add_option("--device", device, "User device id")->required();
  add_user->add_option("--user", user, "User id")->required();
  add_user->add_option("--base", user_base, "Base profile overriding the environment's");

  // query-profile / query-frequency
  std::string q_sphere;
  std::string q_env;
  std::string q_user;
  auto* query_profile = app.add_subcommand("query-profile", "Print a user's profile and history");
  StateSource profile_src;
  profile_src.add_to(query_profile);
  auto* query_frequency = app.add_subcommand("query-frequency", "Print a user's frequency records");
  StateSource frequency_src;
  frequency_src.add_to(query_frequency);
  std::string q_period;
  std::string q_date;
  for (auto* cmd : {query_profile, query_frequency}) {
    cmd->add_option("--sphere", q_sphere, "Sphere id")->required();
    cmd->add_option("--env", q_env, "Environment id")->required();
    cmd->add_option("--user", q_user, "User id")->required();
  }
  query_frequency->add_option("--period", q_period, "Only this period kind");
  query_frequency->add_option("--date", q_date, "Only the instance containing this date (YYYY-MM-DD)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*serve) return run_serve(config, listen);

    if (*simulate) {
      auto cfg = sim_config.empty() ? default_sim_config() : sim_config_from_json(read_json_file(sim_config));
      if (seed) cfg.seed = *seed;
      auto fmt = parse_report_format(format);
      emit(render_report(run_simulation(cfg), fmt), out);
      return 0;
    }

    if (*replay_cmd) {
      replay_src.config = config;
      auto store = replay_src.load();
      auto snap = store->snapshot();
      std::size_t events = 0;
      for (const auto& id : store->sphere_ids()) events += store->sphere(id).events().size();
      if (!snapshot_out.empty()) save_snapshot(snapshot_out, snap);
      nlohmann::ordered_json j = {{"events", events}, {"digest", state_digest(snap)}};
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    if (*add_env) {
      auto catalog = open_catalog(catalog_path, sphere, timezone);
      catalog.add_environment(
          rules_from_flags(env_id, env_name, hours, periods, block, reduce, evolve, exclusive, base));
      catalog.validate();
      save_catalog(catalog_path, catalog);
      return 0;
    }

    if (*add_user) {
      if (!fs::exists(catalog_path)) throw UsageError(catalog_path + " does not exist");
      auto catalog = load_catalog(catalog_path);
      DirectoryEntry entry{DeviceId(device), UserId(user), std::nullopt};
      if (!user_base.empty()) entry.base_profile = parse_profile_level(user_base);
      catalog.add_user(std::move(entry));
      save_catalog(catalog_path, catalog);
      return 0;
    }

    if (*query_profile || *query_frequency) {
      auto& src = *query_profile ? profile_src : frequency_src;
      src.config = config;
      auto store = src.load();
      const auto& sp = store->sphere(SphereId(q_sphere));
      const EnvironmentId env(q_env);
      sp.catalog().environment(env);
      const UserId uid(q_user);
      auto state = sp.find_profile(env, uid);
      if (!state) throw Error(ErrorCode::NotFound, "no profile for user '" + q_user + "' in " + q_sphere + "/" + q_env);

      if (*query_profile) {
        std::cout << profile_to_json(*state).dump(2) << "\n";
        return 0;
      }
      std::optional<PeriodKind> kind;
      if (!q_period.empty()) kind = parse_period_kind(q_period);
      std::optional<Timestamp> at;
      if (!q_date.empty()) at = sp.zone().start_of(parse_date(q_date));
      nlohmann::ordered_json records = nlohmann::ordered_json::array();
      for (const auto& r : sp.frequencies(env)) {
        if (r.user_id != uid) continue;
        if (kind && r.period_kind != *kind) continue;
        if (at && period_instance(r.period_kind, *at, sp.zone()).start != r.period_start) continue;
        records.push_back(frequency_to_json(r));
      }
      std::cout << records.dump(2) << "\n";
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}
