// A week in the lab: one user keeps perfect hours, another leaves at 13:00.
// Prints the response each of them gets on the first swipe of every day.

#include <iostream>

#include "pripro/pripro.hpp"

using namespace pripro;

int main() {
  SphereCatalog catalog;
  catalog.sphere_id = SphereId("university");
  catalog.timezone = "America/Sao_Paulo";

  EnvironmentRules lab;
  lab.environment_id = EnvironmentId("lab");
  lab.name = "Laboratory";
  lab.valence_periods = {PeriodKind::Day, PeriodKind::Week};
  catalog.add_environment(lab);
  catalog.grant(lab.environment_id, ProfileLevel::Basic, {{"door", "lights"}, {"wifi"}});
  catalog.grant(lab.environment_id, ProfileLevel::Administrator, {{"door", "lights", "projector"}, {"wifi", "camera"}});
  catalog.add_user({DeviceId("tag-ana"), UserId("ana"), ProfileLevel::Basic});
  catalog.add_user({DeviceId("tag-rui"), UserId("rui"), ProfileLevel::Basic});

  Store store;
  auto& sphere = store.add_sphere(catalog);
  const DeviceId door("door-lab");
  AuthService service(store, {{door, {catalog.sphere_id, lab.environment_id}}});

  const auto& zone = sphere.zone();
  for (auto day = absl::CivilDay(2018, 1, 1); day < absl::CivilDay(2018, 1, 8); ++day) {
    struct Swipe {
      const char* device;
      int hour;
      AuthAction action;
    };
    const Swipe swipes[] = {
        {"tag-ana", 8, AuthAction::Enter}, {"tag-rui", 8, AuthAction::Enter},
        {"tag-ana", 12, AuthAction::Exit}, {"tag-rui", 13, AuthAction::Exit},
        {"tag-ana", 14, AuthAction::Enter}, {"tag-ana", 18, AuthAction::Exit},
    };
    for (const auto& s : swipes) {
      const auto now = zone.at(absl::CivilSecond(day) + s.hour * 3600);
      service.tick(now);
      auto resp = service.handle_authenticate({DeviceId(s.device), s.action, door}, now);
      if (s.hour == 8) {
        std::cout << format_date(day) << ' ' << resp.user_id << ": " << auth_response_to_json(resp).dump()
                  << '\n';
      }
    }
  }

  service.tick(zone.start_of(absl::CivilDay(2018, 1, 8)));
  for (const auto& r : sphere.frequencies(lab.environment_id)) {
    if (r.period_kind == PeriodKind::Week) {
      std::cout << "week of " << format_rfc3339(r.period_start) << ' ' << r.user_id << ": " << r.frequency.to_double()
                << '\n';
    }
  }
}
