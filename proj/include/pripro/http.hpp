#pragma once

#include <string>

#include "httplib.h"
#include "json.hpp"

#include "pripro/errors.hpp"
#include "pripro/service.hpp"
#include "pripro/wire.hpp"

namespace pripro {

inline int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BadRequest:
    case ErrorCode::Parse: return 400;
    case ErrorCode::UnknownDevice: return 403;
    case ErrorCode::UnknownAuthenticator:
    case ErrorCode::NotFound: return 404;
    case ErrorCode::LateEvent:
    case ErrorCode::Conflict: return 409;
    default: return 500;
  }
}

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, const Error& e) {
  send_json(res, http_status(e.code()), error_body(e.code(), e.what()));
}

}  // namespace detail

// Registers the REST surface on `server`:
//
//   POST /v1/authenticate  AuthRequest -> AuthResponse
//   GET  /v1/health        liveness
//   POST /v1/tick          {"now": RFC 3339}; only when `tick_clock` is given
//
// Requests are stamped with `clock`. When the tick endpoint is enabled it
// moves `tick_clock` forward (never backward) and materializes ended periods.
inline void install_routes(httplib::Server& server, AuthService& service, const Clock& clock,
                           VirtualClock* tick_clock = nullptr) {
  server.Post("/v1/authenticate", [&service, &clock](const httplib::Request& req, httplib::Response& res) {
    try {
      auto parsed = parse_auth_request(req.body);
      auto resp = service.handle_authenticate(parsed, clock.now());
      detail::send_json(res, 200, auth_response_to_json(resp));
    } catch (const Error& e) {
      detail::send_error(res, e);
    }
  });

  server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    detail::send_json(res, 200, {{"status", "ok"}});
  });

  if (tick_clock) {
    server.Post("/v1/tick", [&service, tick_clock](const httplib::Request& req, httplib::Response& res) {
      try {
        Timestamp now = tick_clock->now();
        if (!req.body.empty()) {
          nlohmann::json body;
          try {
            body = nlohmann::json::parse(req.body);
          } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::BadRequest, e.what());
          }
          if (body.contains("now")) {
            if (!body["now"].is_string()) throw Error(ErrorCode::BadRequest, "'now' must be a string");
            now = std::max(now, parse_rfc3339(body["now"].get<std::string>()));
          }
        }
        tick_clock->set(now);
        auto summary = service.tick(now);
        auto j = tick_summary_to_json(summary);
        j["now"] = format_rfc3339(now);
        detail::send_json(res, 200, j);
      } catch (const Error& e) {
        detail::send_error(res, e);
      }
    });
  }
}

}  // namespace pripro
