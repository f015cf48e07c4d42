#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pripro {

enum class ErrorCode {
  InvalidArgument,
  InvalidRules,
  InvalidConfig,
  NotFound,
  UnknownDevice,
  UnknownAuthenticator,
  LateEvent,
  TooEarly,
  Conflict,
  BadRequest,
  Parse,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::InvalidRules: return "invalid_rules";
    case ErrorCode::InvalidConfig: return "invalid_config";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::UnknownDevice: return "unknown_device";
    case ErrorCode::UnknownAuthenticator: return "unknown_authenticator";
    case ErrorCode::LateEvent: return "late_event";
    case ErrorCode::TooEarly: return "too_early";
    case ErrorCode::Conflict: return "conflict";
    case ErrorCode::BadRequest: return "bad_request";
    case ErrorCode::Parse: return "parse_error";
    case ErrorCode::Io: return "io_error";
  }
  return "unknown";
}

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Conflicts come from a lost compare-and-commit race and may be retried.
  bool retryable() const noexcept { return code_ == ErrorCode::Conflict; }

 private:
  ErrorCode code_;
};

}  // namespace pripro
