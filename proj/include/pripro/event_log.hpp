#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "pripro/attendance.hpp"
#include "pripro/catalog.hpp"
#include "pripro/errors.hpp"

namespace pripro {

// One line of the event log, fields in wire order.
inline nlohmann::ordered_json event_to_json(const AuthEvent& e) {
  return {{"event_id", e.event_id},
          {"sphere_id", e.sphere_id.str()},
          {"environment_id", e.environment_id.str()},
          {"user_device_id", e.user_device_id.str()},
          {"authenticator_device_id", e.authenticator_device_id.str()},
          {"action", std::string(to_string(e.action))},
          {"timestamp", format_rfc3339(e.timestamp)}};
}

inline AuthEvent event_from_json(const nlohmann::json& j) {
  using detail::field;
  if (!j.is_object()) throw Error(ErrorCode::Parse, "event is not an object");
  AuthEvent e;
  e.event_id = detail::field_or<EventId>(j, "event_id", 0);
  e.sphere_id = SphereId(field<std::string>(j, "sphere_id"));
  e.environment_id = EnvironmentId(field<std::string>(j, "environment_id"));
  e.user_device_id = DeviceId(field<std::string>(j, "user_device_id"));
  e.authenticator_device_id = DeviceId(field<std::string>(j, "authenticator_device_id"));
  auto action = field<std::string>(j, "action");
  auto parsed = try_parse_action(action);
  if (!parsed) throw Error(ErrorCode::Parse, "unknown action '" + action + "'");
  e.action = *parsed;
  e.timestamp = parse_rfc3339(field<std::string>(j, "timestamp"));
  return e;
}

// Reads a JSON-lines event log. Blank lines are skipped; any malformed line
// raises ErrorCode::Parse naming the file and line number.
inline std::vector<AuthEvent> read_event_log(std::istream& in, const std::string& source) {
  std::vector<AuthEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      events.push_back(event_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Parse, source + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::Parse, source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return events;
}

inline std::vector<AuthEvent> read_event_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_event_log(in, path.string());
}

inline void write_event_log(std::ostream& out, const std::vector<AuthEvent>& events) {
  for (const auto& e : events) out << event_to_json(e).dump() << '\n';
}

// Append-only writer; every line is flushed before append() returns.
class EventLogWriter {
 public:
  explicit EventLogWriter(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::app);
    if (!out_) throw Error(ErrorCode::Io, "cannot open event log " + path.string());
  }

  void append(const AuthEvent& e) {
    std::lock_guard lock(mu_);
    out_ << event_to_json(e).dump() << '\n';
    out_.flush();
    if (!out_) throw Error(ErrorCode::Io, "write to " + path_.string() + " failed");
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
  std::ofstream out_;
};

}  // namespace pripro
