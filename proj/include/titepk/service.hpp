#pragma once

// Session-scoped trial conduct over JSON: records, decision tables, what-if
// queries and exposure curves. The HTTP binding is a thin router over
// SessionService, which is also usable directly.

#include "titepk/io.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

namespace httplib {
class Server;
}

namespace titepk {

struct Response {
  int status = 200;
  json body;
};

class SessionService {
 public:
  // With a store directory every session is persisted as an append-only log
  // `<id>.jsonl` and reloaded on construction.
  explicit SessionService(std::optional<std::filesystem::path> store = std::nullopt);
  ~SessionService();

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  Response create_session(const json& body);
  Response get_decision(const std::string& id) const;
  // Body is a record, or {"record": {...}, "revision": n}. A supplied
  // revision must match the current one.
  Response post_record(const std::string& id, const json& body);
  Response delete_record(const std::string& id, std::size_t index,
                         std::optional<std::uint64_t> revision);
  // Body is {"records": [...]} or a bare array.
  Response what_if(const std::string& id, const json& body) const;
  Response exposure(const std::string& id, const std::map<std::string, std::string>& query) const;

  std::size_t session_count() const;

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;

  std::optional<std::filesystem::path> store_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

// Registers the HTTP routes on `server`.
void mount_routes(httplib::Server& server, SessionService& service);

}  // namespace titepk
