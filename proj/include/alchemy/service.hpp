#pragma once

// Session service for human play over HTTP with JSON bodies.
//
//   POST   /sessions                 {"seed":5,"hints":true}      -> 201 {"id", "state"}
//   GET    /sessions/{id}/state                                  -> 200 state
//   POST   /sessions/{id}/action     {"action":"P 0 3"}           -> 200 {"reward", "outcome", "state", ...}
//   GET    /sessions/{id}/hint                                   -> 200 {"entropy", "support_size"}
//   GET    /sessions/{id}/summary                                -> 200 {"score", "trial_scores", "replayed_score"}
//   GET    /sessions/{id}/log                                    -> 200 episode log (JSON lines)
//   DELETE /sessions/{id}                                        -> 204
//
// Actions may also be given as {"kind":"potion","stone":0,"potion":3},
// {"kind":"deposit","stone":1} or {"kind":"no_op"}. Errors are
// {"error": reason} with 400 for malformed bodies, 404 for unknown or
// expired sessions and 409 for actions the game state does not allow
// (illegal action, finished episode, hints not enabled, summary before the
// end).

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "alchemy/env.hpp"

namespace httplib {
class Server;
}

namespace alchemy {

struct ServiceOptions {
  EnvConfig env;
  /// Sessions untouched for this long are dropped.
  std::chrono::seconds ttl{3600};
  /// Seed of sessions created without one: derive_seed(base_seed, n) for the
  /// n-th such session.
  std::uint64_t base_seed = 0;
  /// Logs of finished sessions are written here when non-empty.
  std::string log_dir;
};

struct ServiceResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

class SessionService {
 public:
  using Clock = std::chrono::steady_clock;

  explicit SessionService(ServiceOptions options, std::function<Clock::time_point()> now = Clock::now);
  ~SessionService();

  /// Routes one request; never throws.
  ServiceResponse handle(std::string_view method, std::string_view path, std::string_view body);
  /// Installs the routes on an httplib server.
  void attach(httplib::Server& server);

  std::size_t live_sessions();
  /// Drops expired sessions; returns how many were dropped.
  std::size_t reap();

 private:
  struct Session;

  ServiceResponse create(std::string_view body);
  ServiceResponse on_session(std::string_view method, std::string_view id, std::string_view verb, std::string_view body);
  std::shared_ptr<Session> find(std::string_view id);
  std::string new_id();

  ServiceOptions options_;
  std::function<Clock::time_point()> now_;
  std::shared_mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t created_ = 0;
};

/// Blocks serving on host:port until the server is stopped.
void serve(SessionService& service, const std::string& host, int port);

}  // namespace alchemy
