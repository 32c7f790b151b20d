#include "alchemy/service.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "alchemy/belief.hpp"
#include "alchemy/episode_log.hpp"
#include "httplib.h"
#include "json.hpp"

namespace alchemy {

using nlohmann::json;

struct SessionService::Session {
  std::mutex mutex;
  std::string id;
  SymbolicAlchemy env;
  EpisodeLog log;
  std::optional<BeliefState> belief;
  Clock::time_point touched;
  bool saved = false;

  explicit Session(const EnvConfig& config) : env(config) {}
};

namespace {

ServiceResponse reply(int status, const json& body) { return {status, body.dump(), "application/json"}; }
ServiceResponse error(int status, std::string reason) { return reply(status, json{{"error", std::move(reason)}}); }

json parse_body(std::string_view body) {
  if (body.find_first_not_of(" \t\r\n") == std::string_view::npos) return json::object();
  auto j = json::parse(body);
  if (!j.is_object()) throw std::invalid_argument("body must be a JSON object");
  return j;
}

Action action_from_json(const json& j) {
  if (j.contains("action")) return Action::parse(j.at("action").get<std::string>());
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "no_op") return Action::no_op();
  if (kind == "deposit") return Action::deposit(j.at("stone").get<int>());
  if (kind == "potion") return Action::use_potion(j.at("stone").get<int>(), j.at("potion").get<int>());
  throw std::invalid_argument("unknown action kind: " + kind);
}

json state_json(const std::string& id, const SymbolicAlchemy& env, const EpisodeLog& log) {
  const auto& trial = env.trial();
  json stones = json::array();
  const auto percepts = env.stone_percepts();
  for (std::size_t s = 0; s < percepts.size(); ++s) {
    json stone{{"slot", s}, {"present", percepts[s].has_value()}};
    if (percepts[s]) {
      const auto f = percepts[s]->features();
      stone["features"] = {f[0], f[1], f[2]};
      stone["reward"] = percepts[s]->reward();
    }
    stones.push_back(std::move(stone));
  }
  json potions = json::array();
  const auto colors = env.potion_colors();
  for (std::size_t p = 0; p < colors.size(); ++p) {
    json potion{{"slot", p}, {"present", colors[p].has_value()}};
    if (colors[p]) potion["color"] = std::string(color_name(*colors[p]));
    potions.push_back(std::move(potion));
  }
  return {{"id", id},
          {"seed", log.header.seed},
          {"hints", log.header.hints},
          {"trial", trial.trial_index},
          {"trials", env.config().trials},
          {"step", trial.step},
          {"steps_left", env.episode_over() ? 0 : env.steps_remaining()},
          {"trial_reward", trial.deposited_reward},
          {"score", env.score()},
          {"finished", env.episode_over()},
          {"stones", std::move(stones)},
          {"potions", std::move(potions)}};
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  while (!path.empty()) {
    const auto start = path.find_first_not_of('/');
    if (start == std::string_view::npos) break;
    path.remove_prefix(start);
    const auto end = path.find('/');
    parts.push_back(path.substr(0, end));
    if (end == std::string_view::npos) break;
    path.remove_prefix(end);
  }
  return parts;
}

}  // namespace

SessionService::SessionService(ServiceOptions options, std::function<Clock::time_point()> now)
    : options_(std::move(options)), now_(std::move(now)) {
  options_.env.validate();
}

SessionService::~SessionService() = default;

std::string SessionService::new_id() {
  static thread_local std::mt19937_64 gen{std::random_device{}()};
  std::ostringstream out;
  out << std::hex << gen() << gen();
  return out.str();
}

std::size_t SessionService::live_sessions() {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

std::size_t SessionService::reap() {
  const auto now = now_();
  std::unique_lock lock(mutex_);
  return std::erase_if(sessions_, [&](const auto& kv) {
    std::lock_guard session_lock(kv.second->mutex);
    return now - kv.second->touched > options_.ttl;
  });
}

std::shared_ptr<SessionService::Session> SessionService::find(std::string_view id) {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(std::string(id));
  return it == sessions_.end() ? nullptr : it->second;
}

ServiceResponse SessionService::handle(std::string_view method, std::string_view path, std::string_view body) {
  try {
    reap();
    const auto parts = split_path(path);
    if (parts.empty() || parts[0] != "sessions") return error(404, "no such endpoint");
    if (parts.size() == 1) {
      if (method != "POST") return error(405, "use POST to create a session");
      return create(body);
    }
    if (parts.size() > 3) return error(404, "no such endpoint");
    return on_session(method, parts[1], parts.size() == 3 ? parts[2] : std::string_view{}, body);
  } catch (const json::exception& e) {
    return error(400, std::string("malformed request: ") + e.what());
  } catch (const std::invalid_argument& e) {
    return error(400, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

ServiceResponse SessionService::create(std::string_view body) {
  const auto j = parse_body(body);
  std::uint64_t seed = 0;
  {
    std::unique_lock lock(mutex_);
    seed = derive_seed(options_.base_seed, created_++);
  }
  if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
  const bool hints = j.value("hints", false);

  auto session = std::make_shared<Session>(options_.env);
  session->id = new_id();
  session->env.reset(seed);
  session->log.header = {seed, options_.env, session->env.chemistry().index, "human", hints};
  if (hints) session->belief = init_belief(session->env.present_stone_percepts());
  session->touched = now_();
  json out{{"id", session->id}, {"state", state_json(session->id, session->env, session->log)}};
  {
    std::unique_lock lock(mutex_);
    sessions_.emplace(session->id, session);
  }
  return reply(201, out);
}

ServiceResponse SessionService::on_session(std::string_view method, std::string_view id, std::string_view verb,
                                           std::string_view body) {
  auto session = find(id);
  if (!session) return error(404, "unknown or expired session");
  if (verb.empty()) {
    if (method != "DELETE") return error(405, "use DELETE on a session");
    std::unique_lock lock(mutex_);
    sessions_.erase(std::string(id));
    return {204, "", "application/json"};
  }
  std::lock_guard lock(session->mutex);
  session->touched = now_();
  auto& env = session->env;
  auto& log = session->log;

  if (verb == "state") {
    if (method != "GET") return error(405, "use GET");
    return reply(200, state_json(session->id, env, log));
  }
  if (verb == "hint") {
    if (method != "GET") return error(405, "use GET");
    if (!session->belief) return error(409, "hints are not enabled for this session");
    return reply(200, json{{"entropy", session->belief->entropy()}, {"support_size", session->belief->support_size()}});
  }
  if (verb == "summary" || verb == "log") {
    if (method != "GET") return error(405, "use GET");
    if (!env.episode_over()) return error(409, "episode is not finished");
    if (verb == "log") {
      std::ostringstream out;
      write_log(out, log);
      return {200, out.str(), "application/x-ndjson"};
    }
    const auto report = replay(log);
    return reply(200, json{{"score", log.score},
                           {"trial_scores", log.trial_scores},
                           {"steps", log.steps.size()},
                           {"hints", log.header.hints},
                           {"replayed_score", report.replayed_score},
                           {"consistent", report.ok && report.replayed_score == log.score}});
  }
  if (verb == "action") {
    if (method != "POST") return error(405, "use POST");
    const auto action = action_from_json(parse_body(body));
    if (env.episode_over()) return error(409, "episode is finished");
    if (!env.is_legal(action)) return error(409, "illegal action " + action.to_string() + ": slot empty or out of range");
    StepRecord rec;
    rec.trial = env.trial().trial_index;
    rec.step = env.trial().step;
    rec.observation_digest = observation_digest(env.observe());
    rec.action = action;
    const auto r = env.step(action);
    rec.outcome = r.info.outcome;
    rec.invalid = r.info.invalid_action;
    rec.reward = r.reward;
    if (session->belief) {
      if (action.kind == Action::Kind::use_potion)
        session->belief = update_belief(*session->belief, r.info.before, r.info.color, r.info.after);
      rec.belief = BeliefSnapshot::of(*session->belief);
      if (r.trial_ended && !r.episode_ended) {
        auto next = session->belief->observe_stones(env.present_stone_percepts());
        if (next.empty()) throw InconsistentEvidence("new stones contradict the belief");
        session->belief = std::move(next);
      }
    }
    log.steps.push_back(rec);
    if (r.episode_ended) {
      log.score = env.score();
      log.trial_scores = env.trial_scores();
      if (!options_.log_dir.empty() && !session->saved) {
        std::filesystem::create_directories(options_.log_dir);
        const auto path = std::filesystem::path(options_.log_dir) / ("session-" + session->id + ".jsonl");
        std::ofstream out(path);
        write_log(out, log);
        if (!out) throw std::runtime_error("cannot write session log " + path.string());
        session->saved = true;
      }
    }
    return reply(200, json{{"reward", r.reward},
                           {"outcome", outcome_name(r.info.outcome)},
                           {"trial_ended", r.trial_ended},
                           {"episode_ended", r.episode_ended},
                           {"state", state_json(session->id, env, log)}});
  }
  return error(404, "no such endpoint");
}

void SessionService::attach(httplib::Server& server) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const auto r = handle(req.method, req.path, req.body);
    res.status = r.status;
    if (!r.body.empty()) res.set_content(r.body, r.content_type.c_str());
  };
  server.Get(R"(/sessions.*)", route);
  server.Post(R"(/sessions.*)", route);
  server.Delete(R"(/sessions.*)", route);
}

void serve(SessionService& service, const std::string& host, int port) {
  httplib::Server server;
  service.attach(server);
  if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace alchemy
