#include "alchemy/episode_log.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace alchemy {

using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

json config_json(const EnvConfig& c) {
  return {{"trials", c.trials},       {"stones", c.stones},
          {"potions", c.potions},     {"max_steps", c.max_steps},
          {"time", c.include_time},   {"ground_truth", c.augment_ground_truth},
          {"belief", c.augment_belief}};
}

EnvConfig config_from_json(const json& j) {
  EnvConfig c;
  c.trials = j.at("trials").get<int>();
  c.stones = j.at("stones").get<int>();
  c.potions = j.at("potions").get<int>();
  c.max_steps = j.at("max_steps").get<int>();
  c.include_time = j.at("time").get<bool>();
  c.augment_ground_truth = j.at("ground_truth").get<bool>();
  c.augment_belief = j.at("belief").get<bool>();
  c.validate();
  return c;
}

}  // namespace

BeliefSnapshot BeliefSnapshot::of(const BeliefState& belief, bool with_marginals) {
  BeliefSnapshot s{belief.fingerprint(), belief.support_size(), belief.entropy(), std::nullopt};
  if (with_marginals) s.marginals = belief.marginals();
  return s;
}

std::uint64_t observation_digest(const Observation& obs) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (Eigen::Index i = 0; i < obs.size(); ++i) {
    double v = obs[i];
    unsigned char bytes[sizeof v];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

void write_log(std::ostream& out, const EpisodeLog& log) {
  const auto& h = log.header;
  out << json{{"type", "header"},     {"seed", h.seed},   {"policy", h.policy}, {"chemistry", h.chemistry},
              {"hints", h.hints},     {"config", config_json(h.config)}}
             .dump()
      << '\n';
  for (const auto& s : log.steps) {
    json j{{"type", "step"},
           {"trial", s.trial},
           {"step", s.step},
           {"obs", hex64(s.observation_digest)},
           {"action", s.action.to_string()},
           {"outcome", outcome_name(s.outcome)},
           {"reward", s.reward}};
    if (s.invalid) j["invalid"] = true;
    if (s.belief) {
      json b{{"fp", hex64(s.belief->fingerprint)}, {"n", s.belief->support_size}, {"H", s.belief->entropy}};
      if (s.belief->marginals) b["marginals"] = std::vector<double>(s.belief->marginals->begin(), s.belief->marginals->end());
      j["belief"] = std::move(b);
    }
    out << j.dump() << '\n';
  }
  out << json{{"type", "end"}, {"score", log.score}, {"trial_scores", log.trial_scores}}.dump() << '\n';
}

std::vector<EpisodeLog> read_logs(std::istream& in) {
  std::vector<EpisodeLog> logs;
  std::string line;
  std::size_t line_no = 0;
  bool open = false;
  auto fail = [&](const std::string& why) {
    throw std::runtime_error("episode log line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        if (open) fail("header before the previous episode ended");
        EpisodeLog log;
        log.header.seed = j.at("seed").get<std::uint64_t>();
        log.header.policy = j.at("policy").get<std::string>();
        log.header.chemistry = j.at("chemistry").get<std::uint32_t>();
        log.header.hints = j.value("hints", false);
        log.header.config = config_from_json(j.at("config"));
        logs.push_back(std::move(log));
        open = true;
      } else if (type == "step") {
        if (!open) fail("step outside an episode");
        StepRecord s;
        s.trial = j.at("trial").get<int>();
        s.step = j.at("step").get<int>();
        s.observation_digest = parse_hex64(j.at("obs").get<std::string>());
        s.action = Action::parse(j.at("action").get<std::string>());
        s.outcome = parse_outcome(j.at("outcome").get<std::string>());
        s.invalid = j.value("invalid", false);
        s.reward = j.at("reward").get<int>();
        if (j.contains("belief")) {
          const auto& b = j["belief"];
          BeliefSnapshot snap;
          snap.fingerprint = parse_hex64(b.at("fp").get<std::string>());
          snap.support_size = b.at("n").get<std::uint64_t>();
          snap.entropy = b.at("H").get<double>();
          if (b.contains("marginals")) {
            const auto m = b["marginals"].get<std::vector<double>>();
            if (m.size() != 28) fail("marginals must have 28 entries");
            snap.marginals = Eigen::Map<const ChemistryEncoding>(m.data());
          }
          s.belief = snap;
        }
        logs.back().steps.push_back(std::move(s));
      } else if (type == "end") {
        if (!open) fail("end outside an episode");
        logs.back().score = j.at("score").get<int>();
        logs.back().trial_scores = j.at("trial_scores").get<std::vector<int>>();
        open = false;
      } else {
        fail("unknown record type " + type);
      }
    } catch (const json::exception& e) {
      fail(e.what());
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
  if (open) throw std::runtime_error("episode log ends inside an episode");
  return logs;
}

std::vector<EpisodeLog> read_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open episode log " + path);
  return read_logs(in);
}

ReplayReport replay(const EpisodeLog& log) {
  ReplayReport report;
  SymbolicAlchemy env(log.header.config);
  env.reset(log.header.seed);
  auto diverge = [&](std::size_t i, std::string why) {
    report.ok = false;
    report.divergent_step = i;
    report.reason = std::move(why);
    report.replayed_score = env.score();
    return report;
  };
  if (env.chemistry().index != log.header.chemistry) return diverge(0, "chemistry does not match the seed");
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const auto& s = log.steps[i];
    if (env.episode_over()) return diverge(i, "episode already finished");
    if (s.trial != env.trial().trial_index || s.step != env.trial().step) return diverge(i, "trial/step counter mismatch");
    if (observation_digest(env.observe()) != s.observation_digest) return diverge(i, "observation mismatch");
    const auto r = env.step(s.action);
    if (r.reward != s.reward) return diverge(i, "reward mismatch");
    if (r.info.outcome != s.outcome) return diverge(i, "outcome class mismatch");
    if (r.info.invalid_action != s.invalid) return diverge(i, "invalid-action flag mismatch");
  }
  if (!env.episode_over()) return diverge(log.steps.size(), "log ends before the episode");
  report.replayed_score = env.score();
  if (env.score() != log.score) return diverge(log.steps.size(), "final score mismatch");
  return report;
}

}  // namespace alchemy
