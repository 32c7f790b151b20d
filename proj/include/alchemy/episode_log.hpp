#pragma once

// Episode logs: one JSON object per line. Each episode starts with a header
// line, then one line per environment step, then an end line with the score.
// Several episodes may be concatenated in one stream.
//
//   {"type":"header","seed":7,"policy":"oracle","chemistry":1234,"hints":false,
//    "config":{"trials":10,...}}
//   {"type":"step","trial":0,"step":0,"obs":"9c1f...","action":"P 0 3",
//    "outcome":"no_effect","reward":0,"belief":{"fp":"...","n":812,"H":6.69}}
//   {"type":"end","score":290,"trial_scores":[...]}

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "alchemy/belief.hpp"
#include "alchemy/env.hpp"

namespace alchemy {

struct BeliefSnapshot {
  std::uint64_t fingerprint = 0;
  std::uint64_t support_size = 0;
  double entropy = 0.0;
  std::optional<ChemistryEncoding> marginals;

  static BeliefSnapshot of(const BeliefState& belief, bool with_marginals = false);
};

struct EpisodeHeader {
  std::uint64_t seed = 0;
  EnvConfig config;
  std::uint32_t chemistry = 0;
  std::string policy;
  bool hints = false;
};

struct StepRecord {
  int trial = 0;
  int step = 0;
  /// FNV-1a digest of the observation the action was chosen from.
  std::uint64_t observation_digest = 0;
  Action action;
  OutcomeClass outcome = OutcomeClass::no_op;
  bool invalid = false;
  int reward = 0;
  /// Posterior after this step's outcome (before any next-trial stones).
  std::optional<BeliefSnapshot> belief;
};

struct EpisodeLog {
  EpisodeHeader header;
  std::vector<StepRecord> steps;
  int score = 0;
  std::vector<int> trial_scores;
};

std::uint64_t observation_digest(const Observation& obs);

void write_log(std::ostream& out, const EpisodeLog& log);
/// Throws std::runtime_error with the line number on malformed input.
std::vector<EpisodeLog> read_logs(std::istream& in);
std::vector<EpisodeLog> read_log_file(const std::string& path);

struct ReplayReport {
  bool ok = true;
  /// Index into steps of the first divergence, when not ok.
  std::size_t divergent_step = 0;
  std::string reason;
  int replayed_score = 0;
};

/// Re-simulates the header's seed and config with the logged actions and
/// checks observations, rewards, outcome classes, trial boundaries and score.
ReplayReport replay(const EpisodeLog& log);

}  // namespace alchemy
