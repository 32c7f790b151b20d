#pragma once

// Batch evaluation of a reference policy over seeded episodes.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "alchemy/agents.hpp"
#include "alchemy/env.hpp"
#include "alchemy/episode_log.hpp"

namespace alchemy {

struct EvalConfig {
  std::string policy = "random_heuristic";
  int episodes = 1000;
  /// Episode i runs with seed derive_seed(base_seed, i).
  std::uint64_t base_seed = 0;
  EnvConfig env;
  AgentOptions agent;
  RunOptions run;
  /// 0 picks std::thread::hardware_concurrency().
  int workers = 0;
};

/// Per-episode row of the evaluation table.
struct EpisodeRecord {
  int index = 0;
  std::uint64_t seed = 0;
  int score = 0;
  std::vector<int> potions_per_trial;
  /// Posterior entropy at the end of each trial; empty when the policy keeps
  /// no belief.
  std::vector<double> entropy_per_trial;
};

struct EvalResult {
  std::vector<EpisodeLog> logs;
  std::vector<EpisodeRecord> records;
};

/// Results are ordered by episode index and do not depend on `workers`.
/// `progress` is called with the number of finished episodes, from worker
/// threads, serialised.
EvalResult evaluate(const EvalConfig& config, const std::function<void(int)>& progress = {});

EpisodeRecord record_of(int index, const EpisodeLog& log);
void write_records_tsv(std::ostream& out, std::span<const EpisodeRecord> records, const std::string& policy);

}  // namespace alchemy
