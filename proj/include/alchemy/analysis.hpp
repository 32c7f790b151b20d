#pragma once

// Behavioural metrics over episode logs.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "alchemy/episode_log.hpp"

namespace alchemy {

struct MeanStderr {
  double mean = 0.0;
  /// Sample standard deviation over sqrt(n); 0 for n < 2.
  double stderr_ = 0.0;
  std::size_t n = 0;
};
MeanStderr mean_stderr(std::span<const double> values);

/// One-sided paired t-test of mean(a - b) > 0.
struct PairedTest {
  double mean_difference = 0.0;
  double stderr_ = 0.0;
  double t = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};
/// Throws std::invalid_argument on mismatched or too short inputs.
PairedTest paired_test(std::span<const double> a, std::span<const double> b);

/// Potion uses (valid or not) per trial of each episode.
std::vector<int> potions_per_trial(const EpisodeLog& log);

struct PotionUseMetrics {
  std::vector<MeanStderr> per_trial;
  MeanStderr first_trial;
  /// Last trial minus first trial, per episode.
  MeanStderr last_minus_first;
};
PotionUseMetrics potion_use_metrics(std::span<const EpisodeLog> logs);

struct EpisodeEntropy {
  double initial = 0.0;
  /// Entropy after each step, ending with the last step of the episode.
  std::vector<double> trajectory;
  std::vector<double> end_of_trial;
  bool non_increasing = true;
};
/// Uses the logged belief snapshots, or replays the actions through the
/// belief engine when the log has none.
EpisodeEntropy episode_entropy(const EpisodeLog& log);

struct EntropyMetrics {
  MeanStderr end_first_trial;
  MeanStderr end_episode;
  std::size_t non_increasing_episodes = 0;
  std::size_t episodes = 0;
};
EntropyMetrics entropy_metrics(std::span<const EpisodeLog> logs);

/// Replays the log and classifies each step by the change in stone value.
/// Invalid actions count as no_op. Throws std::runtime_error when the log
/// does not replay.
std::vector<OutcomeClass> classify_actions(const EpisodeLog& log);

/// Fraction of no_effect steps among potion uses, per trial.
std::vector<MeanStderr> no_effect_fraction(std::span<const EpisodeLog> logs);

struct SummaryRow {
  std::string policy;
  MeanStderr score;
};
/// One row per policy, in order of first appearance.
std::vector<SummaryRow> summarize(std::span<const EpisodeLog> logs);
void write_summary_table(std::ostream& out, std::span<const SummaryRow> rows);
void write_summary_tsv(std::ostream& out, std::span<const SummaryRow> rows);

}  // namespace alchemy
