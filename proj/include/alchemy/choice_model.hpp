#pragma once

// One-step-lookahead softmax choice models fitted to episode logs.
//
// At each decision a model values every legal action by the reward
// deposited so far in the trial plus the expected sum of the values of the
// stones left after the action, under the model's own posterior. Choices
// follow a softmax over those values with a temperature fitted by maximum
// likelihood. The pairs-aware model filters over the true hypothesis space;
// the pairs-unaware model drops the rule that colour pairs have opposite
// effects.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alchemy/agents.hpp"
#include "alchemy/belief.hpp"
#include "alchemy/env.hpp"
#include "alchemy/episode_log.hpp"

namespace alchemy {

enum class ChoiceModelKind : std::uint8_t { pairs_aware, pairs_unaware };
std::string_view model_name(ChoiceModelKind kind);
/// Throws std::invalid_argument.
ChoiceModelKind parse_model(std::string_view name);
const HypothesisSpace& model_space(ChoiceModelKind kind);

/// Action values of one decision, in the order of legal_actions().
struct Decision {
  std::vector<double> values;
  int chosen = 0;
};

/// Lookahead values of the env's legal actions under `belief`.
std::vector<double> lookahead_values(const SymbolicAlchemy& env, const BeliefState& belief);

/// Replays the log under the model. Throws std::runtime_error if the log does
/// not replay or an action is not legal where it was taken.
std::vector<Decision> model_decisions(const EpisodeLog& log, ChoiceModelKind kind);

/// Softmax log-probability of every action at temperature `temperature`.
std::vector<double> softmax_log_probs(std::span<const double> values, double temperature);
double log_likelihood(std::span<const Decision> decisions, double temperature);

struct ChoiceFit {
  double temperature = 0.0;
  double log_likelihood = 0.0;
  std::size_t decisions = 0;
};

struct FitOptions {
  double min_temperature = 1e-3;
  double max_temperature = 1e3;
  /// Golden-section stops once the bracket on log temperature is this narrow.
  double tolerance = 1e-6;
};

/// Maximum-likelihood temperature by golden-section search on log
/// temperature. Throws std::invalid_argument when there are no decisions.
ChoiceFit fit_temperature(std::span<const Decision> decisions, const FitOptions& options = {});
ChoiceFit fit_choice_model(std::span<const EpisodeLog> logs, ChoiceModelKind kind, const FitOptions& options = {});

/// Samples actions from the model's own softmax; used for parameter recovery.
class SoftmaxModelAgent final : public Agent {
 public:
  SoftmaxModelAgent(ChoiceModelKind kind, double temperature) : kind_(kind), temperature_(temperature) {}

  std::string id() const override;
  void begin_episode(const SymbolicAlchemy& env, std::uint64_t seed) override;
  void begin_trial(const SymbolicAlchemy& env) override;
  Action act(const SymbolicAlchemy& env) override;
  void observe(const Action& action, const StepResult& result) override;

 private:
  ChoiceModelKind kind_;
  double temperature_;
  Rng rng_;
  std::optional<BeliefState> belief_;
};

}  // namespace alchemy
