#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "alchemy/belief.hpp"
#include "alchemy/chemistry.hpp"
#include "alchemy/random.hpp"

namespace alchemy {

struct EnvConfig {
  int trials = 10;
  int stones = 3;
  int potions = 12;
  int max_steps = 20;
  /// Append [trial_index / (trials - 1), steps_remaining / max_steps].
  bool include_time = true;
  bool augment_ground_truth = false;
  bool augment_belief = false;

  /// Throws std::invalid_argument.
  void validate() const;
  int observation_size() const;

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

/// Key-value configuration: one `key = value` per line, `#` starts a comment.
/// Keys: trials, stones, potions, max_steps, seed, time (true/false),
/// augmentations (comma list of ground_truth, belief; or none).
struct RunSettings {
  EnvConfig env;
  std::uint64_t seed = 0;
};
RunSettings parse_config(std::istream& in);
RunSettings load_config(const std::string& path);
std::string format_config(const RunSettings& settings);

struct StoneSlot {
  LatentStone latent;
  bool present = true;
};

struct PotionSlot {
  PotionEffect effect;
  PotionColor color = PotionColor::green;
  bool present = true;
};

struct TrialState {
  std::vector<StoneSlot> stones;
  std::vector<PotionSlot> potions;
  int step = 0;
  int trial_index = 0;
  int deposited_reward = 0;

  int present_stones() const;
  int present_potions() const;
};

struct Action {
  enum class Kind : std::uint8_t { no_op, deposit, use_potion };
  Kind kind = Kind::no_op;
  int stone = -1;
  int potion = -1;

  static constexpr Action no_op() { return {}; }
  static constexpr Action deposit(int stone) { return {Kind::deposit, stone, -1}; }
  static constexpr Action use_potion(int stone, int potion) { return {Kind::use_potion, stone, potion}; }

  /// "N", "D <stone>", "P <stone> <potion>".
  std::string to_string() const;
  /// Throws std::invalid_argument.
  static Action parse(std::string_view text);

  friend bool operator==(const Action&, const Action&) = default;
};

enum class OutcomeClass : std::uint8_t { value_increase, value_decrease, no_effect, deposit, no_op };
std::string_view outcome_name(OutcomeClass c);
OutcomeClass parse_outcome(std::string_view name);

using Observation = Eigen::VectorXd;

struct StepInfo {
  bool invalid_action = false;
  OutcomeClass outcome = OutcomeClass::no_op;
  /// Populated for potion uses.
  Percept before;
  Percept after;
  PotionColor color = PotionColor::green;
};

struct StepResult {
  Observation observation;
  int reward = 0;
  bool trial_ended = false;
  bool episode_ended = false;
  StepInfo info;
};

/// Symbolic Alchemy. One instance runs one episode at a time and is not
/// thread-safe; separate instances are independent.
class SymbolicAlchemy {
 public:
  explicit SymbolicAlchemy(EnvConfig config = {});

  /// Samples a chemistry and the first trial from `seed`.
  Observation reset(std::uint64_t seed);
  /// Like reset() but with a fixed chemistry (trials still drawn from seed).
  Observation reset_with_chemistry(std::uint64_t seed, std::uint32_t chemistry_index);
  /// Replaces the current trial's stones and potions. Intended for tests and
  /// hand-built scenarios.
  void set_trial(std::vector<LatentStone> stones, std::vector<PotionEffect> potions);

  /// Throws std::logic_error when the episode is over.
  StepResult step(const Action& action);

  Observation observe() const;
  std::vector<Action> legal_actions() const;
  bool is_legal(const Action& action) const;

  /// Percepts of the stone slots; nullopt for deposited slots.
  std::vector<std::optional<Percept>> stone_percepts() const;
  std::vector<Percept> present_stone_percepts() const;
  std::vector<std::optional<PotionColor>> potion_colors() const;

  const EnvConfig& config() const { return config_; }
  const Chemistry& chemistry() const { return chemistry_; }
  const TrialState& trial() const { return trial_; }
  int score() const { return score_; }
  const std::vector<int>& trial_scores() const { return trial_scores_; }
  bool episode_over() const { return done_; }
  int steps_remaining() const { return config_.max_steps - trial_.step; }
  /// Tracked only when belief augmentation is on.
  const std::optional<BeliefState>& belief() const { return belief_; }

 private:
  void start_trial(int index);
  void sync_belief_with_trial();

  EnvConfig config_;
  Chemistry chemistry_;
  TrialState trial_;
  Rng rng_;
  int score_ = 0;
  std::vector<int> trial_scores_;
  bool done_ = true;
  std::optional<BeliefState> belief_;
};

/// Layout: per stone slot [present, 3 features, 4-level indicator one-hot],
/// per potion slot [present, 6-colour one-hot], optional time scalars,
/// optional 28-dim ground truth, optional 28-dim belief marginals.
Observation encode_observation(const EnvConfig& config, const TrialState& trial, const Chemistry& chemistry,
                               const BeliefState* belief);

}  // namespace alchemy
