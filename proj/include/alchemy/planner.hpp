#pragma once

// Within-trial expectimax for the reference agents.
//
// Both searches value a state as the best of: stopping (worth 0), depositing
// a stone (its value plus the value of the rest), or applying a potion colour
// to a stone (expected value over predicted outcomes). The horizon is the end
// of the current trial. Root ties are broken in canonical action order:
// stop < deposits < potion uses, each in slot order.

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include <absl/container/flat_hash_map.h>
#include <absl/container/inlined_vector.h>

#include "alchemy/belief.hpp"
#include "alchemy/chemistry.hpp"

namespace alchemy {

/// Decision returned by a planner; indices refer to the spans passed in.
struct PlannedAction {
  enum class Kind : std::uint8_t { stop, deposit, use_potion };
  Kind kind = Kind::stop;
  int stone = -1;
  int potion = -1;
  friend bool operator==(const PlannedAction&, const PlannedAction&) = default;
};

struct PlanResult {
  double value = 0.0;
  PlannedAction action;
};

/// Hard limits of the packed search keys.
inline constexpr int kMaxPlannerStones = 9;
inline constexpr int kMaxPlannerPotionsPerColor = 31;

/// Steps beyond stones + potions can never be used, so they are capped there.
inline constexpr int kUnlimitedSteps = 1 << 20;

struct PlannerOptions {
  bool memoize = true;
  /// Skip remaining actions once the best value reaches an upper bound on the
  /// state value. Exact: never changes values or chosen actions.
  bool bound_pruning = true;
  /// Potion uses searched ahead of each decision. Past that the state is
  /// valued as if the chemistry were revealed. kUnlimitedSteps is exact.
  int lookahead = kUnlimitedSteps;
};

struct PlannerStats {
  std::uint64_t nodes_expanded = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t partitions = 0;
  std::size_t beliefs = 0;
};

/// Memoised value of a trial when the chemistry is known, in terms of the
/// edges that exist and how many potions of each signed effect remain.
class KnownChemistryValues {
 public:
  /// `stones` holds latent corner indices; counts are per effect index.
  double value(std::uint16_t edges, std::span<const std::uint8_t, kNumEffects> counts, std::span<const std::uint8_t> stones,
               int steps);
  std::size_t size() const { return values_.size(); }
  void clear() { values_.clear(); }

  /// A corner a stone can be moved to and the potions the cheapest
  /// ways there need. Only corners worth depositing are listed.
  struct Route {
    int reward = 0;
    std::array<std::uint8_t, kNumEffects> need{};
    int uses = 0;
  };
  const std::vector<Route>& routes(std::uint16_t edges, int start);

 private:
  using Key = std::pair<std::uint64_t, std::uint64_t>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const { return static_cast<std::size_t>(splitmix64(k.first ^ splitmix64(k.second))); }
  };

  absl::flat_hash_map<Key, double, KeyHash> values_;
  /// Indexed by edges * 8 + start; filled on first use.
  std::vector<std::vector<Route>> routes_ = std::vector<std::vector<Route>>(std::size_t{kNumCorners} << kNumEdges);
  std::vector<bool> routed_ = std::vector<bool>(std::size_t{kNumCorners} << kNumEdges);
};

/// Bayes-optimal planning over a belief state.
class IdealObserverPlanner {
 public:
  explicit IdealObserverPlanner(PlannerOptions options = {});

  PlanResult plan(std::span<const Percept> stones, std::span<const PotionColor> potions, const BeliefState& belief,
                  int steps_left = kUnlimitedSteps);
  /// Value of every root action in canonical order, stop first.
  std::vector<std::pair<PlannedAction, double>> action_values(std::span<const Percept> stones,
                                                              std::span<const PotionColor> potions,
                                                              const BeliefState& belief,
                                                              int steps_left = kUnlimitedSteps);

  /// Drops all caches. Call when the belief moves to an unrelated region,
  /// e.g. at trial boundaries.
  void clear();
  const PlannerStats& stats() const;

 private:
  struct Node {
    std::array<Percept, kMaxPlannerStones> stones{};
    int num_stones = 0;
    std::array<std::uint8_t, kNumColors> counts{};
    std::uint32_t belief = 0;
    int steps = 0;
    int lookahead = 0;
  };
  struct Key {
    std::uint64_t stones;
    std::uint64_t counts_steps;
    std::uint32_t belief;
    friend bool operator==(const Key&, const Key&) = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const;
  };
  struct Child {
    Percept after;
    std::uint32_t belief;
    std::uint64_t mass;
  };
  struct Partition {
    std::vector<Child> children;
    std::uint64_t total = 0;
  };
  /// A belief reduced to what can still affect outcomes: sorted
  /// (hypothesis code, mass) pairs where the code holds a stone map, the
  /// effects of the colours still in stock and the edges along the axes
  /// those colours move. Masses are divided by their gcd.
  using View = std::vector<std::pair<std::uint64_t, std::uint64_t>>;

  Node make_root(std::span<const Percept> stones, std::span<const PotionColor> potions, const BeliefState& belief,
                 int steps_left);
  struct Entry {
    double value;
    /// Otherwise `value` is only an upper bound.
    bool exact;
  };

  // Searches take a threshold: a result above it is exact, a result at or
  // below it is an upper bound on the true value.
  double value(const Node& node, double threshold);
  double deposit_value(const Node& node, int stone, double threshold);
  struct Expansion {
    Partition part;
    absl::InlinedVector<Node, kNumCorners> children;
    absl::InlinedVector<double, kNumCorners> bounds;
    /// Mass-weighted sum of the child upper bounds.
    double optimistic = 0.0;
  };
  Expansion expand(const Node& node, int stone, int color);
  double evaluate(const Expansion& expansion, double threshold);
  double potion_value(const Node& node, int stone, int color, double threshold);
  Partition partition(const Node& node, int stone, int color);
  std::uint32_t intern(View view);
  static Key key_of(const Node& node);
  double upper_bound(const Node& node);
  /// Expected value of the trial if the chemistry were revealed now.
  double informed_bound(const Node& node);

  PlannerOptions options_;
  std::vector<View> views_;
  std::unordered_multimap<std::uint64_t, std::uint32_t> view_index_;
  std::unordered_map<std::uint64_t, Partition> partitions_;
  std::unordered_map<Key, double, KeyHash> bounds_;
  KnownChemistryValues known_;
  std::unordered_map<Key, Entry, KeyHash> values_;
  mutable PlannerStats stats_;
};

/// Exhaustive search with the chemistry known.
class OraclePlanner {
 public:
  explicit OraclePlanner(PlannerOptions options = {}) : options_(options) {}

  PlanResult plan(std::span<const LatentStone> stones, std::span<const PotionColor> potions,
                  const Chemistry& chemistry, int steps_left = kUnlimitedSteps);
  void clear() { values_.clear(); }

 private:
  struct Node {
    std::array<LatentStone, kMaxPlannerStones> stones{};
    int num_stones = 0;
    std::array<std::uint8_t, kNumColors> counts{};
    int steps = 0;
  };
  double value(const Node& node);
  double deposit_value(const Node& node, int stone);
  double potion_value(const Node& node, int stone, int color);
  LatentStone apply(LatentStone stone, int color) const;

  using Key = std::pair<std::uint64_t, std::uint64_t>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const { return static_cast<std::size_t>(splitmix64(k.first ^ splitmix64(k.second))); }
  };

  PlannerOptions options_;
  Chemistry chemistry_;
  bool have_chemistry_ = false;
  std::unordered_map<Key, double, KeyHash> values_;
};

/// Upper bound on the total value of stones given `potions` potion uses.
double stone_value_upper_bound(std::span<const int> rewards, int potions);

}  // namespace alchemy
