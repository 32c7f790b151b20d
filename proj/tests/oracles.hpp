#pragma once

// Brute-force reference implementations for tests. They re-simulate every
// chemistry with the chemistry-core primitives (perceive_stone, apply_potion,
// effect_of_color) and never touch the belief engine's cell tables or the
// planner's caches.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "alchemy/belief.hpp"
#include "alchemy/chemistry.hpp"
#include "alchemy/planner.hpp"
#include "alchemy/random.hpp"

namespace oracle {

using namespace alchemy;

/// Distinct connected edge sets generated by at most three preconditions,
/// found by trying every subset of the 12 preconditions on explicit corner
/// coordinates. Entry n counts the sets whose smallest generating subset
/// has n elements.
std::array<int, 4> graph_tiers();

/// Prior weight from the sampling law: tier uniform, graph uniform in tier,
/// maps uniform. Tier sizes come from the caller's own count.
double prior_weight(const Chemistry& c, std::span<const int> tier_sizes);

std::optional<LatentStone> preimage(const Chemistry& c, Percept p);
/// Predicted percept after applying `color`; nullopt if `before` is impossible.
std::optional<Percept> predict(const Chemistry& c, Percept before, PotionColor color);

struct Evidence {
  /// Stones seen at the start of a trial; empty for potion outcomes.
  std::vector<Percept> stones;
  Percept before;
  PotionColor color = PotionColor::green;
  Percept after;
};

/// Sorted chemistry indices consistent with every piece of evidence.
std::vector<std::uint32_t> filter(std::span<const Evidence> evidence);

/// Unmemoized, unpruned within-trial expectimax over explicit hypotheses.
/// Returns the value of every root action in the order: stop, deposit of
/// each stone, then each (stone, potion slot).
std::vector<double> expectimax_action_values(std::span<const Percept> stones, std::span<const PotionColor> potions,
                                             std::span<const std::uint32_t> support, int steps);
double expectimax_value(std::span<const Percept> stones, std::span<const PotionColor> potions,
                        std::span<const std::uint32_t> support, int steps);

/// Belief over an explicit support.
BeliefState belief_of(std::span<const std::uint32_t> support);

/// A small planning problem: up to 2 stones, up to 3 potions and a support
/// of at most 50 chemistries that contains the true one.
struct Micro {
  std::vector<Percept> stones;
  std::vector<PotionColor> potions;
  std::vector<std::uint32_t> support;
  int steps = kUnlimitedSteps;
};
Micro random_micro(Rng& rng);

}  // namespace oracle
