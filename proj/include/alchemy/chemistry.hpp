#pragma once

// Generative process of a chemistry: causal graphs over the cube, stone maps,
// potion maps, the potion colour table and the reward function.
//
// Conventions used throughout the library:
//   * A latent stone is a cube corner c in {-1,+1}^3, stored as a 3-bit index
//     whose bit i is set when c_i = +1.
//   * A potion effect is a signed basis vector, stored as 2*axis + (sign < 0).
//     Colours use the same encoding: colour 2k is the "+" member of the k-th
//     fixed pair, colour 2k+1 its opposite.
//   * Cube edge order: edge 4*i + 2*b_j + b_k is parallel to axis i, where
//     j < k are the other two axes and b_j, b_k are their bits (1 when +1).
//   * Perceptual features live in {-1,0,1}^3 and are coded as
//     sum_i (f_i + 1) * 3^i in [0, 27).

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alchemy/random.hpp"

namespace alchemy {

using Coords = Eigen::Vector3i;
using ChemistryEncoding = Eigen::Matrix<double, 28, 1>;

inline constexpr int kNumAxes = 3;
inline constexpr int kNumCorners = 8;
inline constexpr int kNumEffects = 6;
inline constexpr int kNumColors = 6;
inline constexpr int kNumEdges = 12;
inline constexpr int kNumFeatureCodes = 27;
inline constexpr int kNumRewardLevels = 4;
inline constexpr int kNumRotations = 4;
inline constexpr int kNumReflections = 8;
inline constexpr int kNumPermutations = 6;
inline constexpr int kNumStoneMaps = kNumRotations * kNumReflections;    // 32
inline constexpr int kNumPotionMaps = kNumReflections * kNumPermutations;  // 48
inline constexpr int kNumGraphs = 109;
inline constexpr std::uint32_t kNumChemistries =
    kNumGraphs * kNumStoneMaps * kNumPotionMaps;  // 167,424

class LatentStone {
 public:
  constexpr LatentStone() = default;
  static constexpr LatentStone from_index(int index) {
    LatentStone s;
    s.bits_ = static_cast<std::uint8_t>(index & 7);
    return s;
  }
  /// Throws std::invalid_argument unless every entry is -1 or +1.
  static LatentStone from_coords(const Coords& c);

  constexpr int index() const { return bits_; }
  constexpr int coord(int axis) const { return (bits_ >> axis) & 1 ? 1 : -1; }
  constexpr int coord_sum() const { return coord(0) + coord(1) + coord(2); }
  Coords coords() const { return {coord(0), coord(1), coord(2)}; }
  constexpr LatentStone flipped(int axis) const { return from_index(bits_ ^ (1 << axis)); }

  friend constexpr bool operator==(LatentStone, LatentStone) = default;

 private:
  std::uint8_t bits_ = 0;
};

struct PotionEffect {
  int axis = 0;
  int sign = 1;

  static constexpr PotionEffect from_index(int index) { return {index / 2, index % 2 ? -1 : 1}; }
  constexpr int index() const { return 2 * axis + (sign < 0 ? 1 : 0); }
  constexpr PotionEffect opposite() const { return {axis, -sign}; }
  Coords vector() const {
    Coords v = Coords::Zero();
    v[axis] = sign;
    return v;
  }
  friend constexpr bool operator==(PotionEffect, PotionEffect) = default;
};

enum class PotionColor : std::uint8_t { green, red, yellow, orange, turquoise, pink };

constexpr int index_of(PotionColor c) { return static_cast<int>(c); }
constexpr PotionColor color_from_index(int i) { return static_cast<PotionColor>(i); }
/// The fixed opposite of a colour (green/red, yellow/orange, turquoise/pink).
constexpr PotionColor paired_color(PotionColor c) { return color_from_index(index_of(c) ^ 1); }
std::string_view color_name(PotionColor c);
/// Throws std::invalid_argument for unknown names.
PotionColor parse_color(std::string_view name);

/// Point value of a latent stone: 15 at (1,1,1), otherwise the coordinate sum.
constexpr int reward_of(LatentStone s) {
  const int sum = s.coord_sum();
  return sum == 3 ? 15 : sum;
}

/// Ordinal brightness level of the reward indicator: -3, -1, 1, 15 -> 0..3.
constexpr int indicator_level(int reward) {
  switch (reward) {
    case -3: return 0;
    case -1: return 1;
    case 1: return 2;
    default: return 3;
  }
}
constexpr int reward_of_level(int level) {
  constexpr std::array<int, 4> kValues{-3, -1, 1, 15};
  return kValues[static_cast<std::size_t>(level)];
}

/// Index of the cube edge parallel to `axis` that touches `corner`.
constexpr int edge_index(LatentStone corner, int axis) {
  const int j = axis == 0 ? 1 : 0;
  const int k = axis == 2 ? 1 : 2;
  const int bj = (corner.index() >> j) & 1;
  const int bk = (corner.index() >> k) & 1;
  return 4 * axis + 2 * bj + bk;
}

/// "Edges parallel to edge_axis exist only where coordinate gate_axis equals gate_value."
struct Precondition {
  int edge_axis = 0;
  int gate_axis = 1;
  int gate_value = 1;

  /// Bitmask of the cube edges this precondition removes.
  std::uint16_t removed_edges() const;
  friend bool operator==(const Precondition&, const Precondition&) = default;
};

/// All 12 well-formed preconditions in a fixed order.
std::span<const Precondition> all_preconditions();

class CausalGraph {
 public:
  CausalGraph() = default;
  CausalGraph(std::uint16_t edge_mask, std::vector<Precondition> generating_set);

  /// Graph whose edges are the cube edges satisfying every precondition.
  static CausalGraph from_preconditions(std::vector<Precondition> preconditions);

  std::uint16_t edge_mask() const { return edges_; }
  bool has_edge(int edge) const { return (edges_ >> edge) & 1; }
  int num_edges() const;
  /// Minimal number of preconditions generating this edge set.
  int num_preconditions() const { return static_cast<int>(preconditions_.size()); }
  const std::vector<Precondition>& preconditions() const { return preconditions_; }
  /// Connected over all 8 corners (breadth-first search).
  bool connected() const;

 private:
  std::uint16_t edges_ = 0x0FFF;
  std::vector<Precondition> preconditions_;
};

/// Moves `stone` along `effect` if that edge exists in `graph`; otherwise the
/// stone is returned unchanged (this includes effects pointing off the cube).
LatentStone apply_potion(LatentStone stone, PotionEffect effect, const CausalGraph& graph);

/// Every connected precondition-generated graph, deduplicated by edge set and
/// tagged with its minimal precondition count. Ordered by precondition count,
/// then by descending edge mask; element 0 is the full cube.
std::vector<CausalGraph> enumerate_graphs();

/// S = S_rotate * S_reflect. Rotation 0 is the identity, 1..3 a 45 degree
/// anticlockwise rotation about x, y, z with the two rotated axes rescaled by
/// sqrt(2)/2. Reflection bit i set means axis i is negated.
struct StoneMap {
  int rotation = 0;
  int reflection = 0;

  static constexpr StoneMap from_index(int index) { return {index / kNumReflections, index % kNumReflections}; }
  constexpr int index() const { return rotation * kNumReflections + reflection; }
  Eigen::Matrix3d matrix() const;
  /// Feature triple of a latent stone, entries in {-1,0,1}.
  Coords apply(LatentStone stone) const;
  friend constexpr bool operator==(StoneMap, StoneMap) = default;
};

/// Lexicographic list of the permutations of {0,1,2}.
std::span<const std::array<int, 3>> permutations();

/// P = P_reflect * P_permute, with P_permute rows e^(pi(0)), e^(pi(1)), e^(pi(2)).
struct PotionMap {
  int permutation = 0;
  int reflection = 0;

  static constexpr PotionMap from_index(int index) { return {index % kNumPermutations, index / kNumPermutations}; }
  constexpr int index() const { return reflection * kNumPermutations + permutation; }
  Eigen::Matrix3i matrix() const;
  PotionEffect apply(PotionEffect effect) const;
  PotionEffect inverse(PotionEffect mapped) const;
  friend constexpr bool operator==(PotionMap, PotionMap) = default;
};

/// Fixed colour table applied after the potion map.
constexpr PotionColor color_of_mapped_effect(PotionEffect mapped) { return color_from_index(mapped.index()); }
PotionColor color_of_potion(PotionEffect effect, const PotionMap& map);
/// Latent effect that produces `color` under `map`.
PotionEffect effect_of_color(PotionColor color, const PotionMap& map);

constexpr int feature_code(int f0, int f1, int f2) { return (f0 + 1) + 3 * (f1 + 1) + 9 * (f2 + 1); }
int feature_code(const Coords& f);

/// Feature code in [0,27) plus reward indicator level, packed as code*4 + level.
class Percept {
 public:
  constexpr Percept() = default;
  constexpr Percept(int feature_code, int level)
      : packed_(static_cast<std::uint8_t>(feature_code * kNumRewardLevels + level)) {}
  static Percept from_features(const Coords& features, int level);
  static constexpr Percept from_packed(int packed) { return Percept(packed / 4, packed % 4); }

  constexpr int packed() const { return packed_; }
  constexpr int feature_code() const { return packed_ / kNumRewardLevels; }
  constexpr int level() const { return packed_ % kNumRewardLevels; }
  constexpr int reward() const { return reward_of_level(level()); }
  Coords features() const;

  friend constexpr bool operator==(Percept, Percept) = default;
  friend constexpr auto operator<=>(Percept a, Percept b) { return a.packed_ <=> b.packed_; }

 private:
  std::uint8_t packed_ = 0;
};

inline constexpr int kNumPercepts = kNumFeatureCodes * kNumRewardLevels;  // 108


Percept perceive_stone(LatentStone stone, const StoneMap& map);

struct Chemistry {
  std::uint32_t index = 0;
  int graph = 0;  // ordinal into enumerate_graphs()
  StoneMap stone_map;
  PotionMap potion_map;
};

/// The 28-dim layout: [0,4) rotation one-hot, [4,7) stone reflection bits,
/// [7,10) potion reflection bits, [10,16) permutation one-hot (lexicographic),
/// [16,28) edge existence in cube-edge order.
ChemistryEncoding encode_chemistry(const Chemistry& chemistry);

/// Immutable enumeration of all chemistries with lookup tables. Index order is
/// lexicographic over (graph, rotation, stone reflection, potion reflection,
/// permutation), i.e. index = graph * 1536 + stone_map * 48 + potion_map.
class ChemistryTable {
 public:
  static const ChemistryTable& instance();

  std::span<const CausalGraph> graphs() const { return graphs_; }
  const CausalGraph& graph(int ordinal) const { return graphs_[static_cast<std::size_t>(ordinal)]; }
  /// Graph ordinals with N(G) = tier.
  std::span<const int> tier(int n) const { return tiers_[static_cast<std::size_t>(n)]; }

  std::uint32_t size() const { return kNumChemistries; }
  Chemistry chemistry(std::uint32_t index) const;
  static constexpr std::uint32_t index_of(int graph, int stone_map, int potion_map) {
    return static_cast<std::uint32_t>((graph * kNumStoneMaps + stone_map) * kNumPotionMaps + potion_map);
  }

  /// Integer prior mass of a graph; the generative prior of a chemistry is
  /// graph_mass / (kGraphMassTotal * 1536).
  std::uint64_t graph_mass(int graph) const { return graph_mass_[static_cast<std::size_t>(graph)]; }
  static constexpr std::uint64_t kGraphMassTotal = 192;
  double prior(std::uint32_t index) const;

  /// Transition table: next latent index for (graph, latent, effect).
  int transition(int graph, int latent, int effect) const {
    return transition_[static_cast<std::size_t>((graph * kNumCorners + latent) * kNumEffects + effect)];
  }
  /// Percept of a latent corner under a stone map.
  Percept perceive(int stone_map, int latent) const {
    return perceive_[static_cast<std::size_t>(stone_map * kNumCorners + latent)];
  }
  /// Latent corner for a feature code under a stone map, or -1.
  int latent_of(int stone_map, int feature_code) const {
    return inverse_[static_cast<std::size_t>(stone_map * kNumFeatureCodes + feature_code)];
  }
  /// Latent effect index of a colour under a potion map.
  int effect_of(int potion_map, int color) const {
    return effect_of_color_[static_cast<std::size_t>(potion_map * kNumColors + color)];
  }

  int sample_graph(Rng& rng) const;
  Chemistry sample_chemistry(Rng& rng) const;

 private:
  ChemistryTable();

  std::vector<CausalGraph> graphs_;
  std::array<std::vector<int>, 4> tiers_;
  std::vector<std::uint64_t> graph_mass_;
  std::vector<std::int8_t> transition_;
  std::vector<Percept> perceive_;
  std::vector<std::int8_t> inverse_;
  std::vector<std::int8_t> effect_of_color_;
};

/// Counts from the enumeration audit.
struct EnumerationCounts {
  std::size_t graphs = 0;
  std::array<std::size_t, 4> per_tier{};
  std::uint64_t chemistries = 0;
  /// chemistries * C(10,3) * C(17,12): stone and potion multisets per trial.
  std::uint64_t trial_initialisations = 0;
};
EnumerationCounts enumeration_counts();

}  // namespace alchemy
