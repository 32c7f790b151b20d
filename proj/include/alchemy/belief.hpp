#pragma once

// Exact posterior over chemistries.
//
// A belief is stored factored: one cell per surviving (stone map, potion map)
// pair, holding the set of graphs still consistent with the evidence. The
// prior mass of a chemistry depends only on its graph, so every weight is an
// integer multiple of a common unit and cell masses are exact.

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <utility>
#include <stdexcept>
#include <vector>

#include "alchemy/chemistry.hpp"

namespace alchemy {

/// Subset of the 109 enumerated graphs.
struct GraphSet {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  static GraphSet all();
  static GraphSet single(int graph);
  bool empty() const { return (lo | hi) == 0; }
  bool test(int graph) const { return graph < 64 ? (lo >> graph) & 1 : (hi >> (graph - 64)) & 1; }
  int count() const;

  friend GraphSet operator&(GraphSet a, GraphSet b) { return {a.lo & b.lo, a.hi & b.hi}; }
  friend GraphSet operator|(GraphSet a, GraphSet b) { return {a.lo | b.lo, a.hi | b.hi}; }
  /// Complement within the 109 graphs.
  GraphSet operator~() const;
  friend bool operator==(GraphSet, GraphSet) = default;
};

/// A family of colour -> latent-effect assignments combined with all stone
/// maps and graphs. `paired` is the true generative family (48 potion maps);
/// `unpaired` drops the opposite-pair constraint (all 720 bijections from
/// colours to signed effects), used only by the behavioural models.
class HypothesisSpace {
 public:
  static const HypothesisSpace& paired();
  static const HypothesisSpace& unpaired();

  bool is_paired() const { return paired_; }
  int num_potion_maps() const { return num_potion_maps_; }
  int num_map_pairs() const { return kNumStoneMaps * num_potion_maps_; }
  int effect_of(int potion_map, int color) const {
    return effects_[static_cast<std::size_t>(potion_map * kNumColors + color)];
  }

  GraphSet graphs_with_edge(int edge) const { return with_edge_[static_cast<std::size_t>(edge)]; }
  std::uint64_t mass(GraphSet graphs) const;

 private:
  explicit HypothesisSpace(bool paired);

  bool paired_;
  int num_potion_maps_ = 0;
  std::vector<std::int8_t> effects_;
  std::array<GraphSet, kNumEdges> with_edge_{};
  std::array<GraphSet, 4> tier_{};
  std::array<std::uint64_t, 4> tier_mass_{};
};

/// Raised when evidence eliminates every hypothesis.
class InconsistentEvidence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BeliefCell {
  std::uint32_t maps = 0;  // stone_map * num_potion_maps + potion_map
  GraphSet graphs;
  friend bool operator==(const BeliefCell&, const BeliefCell&) = default;
};

class BeliefState;

/// One cell of an outcome partition.
struct PredictedOutcome {
  Percept after;
  std::uint64_t mass = 0;
  double probability = 0.0;
  std::vector<BeliefCell> cells;
};

class BeliefState {
 public:
  /// The full prior (no evidence) over the given hypothesis space.
  static BeliefState prior(const HypothesisSpace& space = HypothesisSpace::paired());
  /// A belief concentrated on one chemistry.
  static BeliefState singleton(std::uint32_t chemistry_index);
  static BeliefState from_cells(const HypothesisSpace& space, std::vector<BeliefCell> cells);

  /// Keeps hypotheses whose stone map can produce every percept.
  BeliefState observe_stones(std::span<const Percept> percepts) const;
  /// Keeps hypotheses predicting `after` when `color` is applied to `before`.
  BeliefState observe_outcome(Percept before, PotionColor color, Percept after) const;
  /// Groups the support by predicted outcome, in increasing order of the
  /// after-percept. Probabilities are cell mass over total mass.
  std::vector<PredictedOutcome> partition(Percept stone, PotionColor color) const;
  /// partition() without the cells.
  std::vector<std::pair<Percept, std::uint64_t>> outcome_masses(Percept stone, PotionColor color) const;

  const HypothesisSpace& space() const { return *space_; }
  std::span<const BeliefCell> cells() const { return cells_; }
  bool empty() const { return cells_.empty(); }
  std::uint64_t support_size() const { return support_size_; }
  std::uint64_t mass() const { return mass_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  /// Support-count entropy, ln |support|, in nats.
  double entropy() const;

  /// Sorted chemistry indices in the support (paired space only).
  std::vector<std::uint32_t> support() const;
  bool contains(std::uint32_t chemistry_index) const;
  /// Normalised posterior weight of one chemistry (paired space only).
  double weight(std::uint32_t chemistry_index) const;
  /// Posterior marginals in the layout of encode_chemistry (paired space only).
  ChemistryEncoding marginals() const;

  friend bool operator==(const BeliefState& a, const BeliefState& b) {
    return a.space_ == b.space_ && a.cells_ == b.cells_;
  }

 private:
  BeliefState(const HypothesisSpace& space, std::vector<BeliefCell> cells);

  const HypothesisSpace* space_;
  std::vector<BeliefCell> cells_;
  std::uint64_t mass_ = 0;
  std::uint64_t support_size_ = 0;
  std::uint64_t fingerprint_ = 0;
};

/// Fresh-trial belief from the prior; throws InconsistentEvidence on empty support.
BeliefState init_belief(std::span<const Percept> percepts);
/// Throws InconsistentEvidence on empty posterior.
BeliefState update_belief(const BeliefState& belief, Percept before, PotionColor color, Percept after);

}  // namespace alchemy
