#include "alchemy/belief.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace alchemy {

namespace {

constexpr std::uint64_t kHighMask = (std::uint64_t{1} << (kNumGraphs - 64)) - 1;

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ (v + 0x9E3779B97F4A7C15ULL + (h << 6))); }

void require_paired(const HypothesisSpace& space) {
  if (!space.is_paired()) throw std::logic_error("operation defined only for the generative hypothesis space");
}

}  // namespace

GraphSet GraphSet::all() { return {~std::uint64_t{0}, kHighMask}; }

GraphSet GraphSet::single(int graph) {
  if (graph < 64) return {std::uint64_t{1} << graph, 0};
  return {0, std::uint64_t{1} << (graph - 64)};
}

int GraphSet::count() const { return std::popcount(lo) + std::popcount(hi); }

GraphSet GraphSet::operator~() const { return {~lo, ~hi & kHighMask}; }

HypothesisSpace::HypothesisSpace(bool paired) : paired_(paired) {
  const auto& table = ChemistryTable::instance();
  if (paired) {
    num_potion_maps_ = kNumPotionMaps;
    effects_.resize(static_cast<std::size_t>(kNumPotionMaps * kNumColors));
    for (int m = 0; m < kNumPotionMaps; ++m)
      for (int k = 0; k < kNumColors; ++k)
        effects_[static_cast<std::size_t>(m * kNumColors + k)] = static_cast<std::int8_t>(table.effect_of(m, k));
  } else {
    std::array<std::int8_t, kNumColors> perm{0, 1, 2, 3, 4, 5};
    do {
      effects_.insert(effects_.end(), perm.begin(), perm.end());
      ++num_potion_maps_;
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  for (int g = 0; g < kNumGraphs; ++g) {
    const auto bit = GraphSet::single(g);
    for (int e = 0; e < kNumEdges; ++e)
      if (table.graph(g).has_edge(e))
        with_edge_[static_cast<std::size_t>(e)] = with_edge_[static_cast<std::size_t>(e)] | bit;
    const auto n = static_cast<std::size_t>(table.graph(g).num_preconditions());
    tier_[n] = tier_[n] | bit;
    tier_mass_[n] = table.graph_mass(g);
  }
}

const HypothesisSpace& HypothesisSpace::paired() {
  static const HypothesisSpace space(true);
  return space;
}

const HypothesisSpace& HypothesisSpace::unpaired() {
  static const HypothesisSpace space(false);
  return space;
}

std::uint64_t HypothesisSpace::mass(GraphSet graphs) const {
  std::uint64_t m = 0;
  for (std::size_t n = 0; n < 4; ++n) m += tier_mass_[n] * static_cast<std::uint64_t>((graphs & tier_[n]).count());
  return m;
}

BeliefState::BeliefState(const HypothesisSpace& space, std::vector<BeliefCell> cells)
    : space_(&space), cells_(std::move(cells)) {
  std::uint64_t h = 0x5EED;
  for (const auto& c : cells_) {
    mass_ += space_->mass(c.graphs);
    support_size_ += static_cast<std::uint64_t>(c.graphs.count());
    h = mix(mix(mix(h, c.maps), c.graphs.lo), c.graphs.hi);
  }
  fingerprint_ = h;
}

BeliefState BeliefState::prior(const HypothesisSpace& space) {
  std::vector<BeliefCell> cells(static_cast<std::size_t>(space.num_map_pairs()));
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = {static_cast<std::uint32_t>(i), GraphSet::all()};
  return BeliefState(space, std::move(cells));
}

BeliefState BeliefState::singleton(std::uint32_t chemistry_index) {
  const auto c = ChemistryTable::instance().chemistry(chemistry_index);
  const auto maps = static_cast<std::uint32_t>(c.stone_map.index() * kNumPotionMaps + c.potion_map.index());
  return BeliefState(HypothesisSpace::paired(), {{maps, GraphSet::single(c.graph)}});
}

BeliefState BeliefState::from_cells(const HypothesisSpace& space, std::vector<BeliefCell> cells) {
  std::sort(cells.begin(), cells.end(), [](const BeliefCell& a, const BeliefCell& b) { return a.maps < b.maps; });
  std::erase_if(cells, [](const BeliefCell& c) { return c.graphs.empty(); });
  return BeliefState(space, std::move(cells));
}

BeliefState BeliefState::observe_stones(std::span<const Percept> percepts) const {
  const auto& table = ChemistryTable::instance();
  const auto npm = static_cast<std::uint32_t>(space_->num_potion_maps());
  std::vector<BeliefCell> kept;
  kept.reserve(cells_.size());
  for (const auto& cell : cells_) {
    const int sm = static_cast<int>(cell.maps / npm);
    const bool ok = std::all_of(percepts.begin(), percepts.end(), [&](Percept p) {
      const int latent = table.latent_of(sm, p.feature_code());
      return latent >= 0 && table.perceive(sm, latent) == p;
    });
    if (ok) kept.push_back(cell);
  }
  return BeliefState(*space_, std::move(kept));
}

namespace {

/// Splits one cell by the outcome of applying `color` to a stone seen as `stone`.
/// Calls emit(after, graphs) for each non-empty piece; returns false if the
/// cell cannot have produced the stone percept.
template <typename Emit>
bool split_cell(const HypothesisSpace& space, const BeliefCell& cell, Percept stone, int color, Emit&& emit) {
  const auto& table = ChemistryTable::instance();
  const auto npm = static_cast<std::uint32_t>(space.num_potion_maps());
  const int sm = static_cast<int>(cell.maps / npm);
  const int pm = static_cast<int>(cell.maps % npm);
  const int latent_index = table.latent_of(sm, stone.feature_code());
  if (latent_index < 0 || table.perceive(sm, latent_index) != stone) return false;
  const auto latent = LatentStone::from_index(latent_index);
  const auto effect = PotionEffect::from_index(space.effect_of(pm, color));
  if (latent.coord(effect.axis) != -effect.sign) {
    emit(stone, cell.graphs);
    return true;
  }
  const auto with = cell.graphs & space.graphs_with_edge(edge_index(latent, effect.axis));
  const auto without = cell.graphs & ~space.graphs_with_edge(edge_index(latent, effect.axis));
  if (!without.empty()) emit(stone, without);
  if (!with.empty()) emit(table.perceive(sm, latent.flipped(effect.axis).index()), with);
  return true;
}

}  // namespace

BeliefState BeliefState::observe_outcome(Percept before, PotionColor color, Percept after) const {
  std::vector<BeliefCell> kept;
  kept.reserve(cells_.size());
  for (const auto& cell : cells_) {
    split_cell(*space_, cell, before, index_of(color), [&](Percept out, GraphSet graphs) {
      if (out == after) kept.push_back({cell.maps, graphs});
    });
  }
  return BeliefState(*space_, std::move(kept));
}

std::vector<PredictedOutcome> BeliefState::partition(Percept stone, PotionColor color) const {
  std::vector<PredictedOutcome> outcomes;
  for (const auto& cell : cells_) {
    split_cell(*space_, cell, stone, index_of(color), [&](Percept out, GraphSet graphs) {
      auto it = std::find_if(outcomes.begin(), outcomes.end(), [&](const PredictedOutcome& o) { return o.after == out; });
      if (it == outcomes.end()) {
        outcomes.push_back({out, 0, 0.0, {}});
        it = std::prev(outcomes.end());
      }
      it->mass += space_->mass(graphs);
      it->cells.push_back({cell.maps, graphs});
    });
  }
  std::sort(outcomes.begin(), outcomes.end(), [](const auto& a, const auto& b) { return a.after < b.after; });
  std::uint64_t total = 0;
  for (const auto& o : outcomes) total += o.mass;
  for (auto& o : outcomes) o.probability = static_cast<double>(o.mass) / static_cast<double>(total);
  return outcomes;
}

std::vector<std::pair<Percept, std::uint64_t>> BeliefState::outcome_masses(Percept stone, PotionColor color) const {
  std::vector<std::pair<Percept, std::uint64_t>> out;
  for (const auto& cell : cells_) {
    split_cell(*space_, cell, stone, index_of(color), [&](Percept after, GraphSet graphs) {
      auto it = std::find_if(out.begin(), out.end(), [&](const auto& o) { return o.first == after; });
      if (it == out.end()) out.emplace_back(after, space_->mass(graphs));
      else it->second += space_->mass(graphs);
    });
  }
  std::sort(out.begin(), out.end());
  return out;
}

double BeliefState::entropy() const {
  return support_size_ == 0 ? 0.0 : std::log(static_cast<double>(support_size_));
}

std::vector<std::uint32_t> BeliefState::support() const {
  require_paired(*space_);
  std::vector<std::uint32_t> out;
  out.reserve(support_size_);
  for (const auto& cell : cells_)
    for (int g = 0; g < kNumGraphs; ++g)
      if (cell.graphs.test(g)) out.push_back(static_cast<std::uint32_t>(g) * kNumStoneMaps * kNumPotionMaps + cell.maps);
  std::sort(out.begin(), out.end());
  return out;
}

bool BeliefState::contains(std::uint32_t chemistry_index) const {
  require_paired(*space_);
  const std::uint32_t maps = chemistry_index % (kNumStoneMaps * kNumPotionMaps);
  const int graph = static_cast<int>(chemistry_index / (kNumStoneMaps * kNumPotionMaps));
  auto it = std::lower_bound(cells_.begin(), cells_.end(), maps,
                             [](const BeliefCell& c, std::uint32_t m) { return c.maps < m; });
  return it != cells_.end() && it->maps == maps && it->graphs.test(graph);
}

double BeliefState::weight(std::uint32_t chemistry_index) const {
  if (!contains(chemistry_index)) return 0.0;
  const int graph = static_cast<int>(chemistry_index / (kNumStoneMaps * kNumPotionMaps));
  return static_cast<double>(ChemistryTable::instance().graph_mass(graph)) / static_cast<double>(mass_);
}

ChemistryEncoding BeliefState::marginals() const {
  require_paired(*space_);
  ChemistryEncoding v = ChemistryEncoding::Zero();
  for (const auto& cell : cells_) {
    const auto w = static_cast<double>(space_->mass(cell.graphs));
    const auto sm = StoneMap::from_index(static_cast<int>(cell.maps / kNumPotionMaps));
    const auto pm = PotionMap::from_index(static_cast<int>(cell.maps % kNumPotionMaps));
    v[sm.rotation] += w;
    for (int i = 0; i < kNumAxes; ++i) {
      if ((sm.reflection >> i) & 1) v[4 + i] += w;
      if ((pm.reflection >> i) & 1) v[7 + i] += w;
    }
    v[10 + pm.permutation] += w;
    for (int e = 0; e < kNumEdges; ++e)
      v[16 + e] += static_cast<double>(space_->mass(cell.graphs & space_->graphs_with_edge(e)));
  }
  return v / static_cast<double>(mass_);
}

BeliefState init_belief(std::span<const Percept> percepts) {
  auto b = BeliefState::prior().observe_stones(percepts);
  if (b.empty()) throw InconsistentEvidence("no chemistry can produce the observed stones");
  return b;
}

BeliefState update_belief(const BeliefState& belief, Percept before, PotionColor color, Percept after) {
  auto b = belief.observe_outcome(before, color, after);
  if (b.empty()) throw InconsistentEvidence("no chemistry in the support predicts the observed outcome");
  return b;
}

}  // namespace alchemy
