#include "alchemy/chemistry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <stdexcept>

namespace alchemy {

namespace {

constexpr std::array<std::string_view, kNumColors> kColorNames{"green", "red", "yellow", "orange", "turquoise", "pink"};

constexpr std::array<std::array<int, 3>, kNumPermutations> kPermutations{{
    {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

std::array<Precondition, 12> make_preconditions() {
  std::array<Precondition, 12> out{};
  std::size_t n = 0;
  for (int i = 0; i < kNumAxes; ++i)
    for (int j = 0; j < kNumAxes; ++j) {
      if (j == i) continue;
      for (int a : {-1, 1}) out[n++] = Precondition{i, j, a};
    }
  return out;
}

const std::array<Precondition, 12> kPreconditions = make_preconditions();

std::uint16_t edges_satisfying(std::span<const Precondition> preconditions) {
  std::uint16_t mask = 0x0FFF;
  for (const auto& p : preconditions) mask &= static_cast<std::uint16_t>(~p.removed_edges());
  return mask;
}

}  // namespace

LatentStone LatentStone::from_coords(const Coords& c) {
  int bits = 0;
  for (int i = 0; i < kNumAxes; ++i) {
    if (c[i] == 1) bits |= 1 << i;
    else if (c[i] != -1) throw std::invalid_argument("latent stone coordinates must be -1 or +1");
  }
  return from_index(bits);
}

std::string_view color_name(PotionColor c) { return kColorNames[static_cast<std::size_t>(index_of(c))]; }

PotionColor parse_color(std::string_view name) {
  for (int i = 0; i < kNumColors; ++i)
    if (kColorNames[static_cast<std::size_t>(i)] == name) return color_from_index(i);
  throw std::invalid_argument("unknown potion colour: " + std::string(name));
}

std::uint16_t Precondition::removed_edges() const {
  std::uint16_t mask = 0;
  for (int corner = 0; corner < kNumCorners; ++corner) {
    const auto stone = LatentStone::from_index(corner);
    if (stone.coord(edge_axis) != -1) continue;  // visit each edge once, from its low end
    if (stone.coord(gate_axis) != gate_value) mask |= static_cast<std::uint16_t>(1u << edge_index(stone, edge_axis));
  }
  return mask;
}

std::span<const Precondition> all_preconditions() { return kPreconditions; }

CausalGraph::CausalGraph(std::uint16_t edge_mask, std::vector<Precondition> generating_set)
    : edges_(edge_mask), preconditions_(std::move(generating_set)) {}

CausalGraph CausalGraph::from_preconditions(std::vector<Precondition> preconditions) {
  const auto mask = edges_satisfying(preconditions);
  return CausalGraph(mask, std::move(preconditions));
}

int CausalGraph::num_edges() const { return std::popcount(static_cast<unsigned>(edges_)); }

bool CausalGraph::connected() const {
  int seen = 1;
  int frontier = 1;
  while (frontier) {
    int next = 0;
    for (int c = 0; c < kNumCorners; ++c) {
      if (!((frontier >> c) & 1)) continue;
      const auto stone = LatentStone::from_index(c);
      for (int axis = 0; axis < kNumAxes; ++axis) {
        if (!has_edge(edge_index(stone, axis))) continue;
        const int n = stone.flipped(axis).index();
        if (!((seen >> n) & 1)) next |= 1 << n;
      }
    }
    seen |= next;
    frontier = next;
  }
  return seen == 0xFF;
}

LatentStone apply_potion(LatentStone stone, PotionEffect effect, const CausalGraph& graph) {
  if (stone.coord(effect.axis) != -effect.sign) return stone;  // would leave the cube
  if (!graph.has_edge(edge_index(stone, effect.axis))) return stone;
  return stone.flipped(effect.axis);
}

std::vector<CausalGraph> enumerate_graphs() {
  // Minimal generating set per distinct edge set over all precondition subsets.
  std::map<std::uint16_t, std::vector<Precondition>> best;
  for (unsigned subset = 0; subset < (1u << kPreconditions.size()); ++subset) {
    std::vector<Precondition> chosen;
    for (std::size_t k = 0; k < kPreconditions.size(); ++k)
      if ((subset >> k) & 1) chosen.push_back(kPreconditions[k]);
    const auto mask = edges_satisfying(chosen);
    if (!CausalGraph(mask, {}).connected()) continue;
    auto it = best.find(mask);
    if (it == best.end() || it->second.size() > chosen.size()) best[mask] = std::move(chosen);
  }
  std::vector<CausalGraph> graphs;
  graphs.reserve(best.size());
  for (auto& [mask, pre] : best) graphs.emplace_back(mask, std::move(pre));
  std::sort(graphs.begin(), graphs.end(), [](const CausalGraph& a, const CausalGraph& b) {
    if (a.num_preconditions() != b.num_preconditions()) return a.num_preconditions() < b.num_preconditions();
    return a.edge_mask() > b.edge_mask();
  });
  return graphs;
}

Eigen::Matrix3d StoneMap::matrix() const {
  Eigen::Matrix3d rotate = Eigen::Matrix3d::Identity();
  // 45 degree anticlockwise rotations with the two rotated axes rescaled by
  // sqrt(2)/2, which leaves entries of +-1/2.
  switch (rotation) {
    case 1: rotate << 1, 0, 0, 0, 0.5, -0.5, 0, 0.5, 0.5; break;
    case 2: rotate << 0.5, 0, 0.5, 0, 1, 0, -0.5, 0, 0.5; break;
    case 3: rotate << 0.5, -0.5, 0, 0.5, 0.5, 0, 0, 0, 1; break;
    default: break;
  }
  Eigen::Vector3d signs;
  for (int i = 0; i < kNumAxes; ++i) signs[i] = (reflection >> i) & 1 ? -1.0 : 1.0;
  return rotate * signs.asDiagonal();
}

Coords StoneMap::apply(LatentStone stone) const {
  const Eigen::Vector3d f = matrix() * stone.coords().cast<double>();
  return f.array().round().cast<int>().matrix();
}

std::span<const std::array<int, 3>> permutations() { return kPermutations; }

Eigen::Matrix3i PotionMap::matrix() const {
  const auto& pi = kPermutations[static_cast<std::size_t>(permutation)];
  Eigen::Matrix3i m = Eigen::Matrix3i::Zero();
  for (int r = 0; r < kNumAxes; ++r) m(r, pi[static_cast<std::size_t>(r)]) = (reflection >> r) & 1 ? -1 : 1;
  return m;
}

namespace {
PotionEffect effect_from_vector(const Coords& v) {
  for (int i = 0; i < kNumAxes; ++i)
    if (v[i] != 0) return {i, v[i]};
  throw std::logic_error("zero potion effect");
}
}  // namespace

PotionEffect PotionMap::apply(PotionEffect effect) const { return effect_from_vector(matrix() * effect.vector()); }

PotionEffect PotionMap::inverse(PotionEffect mapped) const {
  return effect_from_vector(matrix().transpose() * mapped.vector());
}

PotionColor color_of_potion(PotionEffect effect, const PotionMap& map) {
  return color_of_mapped_effect(map.apply(effect));
}

PotionEffect effect_of_color(PotionColor color, const PotionMap& map) {
  return map.inverse(PotionEffect::from_index(index_of(color)));
}

int feature_code(const Coords& f) { return feature_code(f[0], f[1], f[2]); }

Percept Percept::from_features(const Coords& features, int level) { return Percept(alchemy::feature_code(features), level); }

Coords Percept::features() const {
  const int c = feature_code();
  return {c % 3 - 1, (c / 3) % 3 - 1, c / 9 - 1};
}

Percept perceive_stone(LatentStone stone, const StoneMap& map) {
  return Percept::from_features(map.apply(stone), indicator_level(reward_of(stone)));
}

ChemistryEncoding encode_chemistry(const Chemistry& chemistry) {
  ChemistryEncoding v = ChemistryEncoding::Zero();
  v[chemistry.stone_map.rotation] = 1.0;
  for (int i = 0; i < kNumAxes; ++i) {
    v[4 + i] = (chemistry.stone_map.reflection >> i) & 1;
    v[7 + i] = (chemistry.potion_map.reflection >> i) & 1;
  }
  v[10 + chemistry.potion_map.permutation] = 1.0;
  const auto& graph = ChemistryTable::instance().graph(chemistry.graph);
  for (int e = 0; e < kNumEdges; ++e) v[16 + e] = graph.has_edge(e) ? 1.0 : 0.0;
  return v;
}

const ChemistryTable& ChemistryTable::instance() {
  static const ChemistryTable table;
  return table;
}

ChemistryTable::ChemistryTable() : graphs_(enumerate_graphs()) {
  if (graphs_.size() != static_cast<std::size_t>(kNumGraphs))
    throw std::logic_error("graph enumeration does not yield 109 configurations");
  for (int g = 0; g < kNumGraphs; ++g)
    tiers_[static_cast<std::size_t>(graphs_[static_cast<std::size_t>(g)].num_preconditions())].push_back(g);

  // n ~ U{0..3}, G ~ U(tier n): mass 192 / (4 |tier|), an integer for tier sizes 1, 12, 48, 48.
  graph_mass_.resize(graphs_.size());
  for (const auto& tier : tiers_) {
    if (tier.empty() || (kGraphMassTotal / 4) % tier.size() != 0)
      throw std::logic_error("graph tier sizes do not admit integer prior masses");
    for (int g : tier) graph_mass_[static_cast<std::size_t>(g)] = kGraphMassTotal / 4 / tier.size();
  }

  transition_.resize(static_cast<std::size_t>(kNumGraphs * kNumCorners * kNumEffects));
  for (int g = 0; g < kNumGraphs; ++g)
    for (int c = 0; c < kNumCorners; ++c)
      for (int e = 0; e < kNumEffects; ++e)
        transition_[static_cast<std::size_t>((g * kNumCorners + c) * kNumEffects + e)] = static_cast<std::int8_t>(
            apply_potion(LatentStone::from_index(c), PotionEffect::from_index(e), graph(g)).index());

  perceive_.resize(static_cast<std::size_t>(kNumStoneMaps * kNumCorners));
  inverse_.assign(static_cast<std::size_t>(kNumStoneMaps * kNumFeatureCodes), -1);
  for (int s = 0; s < kNumStoneMaps; ++s)
    for (int c = 0; c < kNumCorners; ++c) {
      const auto p = perceive_stone(LatentStone::from_index(c), StoneMap::from_index(s));
      perceive_[static_cast<std::size_t>(s * kNumCorners + c)] = p;
      inverse_[static_cast<std::size_t>(s * kNumFeatureCodes + p.feature_code())] = static_cast<std::int8_t>(c);
    }

  effect_of_color_.resize(static_cast<std::size_t>(kNumPotionMaps * kNumColors));
  for (int m = 0; m < kNumPotionMaps; ++m)
    for (int k = 0; k < kNumColors; ++k)
      effect_of_color_[static_cast<std::size_t>(m * kNumColors + k)] =
          static_cast<std::int8_t>(effect_of_color(color_from_index(k), PotionMap::from_index(m)).index());
}

Chemistry ChemistryTable::chemistry(std::uint32_t index) const {
  if (index >= kNumChemistries) throw std::out_of_range("chemistry index out of range");
  Chemistry c;
  c.index = index;
  c.potion_map = PotionMap::from_index(static_cast<int>(index % kNumPotionMaps));
  c.stone_map = StoneMap::from_index(static_cast<int>((index / kNumPotionMaps) % kNumStoneMaps));
  c.graph = static_cast<int>(index / (kNumPotionMaps * kNumStoneMaps));
  return c;
}

double ChemistryTable::prior(std::uint32_t index) const {
  const auto g = static_cast<int>(index / (kNumPotionMaps * kNumStoneMaps));
  return static_cast<double>(graph_mass(g)) / static_cast<double>(kGraphMassTotal * kNumStoneMaps * kNumPotionMaps);
}

int ChemistryTable::sample_graph(Rng& rng) const {
  const auto& t = tiers_[rng.uniform_int(4)];
  return t[rng.uniform_int(static_cast<std::uint32_t>(t.size()))];
}

Chemistry ChemistryTable::sample_chemistry(Rng& rng) const {
  const int graph = sample_graph(rng);
  StoneMap stone_map;
  stone_map.rotation = static_cast<int>(rng.uniform_int(kNumRotations));
  stone_map.reflection = static_cast<int>(rng.uniform_int(kNumReflections));
  PotionMap potion_map;
  potion_map.permutation = static_cast<int>(rng.uniform_int(kNumPermutations));
  potion_map.reflection = static_cast<int>(rng.uniform_int(kNumReflections));
  return chemistry(index_of(graph, stone_map.index(), potion_map.index()));
}

EnumerationCounts enumeration_counts() {
  const auto& table = ChemistryTable::instance();
  EnumerationCounts counts;
  counts.graphs = table.graphs().size();
  for (int n = 0; n < 4; ++n) counts.per_tier[static_cast<std::size_t>(n)] = table.tier(n).size();
  counts.chemistries = static_cast<std::uint64_t>(counts.graphs) * kNumStoneMaps * kNumPotionMaps;
  auto choose = [](std::uint64_t n, std::uint64_t k) {
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  };
  // Multisets of 3 stones over 8 corners and 12 potions over 6 colours.
  counts.trial_initialisations = counts.chemistries * choose(8 + 3 - 1, 3) * choose(6 + 12 - 1, 12);
  return counts;
}

}  // namespace alchemy
