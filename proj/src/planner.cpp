#include "alchemy/planner.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace alchemy {

namespace {

// Root tie-breaking margin: a later action must beat the incumbent by more
// than this to be chosen.
constexpr double kTieMargin = 1e-9;

// Pruning only fires when a bound clears its threshold by this much, which
// keeps rounding in the threshold arithmetic from cutting a branch whose true
// value lies just above it.
constexpr double kPruneSlack = 1e-10;

// The known-chemistry table does not depend on the belief, so it survives
// clear() until it grows past this many entries.
constexpr std::size_t kMaxKnownValues = std::size_t{1} << 22;

constexpr double kNoThreshold = -std::numeric_limits<double>::infinity();

template <typename Stones>
void check_limits(const Stones& stones, std::span<const PotionColor> potions) {
  if (stones.size() > static_cast<std::size_t>(kMaxPlannerStones))
    throw std::invalid_argument("planner supports at most 9 stones");
  std::array<int, kNumColors> counts{};
  for (auto c : potions)
    if (++counts[static_cast<std::size_t>(index_of(c))] > kMaxPlannerPotionsPerColor)
      throw std::invalid_argument("planner supports at most 31 potions of one colour");
}

int capped_steps(int steps_left, int num_stones, std::span<const std::uint8_t, kNumColors> counts) {
  int total = num_stones;
  for (auto c : counts) total += c;
  return std::clamp(steps_left, 0, total);
}

/// Lookahead covering every remaining potion is exact, so it is stored as
/// that count to share cache entries.
int capped_lookahead(int lookahead, std::span<const std::uint8_t, kNumColors> counts) {
  int potions = 0;
  for (auto c : counts) potions += c;
  return std::clamp(lookahead, 0, potions);
}

/// True when every remaining stone and potion can still be used, in which
/// case the order of deposits does not matter.
bool steps_to_spare(int steps, int num_stones, std::span<const std::uint8_t, kNumColors> counts) {
  int total = num_stones;
  for (auto c : counts) total += c;
  return steps >= total;
}

}  // namespace

double stone_value_upper_bound(std::span<const int> rewards, int potions) {
  std::vector<int> needs;
  std::vector<double> partial;
  for (int r : rewards) {
    const int sum = r == 15 ? 3 : r;
    needs.push_back((3 - sum) / 2);
    partial.push_back(std::clamp(sum + 2 * potions, 0, 1));
  }
  std::sort(needs.begin(), needs.end());
  int reachable = 0;
  int left = potions;
  for (int k : needs) {
    if (k > left) break;
    left -= k;
    ++reachable;
  }
  std::sort(partial.begin(), partial.end(), std::greater<>());
  double bound = 15.0 * reachable;
  for (std::size_t i = 0; i + static_cast<std::size_t>(reachable) < partial.size(); ++i) bound += partial[i];
  return bound;
}

// ---------------------------------------------------------------------------
// Ideal observer

IdealObserverPlanner::IdealObserverPlanner(PlannerOptions options) : options_(options) {}

void IdealObserverPlanner::clear() {
  bounds_.clear();
  if (known_.size() > kMaxKnownValues) known_.clear();
  views_.clear();
  view_index_.clear();
  partitions_.clear();
  values_.clear();
  stats_ = {};
}

const PlannerStats& IdealObserverPlanner::stats() const {
  stats_.beliefs = views_.size();
  return stats_;
}

std::size_t IdealObserverPlanner::KeyHash::operator()(const Key& k) const {
  return static_cast<std::size_t>(splitmix64(k.stones ^ splitmix64(k.counts_steps ^ (std::uint64_t{k.belief} << 40))));
}

IdealObserverPlanner::Key IdealObserverPlanner::key_of(const Node& node) {
  Key key{0, 0, node.belief};
  for (int i = 0; i < node.num_stones; ++i)
    key.stones |= static_cast<std::uint64_t>(node.stones[static_cast<std::size_t>(i)].packed() + 1) << (7 * i);
  for (int k = 0; k < kNumColors; ++k)
    key.counts_steps |= static_cast<std::uint64_t>(node.counts[static_cast<std::size_t>(k)]) << (5 * k);
  key.counts_steps |= static_cast<std::uint64_t>(node.steps) << 32;
  key.counts_steps |= static_cast<std::uint64_t>(node.lookahead) << 48;
  return key;
}

double IdealObserverPlanner::upper_bound(const Node& node) {
  std::array<int, kMaxPlannerStones> rewards{};
  for (int i = 0; i < node.num_stones; ++i) rewards[static_cast<std::size_t>(i)] = node.stones[static_cast<std::size_t>(i)].reward();
  int potions = 0;
  for (auto c : node.counts) potions += c;
  const double budget = stone_value_upper_bound(std::span(rewards.data(), static_cast<std::size_t>(node.num_stones)),
                                                std::min(potions, node.steps));
  return std::min(budget, informed_bound(node) + kPruneSlack);
}

namespace {

constexpr int kCodeEffectShift = 12;
constexpr int kCodeStoneMapShift = 30;
constexpr std::uint64_t kDeadColor = 7;

int code_effect(std::uint64_t code, int color) {
  return static_cast<int>((code >> (kCodeEffectShift + 3 * color)) & 7);
}

/// Drops the effects of colours outside `live` and the edges no live colour moves along.
std::uint64_t restrict_code(std::uint64_t code, unsigned live) {
  std::uint64_t out = code & ~((std::uint64_t{1} << kCodeStoneMapShift) - 1);
  std::uint64_t edges = 0;
  for (int k = 0; k < kNumColors; ++k) {
    const int e = code_effect(code, k);
    if (!((live >> k) & 1) || e == static_cast<int>(kDeadColor)) {
      out |= kDeadColor << (kCodeEffectShift + 3 * k);
      continue;
    }
    out |= static_cast<std::uint64_t>(e) << (kCodeEffectShift + 3 * k);
    edges |= std::uint64_t{0xF} << (4 * (e / 2));
  }
  return out | (code & edges);
}

unsigned live_colors(std::span<const std::uint8_t, kNumColors> counts) {
  unsigned live = 0;
  for (int k = 0; k < kNumColors; ++k)
    if (counts[static_cast<std::size_t>(k)] > 0) live |= 1u << k;
  return live;
}

}  // namespace

const std::vector<KnownChemistryValues::Route>& KnownChemistryValues::routes(std::uint16_t edges, int start) {
  const auto key = (std::size_t{edges} << 3) | static_cast<std::size_t>(start);
  if (routed_[key]) return routes_[key];
  std::vector<Route> found;
  auto dominated = [](const Route& a, const Route& b) {
    if (a.reward > b.reward) return false;
    for (int e = 0; e < kNumEffects; ++e)
      if (b.need[static_cast<std::size_t>(e)] > a.need[static_cast<std::size_t>(e)]) return false;
    return true;
  };
  auto offer = [&](const Route& r) {
    if (r.reward <= 0) return;
    for (const auto& f : found)
      if (dominated(r, f)) return;
    std::erase_if(found, [&](const Route& f) { return dominated(f, r); });
    found.push_back(r);
  };
  // Simple paths suffice: a walk that revisits a corner needs a superset of
  // the potions of the path with the loop cut out.
  Route route;
  unsigned visited = 1u << start;
  auto walk = [&](auto&& self, LatentStone at) -> void {
    route.reward = reward_of(at);
    offer(route);
    for (int axis = 0; axis < 3; ++axis) {
      const auto next = at.flipped(axis);
      if ((visited >> next.index()) & 1 || !((edges >> edge_index(at, axis)) & 1)) continue;
      const auto e = static_cast<std::size_t>(2 * axis + (next.coord(axis) < 0 ? 1 : 0));
      visited |= 1u << next.index();
      ++route.need[e];
      ++route.uses;
      self(self, next);
      --route.need[e];
      --route.uses;
      visited &= ~(1u << next.index());
    }
  };
  walk(walk, LatentStone::from_index(start));
  std::sort(found.begin(), found.end(), [](const Route& a, const Route& b) { return a.reward > b.reward; });
  routed_[key] = true;
  routes_[key] = std::move(found);
  return routes_[key];
}

double KnownChemistryValues::value(std::uint16_t edges, std::span<const std::uint8_t, kNumEffects> counts,
                                   std::span<const std::uint8_t> stones, int steps) {
  if (stones.empty() || steps <= 0) return 0.0;
  std::array<std::uint8_t, kMaxPlannerStones> sorted{};
  const auto n = stones.size();
  std::copy(stones.begin(), stones.end(), sorted.begin());
  std::sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n));
  int total = static_cast<int>(n);
  for (auto c : counts) total += c;
  steps = std::min(steps, total);
  Key key{edges, 0};
  for (int e = 0; e < kNumEffects; ++e) key.first |= std::uint64_t{counts[static_cast<std::size_t>(e)]} << (12 + 5 * e);
  key.first |= static_cast<std::uint64_t>(steps) << 42;
  for (std::size_t i = 0; i < n; ++i) key.second |= std::uint64_t{sorted[i] + 1u} << (4 * i);
  if (auto it = values_.find(key); it != values_.end()) return it->second;

  std::array<const std::vector<Route>*, kMaxPlannerStones> options{};
  for (std::size_t i = 0; i < n; ++i) options[i] = &routes(edges, sorted[i]);
  std::array<std::uint8_t, kNumEffects> left{};
  std::copy(counts.begin(), counts.end(), left.begin());
  // Each stone takes one route or stays; a deposit costs a step like a potion.
  int best = 0;
  auto choose = [&](auto&& self, std::size_t i, int score, int steps_left, int ceiling) -> void {
    if (score + ceiling <= best) return;
    if (i == n) {
      best = score;
      return;
    }
    for (const auto& r : *options[i]) {
      if (r.uses + 1 > steps_left) continue;
      bool fits = true;
      for (int e = 0; e < kNumEffects && fits; ++e) fits = r.need[static_cast<std::size_t>(e)] <= left[static_cast<std::size_t>(e)];
      if (!fits) continue;
      for (int e = 0; e < kNumEffects; ++e) left[static_cast<std::size_t>(e)] -= r.need[static_cast<std::size_t>(e)];
      self(self, i + 1, score + r.reward, steps_left - r.uses - 1, ceiling - 15);
      for (int e = 0; e < kNumEffects; ++e) left[static_cast<std::size_t>(e)] += r.need[static_cast<std::size_t>(e)];
    }
    self(self, i + 1, score, steps_left, ceiling - 15);
  };
  choose(choose, 0, 0, steps, 15 * static_cast<int>(n));
  values_.emplace(key, static_cast<double>(best));
  return best;
}

double IdealObserverPlanner::informed_bound(const Node& node) {
  const Key key = key_of(node);
  if (auto it = bounds_.find(key); it != bounds_.end()) return it->second;
  const auto& table = ChemistryTable::instance();
  std::uint64_t total = 0;
  double weighted = 0.0;
  std::array<std::uint8_t, kMaxPlannerStones> latents{};
  for (const auto& [code, mass] : views_[node.belief]) {
    const int sm = static_cast<int>(code >> kCodeStoneMapShift);
    bool consistent = true;
    for (int i = 0; i < node.num_stones && consistent; ++i) {
      const auto p = node.stones[static_cast<std::size_t>(i)];
      const int latent = table.latent_of(sm, p.feature_code());
      consistent = latent >= 0 && table.perceive(sm, latent) == p;
      latents[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(latent);
    }
    if (!consistent) continue;
    std::array<std::uint8_t, kNumEffects> counts{};
    for (int k = 0; k < kNumColors; ++k) {
      const auto n = node.counts[static_cast<std::size_t>(k)];
      if (n > 0) counts[static_cast<std::size_t>(code_effect(code, k))] += n;
    }
    total += mass;
    weighted += static_cast<double>(mass) *
                known_.value(static_cast<std::uint16_t>(code & 0xFFF), counts,
                             std::span(latents.data(), static_cast<std::size_t>(node.num_stones)), node.steps);
  }
  const double bound = total == 0 ? 0.0 : weighted / static_cast<double>(total);
  bounds_.emplace(key, bound);
  return bound;
}

std::uint32_t IdealObserverPlanner::intern(View view) {
  std::sort(view.begin(), view.end());
  std::size_t n = 0;
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (n > 0 && view[n - 1].first == view[i].first) view[n - 1].second += view[i].second;
    else view[n++] = view[i];
  }
  view.resize(n);
  std::uint64_t d = 0;
  for (const auto& e : view) d = std::gcd(d, e.second);
  std::uint64_t h = 0x9E11;
  for (auto& e : view) {
    e.second /= d;
    h = splitmix64(h ^ splitmix64(e.first ^ (e.second << 48)));
  }
  auto [lo, hi] = view_index_.equal_range(h);
  for (auto it = lo; it != hi; ++it)
    if (views_[it->second] == view) return it->second;
  const auto id = static_cast<std::uint32_t>(views_.size());
  views_.push_back(std::move(view));
  view_index_.emplace(h, id);
  return id;
}

IdealObserverPlanner::Partition IdealObserverPlanner::partition(const Node& node, int stone, int color) {
  const Percept percept = node.stones[static_cast<std::size_t>(stone)];
  const bool last = node.counts[static_cast<std::size_t>(color)] == 1;
  const std::uint64_t key = (std::uint64_t{node.belief} << 16) |
                            static_cast<std::uint64_t>((percept.packed() * kNumColors + color) * 2 + last);
  if (options_.memoize) {
    if (auto it = partitions_.find(key); it != partitions_.end()) return it->second;
  }
  ++stats_.partitions;
  const auto& table = ChemistryTable::instance();
  unsigned live = live_colors(node.counts);
  if (last) live &= ~(1u << color);
  std::vector<std::pair<Percept, View>> groups;
  for (const auto& [code, mass] : views_[node.belief]) {
    const int sm = static_cast<int>(code >> kCodeStoneMapShift);
    const int latent_index = table.latent_of(sm, percept.feature_code());
    if (latent_index < 0 || table.perceive(sm, latent_index) != percept) continue;
    const auto latent = LatentStone::from_index(latent_index);
    const auto effect = PotionEffect::from_index(code_effect(code, color));
    Percept after = percept;
    if (latent.coord(effect.axis) == -effect.sign && ((code >> edge_index(latent, effect.axis)) & 1))
      after = table.perceive(sm, latent.flipped(effect.axis).index());
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == after; });
    if (it == groups.end()) {
      groups.emplace_back(after, View{});
      it = std::prev(groups.end());
    }
    it->second.emplace_back(restrict_code(code, live), mass);
  }
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  Partition p;
  for (auto& [after, view] : groups) {
    std::uint64_t mass = 0;
    for (const auto& e : view) mass += e.second;
    p.children.push_back({after, intern(std::move(view)), mass});
    p.total += mass;
  }
  if (options_.memoize) partitions_.emplace(key, p);
  return p;
}

IdealObserverPlanner::Node IdealObserverPlanner::make_root(std::span<const Percept> stones,
                                                           std::span<const PotionColor> potions,
                                                           const BeliefState& belief, int steps_left) {
  check_limits(stones, potions);
  Node root;
  root.num_stones = static_cast<int>(stones.size());
  std::copy(stones.begin(), stones.end(), root.stones.begin());
  std::sort(root.stones.begin(), root.stones.begin() + root.num_stones);
  for (auto c : potions) ++root.counts[static_cast<std::size_t>(index_of(c))];
  const auto& space = belief.space();
  const auto& table = ChemistryTable::instance();
  const auto npm = static_cast<std::uint32_t>(space.num_potion_maps());
  const unsigned live = live_colors(root.counts);
  View view;
  for (const auto& cell : belief.cells()) {
    std::uint64_t code = std::uint64_t{cell.maps / npm} << kCodeStoneMapShift;
    for (int k = 0; k < kNumColors; ++k)
      code |= static_cast<std::uint64_t>(space.effect_of(static_cast<int>(cell.maps % npm), k)) << (kCodeEffectShift + 3 * k);
    for (int g = 0; g < kNumGraphs; ++g)
      if (cell.graphs.test(g)) view.emplace_back(restrict_code(code | table.graph(g).edge_mask(), live), table.graph_mass(g));
  }
  root.belief = intern(std::move(view));
  root.steps = capped_steps(steps_left, root.num_stones, root.counts);
  root.lookahead = capped_lookahead(options_.lookahead, root.counts);
  return root;
}

double IdealObserverPlanner::deposit_value(const Node& node, int stone, double threshold) {
  Node child = node;
  const auto reward = node.stones[static_cast<std::size_t>(stone)].reward();
  std::copy(node.stones.begin() + stone + 1, node.stones.begin() + node.num_stones, child.stones.begin() + stone);
  --child.num_stones;
  --child.steps;
  return reward + value(child, threshold - reward);
}

IdealObserverPlanner::Expansion IdealObserverPlanner::expand(const Node& node, int stone, int color) {
  Expansion x;
  x.part = partition(node, stone, color);
  x.children.resize(x.part.children.size());
  x.bounds.resize(x.part.children.size());
  for (std::size_t i = 0; i < x.part.children.size(); ++i) {
    const auto& c = x.part.children[i];
    Node& child = x.children[i];
    child = node;
    child.stones[static_cast<std::size_t>(stone)] = c.after;
    std::sort(child.stones.begin(), child.stones.begin() + child.num_stones);
    --child.counts[static_cast<std::size_t>(color)];
    child.belief = c.belief;
    --child.steps;
    child.lookahead = capped_lookahead(child.lookahead - 1, child.counts);
    x.bounds[i] = options_.bound_pruning ? upper_bound(child) : std::numeric_limits<double>::infinity();
    x.optimistic += static_cast<double>(c.mass) * x.bounds[i];
  }
  return x;
}

double IdealObserverPlanner::potion_value(const Node& node, int stone, int color, double threshold) {
  return evaluate(expand(node, stone, color), threshold);
}

double IdealObserverPlanner::evaluate(const Expansion& x, double threshold) {
  const auto total = static_cast<double>(x.part.total);
  if (!options_.bound_pruning) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.part.children.size(); ++i)
      sum += static_cast<double>(x.part.children[i].mass) * value(x.children[i], kNoThreshold);
    return sum / total;
  }
  // Mass-weighted sum of exact child values where known and upper bounds
  // elsewhere; it never falls below the true weighted value.
  double optimistic = x.optimistic;
  const double target = threshold * total;
  if (optimistic <= target - kPruneSlack * total) return optimistic / total;
  for (std::size_t i = 0; i < x.part.children.size(); ++i) {
    const auto mass = static_cast<double>(x.part.children[i].mass);
    const double others = optimistic - mass * x.bounds[i];
    const double v = value(x.children[i], (target - others) / mass - kPruneSlack);
    optimistic = others + mass * v;
    if (optimistic <= target - kPruneSlack * total) return optimistic / total;
  }
  return optimistic / total;
}

double IdealObserverPlanner::value(const Node& node, double threshold) {
  if (node.num_stones == 0 || node.steps == 0) return 0.0;
  if (node.lookahead == 0) return informed_bound(node);
  const double bound = options_.bound_pruning ? upper_bound(node) : std::numeric_limits<double>::infinity();
  if (bound <= threshold) return bound;
  Key key{};
  if (options_.memoize) {
    key = key_of(node);
    if (auto it = values_.find(key); it != values_.end()) {
      if (it->second.exact || it->second.value <= threshold) {
        ++stats_.cache_hits;
        return it->second.value;
      }
    }
  }
  ++stats_.nodes_expanded;
  double best = 0.0;
  // Largest value returned by any option; when no option beats the threshold
  // this is an upper bound on the node value.
  double reported = 0.0;
  auto take = [&](double v) {
    reported = std::max(reported, v);
    best = std::max(best, v);
  };
  if (steps_to_spare(node.steps, node.num_stones, node.counts)) {
    // Deposits commute with everything else, so they can all wait until the
    // end of the trial.
    for (int i = 0; i < node.num_stones; ++i) best += std::max(0, node.stones[static_cast<std::size_t>(i)].reward());
    reported = best;
  } else {
    // Depositing a negative stone is never better than leaving it, so only
    // positive deposits are searched.
    for (int i = 0; i < node.num_stones; ++i) {
      const auto s = node.stones[static_cast<std::size_t>(i)];
      if ((i > 0 && s == node.stones[static_cast<std::size_t>(i - 1)]) || s.reward() < 0) continue;
      take(deposit_value(node, i, std::max(threshold, best)));
    }
  }
  if (best < bound) {
    std::vector<Expansion> options;
    for (int i = 0; i < node.num_stones; ++i) {
      if (i > 0 && node.stones[static_cast<std::size_t>(i)] == node.stones[static_cast<std::size_t>(i - 1)]) continue;
      for (int k = 0; k < kNumColors; ++k) {
        if (node.counts[static_cast<std::size_t>(k)] == 0) continue;
        auto x = expand(node, i, k);
        // A potion known to leave the stone alone only wastes itself.
        if (options_.bound_pruning && x.part.children.size() == 1 &&
            x.part.children.front().after == node.stones[static_cast<std::size_t>(i)])
          continue;
        x.optimistic /= static_cast<double>(x.part.total);
        options.push_back(std::move(x));
      }
    }
    if (options_.bound_pruning)
      std::stable_sort(options.begin(), options.end(),
                       [](const Expansion& a, const Expansion& b) { return a.optimistic > b.optimistic; });
    for (auto& x : options) {
      if (best >= bound) break;
      if (options_.bound_pruning && x.optimistic <= std::max(threshold, best) - kPruneSlack) {
        reported = std::max(reported, x.optimistic);
        continue;
      }
      x.optimistic *= static_cast<double>(x.part.total);
      take(evaluate(x, std::max(threshold, best)));
    }
  }
  const bool exact = best > threshold;
  const double result = exact ? best : reported;
  if (options_.memoize) {
    auto [it, inserted] = values_.try_emplace(key, Entry{result, exact});
    if (!inserted) it->second = Entry{result, exact};
  }
  return result;
}

std::vector<std::pair<PlannedAction, double>> IdealObserverPlanner::action_values(std::span<const Percept> stones,
                                                                                  std::span<const PotionColor> potions,
                                                                                  const BeliefState& belief,
                                                                                  int steps_left) {
  const Node root = make_root(stones, potions, belief, steps_left);
  std::vector<std::pair<PlannedAction, double>> out{{PlannedAction{}, 0.0}};
  if (root.steps == 0) return out;
  auto sorted_index = [&](Percept p) {
    return static_cast<int>(std::find(root.stones.begin(), root.stones.begin() + root.num_stones, p) -
                            root.stones.begin());
  };
  for (int j = 0; j < static_cast<int>(stones.size()); ++j)
    out.push_back({{PlannedAction::Kind::deposit, j, -1}, deposit_value(root, sorted_index(stones[static_cast<std::size_t>(j)]), kNoThreshold)});
  for (int j = 0; j < static_cast<int>(stones.size()); ++j) {
    std::array<double, kNumColors> cache;
    std::array<bool, kNumColors> done{};
    for (int p = 0; p < static_cast<int>(potions.size()); ++p) {
      const auto k = static_cast<std::size_t>(index_of(potions[static_cast<std::size_t>(p)]));
      if (!done[k]) {
        cache[k] = potion_value(root, sorted_index(stones[static_cast<std::size_t>(j)]), static_cast<int>(k), kNoThreshold);
        done[k] = true;
      }
      out.push_back({{PlannedAction::Kind::use_potion, j, p}, cache[k]});
    }
  }
  return out;
}

PlanResult IdealObserverPlanner::plan(std::span<const Percept> stones, std::span<const PotionColor> potions,
                                      const BeliefState& belief, int steps_left) {
  const Node root = make_root(stones, potions, belief, steps_left);
  PlanResult result;
  if (root.steps == 0 || root.num_stones == 0) return result;
  const double bound = options_.bound_pruning ? upper_bound(root) : std::numeric_limits<double>::infinity();
  auto consider = [&](PlannedAction a, double v) {
    if (v > result.value + kTieMargin) result = {v, a};
  };
  auto sorted_index = [&](Percept p) {
    return static_cast<int>(std::find(root.stones.begin(), root.stones.begin() + root.num_stones, p) -
                            root.stones.begin());
  };
  for (int j = 0; j < static_cast<int>(stones.size()); ++j) {
    if (stones[static_cast<std::size_t>(j)].reward() < 0) continue;
    consider({PlannedAction::Kind::deposit, j, -1},
             deposit_value(root, sorted_index(stones[static_cast<std::size_t>(j)]), result.value + kTieMargin));
  }
  for (int j = 0; j < static_cast<int>(stones.size()) && result.value < bound; ++j) {
    std::array<bool, kNumColors> done{};
    for (int p = 0; p < static_cast<int>(potions.size()) && result.value < bound; ++p) {
      const auto k = static_cast<std::size_t>(index_of(potions[static_cast<std::size_t>(p)]));
      if (done[k]) continue;  // same value as the earlier slot of this colour
      done[k] = true;
      consider({PlannedAction::Kind::use_potion, j, p},
               potion_value(root, sorted_index(stones[static_cast<std::size_t>(j)]), static_cast<int>(k),
                            result.value + kTieMargin));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Oracle

LatentStone OraclePlanner::apply(LatentStone stone, int color) const {
  const auto& table = ChemistryTable::instance();
  const int effect = table.effect_of(chemistry_.potion_map.index(), color);
  return LatentStone::from_index(table.transition(chemistry_.graph, stone.index(), effect));
}

double OraclePlanner::deposit_value(const Node& node, int stone) {
  Node child = node;
  const int reward = reward_of(node.stones[static_cast<std::size_t>(stone)]);
  std::copy(node.stones.begin() + stone + 1, node.stones.begin() + node.num_stones, child.stones.begin() + stone);
  --child.num_stones;
  --child.steps;
  return reward + value(child);
}

double OraclePlanner::potion_value(const Node& node, int stone, int color) {
  Node child = node;
  child.stones[static_cast<std::size_t>(stone)] = apply(node.stones[static_cast<std::size_t>(stone)], color);
  std::sort(child.stones.begin(), child.stones.begin() + child.num_stones,
            [](LatentStone a, LatentStone b) { return a.index() < b.index(); });
  --child.counts[static_cast<std::size_t>(color)];
  --child.steps;
  return value(child);
}

double OraclePlanner::value(const Node& node) {
  if (node.num_stones == 0 || node.steps == 0) return 0.0;
  Key key{0, 0};
  if (options_.memoize) {
    for (int i = 0; i < node.num_stones; ++i)
      key.first |= static_cast<std::uint64_t>(node.stones[static_cast<std::size_t>(i)].index() + 1) << (4 * i);
    key.first |= static_cast<std::uint64_t>(node.steps) << 40;
    for (int k = 0; k < kNumColors; ++k)
      key.second |= static_cast<std::uint64_t>(node.counts[static_cast<std::size_t>(k)]) << (5 * k);
    if (auto it = values_.find(key); it != values_.end()) return it->second;
  }
  double best = 0.0;
  std::array<int, kMaxPlannerStones> rewards{};
  for (int i = 0; i < node.num_stones; ++i) rewards[static_cast<std::size_t>(i)] = reward_of(node.stones[static_cast<std::size_t>(i)]);
  int potions = 0;
  for (auto c : node.counts) potions += c;
  const double bound = options_.bound_pruning
                           ? stone_value_upper_bound(std::span(rewards.data(), static_cast<std::size_t>(node.num_stones)),
                                                     std::min(potions, node.steps))
                           : std::numeric_limits<double>::infinity();
  if (steps_to_spare(node.steps, node.num_stones, node.counts)) {
    for (int i = 0; i < node.num_stones; ++i) best += std::max(0, rewards[static_cast<std::size_t>(i)]);
  } else {
    for (int i = 0; i < node.num_stones; ++i) {
      const auto s = node.stones[static_cast<std::size_t>(i)];
      if ((i > 0 && s == node.stones[static_cast<std::size_t>(i - 1)]) || reward_of(s) < 0) continue;
      best = std::max(best, deposit_value(node, i));
    }
  }
  for (int i = 0; i < node.num_stones && best < bound; ++i) {
    if (i > 0 && node.stones[static_cast<std::size_t>(i)] == node.stones[static_cast<std::size_t>(i - 1)]) continue;
    for (int k = 0; k < kNumColors && best < bound; ++k)
      if (node.counts[static_cast<std::size_t>(k)] > 0) best = std::max(best, potion_value(node, i, k));
  }
  if (options_.memoize) values_.emplace(key, best);
  return best;
}

PlanResult OraclePlanner::plan(std::span<const LatentStone> stones, std::span<const PotionColor> potions,
                               const Chemistry& chemistry, int steps_left) {
  check_limits(stones, potions);
  if (!have_chemistry_ || chemistry.index != chemistry_.index) {
    values_.clear();
    chemistry_ = chemistry;
    have_chemistry_ = true;
  }
  Node root;
  root.num_stones = static_cast<int>(stones.size());
  std::copy(stones.begin(), stones.end(), root.stones.begin());
  auto by_index = [](LatentStone a, LatentStone b) { return a.index() < b.index(); };
  std::sort(root.stones.begin(), root.stones.begin() + root.num_stones, by_index);
  for (auto c : potions) ++root.counts[static_cast<std::size_t>(index_of(c))];
  root.steps = capped_steps(steps_left, root.num_stones, root.counts);

  PlanResult result;
  if (root.steps == 0 || root.num_stones == 0) return result;
  auto sorted_index = [&](LatentStone s) {
    return static_cast<int>(std::find(root.stones.begin(), root.stones.begin() + root.num_stones, s) -
                            root.stones.begin());
  };
  auto consider = [&](PlannedAction a, double v) {
    if (v > result.value + kTieMargin) result = {v, a};
  };
  for (int j = 0; j < static_cast<int>(stones.size()); ++j) {
    if (reward_of(stones[static_cast<std::size_t>(j)]) < 0) continue;
    consider({PlannedAction::Kind::deposit, j, -1}, deposit_value(root, sorted_index(stones[static_cast<std::size_t>(j)])));
  }
  for (int j = 0; j < static_cast<int>(stones.size()); ++j) {
    std::array<bool, kNumColors> done{};
    for (int p = 0; p < static_cast<int>(potions.size()); ++p) {
      const auto k = static_cast<std::size_t>(index_of(potions[static_cast<std::size_t>(p)]));
      if (done[k]) continue;
      done[k] = true;
      consider({PlannedAction::Kind::use_potion, j, p},
               potion_value(root, sorted_index(stones[static_cast<std::size_t>(j)]), static_cast<int>(k)));
    }
  }
  return result;
}

}  // namespace alchemy
