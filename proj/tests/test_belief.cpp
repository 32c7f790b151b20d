#include <doctest.h>

#include <cmath>
#include <numeric>

#include "alchemy/belief.hpp"
#include "alchemy/env.hpp"
#include "oracles.hpp"

using namespace alchemy;

TEST_CASE("prior belief") {
  const auto prior = BeliefState::prior();
  CHECK(prior.support_size() == 167424);
  CHECK(prior.entropy() == doctest::Approx(std::log(167424.0)));
  CHECK(prior.support().size() == 167424);
  const auto m = prior.marginals();
  CHECK(m.segment(0, 4).sum() == doctest::Approx(1.0));
  CHECK(m[0] == doctest::Approx(0.25));
  CHECK(m[4] == doctest::Approx(0.5));
  CHECK(m[10] == doctest::Approx(1.0 / 6));
  // Edge marginals: each edge is missing in a fixed fraction of the graphs.
  const auto& table = ChemistryTable::instance();
  for (int e = 0; e < kNumEdges; ++e) {
    double p = 0.0;
    for (int g = 0; g < kNumGraphs; ++g)
      if (table.graph(g).has_edge(e))
        p += static_cast<double>(table.graph_mass(g)) / ChemistryTable::kGraphMassTotal;
    CHECK(m[16 + e] == doctest::Approx(p));
  }
}

TEST_CASE("weights follow the prior") {
  const auto prior = BeliefState::prior();
  const auto& table = ChemistryTable::instance();
  for (std::uint32_t i : {0u, 1536u, 20000u, 167423u}) CHECK(prior.weight(i) == doctest::Approx(table.prior(i)));
  const auto single = BeliefState::singleton(1234);
  CHECK(single.support_size() == 1);
  CHECK(single.entropy() == 0.0);
  CHECK(single.weight(1234) == 1.0);
  CHECK(single.marginals() == encode_chemistry(table.chemistry(1234)));
}

TEST_CASE("belief filtering matches brute force along random trajectories") {
  SymbolicAlchemy env;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    env.reset(seed);
    Rng rng(seed + 100);
    std::vector<oracle::Evidence> evidence{{env.present_stone_percepts(), {}, {}, {}}};
    auto belief = init_belief(env.present_stone_percepts());
    for (int step = 0; step < 6; ++step) {
      const auto actions = env.legal_actions();
      const auto action = actions[rng.uniform_int(static_cast<std::uint32_t>(actions.size()))];
      const auto r = env.step(action);
      if (action.kind != Action::Kind::use_potion) continue;
      evidence.push_back({{}, r.info.before, r.info.color, r.info.after});
      belief = update_belief(belief, r.info.before, r.info.color, r.info.after);
    }
    const auto expected = oracle::filter(evidence);
    CHECK(belief.support() == expected);
    CHECK(belief.support_size() == expected.size());
    CHECK(belief.contains(env.chemistry().index));
  }
}

TEST_CASE("partitions are exhaustive and match predictions") {
  SymbolicAlchemy env;
  env.reset(21);
  const auto stones = env.present_stone_percepts();
  const auto belief = init_belief(stones);
  const auto& table = ChemistryTable::instance();
  for (int color = 0; color < kNumColors; ++color) {
    const auto parts = belief.partition(stones[0], color_from_index(color));
    double p = 0.0;
    std::uint64_t n = 0;
    std::uint64_t mass = 0;
    for (const auto& part : parts) {
      p += part.probability;
      mass += part.mass;
      const auto sub = BeliefState::from_cells(belief.space(), part.cells);
      n += sub.support_size();
      CHECK(sub.mass() == part.mass);
      for (auto index : sub.support()) {
        const auto predicted = oracle::predict(table.chemistry(index), stones[0], color_from_index(color));
        REQUIRE(predicted.has_value());
        REQUIRE(*predicted == part.after);
      }
    }
    CHECK(p == doctest::Approx(1.0));
    CHECK(n == belief.support_size());
    CHECK(mass == belief.mass());
    const auto masses = belief.outcome_masses(stones[0], color_from_index(color));
    REQUIRE(masses.size() == parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) {
      CHECK(masses[i].first == parts[i].after);
      CHECK(masses[i].second == parts[i].mass);
    }
  }
}

TEST_CASE("observe_outcome equals the partition cell") {
  SymbolicAlchemy env;
  env.reset(22);
  const auto stones = env.present_stone_percepts();
  const auto belief = init_belief(stones);
  for (const auto& part : belief.partition(stones[1], PotionColor::yellow)) {
    const auto next = belief.observe_outcome(stones[1], PotionColor::yellow, part.after);
    CHECK(next == BeliefState::from_cells(belief.space(), part.cells));
  }
}

TEST_CASE("inconsistent evidence") {
  const auto belief = BeliefState::singleton(0);
  const Percept p = perceive_stone(LatentStone::from_index(0), StoneMap{});
  const auto wrong = perceive_stone(LatentStone::from_index(3), StoneMap{});
  CHECK(belief.observe_outcome(p, PotionColor::green, wrong).empty());
  CHECK_THROWS_AS(update_belief(belief, p, PotionColor::green, wrong), InconsistentEvidence);
}

TEST_CASE("entropy never increases under evidence") {
  SymbolicAlchemy env;
  for (std::uint64_t seed = 30; seed < 40; ++seed) {
    env.reset(seed);
    auto belief = init_belief(env.present_stone_percepts());
    double last = belief.entropy();
    CHECK(last <= std::log(167424.0) + 1e-12);
    while (!env.episode_over()) {
      const auto actions = env.legal_actions();
      const auto r = env.step(actions[actions.size() / 2]);
      if (r.info.outcome == OutcomeClass::value_increase || r.info.outcome == OutcomeClass::value_decrease ||
          r.info.outcome == OutcomeClass::no_effect)
        belief = update_belief(belief, r.info.before, r.info.color, r.info.after);
      CHECK(belief.entropy() <= last + 1e-12);
      last = belief.entropy();
      if (r.trial_ended && !r.episode_ended) {
        belief = belief.observe_stones(env.present_stone_percepts());
        CHECK(belief.entropy() <= last + 1e-12);
        last = belief.entropy();
      }
    }
  }
}

TEST_CASE("unpaired hypothesis space") {
  const auto& space = HypothesisSpace::unpaired();
  CHECK(space.num_potion_maps() == 720);
  CHECK_FALSE(space.is_paired());
  const auto prior = BeliefState::prior(space);
  CHECK(prior.support_size() == 109ULL * 32 * 720);
  // Every paired map appears among the unpaired bijections.
  const auto& paired = HypothesisSpace::paired();
  int matched = 0;
  for (int m = 0; m < paired.num_potion_maps(); ++m)
    for (int u = 0; u < space.num_potion_maps(); ++u) {
      bool same = true;
      for (int c = 0; c < kNumColors; ++c) same = same && paired.effect_of(m, c) == space.effect_of(u, c);
      if (same) ++matched;
    }
  CHECK(matched == 48);
}

TEST_CASE("GraphSet") {
  const auto all = GraphSet::all();
  CHECK(all.count() == 109);
  CHECK((~all).empty());
  const auto one = GraphSet::single(70);
  CHECK(one.test(70));
  CHECK(one.count() == 1);
  CHECK((~one).count() == 108);
  CHECK((one & ~one).empty());
}
