#include <doctest.h>

#include <array>
#include <cstdlib>
#include <sstream>

#include "alchemy/env.hpp"

using namespace alchemy;

TEST_CASE("observation layout and sizes") {
  SymbolicAlchemy env;
  const auto obs = env.reset(1);
  CHECK(obs.size() == 110);
  CHECK(env.config().observation_size() == 110);

  EnvConfig truth;
  truth.augment_ground_truth = true;
  SymbolicAlchemy env2(truth);
  const auto obs2 = env2.reset(1);
  CHECK(obs2.size() == 138);
  CHECK(obs2.tail(28) == encode_chemistry(env2.chemistry()));

  EnvConfig both = truth;
  both.augment_belief = true;
  CHECK(both.observation_size() == 166);

  // Stone blocks first: present flag, features, indicator one-hot.
  const auto percepts = env.present_stone_percepts();
  for (int s = 0; s < 3; ++s) {
    const auto block = obs.segment(8 * s, 8);
    CHECK(block[0] == 1.0);
    const auto f = percepts[static_cast<std::size_t>(s)].features();
    for (int i = 0; i < 3; ++i) CHECK(block[1 + i] == f[i]);
    CHECK(block.tail(4).sum() == 1.0);
    CHECK(block[4 + percepts[static_cast<std::size_t>(s)].level()] == 1.0);
  }
  const auto colors = env.potion_colors();
  for (int p = 0; p < 12; ++p) {
    const auto block = obs.segment(24 + 7 * p, 7);
    CHECK(block[0] == 1.0);
    CHECK(block[1 + index_of(*colors[static_cast<std::size_t>(p)])] == 1.0);
  }
  CHECK(obs[108] == 0.0);
  CHECK(obs[109] == 1.0);
}

TEST_CASE("legal actions at trial start") {
  SymbolicAlchemy env;
  env.reset(3);
  const auto actions = env.legal_actions();
  CHECK(actions.size() == 40);
  CHECK(actions.front() == Action::no_op());
  for (const auto& a : actions) CHECK(env.is_legal(a));
  CHECK_FALSE(env.is_legal(Action::deposit(3)));
  CHECK_FALSE(env.is_legal(Action::use_potion(0, 12)));
}

TEST_CASE("deposit of the best corner") {
  SymbolicAlchemy env;
  env.reset(4);
  env.set_trial({LatentStone::from_coords(Coords(1, 1, 1)), LatentStone::from_index(0)}, {});
  const auto r = env.step(Action::deposit(0));
  CHECK(r.reward == 15);
  CHECK(r.info.outcome == OutcomeClass::deposit);
  CHECK(env.score() == 15);
  // Depositing twice is invalid and consumes a step.
  const int step = env.trial().step;
  const auto again = env.step(Action::deposit(0));
  CHECK(again.info.invalid_action);
  CHECK(again.reward == 0);
  CHECK(env.trial().step == step + 1);
}

TEST_CASE("trial and episode boundaries") {
  SymbolicAlchemy env;
  env.reset(5);
  int trial_ends = 0;
  int steps = 0;
  while (!env.episode_over()) {
    const auto r = env.step(Action::no_op());
    ++steps;
    if (r.trial_ended) ++trial_ends;
    CHECK(r.reward == 0);
  }
  CHECK(trial_ends == 10);
  CHECK(steps == 200);
  CHECK(env.trial_scores().size() == 10);
  CHECK_THROWS_AS(env.step(Action::no_op()), std::logic_error);
}

TEST_CASE("chemistry persists within an episode and trials are resampled") {
  SymbolicAlchemy env;
  env.reset(6);
  const auto chem = env.chemistry().index;
  std::vector<std::vector<std::optional<PotionColor>>> potions;
  while (!env.episode_over()) {
    if (env.trial().step == 0) potions.push_back(env.potion_colors());
    CHECK(env.chemistry().index == chem);
    env.step(Action::no_op());
  }
  CHECK(potions.size() == 10);
  bool differs = false;
  for (std::size_t i = 1; i < potions.size(); ++i) differs = differs || potions[i] != potions[0];
  CHECK(differs);
}

TEST_CASE("trial ends once every stone is deposited") {
  SymbolicAlchemy env;
  env.reset(4);
  env.set_trial({LatentStone::from_index(1), LatentStone::from_index(2)}, {});
  CHECK_FALSE(env.step(Action::deposit(0)).trial_ended);
  const auto r = env.step(Action::deposit(1));
  CHECK(r.trial_ended);
  CHECK(env.trial().trial_index == 1);
  CHECK(env.trial().step == 0);
  CHECK(env.trial_scores()[0] == -2);
}

TEST_CASE("stones and potions cover every corner and effect") {
  SymbolicAlchemy env;
  std::array<int, 8> corners{};
  std::array<int, 6> effects{};
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    env.reset(seed);
    for (const auto& s : env.trial().stones) ++corners[static_cast<std::size_t>(s.latent.index())];
    for (const auto& p : env.trial().potions) ++effects[static_cast<std::size_t>(p.effect.index())];
  }
  for (int n : corners) CHECK(std::abs(n - 150) < 50);
  for (int n : effects) CHECK(std::abs(n - 800) < 120);
}

TEST_CASE("reset is deterministic in the seed") {
  SymbolicAlchemy a;
  SymbolicAlchemy b;
  CHECK(a.reset(42) == b.reset(42));
  CHECK(a.chemistry().index == b.chemistry().index);
  for (int i = 0; !a.episode_over(); ++i) {
    const auto action = a.legal_actions()[static_cast<std::size_t>(i * 7) % a.legal_actions().size()];
    const auto ra = a.step(action);
    const auto rb = b.step(action);
    CHECK(ra.observation == rb.observation);
    CHECK(ra.reward == rb.reward);
  }
  SymbolicAlchemy c;
  c.reset(43);
  CHECK(c.observe() != b.observe());
}

TEST_CASE("potion outcomes follow the chemistry") {
  SymbolicAlchemy env;
  env.reset(8);
  const auto& c = env.chemistry();
  const auto& g = ChemistryTable::instance().graph(c.graph);
  while (env.trial().trial_index == 0) {
    const auto before = env.trial();
    const auto actions = env.legal_actions();
    const auto action = actions.back();
    const auto r = env.step(action);
    if (action.kind != Action::Kind::use_potion) continue;
    const auto stone = before.stones[static_cast<std::size_t>(action.stone)].latent;
    const auto effect = before.potions[static_cast<std::size_t>(action.potion)].effect;
    const auto moved = apply_potion(stone, effect, g);
    CHECK(r.info.before == perceive_stone(stone, c.stone_map));
    CHECK(r.info.after == perceive_stone(moved, c.stone_map));
    CHECK(r.info.color == color_of_potion(effect, c.potion_map));
    if (r.trial_ended) break;
  }
}

TEST_CASE("action text round trip") {
  for (const auto& a : {Action::no_op(), Action::deposit(2), Action::use_potion(1, 11)})
    CHECK(Action::parse(a.to_string()) == a);
  CHECK_THROWS_AS(Action::parse("X 1"), std::invalid_argument);
  CHECK_THROWS_AS(Action::parse("P 1"), std::invalid_argument);
}

TEST_CASE("config parsing") {
  std::istringstream in("# comment\ntrials = 4\nstones=2\npotions = 5 # trailing\nmax_steps = 9\nseed = 77\n"
                        "time = false\naugmentations = ground_truth, belief\n");
  const auto s = parse_config(in);
  CHECK(s.env.trials == 4);
  CHECK(s.env.stones == 2);
  CHECK(s.env.potions == 5);
  CHECK(s.env.max_steps == 9);
  CHECK(s.seed == 77);
  CHECK_FALSE(s.env.include_time);
  CHECK(s.env.augment_ground_truth);
  CHECK(s.env.augment_belief);

  std::istringstream round(format_config(s));
  const auto t = parse_config(round);
  CHECK(t.env == s.env);
  CHECK(t.seed == s.seed);

  std::istringstream bad("trials = x\n");
  CHECK_THROWS_AS(parse_config(bad), std::invalid_argument);
  std::istringstream unknown("colour = 3\n");
  CHECK_THROWS_AS(parse_config(unknown), std::invalid_argument);
  EnvConfig zero;
  zero.trials = 0;
  CHECK_THROWS_AS(zero.validate(), std::invalid_argument);
}

TEST_CASE("belief augmentation tracks the posterior") {
  EnvConfig cfg;
  cfg.augment_belief = true;
  SymbolicAlchemy env(cfg);
  env.reset(11);
  REQUIRE(env.belief().has_value());
  auto belief = init_belief(env.present_stone_percepts());
  CHECK(*env.belief() == belief);
  for (int i = 0; i < 20; ++i) {
    const auto r = env.step(Action::use_potion(0, i % 12));
    if (!r.info.invalid_action) belief = update_belief(belief, r.info.before, r.info.color, r.info.after);
    if (r.trial_ended) break;
    CHECK(env.belief()->contains(env.chemistry().index));
    CHECK(*env.belief() == belief);
    CHECK(r.observation.tail(28) == belief.marginals());
  }
}
