#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "alchemy/analysis.hpp"
#include "alchemy/choice_model.hpp"
#include "alchemy/eval.hpp"

using namespace alchemy;

namespace {

std::vector<EpisodeLog> run_many(Agent& agent, int n, std::uint64_t base, const RunOptions& options = {}) {
  SymbolicAlchemy env;
  std::vector<EpisodeLog> logs;
  for (int i = 0; i < n; ++i) logs.push_back(run_episode(agent, env, derive_seed(base, static_cast<std::uint64_t>(i)), options));
  return logs;
}

EpisodeLog idle_log(std::uint64_t seed) {
  SymbolicAlchemy env;
  env.reset(seed);
  EpisodeLog log;
  log.header = {seed, env.config(), env.chemistry().index, "idle", false};
  while (!env.episode_over()) {
    StepRecord rec;
    rec.trial = env.trial().trial_index;
    rec.step = env.trial().step;
    rec.observation_digest = observation_digest(env.observe());
    env.step(Action::no_op());
    log.steps.push_back(rec);
  }
  log.trial_scores = env.trial_scores();
  return log;
}

std::string to_string(const EvalResult& r) {
  std::ostringstream out;
  for (const auto& l : r.logs) write_log(out, l);
  write_records_tsv(out, r.records, "p");
  return out.str();
}

}  // namespace

TEST_CASE("mean and standard error") {
  const std::vector<double> constant(10, 4.0);
  const auto m = mean_stderr(constant);
  CHECK(m.mean == 4.0);
  CHECK(m.stderr_ == 0.0);
  CHECK(m.n == 10);
  const std::vector<double> v{1, 2, 3, 4};
  const auto s = mean_stderr(v);
  CHECK(s.mean == 2.5);
  CHECK(s.stderr_ == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(mean_stderr(std::vector<double>{3.0}).stderr_ == 0.0);
}

TEST_CASE("paired test") {
  const std::vector<double> a{3, 5, 4, 6, 5, 7};
  const std::vector<double> b{1, 4, 2, 5, 4, 5};
  const auto t = paired_test(a, b);
  // Differences 2,1,2,1,1,2: mean 1.5, sd sqrt(0.3).
  CHECK(t.mean_difference == doctest::Approx(1.5));
  CHECK(t.stderr_ == doctest::Approx(std::sqrt(0.3 / 6)));
  CHECK(t.t == doctest::Approx(1.5 / std::sqrt(0.3 / 6)));
  // Upper tail of Student's t with 5 dof at 6.7082: 5.57e-4.
  CHECK(t.p_value == doctest::Approx(5.57e-4).epsilon(0.01));
  const auto reversed = paired_test(b, a);
  CHECK(reversed.p_value == doctest::Approx(1.0 - t.p_value));
  CHECK_THROWS_AS(paired_test(a, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("potion metrics on an idle log") {
  const std::vector<EpisodeLog> logs{idle_log(1), idle_log(2)};
  CHECK(potions_per_trial(logs[0]) == std::vector<int>(10, 0));
  const auto m = potion_use_metrics(logs);
  CHECK(m.first_trial.mean == 0.0);
  CHECK(m.last_minus_first.mean == 0.0);
  for (const auto& t : m.per_trial) CHECK(t.mean == 0.0);

  const auto e = episode_entropy(logs[0]);
  CHECK(e.initial == doctest::Approx(std::log(167424.0)));
  CHECK(e.non_increasing);
  CHECK(e.end_of_trial.size() == 10);
  for (auto c : classify_actions(logs[0])) CHECK(c == OutcomeClass::no_op);
}

TEST_CASE("classification examples") {
  SymbolicAlchemy env;
  env.reset(1);
  const auto& chem = env.chemistry();
  const auto& graph = ChemistryTable::instance().graph(chem.graph);
  const auto start = LatentStone::from_coords(Coords(1, -1, -1));
  env.set_trial({start}, {{1, 1}, {0, 1}});
  REQUIRE(apply_potion(start, {1, 1}, graph) != start);
  // Value -1 to 1, then an x potion at x = +1 which cannot move it.
  auto r = env.step(Action::use_potion(0, 0));
  CHECK(r.info.outcome == OutcomeClass::value_increase);
  r = env.step(Action::use_potion(0, 1));
  CHECK(r.info.outcome == OutcomeClass::no_effect);

  auto heuristic = make_agent("random_heuristic");
  const auto logs = run_many(*heuristic, 5, 3);
  for (const auto& l : logs) {
    const auto classes = classify_actions(l);
    REQUIRE(classes.size() == l.steps.size());
    for (std::size_t k = 0; k < classes.size(); ++k) {
      if (l.steps[k].invalid) CHECK(classes[k] == OutcomeClass::no_op);
      else CHECK(classes[k] == l.steps[k].outcome);
    }
  }
}

TEST_CASE("entropy from snapshots equals entropy from replay") {
  auto io = make_agent("ideal_observer");
  const auto logs = run_many(*io, 2, 8);
  for (const auto& l : logs) {
    auto bare = l;
    for (auto& s : bare.steps) s.belief.reset();
    const auto a = episode_entropy(l);
    const auto b = episode_entropy(bare);
    REQUIRE(a.trajectory.size() == b.trajectory.size());
    for (std::size_t k = 0; k < a.trajectory.size(); ++k) CHECK(a.trajectory[k] == doctest::Approx(b.trajectory[k]));
    CHECK(a.non_increasing);
    CHECK(a.end_of_trial.back() <= a.end_of_trial.front());
  }
}

TEST_CASE("summary table") {
  auto heuristic = make_agent("random_heuristic");
  auto oracle = make_agent("oracle");
  auto logs = run_many(*heuristic, 4, 1);
  for (auto& l : run_many(*oracle, 3, 1)) logs.push_back(std::move(l));
  const auto rows = summarize(logs);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].policy == "random_heuristic");
  CHECK(rows[0].score.n == 4);
  CHECK(rows[1].policy == "oracle");
  std::ostringstream tsv;
  write_summary_tsv(tsv, rows);
  CHECK(tsv.str().rfind("policy\t", 0) == 0);
  std::ostringstream table;
  write_summary_table(table, rows);
  CHECK(table.str().find("oracle") != std::string::npos);
}

TEST_CASE("softmax probabilities") {
  const std::vector<double> values{1.0, 3.0, -2.0, 3.0};
  for (double t : {0.01, 0.5, 2.0, 100.0}) {
    const auto lp = softmax_log_probs(values, t);
    double total = 0.0;
    for (double x : lp) {
      CHECK(x <= 0.0);
      total += std::exp(x);
    }
    CHECK(total == doctest::Approx(1.0));
    std::vector<double> shifted = values;
    for (auto& v : shifted) v += 40.0;
    const auto lp2 = softmax_log_probs(shifted, t);
    for (std::size_t k = 0; k < lp.size(); ++k) CHECK(lp[k] == doctest::Approx(lp2[k]));
  }
}

TEST_CASE("temperature fit is shift invariant") {
  std::vector<Decision> decisions;
  Rng rng(6);
  for (int i = 0; i < 300; ++i) {
    Decision d;
    for (int k = 0; k < 5; ++k) d.values.push_back(static_cast<double>(rng.uniform_int(10)));
    d.chosen = static_cast<int>(std::max_element(d.values.begin(), d.values.end()) - d.values.begin());
    if (rng.uniform_int(3) == 0) d.chosen = static_cast<int>(rng.uniform_int(5));
    decisions.push_back(d);
  }
  const auto fit = fit_temperature(decisions);
  auto shifted = decisions;
  for (std::size_t i = 0; i < shifted.size(); ++i)
    for (auto& v : shifted[i].values) v += static_cast<double>(i % 7) - 3.0;
  const auto fit2 = fit_temperature(shifted);
  CHECK(fit2.temperature == doctest::Approx(fit.temperature).epsilon(1e-5));
  CHECK(fit2.log_likelihood == doctest::Approx(fit.log_likelihood).epsilon(1e-9));
  CHECK(fit.log_likelihood <= 0.0);
  CHECK(fit.decisions == 300);
  // The fit is a maximum.
  for (double f : {0.9, 1.1}) CHECK(log_likelihood(decisions, fit.temperature * f) <= fit.log_likelihood + 1e-9);
  CHECK_THROWS_AS(fit_temperature(std::vector<Decision>{}), std::invalid_argument);
}

TEST_CASE("model decisions follow legal actions") {
  auto heuristic = make_agent("random_heuristic");
  const auto logs = run_many(*heuristic, 2, 4);
  for (auto kind : {ChoiceModelKind::pairs_aware, ChoiceModelKind::pairs_unaware}) {
    const auto decisions = model_decisions(logs[0], kind);
    CHECK(decisions.size() == logs[0].steps.size());
    for (const auto& d : decisions) {
      REQUIRE(d.chosen >= 0);
      REQUIRE(d.chosen < static_cast<int>(d.values.size()));
    }
  }
  CHECK(parse_model(model_name(ChoiceModelKind::pairs_unaware)) == ChoiceModelKind::pairs_unaware);
  CHECK(&model_space(ChoiceModelKind::pairs_aware) == &HypothesisSpace::paired());
}

TEST_CASE("lookahead values of a known stone") {
  EnvConfig config;
  SymbolicAlchemy env(config);
  env.reset(2);
  env.set_trial({LatentStone::from_coords(Coords(1, 1, 1)), LatentStone::from_coords(Coords(-1, -1, -1))}, {});
  const auto belief = BeliefState::singleton(env.chemistry().index);
  const auto values = lookahead_values(env, belief);
  // no_op, deposit 0, deposit 1: every option keeps the total at 12.
  REQUIRE(values.size() == 3);
  for (double v : values) CHECK(v == doctest::Approx(12.0));
}

TEST_CASE("temperature recovery on a small sample") {
  SoftmaxModelAgent agent(ChoiceModelKind::pairs_aware, 5.0);
  CHECK(agent.id() == "softmax_pairs_aware");
  const auto logs = run_many(agent, 8, 77);
  const auto fit = fit_choice_model(logs, ChoiceModelKind::pairs_aware);
  CHECK(fit.decisions > 1000);
  CHECK(fit.temperature == doctest::Approx(5.0).epsilon(0.2));
}

TEST_CASE("evaluation does not depend on the worker count") {
  EvalConfig config;
  config.policy = "random_heuristic";
  config.episodes = 30;
  config.base_seed = 11;
  config.workers = 1;
  const auto one = evaluate(config);
  config.workers = 3;
  int calls = 0;
  const auto three = evaluate(config, [&](int) { ++calls; });
  CHECK(calls == 30);
  CHECK(to_string(one) == to_string(three));
  REQUIRE(one.records.size() == 30);
  CHECK(one.records[5].seed == derive_seed(11, 5));
  CHECK(one.records[5].score == one.logs[5].score);
  CHECK(one.records[5].potions_per_trial == potions_per_trial(one.logs[5]));

  config.policy = "nobody";
  CHECK_THROWS(evaluate(config));
}
