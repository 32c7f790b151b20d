#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "alchemy/belief.hpp"
#include "alchemy/env.hpp"
#include "alchemy/episode_log.hpp"
#include "alchemy/planner.hpp"
#include "alchemy/random.hpp"

namespace alchemy {

/// A policy acting on the symbolic environment. Agents only read percepts and
/// colours from the environment, except the oracle which is handed the
/// chemistry explicitly.
class Agent {
 public:
  virtual ~Agent() = default;

  virtual std::string id() const = 0;
  virtual void begin_episode(const SymbolicAlchemy& env, std::uint64_t seed) = 0;
  /// Called at the start of every trial, including the first.
  virtual void begin_trial(const SymbolicAlchemy& /*env*/) {}
  virtual Action act(const SymbolicAlchemy& env) = 0;
  virtual void observe(const Action& /*action*/, const StepResult& /*result*/) {}
  /// Current posterior, for agents that maintain one.
  virtual const BeliefState* belief() const { return nullptr; }
};

/// Replans by expectimax over the exact posterior at every step.
class IdealObserverAgent final : public Agent {
 public:
  explicit IdealObserverAgent(PlannerOptions options = {}) : planner_(options) {}

  std::string id() const override { return "ideal_observer"; }
  void begin_episode(const SymbolicAlchemy& env, std::uint64_t seed) override;
  void begin_trial(const SymbolicAlchemy& env) override;
  Action act(const SymbolicAlchemy& env) override;
  void observe(const Action& action, const StepResult& result) override;
  const BeliefState* belief() const override { return belief_ ? &*belief_ : nullptr; }

  const PlannerStats& planner_stats() const { return planner_.stats(); }

 private:
  IdealObserverPlanner planner_;
  std::optional<BeliefState> belief_;
};

class OracleAgent final : public Agent {
 public:
  explicit OracleAgent(PlannerOptions options = {}) : planner_(options) {}

  std::string id() const override { return "oracle"; }
  void begin_episode(const SymbolicAlchemy& env, std::uint64_t seed) override;
  Action act(const SymbolicAlchemy& env) override;

 private:
  OraclePlanner planner_;
};

struct RandomHeuristicOptions {
  /// Deposit once a stone is worth at least this much.
  int threshold = 15;
  /// Keep working on one stone until it is deposited instead of re-drawing
  /// a stone every step.
  bool persist_stone = false;
};

/// One decision of the random heuristic on the current trial; `focus` holds
/// the persisted stone slot when that option is on.
Action random_heuristic_act(const TrialState& trial, Rng& rng, const RandomHeuristicOptions& options,
                            std::optional<int>* focus = nullptr);

class RandomHeuristicAgent final : public Agent {
 public:
  explicit RandomHeuristicAgent(RandomHeuristicOptions options = {}) : options_(options) {}

  std::string id() const override { return "random_heuristic"; }
  void begin_episode(const SymbolicAlchemy& env, std::uint64_t seed) override;
  void begin_trial(const SymbolicAlchemy& env) override;
  Action act(const SymbolicAlchemy& env) override;

 private:
  RandomHeuristicOptions options_;
  Rng rng_;
  std::optional<int> focus_;
};

/// Potion uses the evaluated ideal observer searches ahead of each decision.
inline constexpr int kDefaultLookahead = 2;

struct AgentOptions {
  PlannerOptions planner{.lookahead = kDefaultLookahead};
  RandomHeuristicOptions heuristic;
};

/// Returns nullptr for unknown ids. Known: ideal_observer, oracle, random_heuristic.
std::unique_ptr<Agent> make_agent(std::string_view id, const AgentOptions& options = {});

struct RunOptions {
  bool log_marginals = false;
  bool hints = false;
};

/// Runs one full episode and records every step.
EpisodeLog run_episode(Agent& agent, SymbolicAlchemy& env, std::uint64_t seed, const RunOptions& options = {});

}  // namespace alchemy
