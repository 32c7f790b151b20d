#include "alchemy/agents.hpp"

#include <stdexcept>
#include <vector>

namespace alchemy {

namespace {

/// Present stones and potions with their slot numbers.
struct SlotView {
  std::vector<int> stone_slots;
  std::vector<int> potion_slots;
  std::vector<PotionColor> colors;
};

SlotView present_potions(const TrialState& trial) {
  SlotView v;
  for (int p = 0; p < static_cast<int>(trial.potions.size()); ++p) {
    const auto& slot = trial.potions[static_cast<std::size_t>(p)];
    if (!slot.present) continue;
    v.potion_slots.push_back(p);
    v.colors.push_back(slot.color);
  }
  for (int s = 0; s < static_cast<int>(trial.stones.size()); ++s)
    if (trial.stones[static_cast<std::size_t>(s)].present) v.stone_slots.push_back(s);
  return v;
}

Action to_env_action(const PlannedAction& a, const SlotView& v) {
  switch (a.kind) {
    case PlannedAction::Kind::stop: return Action::no_op();
    case PlannedAction::Kind::deposit: return Action::deposit(v.stone_slots[static_cast<std::size_t>(a.stone)]);
    case PlannedAction::Kind::use_potion:
      return Action::use_potion(v.stone_slots[static_cast<std::size_t>(a.stone)],
                                v.potion_slots[static_cast<std::size_t>(a.potion)]);
  }
  return Action::no_op();
}

}  // namespace

void IdealObserverAgent::begin_episode(const SymbolicAlchemy& /*env*/, std::uint64_t /*seed*/) {
  belief_ = BeliefState::prior();
  planner_.clear();
}

void IdealObserverAgent::begin_trial(const SymbolicAlchemy& env) {
  const auto percepts = env.present_stone_percepts();
  auto next = belief_->observe_stones(percepts);
  if (next.empty()) throw InconsistentEvidence("stones of the new trial contradict the belief");
  belief_ = std::move(next);
  planner_.clear();
}

Action IdealObserverAgent::act(const SymbolicAlchemy& env) {
  const auto view = present_potions(env.trial());
  const auto percepts = env.present_stone_percepts();
  const auto plan = planner_.plan(percepts, view.colors, *belief_, env.steps_remaining());
  return to_env_action(plan.action, view);
}

void IdealObserverAgent::observe(const Action& action, const StepResult& result) {
  if (action.kind != Action::Kind::use_potion || result.info.invalid_action) return;
  belief_ = update_belief(*belief_, result.info.before, result.info.color, result.info.after);
}

void OracleAgent::begin_episode(const SymbolicAlchemy& /*env*/, std::uint64_t /*seed*/) { planner_.clear(); }

Action OracleAgent::act(const SymbolicAlchemy& env) {
  const auto& trial = env.trial();
  const auto view = present_potions(trial);
  std::vector<LatentStone> stones;
  for (int s : view.stone_slots) stones.push_back(trial.stones[static_cast<std::size_t>(s)].latent);
  const auto plan = planner_.plan(stones, view.colors, env.chemistry(), env.steps_remaining());
  return to_env_action(plan.action, view);
}

Action random_heuristic_act(const TrialState& trial, Rng& rng, const RandomHeuristicOptions& options,
                            std::optional<int>* focus) {
  const auto view = present_potions(trial);
  if (view.stone_slots.empty()) return Action::no_op();
  int stone = -1;
  if (focus && focus->has_value() && trial.stones[static_cast<std::size_t>(**focus)].present) stone = **focus;
  if (stone < 0) stone = view.stone_slots[rng.uniform_int(static_cast<std::uint32_t>(view.stone_slots.size()))];
  if (focus && options.persist_stone) *focus = stone;
  const int value = reward_of(trial.stones[static_cast<std::size_t>(stone)].latent);
  if (value >= options.threshold || (value > 0 && view.potion_slots.empty())) {
    if (focus) focus->reset();
    return Action::deposit(stone);
  }
  if (view.potion_slots.empty()) {
    if (focus) focus->reset();
    return Action::no_op();
  }
  const int potion = view.potion_slots[rng.uniform_int(static_cast<std::uint32_t>(view.potion_slots.size()))];
  return Action::use_potion(stone, potion);
}

void RandomHeuristicAgent::begin_episode(const SymbolicAlchemy& /*env*/, std::uint64_t seed) {
  rng_ = Rng(stream_seed(seed, Stream::agent));
  focus_.reset();
}

void RandomHeuristicAgent::begin_trial(const SymbolicAlchemy& /*env*/) { focus_.reset(); }

Action RandomHeuristicAgent::act(const SymbolicAlchemy& env) {
  return random_heuristic_act(env.trial(), rng_, options_, &focus_);
}

std::unique_ptr<Agent> make_agent(std::string_view id, const AgentOptions& options) {
  if (id == "ideal_observer") return std::make_unique<IdealObserverAgent>(options.planner);
  if (id == "oracle") return std::make_unique<OracleAgent>(options.planner);
  if (id == "random_heuristic") return std::make_unique<RandomHeuristicAgent>(options.heuristic);
  return nullptr;
}

EpisodeLog run_episode(Agent& agent, SymbolicAlchemy& env, std::uint64_t seed, const RunOptions& options) {
  EpisodeLog log;
  env.reset(seed);
  log.header = {seed, env.config(), env.chemistry().index, agent.id(), options.hints};
  agent.begin_episode(env, seed);
  agent.begin_trial(env);
  while (!env.episode_over()) {
    StepRecord rec;
    rec.trial = env.trial().trial_index;
    rec.step = env.trial().step;
    rec.observation_digest = observation_digest(env.observe());
    rec.action = agent.act(env);
    const auto result = env.step(rec.action);
    agent.observe(rec.action, result);
    rec.outcome = result.info.outcome;
    rec.invalid = result.info.invalid_action;
    rec.reward = result.reward;
    if (const auto* b = agent.belief()) rec.belief = BeliefSnapshot::of(*b, options.log_marginals);
    log.steps.push_back(std::move(rec));
    if (result.trial_ended && !result.episode_ended) agent.begin_trial(env);
  }
  log.score = env.score();
  log.trial_scores = env.trial_scores();
  return log;
}

}  // namespace alchemy
