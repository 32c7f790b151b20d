#include "alchemy/env.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace alchemy {

namespace {

constexpr int kStoneBlock = 1 + 3 + kNumRewardLevels;
constexpr int kPotionBlock = 1 + kNumColors;

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end)
    throw std::invalid_argument("config: bad value for " + std::string(key) + ": " + std::string(value));
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + std::string(key) + ": " + std::string(value));
}

}  // namespace

void EnvConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  if (stones < 1) throw std::invalid_argument("stones must be at least 1");
  if (potions < 0) throw std::invalid_argument("potions must be non-negative");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
}

int EnvConfig::observation_size() const {
  return stones * kStoneBlock + potions * kPotionBlock + (include_time ? 2 : 0) + (augment_ground_truth ? 28 : 0) +
         (augment_belief ? 28 : 0);
}

RunSettings parse_config(std::istream& in) {
  RunSettings s;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(view.substr(0, eq));
    const auto value = trim(view.substr(eq + 1));
    if (key == "trials") s.env.trials = parse_number<int>(key, value);
    else if (key == "stones") s.env.stones = parse_number<int>(key, value);
    else if (key == "potions") s.env.potions = parse_number<int>(key, value);
    else if (key == "max_steps") s.env.max_steps = parse_number<int>(key, value);
    else if (key == "seed") s.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "time") s.env.include_time = parse_bool(key, value);
    else if (key == "augmentations") {
      s.env.augment_ground_truth = s.env.augment_belief = false;
      std::string items(value);
      std::stringstream ss(items);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto name = trim(item);
        if (name == "ground_truth") s.env.augment_ground_truth = true;
        else if (name == "belief") s.env.augment_belief = true;
        else if (name != "none" && !name.empty())
          throw std::invalid_argument("config: unknown augmentation " + std::string(name));
      }
    } else {
      throw std::invalid_argument("config: unknown key " + std::string(key));
    }
  }
  s.env.validate();
  return s;
}

RunSettings load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return parse_config(in);
}

std::string format_config(const RunSettings& s) {
  std::ostringstream out;
  out << "trials = " << s.env.trials << "\nstones = " << s.env.stones << "\npotions = " << s.env.potions
      << "\nmax_steps = " << s.env.max_steps << "\nseed = " << s.seed
      << "\ntime = " << (s.env.include_time ? "true" : "false") << "\naugmentations = ";
  if (!s.env.augment_ground_truth && !s.env.augment_belief) out << "none";
  if (s.env.augment_ground_truth) out << "ground_truth" << (s.env.augment_belief ? "," : "");
  if (s.env.augment_belief) out << "belief";
  out << '\n';
  return out.str();
}

int TrialState::present_stones() const {
  return static_cast<int>(std::count_if(stones.begin(), stones.end(), [](const auto& s) { return s.present; }));
}

int TrialState::present_potions() const {
  return static_cast<int>(std::count_if(potions.begin(), potions.end(), [](const auto& p) { return p.present; }));
}

std::string Action::to_string() const {
  switch (kind) {
    case Kind::no_op: return "N";
    case Kind::deposit: return "D " + std::to_string(stone);
    case Kind::use_potion: return "P " + std::to_string(stone) + " " + std::to_string(potion);
  }
  return "N";
}

Action Action::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  char tag = 0;
  in >> tag;
  Action a;
  if (tag == 'N') a = no_op();
  else if (tag == 'D' && in >> a.stone) a.kind = Kind::deposit;
  else if (tag == 'P' && in >> a.stone >> a.potion) a.kind = Kind::use_potion;
  else throw std::invalid_argument("malformed action: " + std::string(text));
  std::string rest;
  if (in >> rest) throw std::invalid_argument("malformed action: " + std::string(text));
  return a;
}

namespace {
constexpr std::array<std::string_view, 5> kOutcomeNames{"value_increase", "value_decrease", "no_effect", "deposit",
                                                         "no_op"};
}

std::string_view outcome_name(OutcomeClass c) { return kOutcomeNames[static_cast<std::size_t>(c)]; }

OutcomeClass parse_outcome(std::string_view name) {
  for (std::size_t i = 0; i < kOutcomeNames.size(); ++i)
    if (kOutcomeNames[i] == name) return static_cast<OutcomeClass>(i);
  throw std::invalid_argument("unknown outcome class: " + std::string(name));
}

SymbolicAlchemy::SymbolicAlchemy(EnvConfig config) : config_(config) { config_.validate(); }

Observation SymbolicAlchemy::reset(std::uint64_t seed) {
  rng_ = Rng(stream_seed(seed, Stream::environment));
  chemistry_ = ChemistryTable::instance().sample_chemistry(rng_);
  score_ = 0;
  trial_scores_.clear();
  done_ = false;
  belief_.reset();
  if (config_.augment_belief) belief_ = BeliefState::prior();
  start_trial(0);
  return observe();
}

Observation SymbolicAlchemy::reset_with_chemistry(std::uint64_t seed, std::uint32_t chemistry_index) {
  rng_ = Rng(stream_seed(seed, Stream::environment));
  chemistry_ = ChemistryTable::instance().chemistry(chemistry_index);
  score_ = 0;
  trial_scores_.clear();
  done_ = false;
  belief_.reset();
  if (config_.augment_belief) belief_ = BeliefState::prior();
  start_trial(0);
  return observe();
}

void SymbolicAlchemy::start_trial(int index) {
  trial_ = TrialState{};
  trial_.trial_index = index;
  for (int i = 0; i < config_.stones; ++i)
    trial_.stones.push_back({LatentStone::from_index(static_cast<int>(rng_.uniform_int(kNumCorners))), true});
  for (int i = 0; i < config_.potions; ++i) {
    const auto effect = PotionEffect::from_index(static_cast<int>(rng_.uniform_int(kNumEffects)));
    trial_.potions.push_back({effect, color_of_potion(effect, chemistry_.potion_map), true});
  }
  sync_belief_with_trial();
}

void SymbolicAlchemy::set_trial(std::vector<LatentStone> stones, std::vector<PotionEffect> potions) {
  trial_.stones.clear();
  trial_.potions.clear();
  for (auto s : stones) trial_.stones.push_back({s, true});
  for (auto e : potions) trial_.potions.push_back({e, color_of_potion(e, chemistry_.potion_map), true});
  trial_.step = 0;
  trial_.deposited_reward = 0;
  done_ = false;
  sync_belief_with_trial();
}

void SymbolicAlchemy::sync_belief_with_trial() {
  if (!belief_) return;
  const auto percepts = present_stone_percepts();
  belief_ = belief_->observe_stones(percepts);
}

bool SymbolicAlchemy::is_legal(const Action& a) const {
  const auto n_stones = static_cast<int>(trial_.stones.size());
  const auto n_potions = static_cast<int>(trial_.potions.size());
  switch (a.kind) {
    case Action::Kind::no_op: return true;
    case Action::Kind::deposit:
      return a.stone >= 0 && a.stone < n_stones && trial_.stones[static_cast<std::size_t>(a.stone)].present;
    case Action::Kind::use_potion:
      return a.stone >= 0 && a.stone < n_stones && trial_.stones[static_cast<std::size_t>(a.stone)].present &&
             a.potion >= 0 && a.potion < n_potions && trial_.potions[static_cast<std::size_t>(a.potion)].present;
  }
  return false;
}

std::vector<Action> SymbolicAlchemy::legal_actions() const {
  std::vector<Action> out{Action::no_op()};
  for (int s = 0; s < static_cast<int>(trial_.stones.size()); ++s)
    if (trial_.stones[static_cast<std::size_t>(s)].present) out.push_back(Action::deposit(s));
  for (int s = 0; s < static_cast<int>(trial_.stones.size()); ++s) {
    if (!trial_.stones[static_cast<std::size_t>(s)].present) continue;
    for (int p = 0; p < static_cast<int>(trial_.potions.size()); ++p)
      if (trial_.potions[static_cast<std::size_t>(p)].present) out.push_back(Action::use_potion(s, p));
  }
  return out;
}

StepResult SymbolicAlchemy::step(const Action& action) {
  if (done_) throw std::logic_error("step called on a finished episode");
  StepResult result;
  if (!is_legal(action)) {
    result.info.invalid_action = true;
  } else if (action.kind == Action::Kind::deposit) {
    auto& stone = trial_.stones[static_cast<std::size_t>(action.stone)];
    result.reward = reward_of(stone.latent);
    stone.present = false;
    trial_.deposited_reward += result.reward;
    score_ += result.reward;
    result.info.outcome = OutcomeClass::deposit;
  } else if (action.kind == Action::Kind::use_potion) {
    auto& stone = trial_.stones[static_cast<std::size_t>(action.stone)];
    auto& potion = trial_.potions[static_cast<std::size_t>(action.potion)];
    const auto before = stone.latent;
    const auto& graph = ChemistryTable::instance().graph(chemistry_.graph);
    stone.latent = apply_potion(stone.latent, potion.effect, graph);
    potion.present = false;
    result.info.before = perceive_stone(before, chemistry_.stone_map);
    result.info.after = perceive_stone(stone.latent, chemistry_.stone_map);
    result.info.color = potion.color;
    const int delta = reward_of(stone.latent) - reward_of(before);
    result.info.outcome = delta > 0 ? OutcomeClass::value_increase
                          : delta < 0 ? OutcomeClass::value_decrease
                                      : OutcomeClass::no_effect;
    if (belief_) belief_ = belief_->observe_outcome(result.info.before, result.info.color, result.info.after);
  }
  ++trial_.step;
  if (trial_.step >= config_.max_steps || trial_.present_stones() == 0) {
    result.trial_ended = true;
    trial_scores_.push_back(trial_.deposited_reward);
    if (trial_.trial_index + 1 < config_.trials) {
      start_trial(trial_.trial_index + 1);
    } else {
      done_ = true;
      result.episode_ended = true;
    }
  }
  result.observation = observe();
  return result;
}

Observation SymbolicAlchemy::observe() const {
  return encode_observation(config_, trial_, chemistry_, belief_ ? &*belief_ : nullptr);
}

std::vector<std::optional<Percept>> SymbolicAlchemy::stone_percepts() const {
  std::vector<std::optional<Percept>> out;
  for (const auto& s : trial_.stones)
    out.push_back(s.present ? std::optional(perceive_stone(s.latent, chemistry_.stone_map)) : std::nullopt);
  return out;
}

std::vector<Percept> SymbolicAlchemy::present_stone_percepts() const {
  std::vector<Percept> out;
  for (const auto& s : trial_.stones)
    if (s.present) out.push_back(perceive_stone(s.latent, chemistry_.stone_map));
  return out;
}

std::vector<std::optional<PotionColor>> SymbolicAlchemy::potion_colors() const {
  std::vector<std::optional<PotionColor>> out;
  for (const auto& p : trial_.potions) out.push_back(p.present ? std::optional(p.color) : std::nullopt);
  return out;
}

Observation encode_observation(const EnvConfig& config, const TrialState& trial, const Chemistry& chemistry,
                               const BeliefState* belief) {
  if (config.augment_belief && belief == nullptr)
    throw std::invalid_argument("belief augmentation requires a belief state");
  Observation obs = Observation::Zero(config.observation_size());
  Eigen::Index at = 0;
  for (int i = 0; i < config.stones; ++i, at += kStoneBlock) {
    if (i >= static_cast<int>(trial.stones.size())) continue;
    const auto& slot = trial.stones[static_cast<std::size_t>(i)];
    if (!slot.present) continue;
    const auto p = perceive_stone(slot.latent, chemistry.stone_map);
    obs[at] = 1.0;
    obs.segment<3>(at + 1) = p.features().cast<double>();
    obs[at + 4 + p.level()] = 1.0;
  }
  for (int i = 0; i < config.potions; ++i, at += kPotionBlock) {
    if (i >= static_cast<int>(trial.potions.size())) continue;
    const auto& slot = trial.potions[static_cast<std::size_t>(i)];
    if (!slot.present) continue;
    obs[at] = 1.0;
    obs[at + 1 + index_of(slot.color)] = 1.0;
  }
  if (config.include_time) {
    obs[at++] = config.trials > 1 ? static_cast<double>(trial.trial_index) / (config.trials - 1) : 0.0;
    obs[at++] = static_cast<double>(config.max_steps - trial.step) / config.max_steps;
  }
  if (config.augment_ground_truth) {
    obs.segment<28>(at) = encode_chemistry(chemistry);
    at += 28;
  }
  if (config.augment_belief) obs.segment<28>(at) = belief->marginals();
  return obs;
}

}  // namespace alchemy
