#include "alchemy/choice_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace alchemy {

std::string_view model_name(ChoiceModelKind kind) {
  return kind == ChoiceModelKind::pairs_aware ? "pairs_aware" : "pairs_unaware";
}

ChoiceModelKind parse_model(std::string_view name) {
  if (name == "pairs_aware") return ChoiceModelKind::pairs_aware;
  if (name == "pairs_unaware") return ChoiceModelKind::pairs_unaware;
  throw std::invalid_argument("unknown choice model: " + std::string(name));
}

const HypothesisSpace& model_space(ChoiceModelKind kind) {
  return kind == ChoiceModelKind::pairs_aware ? HypothesisSpace::paired() : HypothesisSpace::unpaired();
}

std::vector<double> lookahead_values(const SymbolicAlchemy& env, const BeliefState& belief) {
  const auto& trial = env.trial();
  const auto percepts = env.stone_percepts();
  const auto colors = env.potion_colors();
  double base = trial.deposited_reward;
  for (const auto& p : percepts)
    if (p) base += p->reward();
  // Expected change in a stone's value, per stone slot and colour.
  std::vector<std::array<double, kNumColors>> gain(percepts.size());
  std::vector<std::array<bool, kNumColors>> known(percepts.size());
  auto expected_gain = [&](int stone, PotionColor color) {
    const auto s = static_cast<std::size_t>(stone);
    const auto k = static_cast<std::size_t>(index_of(color));
    if (!known[s][k]) {
      const Percept before = *percepts[s];
      const auto outcomes = belief.outcome_masses(before, color);
      std::uint64_t total = 0;
      double weighted = 0.0;
      for (const auto& [after, mass] : outcomes) {
        total += mass;
        weighted += static_cast<double>(mass) * (after.reward() - before.reward());
      }
      if (total == 0) throw InconsistentEvidence("model posterior is empty");
      gain[s][k] = weighted / static_cast<double>(total);
      known[s][k] = true;
    }
    return gain[s][k];
  };
  std::vector<double> values;
  for (const auto& a : env.legal_actions()) {
    if (a.kind == Action::Kind::use_potion)
      values.push_back(base + expected_gain(a.stone, *colors[static_cast<std::size_t>(a.potion)]));
    else
      values.push_back(base);
  }
  return values;
}

std::vector<Decision> model_decisions(const EpisodeLog& log, ChoiceModelKind kind) {
  SymbolicAlchemy env(log.header.config);
  env.reset(log.header.seed);
  if (env.chemistry().index != log.header.chemistry) throw std::runtime_error("log does not replay: chemistry mismatch");
  auto belief = BeliefState::prior(model_space(kind));
  bool fresh_trial = true;
  std::vector<Decision> out;
  out.reserve(log.steps.size());
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const auto& s = log.steps[i];
    if (env.episode_over()) throw std::runtime_error("log does not replay: episode over at step " + std::to_string(i));
    if (fresh_trial) {
      const auto percepts = env.present_stone_percepts();
      belief = belief.observe_stones(percepts);
      fresh_trial = false;
    }
    const auto legal = env.legal_actions();
    const auto it = std::find(legal.begin(), legal.end(), s.action);
    if (it == legal.end()) throw std::runtime_error("log action is not legal at step " + std::to_string(i));
    out.push_back({lookahead_values(env, belief), static_cast<int>(it - legal.begin())});
    const auto r = env.step(s.action);
    if (r.reward != s.reward) throw std::runtime_error("log does not replay: reward mismatch at step " + std::to_string(i));
    if (s.action.kind == Action::Kind::use_potion) {
      belief = belief.observe_outcome(r.info.before, r.info.color, r.info.after);
      if (belief.empty()) throw InconsistentEvidence("model cannot explain the outcome at step " + std::to_string(i));
    }
    if (r.trial_ended) fresh_trial = true;
  }
  return out;
}

std::vector<double> softmax_log_probs(std::span<const double> values, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  std::vector<double> out(values.size());
  const double top = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = (values[i] - top) / temperature;
    sum += std::exp(out[i]);
  }
  const double log_sum = std::log(sum);
  for (auto& v : out) v -= log_sum;
  return out;
}

double log_likelihood(std::span<const Decision> decisions, double temperature) {
  double total = 0.0;
  for (const auto& d : decisions) {
    const double top = *std::max_element(d.values.begin(), d.values.end());
    double sum = 0.0;
    for (double v : d.values) sum += std::exp((v - top) / temperature);
    total += (d.values[static_cast<std::size_t>(d.chosen)] - top) / temperature - std::log(sum);
  }
  return total;
}

ChoiceFit fit_temperature(std::span<const Decision> decisions, const FitOptions& options) {
  if (decisions.empty()) throw std::invalid_argument("no decisions to fit");
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = std::log(options.min_temperature);
  double hi = std::log(options.max_temperature);
  auto f = [&](double x) { return log_likelihood(decisions, std::exp(x)); };
  double a = hi - phi * (hi - lo);
  double b = lo + phi * (hi - lo);
  double fa = f(a);
  double fb = f(b);
  while (hi - lo > options.tolerance) {
    if (fa >= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - phi * (hi - lo);
      fa = f(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + phi * (hi - lo);
      fb = f(b);
    }
  }
  const double t = std::exp((lo + hi) / 2);
  return {t, log_likelihood(decisions, t), decisions.size()};
}

ChoiceFit fit_choice_model(std::span<const EpisodeLog> logs, ChoiceModelKind kind, const FitOptions& options) {
  std::vector<Decision> all;
  for (const auto& log : logs) {
    auto d = model_decisions(log, kind);
    all.insert(all.end(), std::make_move_iterator(d.begin()), std::make_move_iterator(d.end()));
  }
  return fit_temperature(all, options);
}

std::string SoftmaxModelAgent::id() const { return "softmax_" + std::string(model_name(kind_)); }

void SoftmaxModelAgent::begin_episode(const SymbolicAlchemy& /*env*/, std::uint64_t seed) {
  rng_ = Rng(stream_seed(seed, Stream::model));
  belief_ = BeliefState::prior(model_space(kind_));
}

void SoftmaxModelAgent::begin_trial(const SymbolicAlchemy& env) {
  const auto percepts = env.present_stone_percepts();
  belief_ = belief_->observe_stones(percepts);
}

Action SoftmaxModelAgent::act(const SymbolicAlchemy& env) {
  const auto values = lookahead_values(env, *belief_);
  const auto logp = softmax_log_probs(values, temperature_);
  const auto legal = env.legal_actions();
  double u = rng_.uniform01();
  for (std::size_t i = 0; i < legal.size(); ++i) {
    u -= std::exp(logp[i]);
    if (u < 0) return legal[i];
  }
  return legal.back();
}

void SoftmaxModelAgent::observe(const Action& action, const StepResult& result) {
  if (action.kind != Action::Kind::use_potion || result.info.invalid_action) return;
  belief_ = belief_->observe_outcome(result.info.before, result.info.color, result.info.after);
}

}  // namespace alchemy
