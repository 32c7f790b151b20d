#include "alchemy/analysis.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace alchemy {

MeanStderr mean_stderr(std::span<const double> values) {
  MeanStderr m;
  m.n = values.size();
  if (values.empty()) return m;
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / static_cast<double>(m.n);
  if (m.n < 2) return m;
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.stderr_ = std::sqrt(ss / static_cast<double>(m.n - 1) / static_cast<double>(m.n));
  return m;
}

PairedTest paired_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired test needs samples of equal length");
  if (a.size() < 2) throw std::invalid_argument("paired test needs at least two pairs");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  const auto d = mean_stderr(diff);
  PairedTest t;
  t.n = d.n;
  t.mean_difference = d.mean;
  t.stderr_ = d.stderr_;
  if (d.stderr_ == 0.0) {
    t.t = d.mean > 0 ? INFINITY : d.mean < 0 ? -INFINITY : 0.0;
    t.p_value = d.mean > 0 ? 0.0 : 1.0;
    return t;
  }
  t.t = d.mean / d.stderr_;
  boost::math::students_t dist(static_cast<double>(d.n - 1));
  t.p_value = boost::math::cdf(boost::math::complement(dist, t.t));
  return t;
}

std::vector<int> potions_per_trial(const EpisodeLog& log) {
  std::vector<int> counts(static_cast<std::size_t>(log.header.config.trials), 0);
  for (const auto& s : log.steps) {
    if (s.action.kind != Action::Kind::use_potion) continue;
    if (s.trial < 0 || s.trial >= static_cast<int>(counts.size())) throw std::runtime_error("step trial index out of range");
    ++counts[static_cast<std::size_t>(s.trial)];
  }
  return counts;
}

PotionUseMetrics potion_use_metrics(std::span<const EpisodeLog> logs) {
  PotionUseMetrics m;
  if (logs.empty()) return m;
  const auto trials = static_cast<std::size_t>(logs.front().header.config.trials);
  std::vector<std::vector<double>> per_trial(trials);
  std::vector<double> diff;
  for (const auto& log : logs) {
    const auto counts = potions_per_trial(log);
    if (counts.size() != trials) throw std::runtime_error("logs mix different trial counts");
    for (std::size_t t = 0; t < trials; ++t) per_trial[t].push_back(counts[t]);
    diff.push_back(counts.back() - counts.front());
  }
  for (const auto& v : per_trial) m.per_trial.push_back(mean_stderr(v));
  m.first_trial = m.per_trial.front();
  m.last_minus_first = mean_stderr(diff);
  return m;
}

namespace {

std::vector<double> replayed_entropies(const EpisodeLog& log) {
  SymbolicAlchemy env(log.header.config);
  env.reset(log.header.seed);
  auto belief = BeliefState::prior();
  bool fresh_trial = true;
  std::vector<double> out;
  for (const auto& s : log.steps) {
    if (env.episode_over()) throw std::runtime_error("log continues after the episode ended");
    if (fresh_trial) {
      const auto percepts = env.present_stone_percepts();
      belief = belief.observe_stones(percepts);
      fresh_trial = false;
    }
    const auto r = env.step(s.action);
    if (s.action.kind == Action::Kind::use_potion && !r.info.invalid_action)
      belief = update_belief(belief, r.info.before, r.info.color, r.info.after);
    out.push_back(belief.entropy());
    if (r.trial_ended) fresh_trial = true;
  }
  return out;
}

}  // namespace

EpisodeEntropy episode_entropy(const EpisodeLog& log) {
  EpisodeEntropy e;
  e.initial = std::log(static_cast<double>(kNumChemistries));
  const bool logged = !log.steps.empty() && log.steps.front().belief.has_value();
  if (logged) {
    for (const auto& s : log.steps) {
      if (!s.belief) throw std::runtime_error("log has belief snapshots on some steps only");
      e.trajectory.push_back(s.belief->entropy);
    }
  } else {
    e.trajectory = replayed_entropies(log);
  }
  double last = e.initial;
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    if (e.trajectory[i] > last) e.non_increasing = false;
    last = e.trajectory[i];
    if (i + 1 == log.steps.size() || log.steps[i + 1].trial != log.steps[i].trial) e.end_of_trial.push_back(last);
  }
  return e;
}

EntropyMetrics entropy_metrics(std::span<const EpisodeLog> logs) {
  EntropyMetrics m;
  std::vector<double> first;
  std::vector<double> last;
  for (const auto& log : logs) {
    const auto e = episode_entropy(log);
    if (e.end_of_trial.empty()) continue;
    ++m.episodes;
    if (e.non_increasing) ++m.non_increasing_episodes;
    first.push_back(e.end_of_trial.front());
    last.push_back(e.end_of_trial.back());
  }
  m.end_first_trial = mean_stderr(first);
  m.end_episode = mean_stderr(last);
  return m;
}

std::vector<OutcomeClass> classify_actions(const EpisodeLog& log) {
  SymbolicAlchemy env(log.header.config);
  env.reset(log.header.seed);
  std::vector<OutcomeClass> out;
  out.reserve(log.steps.size());
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    if (env.episode_over()) throw std::runtime_error("log does not replay: episode over at step " + std::to_string(i));
    const auto& action = log.steps[i].action;
    const auto r = env.step(action);
    if (r.info.invalid_action || action.kind == Action::Kind::no_op) {
      out.push_back(OutcomeClass::no_op);
    } else if (action.kind == Action::Kind::deposit) {
      out.push_back(OutcomeClass::deposit);
    } else {
      const int delta = r.info.after.reward() - r.info.before.reward();
      out.push_back(delta > 0 ? OutcomeClass::value_increase
                    : delta < 0 ? OutcomeClass::value_decrease
                                : OutcomeClass::no_effect);
    }
    if (r.reward != log.steps[i].reward) throw std::runtime_error("log does not replay: reward mismatch at step " + std::to_string(i));
  }
  return out;
}

std::vector<MeanStderr> no_effect_fraction(std::span<const EpisodeLog> logs) {
  std::vector<std::vector<double>> per_trial;
  for (const auto& log : logs) {
    const auto classes = classify_actions(log);
    const auto trials = static_cast<std::size_t>(log.header.config.trials);
    if (per_trial.size() < trials) per_trial.resize(trials);
    std::vector<int> uses(trials, 0);
    std::vector<int> idle(trials, 0);
    for (std::size_t i = 0; i < classes.size(); ++i) {
      const auto t = static_cast<std::size_t>(log.steps[i].trial);
      switch (classes[i]) {
        case OutcomeClass::no_effect: ++idle[t]; [[fallthrough]];
        case OutcomeClass::value_increase:
        case OutcomeClass::value_decrease: ++uses[t]; break;
        default: break;
      }
    }
    for (std::size_t t = 0; t < trials; ++t)
      if (uses[t] > 0) per_trial[t].push_back(static_cast<double>(idle[t]) / uses[t]);
  }
  std::vector<MeanStderr> out;
  for (const auto& v : per_trial) out.push_back(mean_stderr(v));
  return out;
}

std::vector<SummaryRow> summarize(std::span<const EpisodeLog> logs) {
  std::vector<std::string> order;
  std::vector<std::vector<double>> scores;
  for (const auto& log : logs) {
    auto it = std::find(order.begin(), order.end(), log.header.policy);
    if (it == order.end()) {
      order.push_back(log.header.policy);
      scores.emplace_back();
      it = std::prev(order.end());
    }
    scores[static_cast<std::size_t>(it - order.begin())].push_back(log.score);
  }
  std::vector<SummaryRow> rows;
  for (std::size_t i = 0; i < order.size(); ++i) rows.push_back({order[i], mean_stderr(scores[i])});
  return rows;
}

void write_summary_table(std::ostream& out, std::span<const SummaryRow> rows) {
  out << std::left << std::setw(20) << "Agent" << "Score" << '\n';
  for (const auto& r : rows)
    out << std::left << std::setw(20) << r.policy << std::fixed << std::setprecision(1) << r.score.mean << " ± "
        << r.score.stderr_ << "  (n=" << r.score.n << ")\n";
  out << std::defaultfloat;
}

void write_summary_tsv(std::ostream& out, std::span<const SummaryRow> rows) {
  out << "policy\tepisodes\tmean\tstderr\n";
  for (const auto& r : rows) out << r.policy << '\t' << r.score.n << '\t' << r.score.mean << '\t' << r.score.stderr_ << '\n';
}

}  // namespace alchemy
