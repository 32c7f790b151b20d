#include "alchemy/eval.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "alchemy/analysis.hpp"

namespace alchemy {

EpisodeRecord record_of(int index, const EpisodeLog& log) {
  EpisodeRecord r;
  r.index = index;
  r.seed = log.header.seed;
  r.score = log.score;
  r.potions_per_trial = potions_per_trial(log);
  if (!log.steps.empty() && log.steps.front().belief) r.entropy_per_trial = episode_entropy(log).end_of_trial;
  return r;
}

EvalResult evaluate(const EvalConfig& config, const std::function<void(int)>& progress) {
  config.env.validate();
  if (config.episodes < 0) throw std::invalid_argument("episode count must be non-negative");
  if (!make_agent(config.policy, config.agent)) throw std::invalid_argument("unknown policy: " + config.policy);
  const int workers = std::clamp(config.workers > 0 ? config.workers : static_cast<int>(std::thread::hardware_concurrency()),
                                 1, std::max(1, config.episodes));
  EvalResult result;
  result.logs.resize(static_cast<std::size_t>(config.episodes));
  result.records.resize(static_cast<std::size_t>(config.episodes));
  std::atomic<int> next{0};
  std::mutex mutex;
  int finished = 0;
  std::exception_ptr failure;
  auto work = [&] {
    // One agent and environment per worker; agents reset all per-episode
    // state in begin_episode.
    auto agent = make_agent(config.policy, config.agent);
    SymbolicAlchemy env(config.env);
    for (int i = next++; i < config.episodes; i = next++) {
      try {
        auto log = run_episode(*agent, env, derive_seed(config.base_seed, static_cast<std::uint64_t>(i)), config.run);
        result.records[static_cast<std::size_t>(i)] = record_of(i, log);
        result.logs[static_cast<std::size_t>(i)] = std::move(log);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        next = config.episodes;
        return;
      }
      std::lock_guard lock(mutex);
      ++finished;
      if (progress) progress(finished);
    }
  };
  std::vector<std::thread> threads;
  for (int w = 1; w < workers; ++w) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return result;
}

void write_records_tsv(std::ostream& out, std::span<const EpisodeRecord> records, const std::string& policy) {
  out << "policy\tepisode\tseed\tscore\tpotions_per_trial\tentropy_per_trial\n";
  for (const auto& r : records) {
    out << policy << '\t' << r.index << '\t' << r.seed << '\t' << r.score << '\t';
    for (std::size_t t = 0; t < r.potions_per_trial.size(); ++t) out << (t ? "," : "") << r.potions_per_trial[t];
    out << '\t';
    for (std::size_t t = 0; t < r.entropy_per_trial.size(); ++t) out << (t ? "," : "") << r.entropy_per_trial[t];
    out << '\n';
  }
}

}  // namespace alchemy
