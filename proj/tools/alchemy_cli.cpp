// alchemy: enumeration audit, batch evaluation, log analysis, choice-model
// fitting and the human-play session service.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>

#include "CLI11.hpp"
#include "alchemy/analysis.hpp"
#include "alchemy/chemistry.hpp"
#include "alchemy/choice_model.hpp"
#include "alchemy/eval.hpp"
#include "alchemy/service.hpp"

namespace fs = std::filesystem;
using namespace alchemy;

namespace {

constexpr std::size_t kExpectedGraphs = 109;
constexpr std::uint64_t kExpectedChemistries = 167424;

std::string default_out_dir() {
  if (const char* dir = std::getenv("ALCHEMY_LOG_DIR"); dir && *dir) return dir;
  return "runs";
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

int run_enumerate(bool per_tier) {
  const auto start = std::chrono::steady_clock::now();
  const auto c = enumeration_counts();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream approx;
  approx << std::setprecision(4) << static_cast<double>(c.trial_initialisations);
  std::cout << "graphs: " << c.graphs << ", chemistries: " << c.chemistries << ", trial inits ≈ " << approx.str()
            << " (" << c.trial_initialisations << ")\n";
  if (per_tier)
    for (std::size_t t = 0; t < c.per_tier.size(); ++t) std::cout << "tier " << t << ": " << c.per_tier[t] << " graphs\n";
  std::cout << "time: " << std::fixed << std::setprecision(3) << seconds << " s\n";
  if (c.graphs != kExpectedGraphs || c.chemistries != kExpectedChemistries) {
    std::cerr << "audit failed: expected " << kExpectedGraphs << " graphs and " << kExpectedChemistries << " chemistries\n";
    return 1;
  }
  return 0;
}

std::vector<EpisodeLog> load_checked(const std::vector<std::string>& paths) {
  std::vector<EpisodeLog> logs;
  for (const auto& p : paths) {
    auto part = read_log_file(p);
    for (std::size_t i = 0; i < part.size(); ++i) {
      const auto report = replay(part[i]);
      if (!report.ok)
        throw std::runtime_error(p + ": episode " + std::to_string(i) + " (seed " + std::to_string(part[i].header.seed) +
                                 ") does not replay: step " + std::to_string(report.divergent_step) + ": " + report.reason);
    }
    logs.insert(logs.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  if (logs.empty()) throw std::runtime_error("no episodes in the given logs");
  return logs;
}

std::map<std::string, std::vector<EpisodeLog>> by_policy(std::vector<EpisodeLog> logs) {
  std::map<std::string, std::vector<EpisodeLog>> out;
  for (auto& log : logs) out[log.header.policy].push_back(std::move(log));
  return out;
}

void write_paired(std::ostream& out, const std::map<std::string, std::vector<EpisodeLog>>& groups) {
  out << "policy_a\tpolicy_b\tpairs\tmean_difference\tstderr\tt\tp_one_sided\n";
  for (auto a = groups.begin(); a != groups.end(); ++a) {
    for (auto b = std::next(a); b != groups.end(); ++b) {
      std::map<std::uint64_t, double> score_b;
      for (const auto& log : b->second) score_b[log.header.seed] = log.score;
      std::vector<double> xa;
      std::vector<double> xb;
      for (const auto& log : a->second) {
        auto it = score_b.find(log.header.seed);
        if (it == score_b.end()) continue;
        xa.push_back(log.score);
        xb.push_back(it->second);
      }
      if (xa.size() < 2) continue;
      // Report the ordering with the larger mean first.
      auto t = paired_test(xa, xb);
      auto first = a->first;
      auto second = b->first;
      if (t.mean_difference < 0) {
        t = paired_test(xb, xa);
        std::swap(first, second);
      }
      out << first << '\t' << second << '\t' << t.n << '\t' << t.mean_difference << '\t' << t.stderr_ << '\t' << t.t
          << '\t' << t.p_value << '\n';
    }
  }
}

void write_potions(std::ostream& out, const std::map<std::string, std::vector<EpisodeLog>>& groups) {
  out << "policy\ttrial\tmean_potions\tstderr\n";
  for (const auto& [policy, logs] : groups) {
    const auto m = potion_use_metrics(logs);
    for (std::size_t t = 0; t < m.per_trial.size(); ++t)
      out << policy << '\t' << t + 1 << '\t' << m.per_trial[t].mean << '\t' << m.per_trial[t].stderr_ << '\n';
    out << policy << "\tlast_minus_first\t" << m.last_minus_first.mean << '\t' << m.last_minus_first.stderr_ << '\n';
  }
}

void write_entropy(std::ostream& out, const std::map<std::string, std::vector<EpisodeLog>>& groups) {
  out << "policy\tend_trial_1\tstderr\tend_episode\tstderr\tnon_increasing_episodes\tepisodes\n";
  for (const auto& [policy, logs] : groups) {
    const auto m = entropy_metrics(logs);
    out << policy << '\t' << m.end_first_trial.mean << '\t' << m.end_first_trial.stderr_ << '\t' << m.end_episode.mean
        << '\t' << m.end_episode.stderr_ << '\t' << m.non_increasing_episodes << '\t' << m.episodes << '\n';
  }
}

void write_actions(std::ostream& out, const std::map<std::string, std::vector<EpisodeLog>>& groups) {
  out << "policy\ttrial\tno_effect_fraction\tstderr\n";
  for (const auto& [policy, logs] : groups) {
    const auto f = no_effect_fraction(logs);
    for (std::size_t t = 0; t < f.size(); ++t) out << policy << '\t' << t + 1 << '\t' << f[t].mean << '\t' << f[t].stderr_ << '\n';
  }
}

int run_analyze(const std::vector<std::string>& paths, const std::vector<std::string>& metrics, const std::string& out_dir) {
  const auto groups = by_policy(load_checked(paths));
  std::vector<EpisodeLog> all;
  for (const auto& [policy, logs] : groups) all.insert(all.end(), logs.begin(), logs.end());
  if (!out_dir.empty()) fs::create_directories(out_dir);
  auto emit = [&](const std::string& name, auto&& writer) {
    if (out_dir.empty()) {
      std::cout << "# " << name << '\n';
      writer(std::cout);
      std::cout << '\n';
    } else {
      auto out = open_out(fs::path(out_dir) / (name + ".tsv"));
      writer(out);
    }
  };
  for (const auto& m : metrics) {
    if (m == "summary") {
      emit("summary", [&](std::ostream& out) {
        const auto rows = summarize(all);
        write_summary_tsv(out, rows);
      });
      emit("paired", [&](std::ostream& out) { write_paired(out, groups); });
    } else if (m == "potions") {
      emit("potions", [&](std::ostream& out) { write_potions(out, groups); });
    } else if (m == "entropy") {
      emit("entropy", [&](std::ostream& out) { write_entropy(out, groups); });
    } else if (m == "actions") {
      emit("actions", [&](std::ostream& out) { write_actions(out, groups); });
    }
  }
  return 0;
}

int run_modelfit(const std::vector<std::string>& paths, const std::vector<std::string>& models, const std::string& out_path) {
  const auto groups = by_policy(load_checked(paths));
  std::ostringstream table;
  table << "policy\tmodel\ttemperature\tlog_likelihood\tdecisions\n";
  for (const auto& [policy, logs] : groups) {
    for (const auto& name : models) {
      const auto fit = fit_choice_model(logs, parse_model(name));
      table << policy << '\t' << name << '\t' << fit.temperature << '\t' << std::setprecision(12) << fit.log_likelihood
            << std::setprecision(6) << '\t' << fit.decisions << '\n';
    }
  }
  if (out_path.empty()) {
    std::cout << table.str();
  } else {
    auto out = open_out(out_path);
    out << table.str();
  }
  return 0;
}

int parse_lookahead(const std::string& text) {
  if (text == "exact") return kUnlimitedSteps;
  const int v = std::stoi(text);
  if (v < 0) throw CLI::ValidationError("--lookahead", "must be non-negative or 'exact'");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbolic Alchemy: environment, reference agents and analysis"};
  app.require_subcommand(1);

  auto* enumerate = app.add_subcommand("enumerate", "Count graphs and chemistries; exits 1 if the audit fails");
  bool per_tier = false;
  enumerate->add_flag("--per-tier", per_tier, "Also print graph counts per tier");

  auto* eval = app.add_subcommand("eval", "Run a policy over seeded episodes and write logs and tables");
  EvalConfig ec;
  std::string config_path;
  std::string out_dir = default_out_dir();
  std::string lookahead = std::to_string(kDefaultLookahead);
  bool marginals = false;
  eval->add_option("--policy", ec.policy, "ideal_observer, oracle or random_heuristic")
      ->check(CLI::IsMember({"ideal_observer", "oracle", "random_heuristic"}))
      ->capture_default_str();
  eval->add_option("-n,--episodes", ec.episodes, "Number of episodes")->capture_default_str()->check(CLI::NonNegativeNumber);
  eval->add_option("--seed", ec.base_seed, "Base seed; episode i uses derive_seed(seed, i)")->capture_default_str();
  eval->add_option("-j,--workers", ec.workers, "Worker threads (0 = all cores)")->capture_default_str();
  eval->add_option("--config", config_path, "Environment config file (key = value lines)");
  eval->add_option("-o,--out", out_dir, "Output directory (default $ALCHEMY_LOG_DIR or ./runs)");
  eval->add_option("--lookahead", lookahead, "Ideal-observer potion lookahead, or 'exact'")->capture_default_str();
  eval->add_option("--threshold", ec.agent.heuristic.threshold, "Random-heuristic deposit threshold")->capture_default_str();
  eval->add_flag("--persist-stone", ec.agent.heuristic.persist_stone, "Random heuristic keeps one stone until deposit");
  eval->add_flag("--marginals", marginals, "Log 28-dim posterior marginals with each belief snapshot");

  auto* analyze = app.add_subcommand("analyze", "Behavioural metrics from episode logs");
  std::vector<std::string> analyze_logs;
  std::vector<std::string> metrics;
  std::string analyze_out;
  analyze->add_option("logs", analyze_logs, "Episode log files")->required()->check(CLI::ExistingFile);
  analyze->add_option("-m,--metrics", metrics, "Any of: summary potions entropy actions")
      ->required()
      ->check(CLI::IsMember({"summary", "potions", "entropy", "actions"}));
  analyze->add_option("-o,--out", analyze_out, "Write one TSV per metric here instead of stdout");

  auto* modelfit = app.add_subcommand("modelfit", "Fit the softmax choice models to episode logs");
  std::vector<std::string> fit_logs;
  std::vector<std::string> models{"pairs_aware", "pairs_unaware"};
  std::string fit_out;
  modelfit->add_option("logs", fit_logs, "Episode log files")->required()->check(CLI::ExistingFile);
  modelfit->add_option("--models", models, "Models to fit")
      ->check(CLI::IsMember({"pairs_aware", "pairs_unaware"}))
      ->capture_default_str();
  modelfit->add_option("-o,--out", fit_out, "Write the fit table here instead of stdout");

  auto* serve_cmd = app.add_subcommand("serve", "Run the human-play session service");
  std::string host = "127.0.0.1";
  int port = 8080;
  long ttl = 3600;
  ServiceOptions so;
  std::string serve_config;
  serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", port, "Port")->capture_default_str();
  serve_cmd->add_option("--ttl", ttl, "Seconds before an idle session expires")->capture_default_str();
  serve_cmd->add_option("--seed", so.base_seed, "Base seed for sessions created without one")->capture_default_str();
  serve_cmd->add_option("--config", serve_config, "Environment config file");
  serve_cmd->add_option("--log-dir", so.log_dir, "Directory for finished session logs (default $ALCHEMY_LOG_DIR)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*enumerate) return run_enumerate(per_tier);
    if (*eval) {
      if (!config_path.empty()) {
        const auto settings = load_config(config_path);
        ec.env = settings.env;
        if (eval->count("--seed") == 0) ec.base_seed = settings.seed;
      }
      ec.agent.planner.lookahead = parse_lookahead(lookahead);
      ec.run.log_marginals = marginals;
      std::mutex io;
      const auto start = std::chrono::steady_clock::now();
      const int step = std::max(1, ec.episodes / 20);
      const auto result = evaluate(ec, [&](int done) {
        if (done % step != 0 && done != ec.episodes) return;
        std::lock_guard lock(io);
        std::cerr << "\r" << ec.policy << ": " << done << "/" << ec.episodes << std::flush;
      });
      std::cerr << '\n';
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      fs::create_directories(out_dir);
      const auto stem = fs::path(out_dir) / ec.policy;
      {
        auto out = open_out(stem.string() + ".jsonl");
        for (const auto& log : result.logs) write_log(out, log);
      }
      {
        auto out = open_out(stem.string() + ".episodes.tsv");
        write_records_tsv(out, result.records, ec.policy);
      }
      const auto rows = summarize(result.logs);
      {
        auto out = open_out(stem.string() + ".summary.tsv");
        write_summary_tsv(out, rows);
      }
      write_summary_table(std::cout, rows);
      std::cerr << "wrote " << stem.string() << ".{jsonl,episodes.tsv,summary.tsv} in " << std::fixed
                << std::setprecision(1) << seconds << " s\n";
      return 0;
    }
    if (*analyze) return run_analyze(analyze_logs, metrics, analyze_out);
    if (*modelfit) return run_modelfit(fit_logs, models, fit_out);
    if (*serve_cmd) {
      if (!serve_config.empty()) so.env = load_config(serve_config).env;
      if (so.log_dir.empty())
        if (const char* dir = std::getenv("ALCHEMY_LOG_DIR"); dir && *dir) so.log_dir = dir;
      so.ttl = std::chrono::seconds(ttl);
      SessionService service(so);
      std::cerr << "serving on http://" << host << ":" << port << '\n';
      serve(service, host, port);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
