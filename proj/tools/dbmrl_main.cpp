#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dbmrl/harness.hpp"

using namespace dbmrl;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t pos = csv.find(',', start);
    const std::string tok =
        csv.substr(start, pos == std::string::npos ? std::string::npos
                                                   : pos - start);
    if (tok.empty() ||
        !std::all_of(tok.begin(), tok.end(),
                     [](unsigned char c) { return std::isdigit(c); }))
      throw std::invalid_argument("config: bad --seed list entry \"" + tok +
                                  "\"");
    out.push_back(std::stoull(tok));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

struct Overrides {
  std::string out, backend, seeds;
  std::size_t episodes = 0;
  bool trace = false;
};

void apply_overrides(const Overrides& ov, ExperimentConfig& cfg) {
  if (!ov.out.empty()) cfg.out_dir = ov.out;
  if (ov.episodes > 0) cfg.episodes = ov.episodes;
  if (!ov.seeds.empty()) cfg.seeds = parse_seed_list(ov.seeds);
  if (!ov.backend.empty())
    for (HeadConfig* h : {&cfg.policy_head, &cfg.value_head,
                          &cfg.batch_mlp_head, &cfg.batch_dbm_head})
      if (h->type == "dbm") h->backend = ov.backend;
  cfg.validate();
}

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--seed", ov.seeds, "seed list, e.g. 1,2,3");
  cmd->add_option("--out", ov.out, "output directory");
  cmd->add_option("--backend", ov.backend,
                  "sampler backend for all dbm heads")
      ->check(CLI::IsMember({"exact", "gibbs", "anneal"}));
  cmd->add_option("--episodes", ov.episodes, "episode count per run");
}

std::string run_dir_of(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.out_dir + "/" + cfg.name + "/seed_" + std::to_string(seed);
}

// Replays the trained policy greedily and the scripted defender on the same
// episode seed, dumping both per-timestep traces next to the metrics.
void write_traces(const ExperimentConfig& cfg, std::uint64_t seed) {
  const std::string dir = run_dir_of(cfg, seed);
  Checkpoint c = load_checkpoint(dir + "/checkpoint.json");
  const std::uint64_t ep_seed = derive_seed(seed, "trace");

  CyberEnv env(cfg.resolve_env());
  env.set_trace(true);
  Agent agent = std::move(c.agent);
  run_episode(env, ep_seed,
              [&agent](const CyberEnv&, const UnitAssignment& obs) {
                const std::vector<double> logits =
                    agent_policy_logits(agent, obs);
                return std::size_t(std::max_element(logits.begin(),
                                                    logits.end()) -
                                   logits.begin());
              });
  std::ofstream tf(dir + "/trace.csv");
  dump_trace_csv(env.trace(), tf);

  CyberEnv ref(cfg.resolve_env());
  ref.set_trace(true);
  run_episode(ref, ep_seed, [](const CyberEnv& e, const UnitAssignment&) {
    return oracle_action(e.spec(), e.state());
  });
  std::ofstream of(dir + "/trace_oracle.csv");
  dump_trace_csv(ref.trace(), of);
}

void print_run_summary(const ExperimentConfig& cfg,
                       const std::vector<RunMetrics>& all) {
  for (std::size_t i = 0; i < all.size(); ++i) {
    const RunMetrics& m = all[i];
    std::cout << cfg.name << " seed " << cfg.seeds[i] << ": "
              << m.episodes.size() << " episodes";
    if (!m.ma5.empty())
      std::cout << ", final ma5 " << format_double(m.ma5.back());
    if (m.plateau_episode)
      std::cout << ", plateau at episode " << *m.plateau_episode;
    else
      std::cout << ", no plateau";
    std::cout << '\n';
  }
}

int cmd_run(const std::string& config_path, const Overrides& ov) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  apply_overrides(ov, cfg);
  const std::vector<RunMetrics> all = run_experiment(cfg);
  print_run_summary(cfg, all);
  if (ov.trace)
    for (const std::uint64_t seed : cfg.seeds) write_traces(cfg, seed);
  std::cout << "wrote " << cfg.out_dir << "/" << cfg.name << '\n';
  return 0;
}

int cmd_batch(const std::string& config_path, const Overrides& ov) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  apply_overrides(ov, cfg);
  std::vector<VariantRuns> results;
  for (const ExperimentConfig& v : batch_variants(cfg)) {
    std::cout << "training " << v.name << " (" << v.seeds.size()
              << " seeds x " << v.episodes << " episodes)\n";
    results.emplace_back(v.name, run_experiment(v));
    print_run_summary(v, results.back().second);
    if (ov.trace)
      for (const std::uint64_t seed : v.seeds) write_traces(v, seed);
  }
  const CompareReport rep = compare_report(results);
  write_compare_report(rep, results, cfg.out_dir + "/report");
  std::cout << compare_table_text(rep);
  std::cout << "wrote " << cfg.out_dir << "/report\n";
  return 0;
}

int cmd_report(const std::string& root) {
  std::vector<fs::path> vdirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && e.path().filename() != "report")
      vdirs.push_back(e.path());
  std::sort(vdirs.begin(), vdirs.end());

  std::vector<VariantRuns> results;
  for (const fs::path& vd : vdirs) {
    std::vector<std::pair<std::uint64_t, std::string>> seeds;
    for (const auto& s : fs::directory_iterator(vd)) {
      const std::string name = s.path().filename().string();
      if (s.is_directory() && name.rfind("seed_", 0) == 0 &&
          fs::exists(s.path() / "episodes.csv"))
        seeds.emplace_back(std::stoull(name.substr(5)), s.path().string());
    }
    if (seeds.empty()) continue;
    std::sort(seeds.begin(), seeds.end());
    std::vector<RunMetrics> runs;
    runs.reserve(seeds.size());
    for (const auto& [seed, path] : seeds)
      runs.push_back(load_run_metrics(path));
    results.emplace_back(vd.filename().string(), std::move(runs));
  }
  if (results.empty())
    throw std::invalid_argument("config: no run directories under " + root);
  const CompareReport rep = compare_report(results);
  write_compare_report(rep, results, (fs::path(root) / "report").string());
  std::cout << compare_table_text(rep);
  return 0;
}

int cmd_validate(const std::string& config_path) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  std::cout << "ok: " << cfg.name << ", env " << cfg.env_name << ", "
            << cfg.seeds.size() << " seeds, " << cfg.episodes
            << " episodes\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"free-energy RL experiments on a network-defense environment"};
  app.require_subcommand(1);

  std::string run_config, batch_config, validate_config, report_dir;
  Overrides run_ov, batch_ov;

  CLI::App* run = app.add_subcommand("run", "train one experiment config");
  run->add_option("--config", run_config, "experiment config file")
      ->required();
  add_override_flags(run, run_ov);
  run->add_flag("--trace", run_ov.trace,
                "dump greedy-policy and scripted-defender episode traces");

  CLI::App* batch =
      app.add_subcommand("batch", "train the four head-combination variants");
  batch->add_option("--config", batch_config, "experiment config file")
      ->required();
  add_override_flags(batch, batch_ov);
  batch->add_flag("--trace", batch_ov.trace,
                  "dump episode traces for every variant");

  CLI::App* report = app.add_subcommand(
      "report", "rebuild the comparison report from run directories");
  report->add_option("--out", report_dir, "directory holding variant runs")
      ->required();

  CLI::App* validate =
      app.add_subcommand("validate", "check a config file and exit");
  validate->add_option("--config", validate_config, "experiment config file")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(run)) return cmd_run(run_config, run_ov);
    if (app.got_subcommand(batch)) return cmd_batch(batch_config, batch_ov);
    if (app.got_subcommand(report)) return cmd_report(report_dir);
    return cmd_validate(validate_config);
  } catch (const TrainingDiverged& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
