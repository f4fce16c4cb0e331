#pragma once

// Experiment harness: JSON experiment configs (strictly validated), per-seed
// training runs that stream CSV metrics to a run directory, trailing
// moving-average / plateau analysis, and the cross-variant comparison report.
//
// Run directory layout (one per seed):
//   config.json    resolved config snapshot (env spec inlined)
//   episodes.csv   episode,total_reward,steps,ma5_reward,wall_ms
//   updates.csv    update,policy_loss,value_loss,entropy,clip_fraction,
//                  mean_ratio,grad_norm,policy_sampler_calls,value_sampler_calls
//   checkpoint.json  final trainer state (resumable)
//   metadata.json  version, seed, episode count, plateau, abort flag

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dbmrl/cyber_env.hpp"
#include "dbmrl/ppo.hpp"

namespace dbmrl {

struct HeadConfig {
  std::string type = "mlp";               // "mlp" | "dbm"
  std::vector<std::size_t> hidden = {32}; // MLP widths / DBM hidden layers
  double init_scale = 0.1;                // DBM init range (MLP scales by fan-in)
  double beta = 1.0;                      // DBM inverse temperature
  std::string backend = "exact";          // DBM: "exact" | "gibbs" | "anneal"
  SamplerConfig sampler;                  // DBM sampled-backend settings

  void validate() const;  // throws std::invalid_argument
};

struct ExperimentConfig {
  std::string name = "run";            // variant label: directory + report key
  std::string env_name = "default";    // "default" | "deterministic" | "custom"
  std::optional<NetworkSpec> env_spec; // required (and implied) when "custom"
  PpoConfig ppo;
  HeadConfig policy_head;
  HeadConfig value_head;
  HeadConfig batch_mlp_head;           // templates used by the 4-variant batch
  HeadConfig batch_dbm_head{"dbm", {8, 8}};
  std::size_t episodes = 300;
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir = "runs";
  bool record_walltime = false;        // off: wall_ms column is 0 (byte-stable)

  NetworkSpec resolve_env() const;
  void validate() const;  // throws std::invalid_argument
};

// Strict parse: unknown keys anywhere are errors, as are type mismatches.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);
// Full snapshot (named envs stay names, custom specs are inlined); parses
// back to an identical config.
std::string experiment_config_to_json(const ExperimentConfig& cfg);

struct EpisodeRow {
  std::size_t episode = 0;  // 1-based
  double total_reward = 0.0;
  std::size_t steps = 0;
  double wall_ms = 0.0;
};

struct UpdateRow {
  std::size_t update = 0;  // 1-based
  double policy_loss = 0.0, value_loss = 0.0, entropy = 0.0;
  double clip_fraction = 0.0, mean_ratio = 0.0, grad_norm = 0.0;
  std::uint64_t policy_sampler_calls = 0;  // cumulative
  std::uint64_t value_sampler_calls = 0;
};

struct RunMetrics {
  std::vector<EpisodeRow> episodes;
  std::vector<UpdateRow> updates;
  std::vector<double> ma5;                    // trailing 5-episode mean
  std::optional<std::size_t> plateau_episode; // 1-based episode, absent if none
  bool aborted = false;

  std::vector<double> rewards() const;
  void finalize();  // recomputes ma5 + plateau_episode from episodes
};

// Trailing mean over `window` points; result omits the first window-1
// entries.  Throws std::invalid_argument on empty input or window == 0.
std::vector<double> moving_average(const std::vector<double>& series,
                                   std::size_t window = 5);

// Final level = mean of the last `hold` points; returns the first index from
// which every later point stays within tolerance_frac*|level| of the level,
// or nullopt.  Throws std::invalid_argument on empty input or hold == 0.
std::optional<std::size_t> plateau_index(const std::vector<double>& ma,
                                         double tolerance_frac = 0.05,
                                         std::size_t hold = 5);

// Builds one head from its config (n_act == 0 selects a value head).
Head make_head(const HeadConfig& hc, std::size_t n_obs, std::size_t n_act,
               std::uint64_t seed);

// Trains one seed.  When run_dir is non-empty the directory is created and
// metrics stream row by row, so a numerical abort preserves everything up to
// the failing update (the abort is recorded, then rethrown).
RunMetrics train_run(const ExperimentConfig& cfg, std::uint64_t seed,
                     const std::string& run_dir);

// All configured seeds, each under <out_dir>/<name>/seed_<seed>.
std::vector<RunMetrics> run_experiment(const ExperimentConfig& cfg);

// Reads episodes.csv + updates.csv back from a run directory.
RunMetrics load_run_metrics(const std::string& run_dir);

// One named variant with its per-seed runs.
using VariantRuns = std::pair<std::string, std::vector<RunMetrics>>;

struct VariantRow {
  std::string name;
  std::vector<std::optional<std::size_t>> plateaus;  // per seed
  std::optional<double> plateau_mean;   // over seeds that plateaued
  std::optional<double> plateau_pct;    // 100 * mean / baseline mean
  double final_ma_level = 0.0;          // mean over seeds of last-hold MA mean
};

struct CompareReport {
  std::vector<VariantRow> rows;  // baseline first
};

// Plateau episodes and percentages relative to the "mlp_mlp" variant (or the
// first variant if no run carries that name).  All runs must share the
// episode count; throws std::invalid_argument otherwise.
CompareReport compare_report(const std::vector<VariantRuns>& variants,
                             std::size_t window = 5,
                             double tolerance_frac = 0.05,
                             std::size_t hold = 5);

// summary.csv plus one reward-curve CSV per variant, under `dir`.
void write_compare_report(const CompareReport& report,
                          const std::vector<VariantRuns>& variants,
                          const std::string& dir);

// Fixed-width text table of the report rows.
std::string compare_table_text(const CompareReport& report);

// The four head combinations (policy_value): mlp_mlp, dbm_mlp, mlp_dbm,
// dbm_dbm, derived from cfg's batch head templates.
std::vector<ExperimentConfig> batch_variants(const ExperimentConfig& cfg);

}  // namespace dbmrl
