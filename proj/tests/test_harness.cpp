#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dbmrl/harness.hpp"

using namespace dbmrl;
namespace fs = std::filesystem;

namespace {

// Exhaustive reference: first index from which every later point stays within
// tolerance of the last-`hold` mean.
std::optional<std::size_t> naive_plateau(const std::vector<double>& ma,
                                         double tol_frac, std::size_t hold) {
  const std::size_t h = std::min(hold, ma.size());
  double level = 0.0;
  for (std::size_t i = ma.size() - h; i < ma.size(); ++i) level += ma[i];
  level /= double(h);
  const double tol = tol_frac * std::abs(level);
  for (std::size_t i = 0; i < ma.size(); ++i) {
    bool ok = true;
    for (std::size_t k = i; k < ma.size(); ++k)
      if (std::abs(ma[k] - level) > tol) {
        ok = false;
        break;
      }
    if (ok) return i;
  }
  return std::nullopt;
}

RunMetrics synth_run(const std::vector<double>& rewards) {
  RunMetrics m;
  for (std::size_t i = 0; i < rewards.size(); ++i)
    m.episodes.push_back({i + 1, rewards[i], 30, 0.0});
  m.finalize();
  return m;
}

// 0 until episode `plateau_ep - 5`, then `level`: the 5-episode moving
// average first equals `level` exactly at episode `plateau_ep`.
std::vector<double> step_series(std::size_t n, std::size_t plateau_ep,
                                double level) {
  std::vector<double> out(n, level);
  for (std::size_t i = 0; i + 5 < plateau_ep; ++i) out[i] = 0.0;
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(bool(in));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::string fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("dbmrl_harness_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

ExperimentConfig tiny_mlp_config() {
  ExperimentConfig cfg;
  cfg.name = "tiny";
  cfg.policy_head.hidden = {8};
  cfg.value_head.hidden = {8};
  cfg.ppo.n_steps = 60;
  cfg.ppo.minibatch_size = 30;
  cfg.episodes = 4;
  return cfg;
}

}  // namespace

TEST_CASE("moving average matches a direct windowed mean") {
  CHECK(moving_average({1, 2, 3, 4, 5}, 5) == std::vector<double>{3.0});
  CHECK(moving_average({7, 7, 7}, 1) == std::vector<double>{7, 7, 7});
  CHECK(moving_average({1, 2}, 3).empty());

  Rng rng{911};
  std::vector<double> s;
  for (int i = 0; i < 50; ++i) s.push_back(rng.uniform01() * 20 - 10);
  for (const std::size_t w : {1, 3, 5, 7}) {
    const std::vector<double> ma = moving_average(s, w);
    REQUIRE(ma.size() == s.size() - w + 1);
    for (std::size_t i = 0; i < ma.size(); ++i) {
      double mean = 0.0;
      for (std::size_t k = i; k < i + w; ++k) mean += s[k];
      CHECK(ma[i] == doctest::Approx(mean / double(w)).epsilon(1e-12));
    }
  }

  CHECK_THROWS_AS(moving_average({}, 5), std::invalid_argument);
  CHECK_THROWS_AS(moving_average({1.0}, 0), std::invalid_argument);
}

TEST_CASE("plateau detection agrees with an exhaustive scan") {
  // constant series settles immediately
  CHECK(plateau_index(std::vector<double>(20, 4.5)) == std::size_t{0});

  // runaway growth never settles: the tail keeps leaving the band
  std::vector<double> grow;
  double v = 1.0;
  for (int i = 0; i < 60; ++i, v *= 1.2) grow.push_back(v);
  CHECK(!plateau_index(grow).has_value());

  // ramp then flat settles near the start of the flat region
  std::vector<double> ramp;
  for (int i = 0; i < 20; ++i) ramp.push_back(5.0 * i);
  for (int i = 0; i < 30; ++i) ramp.push_back(100.0);
  const auto at = plateau_index(ramp);
  REQUIRE(at.has_value());
  CHECK(*at >= 15);
  CHECK(*at <= 22);

  // randomized agreement with the exhaustive reference
  Rng rng{4242};
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> ma;
    const std::size_t n = 10 + rng.below(60);
    const double level = rng.uniform01() * 200 - 100;
    const std::size_t settle = rng.below(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double wobble = (rng.uniform01() - 0.5) *
                            (i < settle ? 4.0 * std::abs(level) + 4.0
                                        : 0.04 * std::abs(level));
      ma.push_back(level + wobble);
    }
    const double tol = 0.01 + rng.uniform01() * 0.2;
    const std::size_t hold = 1 + rng.below(6);
    CHECK(plateau_index(ma, tol, hold) == naive_plateau(ma, tol, hold));
  }

  CHECK_THROWS_AS(plateau_index({}), std::invalid_argument);
  CHECK_THROWS_AS(plateau_index({1.0}, 0.05, 0), std::invalid_argument);
  CHECK_THROWS_AS(plateau_index({1.0}, -0.1), std::invalid_argument);
}

TEST_CASE("run metrics number plateau episodes from 1 and scale invariantly") {
  RunMetrics m = synth_run(step_series(60, 40, 50.0));
  REQUIRE(m.plateau_episode.has_value());
  CHECK(*m.plateau_episode == 40);
  CHECK(m.ma5.size() == 56);
  CHECK(m.ma5.back() == doctest::Approx(50.0));

  // rescaling all rewards moves nothing: the tolerance band is relative
  std::vector<double> scaled = step_series(60, 40, 50.0);
  for (double& r : scaled) r *= 3.7;
  RunMetrics ms = synth_run(scaled);
  REQUIRE(ms.plateau_episode.has_value());
  CHECK(*ms.plateau_episode == 40);

  RunMetrics short_run = synth_run({1, 2, 3});
  CHECK(short_run.ma5.empty());
  CHECK(!short_run.plateau_episode.has_value());
}

TEST_CASE("experiment config supplies defaults and round trips") {
  const ExperimentConfig d = parse_experiment_config("{}");
  CHECK(d.name == "run");
  CHECK(d.env_name == "default");
  CHECK(!d.env_spec.has_value());
  CHECK(d.episodes == 300);
  CHECK(d.seeds == std::vector<std::uint64_t>{1});
  CHECK(d.out_dir == "runs");
  CHECK(!d.record_walltime);
  CHECK(d.ppo.learning_rate == doctest::Approx(3e-4));
  CHECK(d.ppo.n_steps == 120);
  CHECK(d.policy_head.type == "mlp");
  CHECK(d.policy_head.hidden == std::vector<std::size_t>{32});
  CHECK(d.batch_dbm_head.type == "dbm");
  CHECK(d.batch_dbm_head.hidden == std::vector<std::size_t>{8, 8});
  CHECK(d.batch_dbm_head.backend == "exact");

  ExperimentConfig cfg = parse_experiment_config(R"({
    "name": "round-trip",
    "env": "deterministic",
    "ppo": {"learning_rate": 0.001, "n_steps": 90, "minibatch_size": 30,
            "reuse_rollout_support": true},
    "policy_head": {"type": "dbm", "hidden": [4, 3], "backend": "gibbs",
                    "beta": 2.5, "init_scale": 0.05,
                    "sampler": {"num_reads": 64, "burn_in": 32, "thin": 2}},
    "value_head": {"type": "mlp", "hidden": [16, 16]},
    "episodes": 12,
    "seeds": [3, 9],
    "out_dir": "elsewhere",
    "record_walltime": true
  })");
  CHECK(cfg.env_name == "deterministic");
  CHECK(cfg.policy_head.sampler.num_reads == 64);
  CHECK(cfg.policy_head.beta == doctest::Approx(2.5));
  CHECK(cfg.ppo.reuse_rollout_support);
  const std::string once = experiment_config_to_json(cfg);
  CHECK(experiment_config_to_json(parse_experiment_config(once)) == once);

  // inline env object parses as a custom spec and survives the round trip
  ExperimentConfig inline_env = parse_experiment_config(R"({
    "env": {
      "nodes": [{"id": "a", "kind": "pc", "initial": "healthy"},
                {"id": "b", "kind": "server", "initial": "healthy"}],
      "links": [{"id": "l0", "a": 0, "b": 1, "capacity": 2.0}],
      "green_demand": [1.0],
      "red_schedule": [{"timestep": 1, "kind": "ddos", "target": 0,
                        "success_prob": 0.5}],
      "random_reds": [{"target_node": 1, "success_prob": 0.25,
                       "onset_min": 2, "onset_max": 4, "period": 3}],
      "episode_length": 9,
      "weights": {"green": 2.0}
    },
    "episodes": 5
  })");
  CHECK(inline_env.env_name == "custom");
  REQUIRE(inline_env.env_spec.has_value());
  CHECK(inline_env.env_spec->nodes.size() == 2);
  CHECK(inline_env.env_spec->episode_length == 9);
  CHECK(inline_env.env_spec->weights.green == doctest::Approx(2.0));
  CHECK(inline_env.env_spec->weights.healthy == doctest::Approx(1.0));
  CHECK(inline_env.resolve_env().links[0].capacity == doctest::Approx(2.0));
  const std::string inl = experiment_config_to_json(inline_env);
  CHECK(experiment_config_to_json(parse_experiment_config(inl)) == inl);
}

TEST_CASE("experiment config rejects unknown keys and bad values") {
  const char* bad[] = {
      "not json at all",
      R"([1, 2])",
      R"({"bogus": 1})",
      R"({"ppo": {"lr": 0.001}})",
      R"({"policy_head": {"units": [4]}})",
      R"({"policy_head": {"sampler": {"reads": 9}}})",
      R"({"env": {"nodes": [], "links": [], "green_demand": [], "foo": 1}})",
      R"({"env": {"weights": {"blue": 1.0}}})",
      R"({"env": {"nodes": [{"id": "a", "kind": "pc", "name": "x"}]}})",
      R"({"env": {"red_schedule": [{"timestep": 0, "prob": 0.5}]}})",
      R"({"env": {"random_reds": [{"target_node": 0, "start": 1}]}})",
      R"({"env": "custom"})",
      R"({"env": "marsnet"})",
      R"({"episodes": 0})",
      R"({"episodes": -3})",
      R"({"seeds": []})",
      R"({"seeds": 7})",
      R"({"name": "has space"})",
      R"({"name": ""})",
      R"({"ppo": {"gamma": 1.5}})",
      R"({"ppo": {"gamma": "x"}})",
      R"({"policy_head": {"type": "rbm"}})",
      R"({"policy_head": {"type": "dbm", "hidden": []}})",
      R"({"policy_head": {"type": "dbm", "hidden": [30], "backend": "exact"}})",
      R"({"policy_head": {"type": "dbm", "hidden": [4], "backend": "laplace"}})",
      R"({"policy_head": {"type": "dbm", "hidden": [4], "beta": 0.0}})",
      R"({"mlp_head": {"type": "dbm", "hidden": [2]}})",
      R"({"dbm_head": {"type": "mlp"}})",
      R"({"record_walltime": "yes"})",
  };
  for (const char* text : bad) {
    CAPTURE(text);
    CHECK_THROWS_AS(parse_experiment_config(text), std::invalid_argument);
  }
}

TEST_CASE("head construction is seed deterministic") {
  HeadConfig mlp;
  mlp.hidden = {6};
  const Head a = make_head(mlp, 10, 4, 77);
  const Head b = make_head(mlp, 10, 4, 77);
  const Head c = make_head(mlp, 10, 4, 78);
  REQUIRE(std::holds_alternative<MlpHead>(a));
  CHECK(std::get<MlpHead>(a).w == std::get<MlpHead>(b).w);
  CHECK(std::get<MlpHead>(a).w != std::get<MlpHead>(c).w);

  HeadConfig dbm;
  dbm.type = "dbm";
  dbm.hidden = {4, 3};
  dbm.backend = "gibbs";
  dbm.beta = 1.5;
  const Head p = make_head(dbm, 10, 4, 77);
  const Head q = make_head(dbm, 10, 4, 77);
  const Head r = make_head(dbm, 10, 4, 78);
  REQUIRE(std::holds_alternative<FreeEnergyHead>(p));
  const FreeEnergyHead& ph = std::get<FreeEnergyHead>(p);
  CHECK(ph.kind == HeadKind::policy);
  CHECK(ph.backend == SamplerBackend::gibbs);
  CHECK(ph.topo.n_state == 10);
  CHECK(ph.topo.n_action == 4);
  CHECK(ph.weights.beta == doctest::Approx(1.5));
  CHECK(weights_to_json(ph.weights, ph.topo) ==
        weights_to_json(std::get<FreeEnergyHead>(q).weights, ph.topo));
  CHECK(weights_to_json(ph.weights, ph.topo) !=
        weights_to_json(std::get<FreeEnergyHead>(r).weights, ph.topo));

  // value heads carry no action units
  const Head v = make_head(dbm, 10, 0, 5);
  CHECK(std::get<FreeEnergyHead>(v).kind == HeadKind::value);
  CHECK(std::get<FreeEnergyHead>(v).topo.n_action == 0);
}

TEST_CASE("training run writes the full run directory") {
  const std::string dir = fresh_dir("run_dir");
  const ExperimentConfig cfg = tiny_mlp_config();
  const RunMetrics m = train_run(cfg, 11, dir);

  // 60-step rollouts on 30-step episodes: 2 episodes per rollout, and the
  // final rollout that reaches the target skips its update
  REQUIRE(m.episodes.size() == 4);
  CHECK(m.updates.size() == 1);
  CHECK(!m.aborted);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(m.episodes[i].episode == i + 1);
    CHECK(m.episodes[i].steps == 30);
    CHECK(m.episodes[i].total_reward >= -400.0);
    CHECK(m.episodes[i].total_reward <= 210.0);
    CHECK(m.episodes[i].wall_ms == 0.0);
  }

  const std::vector<std::string> ep = lines_of(slurp(dir + "/episodes.csv"));
  REQUIRE(ep.size() == 5);
  CHECK(ep[0] == "episode,total_reward,steps,ma5_reward,wall_ms");
  // before episode 5 the moving-average cell stays empty
  CHECK(ep[1].substr(0, 2) == "1,");
  CHECK(ep[1].substr(ep[1].size() - 6) == ",30,,0");
  CHECK(ep[4].substr(ep[4].size() - 6) == ",30,,0");

  const std::vector<std::string> up = lines_of(slurp(dir + "/updates.csv"));
  REQUIRE(up.size() == 2);
  CHECK(up[0] ==
        "update,policy_loss,value_loss,entropy,clip_fraction,mean_ratio,"
        "grad_norm,policy_sampler_calls,value_sampler_calls");
  CHECK(up[1].substr(0, 2) == "1,");
  CHECK(up[1].substr(up[1].size() - 4) == ",0,0");  // MLP heads never sample

  // config snapshot pins the seed that produced this directory
  const ExperimentConfig snap =
      parse_experiment_config(slurp(dir + "/config.json"));
  CHECK(snap.seeds == std::vector<std::uint64_t>{11});
  CHECK(snap.name == "tiny");
  CHECK(snap.ppo.n_steps == 60);

  const nlohmann::json meta =
      nlohmann::json::parse(slurp(dir + "/metadata.json"));
  CHECK(meta.at("version") == 1);
  CHECK(meta.at("variant") == "tiny");
  CHECK(meta.at("seed") == 11);
  CHECK(meta.at("episodes_completed") == 4);
  CHECK(meta.at("updates_completed") == 1);
  CHECK(meta.at("aborted") == false);
  CHECK(meta.at("plateau_episode").is_null());

  const nlohmann::json ck =
      nlohmann::json::parse(slurp(dir + "/checkpoint.json"));
  CHECK(nlohmann::json::parse(ck.at("extra").get<std::string>())
            .at("episodes") == 4);

  const RunMetrics back = load_run_metrics(dir);
  REQUIRE(back.episodes.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back.episodes[i].total_reward ==
          doctest::Approx(m.episodes[i].total_reward).epsilon(1e-15));
    CHECK(back.episodes[i].steps == 30);
  }
  REQUIRE(back.updates.size() == 1);
  CHECK(back.updates[0].policy_loss ==
        doctest::Approx(m.updates[0].policy_loss).epsilon(1e-15));
  CHECK(!back.aborted);
}

TEST_CASE("identical runs produce byte identical metrics files") {
  const std::string a = fresh_dir("bytes_a");
  const std::string b = fresh_dir("bytes_b");
  ExperimentConfig cfg = tiny_mlp_config();
  cfg.episodes = 6;
  train_run(cfg, 21, a);
  train_run(cfg, 21, b);
  CHECK(slurp(a + "/episodes.csv") == slurp(b + "/episodes.csv"));
  CHECK(slurp(a + "/updates.csv") == slurp(b + "/updates.csv"));
  CHECK(slurp(a + "/checkpoint.json") == slurp(b + "/checkpoint.json"));
  CHECK(slurp(a + "/config.json") == slurp(b + "/config.json"));

  // a different seed changes the trajectory
  const std::string c = fresh_dir("bytes_c");
  train_run(cfg, 22, c);
  CHECK(slurp(a + "/episodes.csv") != slurp(c + "/episodes.csv"));
}

TEST_CASE("divergence aborts the run but preserves metrics") {
  const std::string dir = fresh_dir("abort");
  ExperimentConfig cfg = tiny_mlp_config();
  cfg.episodes = 20;
  cfg.ppo.value_coef = 1e160;  // squared-norm overflow on the first update
  CHECK_THROWS_AS(train_run(cfg, 5, dir), TrainingDiverged);

  const nlohmann::json meta =
      nlohmann::json::parse(slurp(dir + "/metadata.json"));
  CHECK(meta.at("aborted") == true);
  CHECK(meta.at("episodes_completed") == 2);
  CHECK(!fs::exists(dir + "/checkpoint.json"));

  const std::vector<std::string> ep = lines_of(slurp(dir + "/episodes.csv"));
  CHECK(ep.size() == 3);  // header + the two episodes before the abort

  const RunMetrics back = load_run_metrics(dir);
  CHECK(back.aborted);
  CHECK(back.episodes.size() == 2);
}

TEST_CASE("sampler call accounting in update rows") {
  ExperimentConfig cfg;
  cfg.policy_head.type = "dbm";
  cfg.policy_head.hidden = {4};
  cfg.policy_head.backend = "gibbs";
  cfg.policy_head.sampler.num_reads = 10;
  cfg.policy_head.sampler.burn_in = 10;
  cfg.value_head.hidden = {8};
  cfg.episodes = 8;  // two 120-step rollouts, one update between them

  // reusing rollout supports: exactly one draw per policy evaluation
  cfg.ppo.reuse_rollout_support = true;
  RunMetrics reuse = train_run(cfg, 3, "");
  REQUIRE(reuse.updates.size() == 1);
  CHECK(reuse.updates[0].policy_sampler_calls == 120);
  CHECK(reuse.updates[0].value_sampler_calls == 0);

  // fresh draws add one per sample per epoch pass
  cfg.ppo.reuse_rollout_support = false;
  RunMetrics fresh = train_run(cfg, 3, "");
  REQUIRE(fresh.updates.size() == 1);
  CHECK(fresh.updates[0].policy_sampler_calls ==
        120 + cfg.ppo.n_epochs * 120);

  // the exact backend enumerates once for the forward pass and once for the
  // gradient of every sample it touches
  cfg.policy_head.backend = "exact";
  RunMetrics exact = train_run(cfg, 3, "");
  REQUIRE(exact.updates.size() == 1);
  CHECK(exact.updates[0].policy_sampler_calls ==
        120 + 2 * cfg.ppo.n_epochs * 120);
  CHECK(exact.episodes.size() == 8);
}

TEST_CASE("comparison report ranks variants against the baseline") {
  const std::size_t n = 100;
  const auto runs = [&](std::size_t plateau_ep) {
    return std::vector<RunMetrics>{synth_run(step_series(n, plateau_ep, 100)),
                                   synth_run(step_series(n, plateau_ep, 100))};
  };
  // baseline deliberately listed second: the report must move it first
  std::vector<VariantRuns> variants = {{"dbm_mlp", runs(25)},
                                       {"mlp_mlp", runs(50)},
                                       {"mlp_dbm", runs(50)},
                                       {"dbm_dbm", runs(75)}};
  const CompareReport rep = compare_report(variants);
  REQUIRE(rep.rows.size() == 4);
  CHECK(rep.rows[0].name == "mlp_mlp");
  REQUIRE(rep.rows[0].plateau_mean.has_value());
  CHECK(*rep.rows[0].plateau_mean == doctest::Approx(50.0));
  CHECK(*rep.rows[0].plateau_pct == doctest::Approx(100.0));
  CHECK(rep.rows[1].name == "dbm_mlp");
  CHECK(*rep.rows[1].plateau_mean == doctest::Approx(25.0));
  CHECK(*rep.rows[1].plateau_pct == doctest::Approx(50.0));
  CHECK(*rep.rows[2].plateau_pct == doctest::Approx(100.0));
  CHECK(*rep.rows[3].plateau_pct == doctest::Approx(150.0));
  for (const VariantRow& row : rep.rows) {
    CHECK(row.final_ma_level == doctest::Approx(100.0));
    REQUIRE(row.plateaus.size() == 2);
    CHECK(row.plateaus[0] == row.plateaus[1]);
  }

  // a variant that never settles reports no plateau and no percentage
  std::vector<double> runaway;
  double v = 1.0;
  for (std::size_t i = 0; i < n; ++i, v *= 1.2) runaway.push_back(v);
  std::vector<VariantRuns> with_runaway = variants;
  with_runaway.push_back({"unstable", {synth_run(runaway), synth_run(runaway)}});
  const CompareReport rep2 = compare_report(with_runaway);
  CHECK(!rep2.rows.back().plateau_mean.has_value());
  CHECK(!rep2.rows.back().plateau_pct.has_value());

  // mismatched shapes are configuration errors, not silent truncation
  std::vector<VariantRuns> ragged = variants;
  ragged[2].second[1] = synth_run(step_series(n - 1, 50, 100));
  CHECK_THROWS_AS(compare_report(ragged), std::invalid_argument);
  std::vector<VariantRuns> uneven = variants;
  uneven[3].second.pop_back();
  CHECK_THROWS_AS(compare_report(uneven), std::invalid_argument);
  CHECK_THROWS_AS(compare_report({}), std::invalid_argument);

  const std::string dir = fresh_dir("report");
  write_compare_report(rep, variants, dir);
  const std::vector<std::string> summary = lines_of(slurp(dir + "/summary.csv"));
  REQUIRE(summary.size() == 5);
  CHECK(summary[0] ==
        "variant,plateau_episode,plateau_pct,final_ma_level,plateau_per_seed");
  CHECK(summary[1] == "mlp_mlp,50,100,100,50;50");
  CHECK(summary[2] == "dbm_mlp,25,50,100,25;25");
  CHECK(summary[4] == "dbm_dbm,75,150,100,75;75");
  const std::vector<std::string> curve =
      lines_of(slurp(dir + "/curve_mlp_mlp.csv"));
  REQUIRE(curve.size() == n + 1);
  CHECK(curve[0] == "episode,reward0,reward1,mean_reward,ma5_0,ma5_1");
  CHECK(curve[1] == "1,0,0,0,,");
  CHECK(curve[n] == "100,100,100,100,100,100");

  const std::string table = compare_table_text(rep);
  CHECK(table.find("mlp_mlp") != std::string::npos);
  CHECK(table.find("dbm_dbm") != std::string::npos);
}

TEST_CASE("batch expansion crosses head templates over both slots") {
  ExperimentConfig cfg = parse_experiment_config(R"({
    "name": "batch",
    "episodes": 40,
    "seeds": [1, 2, 3],
    "mlp_head": {"type": "mlp", "hidden": [16]},
    "dbm_head": {"type": "dbm", "hidden": [3, 2], "backend": "exact"}
  })");
  const std::vector<ExperimentConfig> variants = batch_variants(cfg);
  REQUIRE(variants.size() == 4);
  CHECK(variants[0].name == "mlp_mlp");
  CHECK(variants[1].name == "dbm_mlp");
  CHECK(variants[2].name == "mlp_dbm");
  CHECK(variants[3].name == "dbm_dbm");
  CHECK(variants[0].policy_head.type == "mlp");
  CHECK(variants[0].value_head.type == "mlp");
  CHECK(variants[1].policy_head.type == "dbm");
  CHECK(variants[1].policy_head.hidden == std::vector<std::size_t>{3, 2});
  CHECK(variants[1].value_head.type == "mlp");
  CHECK(variants[2].policy_head.type == "mlp");
  CHECK(variants[2].value_head.type == "dbm");
  CHECK(variants[3].policy_head.type == "dbm");
  CHECK(variants[3].value_head.type == "dbm");
  for (const ExperimentConfig& v : variants) {
    CHECK(v.episodes == 40);
    CHECK(v.seeds == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(v.policy_head.hidden ==
          (v.policy_head.type == "mlp" ? std::vector<std::size_t>{16}
                                       : std::vector<std::size_t>{3, 2}));
  }
}

TEST_CASE("experiments write one directory per seed") {
  const std::string dir = fresh_dir("experiment");
  ExperimentConfig cfg = tiny_mlp_config();
  cfg.name = "pair";
  cfg.episodes = 2;
  cfg.seeds = {4, 9};
  cfg.out_dir = dir;
  const std::vector<RunMetrics> all = run_experiment(cfg);
  REQUIRE(all.size() == 2);
  CHECK(fs::exists(dir + "/pair/seed_4/episodes.csv"));
  CHECK(fs::exists(dir + "/pair/seed_9/episodes.csv"));
  CHECK(all[0].episodes.size() == 2);
  CHECK(all[1].episodes.size() == 2);
  // seeds drive both the environment and the policy draw streams
  CHECK(slurp(dir + "/pair/seed_4/episodes.csv") !=
        slurp(dir + "/pair/seed_9/episodes.csv"));
}
