#include "dbmrl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dbmrl {
namespace {

using nlohmann::json;

[[noreturn]] void cfg_error(const std::string& msg) {
  throw std::invalid_argument(
      msg.rfind("config", 0) == 0 ? msg : "config: " + msg);
}

// Object reader that rejects keys it was never asked about.
class StrictObj {
 public:
  StrictObj(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) cfg_error(where_ + ": expected an object");
  }
  const json* find(const char* key) {
    seen_.push_back(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        cfg_error(where_ + ": unknown key \"" + it.key() + "\"");
  }
  std::string sub(const char* key) const { return where_ + "." + key; }

 private:
  const json& j_;
  std::string where_;
  std::vector<std::string> seen_;
};

double want_double(const json& v, const std::string& where) {
  if (!v.is_number()) cfg_error(where + ": expected a number");
  return v.get<double>();
}

std::size_t want_size(const json& v, const std::string& where) {
  if (!v.is_number_unsigned()) cfg_error(where + ": expected a nonnegative integer");
  return v.get<std::size_t>();
}

bool want_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) cfg_error(where + ": expected true or false");
  return v.get<bool>();
}

std::string want_string(const json& v, const std::string& where) {
  if (!v.is_string()) cfg_error(where + ": expected a string");
  return v.get<std::string>();
}

std::vector<std::size_t> want_size_array(const json& v, const std::string& where) {
  if (!v.is_array()) cfg_error(where + ": expected an array");
  std::vector<std::size_t> out;
  for (const json& e : v) out.push_back(want_size(e, where));
  return out;
}

// ---- NetworkSpec <-> JSON ---------------------------------------------------

const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::pc: return "pc";
    case NodeKind::server: return "server";
    case NodeKind::sw: return "switch";
  }
  return "?";
}

NodeKind parse_kind(const std::string& s, const std::string& where) {
  if (s == "pc") return NodeKind::pc;
  if (s == "server") return NodeKind::server;
  if (s == "switch") return NodeKind::sw;
  cfg_error(where + ": unknown node kind \"" + s + "\"");
}

const char* status_name(NodeStatus s) {
  switch (s) {
    case NodeStatus::healthy: return "healthy";
    case NodeStatus::compromised: return "compromised";
    case NodeStatus::patching: return "patching";
  }
  return "?";
}

NodeStatus parse_status(const std::string& s, const std::string& where) {
  if (s == "healthy") return NodeStatus::healthy;
  if (s == "compromised") return NodeStatus::compromised;
  if (s == "patching") return NodeStatus::patching;
  cfg_error(where + ": unknown node status \"" + s + "\"");
}

json spec_to_json(const NetworkSpec& s) {
  json j;
  json nodes = json::array();
  for (const NodeSpec& n : s.nodes)
    nodes.push_back({{"id", n.id},
                     {"kind", kind_name(n.kind)},
                     {"initial", status_name(n.initial)}});
  j["nodes"] = std::move(nodes);
  json links = json::array();
  for (const LinkSpec& l : s.links)
    links.push_back(
        {{"id", l.id}, {"a", l.a}, {"b", l.b}, {"capacity", l.capacity}});
  j["links"] = std::move(links);
  j["green_demand"] = s.green_demand;
  json sched = json::array();
  for (const RedEvent& e : s.red_schedule)
    sched.push_back(
        {{"timestep", e.timestep},
         {"kind", e.kind == AttackKind::compromise ? "compromise" : "ddos"},
         {"target", e.target},
         {"success_prob", e.success_prob}});
  j["red_schedule"] = std::move(sched);
  json reds = json::array();
  for (const RandomRed& r : s.random_reds)
    reds.push_back({{"target_node", r.target_node},
                    {"success_prob", r.success_prob},
                    {"onset_min", r.onset_min},
                    {"onset_max", r.onset_max},
                    {"period", r.period}});
  j["random_reds"] = std::move(reds);
  j["episode_length"] = s.episode_length;
  j["patch_duration"] = s.patch_duration;
  j["ddos_load_factor"] = s.ddos_load_factor;
  j["weights"] = {{"healthy", s.weights.healthy},
                  {"compromised", s.weights.compromised},
                  {"green", s.weights.green},
                  {"action", s.weights.action}};
  return j;
}

NetworkSpec spec_from_json(const json& j, const std::string& where) {
  StrictObj o(j, where);
  NetworkSpec s;
  s.episode_length = 30;
  if (const json* v = o.find("nodes")) {
    if (!v->is_array()) cfg_error(o.sub("nodes") + ": expected an array");
    for (const json& e : *v) {
      StrictObj n(e, o.sub("nodes[]"));
      NodeSpec node;
      if (const json* f = n.find("id")) node.id = want_string(*f, n.sub("id"));
      if (const json* f = n.find("kind"))
        node.kind = parse_kind(want_string(*f, n.sub("kind")), n.sub("kind"));
      if (const json* f = n.find("initial"))
        node.initial =
            parse_status(want_string(*f, n.sub("initial")), n.sub("initial"));
      n.done();
      s.nodes.push_back(std::move(node));
    }
  }
  if (const json* v = o.find("links")) {
    if (!v->is_array()) cfg_error(o.sub("links") + ": expected an array");
    for (const json& e : *v) {
      StrictObj l(e, o.sub("links[]"));
      LinkSpec link;
      if (const json* f = l.find("id")) link.id = want_string(*f, l.sub("id"));
      if (const json* f = l.find("a")) link.a = want_size(*f, l.sub("a"));
      if (const json* f = l.find("b")) link.b = want_size(*f, l.sub("b"));
      if (const json* f = l.find("capacity"))
        link.capacity = want_double(*f, l.sub("capacity"));
      l.done();
      s.links.push_back(std::move(link));
    }
  }
  if (const json* v = o.find("green_demand")) {
    if (!v->is_array()) cfg_error(o.sub("green_demand") + ": expected an array");
    for (const json& e : *v)
      s.green_demand.push_back(want_double(e, o.sub("green_demand")));
  }
  if (const json* v = o.find("red_schedule")) {
    if (!v->is_array()) cfg_error(o.sub("red_schedule") + ": expected an array");
    for (const json& e : *v) {
      StrictObj r(e, o.sub("red_schedule[]"));
      RedEvent ev;
      if (const json* f = r.find("timestep"))
        ev.timestep = want_size(*f, r.sub("timestep"));
      if (const json* f = r.find("kind")) {
        const std::string k = want_string(*f, r.sub("kind"));
        if (k == "compromise")
          ev.kind = AttackKind::compromise;
        else if (k == "ddos")
          ev.kind = AttackKind::ddos;
        else
          cfg_error(r.sub("kind") + ": unknown attack kind \"" + k + "\"");
      }
      if (const json* f = r.find("target"))
        ev.target = want_size(*f, r.sub("target"));
      if (const json* f = r.find("success_prob"))
        ev.success_prob = want_double(*f, r.sub("success_prob"));
      r.done();
      s.red_schedule.push_back(ev);
    }
  }
  if (const json* v = o.find("random_reds")) {
    if (!v->is_array()) cfg_error(o.sub("random_reds") + ": expected an array");
    for (const json& e : *v) {
      StrictObj r(e, o.sub("random_reds[]"));
      RandomRed red;
      if (const json* f = r.find("target_node"))
        red.target_node = want_size(*f, r.sub("target_node"));
      if (const json* f = r.find("success_prob"))
        red.success_prob = want_double(*f, r.sub("success_prob"));
      if (const json* f = r.find("onset_min"))
        red.onset_min = want_size(*f, r.sub("onset_min"));
      if (const json* f = r.find("onset_max"))
        red.onset_max = want_size(*f, r.sub("onset_max"));
      if (const json* f = r.find("period"))
        red.period = want_size(*f, r.sub("period"));
      r.done();
      s.random_reds.push_back(red);
    }
  }
  if (const json* v = o.find("episode_length"))
    s.episode_length = want_size(*v, o.sub("episode_length"));
  if (const json* v = o.find("patch_duration"))
    s.patch_duration = want_size(*v, o.sub("patch_duration"));
  if (const json* v = o.find("ddos_load_factor"))
    s.ddos_load_factor = want_double(*v, o.sub("ddos_load_factor"));
  if (const json* v = o.find("weights")) {
    StrictObj w(*v, o.sub("weights"));
    if (const json* f = w.find("healthy"))
      s.weights.healthy = want_double(*f, w.sub("healthy"));
    if (const json* f = w.find("compromised"))
      s.weights.compromised = want_double(*f, w.sub("compromised"));
    if (const json* f = w.find("green"))
      s.weights.green = want_double(*f, w.sub("green"));
    if (const json* f = w.find("action"))
      s.weights.action = want_double(*f, w.sub("action"));
    w.done();
  }
  o.done();
  return s;
}

// ---- head / ppo configs <-> JSON --------------------------------------------

json head_config_to_json(const HeadConfig& h) {
  json j;
  j["type"] = h.type;
  j["hidden"] = h.hidden;
  j["init_scale"] = h.init_scale;
  j["beta"] = h.beta;
  j["backend"] = h.backend;
  j["sampler"] = {{"num_reads", h.sampler.num_reads},
                  {"burn_in", h.sampler.burn_in},
                  {"thin", h.sampler.thin},
                  {"exact_cap", h.sampler.exact_cap}};
  return j;
}

HeadConfig head_config_from_json(const json& j, const std::string& where,
                                 HeadConfig base) {
  StrictObj o(j, where);
  if (const json* v = o.find("type")) base.type = want_string(*v, o.sub("type"));
  if (const json* v = o.find("hidden"))
    base.hidden = want_size_array(*v, o.sub("hidden"));
  if (const json* v = o.find("init_scale"))
    base.init_scale = want_double(*v, o.sub("init_scale"));
  if (const json* v = o.find("beta")) base.beta = want_double(*v, o.sub("beta"));
  if (const json* v = o.find("backend"))
    base.backend = want_string(*v, o.sub("backend"));
  if (const json* v = o.find("sampler")) {
    StrictObj s(*v, o.sub("sampler"));
    if (const json* f = s.find("num_reads"))
      base.sampler.num_reads = want_size(*f, s.sub("num_reads"));
    if (const json* f = s.find("burn_in"))
      base.sampler.burn_in = want_size(*f, s.sub("burn_in"));
    if (const json* f = s.find("thin"))
      base.sampler.thin = want_size(*f, s.sub("thin"));
    if (const json* f = s.find("exact_cap"))
      base.sampler.exact_cap = want_size(*f, s.sub("exact_cap"));
    s.done();
  }
  o.done();
  return base;
}

json ppo_config_to_json(const PpoConfig& p) {
  json j;
  j["learning_rate"] = p.learning_rate;
  j["clip_epsilon"] = p.clip_epsilon;
  j["gamma"] = p.gamma;
  j["gae_lambda"] = p.gae_lambda;
  j["n_steps"] = p.n_steps;
  j["n_epochs"] = p.n_epochs;
  j["minibatch_size"] = p.minibatch_size;
  j["entropy_coef"] = p.entropy_coef;
  j["value_coef"] = p.value_coef;
  j["max_grad_norm"] = p.max_grad_norm;
  j["reuse_rollout_support"] = p.reuse_rollout_support;
  return j;
}

PpoConfig ppo_config_from_json(const json& j, const std::string& where) {
  StrictObj o(j, where);
  PpoConfig p;
  if (const json* v = o.find("learning_rate"))
    p.learning_rate = want_double(*v, o.sub("learning_rate"));
  if (const json* v = o.find("clip_epsilon"))
    p.clip_epsilon = want_double(*v, o.sub("clip_epsilon"));
  if (const json* v = o.find("gamma")) p.gamma = want_double(*v, o.sub("gamma"));
  if (const json* v = o.find("gae_lambda"))
    p.gae_lambda = want_double(*v, o.sub("gae_lambda"));
  if (const json* v = o.find("n_steps"))
    p.n_steps = want_size(*v, o.sub("n_steps"));
  if (const json* v = o.find("n_epochs"))
    p.n_epochs = want_size(*v, o.sub("n_epochs"));
  if (const json* v = o.find("minibatch_size"))
    p.minibatch_size = want_size(*v, o.sub("minibatch_size"));
  if (const json* v = o.find("entropy_coef"))
    p.entropy_coef = want_double(*v, o.sub("entropy_coef"));
  if (const json* v = o.find("value_coef"))
    p.value_coef = want_double(*v, o.sub("value_coef"));
  if (const json* v = o.find("max_grad_norm"))
    p.max_grad_norm = want_double(*v, o.sub("max_grad_norm"));
  if (const json* v = o.find("reuse_rollout_support"))
    p.reuse_rollout_support = want_bool(*v, o.sub("reuse_rollout_support"));
  o.done();
  return p;
}

std::uint64_t head_sampler_calls(const Head& head) {
  if (const FreeEnergyHead* dbm = std::get_if<FreeEnergyHead>(&head))
    return dbm->sampler_calls;
  return 0;
}

void write_metadata(const std::string& dir, const ExperimentConfig& cfg,
                    std::uint64_t seed, const RunMetrics& m) {
  json j;
  j["version"] = 1;
  j["variant"] = cfg.name;
  j["seed"] = seed;
  j["episodes_completed"] = m.episodes.size();
  j["updates_completed"] = m.updates.size();
  j["aborted"] = m.aborted;
  if (m.plateau_episode)
    j["plateau_episode"] = *m.plateau_episode;
  else
    j["plateau_episode"] = nullptr;
  j["walltime_recorded"] = cfg.record_walltime;
  std::ofstream(dir + "/metadata.json") << j.dump(2) << '\n';
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("-");
}

}  // namespace

// ---- config -----------------------------------------------------------------

void HeadConfig::validate() const {
  if (type != "mlp" && type != "dbm")
    throw std::invalid_argument("head config: type must be mlp or dbm");
  for (const std::size_t h : hidden)
    if (h == 0) throw std::invalid_argument("head config: zero-width layer");
  if (type == "dbm") {
    if (hidden.empty())
      throw std::invalid_argument("head config: dbm needs hidden layers");
    if (backend != "exact" && backend != "gibbs" && backend != "anneal")
      throw std::invalid_argument("head config: unknown backend " + backend);
    if (beta <= 0.0) throw std::invalid_argument("head config: beta <= 0");
    if (init_scale < 0.0)
      throw std::invalid_argument("head config: init_scale < 0");
    sampler.validate();
    if (backend == "exact") {
      std::size_t total = 0;
      for (const std::size_t h : hidden) total += h;
      if (total > sampler.exact_cap)
        throw std::invalid_argument(
            "head config: hidden units exceed the exact-backend cap");
    }
  }
}

NetworkSpec ExperimentConfig::resolve_env() const {
  if (env_name == "default") return default_network_spec();
  if (env_name == "deterministic") return deterministic_network_spec();
  if (env_name == "custom") {
    if (!env_spec)
      throw std::invalid_argument("config: custom env without a spec");
    return *env_spec;
  }
  throw std::invalid_argument("config: unknown env \"" + env_name + "\"");
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw std::invalid_argument("config: empty name");
  for (const char c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      throw std::invalid_argument("config: name must be [A-Za-z0-9_-]");
  if (env_name != "default" && env_name != "deterministic" &&
      env_name != "custom")
    throw std::invalid_argument("config: unknown env \"" + env_name + "\"");
  if (env_name == "custom" && !env_spec)
    throw std::invalid_argument("config: custom env without a spec");
  if (env_spec) env_spec->validate();
  if (episodes < 1) throw std::invalid_argument("config: episodes < 1");
  if (seeds.empty()) throw std::invalid_argument("config: no seeds");
  if (out_dir.empty()) throw std::invalid_argument("config: empty out_dir");
  ppo.validate();
  policy_head.validate();
  value_head.validate();
  batch_mlp_head.validate();
  batch_dbm_head.validate();
  if (batch_mlp_head.type != "mlp")
    throw std::invalid_argument("config: mlp_head template must have type mlp");
  if (batch_dbm_head.type != "dbm")
    throw std::invalid_argument("config: dbm_head template must have type dbm");
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    cfg_error(std::string("invalid JSON: ") + e.what());
  }
  StrictObj o(j, "config");
  ExperimentConfig out;
  if (const json* v = o.find("name")) out.name = want_string(*v, "config.name");
  if (const json* v = o.find("env")) {
    if (v->is_string()) {
      out.env_name = v->get<std::string>();
      if (out.env_name == "custom")
        cfg_error("env: \"custom\" requires an inline spec object");
    } else {
      out.env_name = "custom";
      out.env_spec = spec_from_json(*v, "config.env");
    }
  }
  if (const json* v = o.find("ppo"))
    out.ppo = ppo_config_from_json(*v, "config.ppo");
  if (const json* v = o.find("policy_head"))
    out.policy_head =
        head_config_from_json(*v, "config.policy_head", HeadConfig{});
  if (const json* v = o.find("value_head"))
    out.value_head =
        head_config_from_json(*v, "config.value_head", HeadConfig{});
  if (const json* v = o.find("mlp_head"))
    out.batch_mlp_head =
        head_config_from_json(*v, "config.mlp_head", out.batch_mlp_head);
  if (const json* v = o.find("dbm_head"))
    out.batch_dbm_head =
        head_config_from_json(*v, "config.dbm_head", out.batch_dbm_head);
  if (const json* v = o.find("episodes"))
    out.episodes = want_size(*v, "config.episodes");
  if (const json* v = o.find("seeds")) {
    if (!v->is_array()) cfg_error("seeds: expected an array");
    out.seeds.clear();
    for (const json& e : *v)
      out.seeds.push_back(want_size(e, "config.seeds"));
  }
  if (const json* v = o.find("out_dir"))
    out.out_dir = want_string(*v, "config.out_dir");
  if (const json* v = o.find("record_walltime"))
    out.record_walltime = want_bool(*v, "config.record_walltime");
  o.done();
  out.validate();
  return out;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  if (cfg.env_name == "custom")
    j["env"] = spec_to_json(*cfg.env_spec);
  else
    j["env"] = cfg.env_name;
  j["ppo"] = ppo_config_to_json(cfg.ppo);
  j["policy_head"] = head_config_to_json(cfg.policy_head);
  j["value_head"] = head_config_to_json(cfg.value_head);
  j["mlp_head"] = head_config_to_json(cfg.batch_mlp_head);
  j["dbm_head"] = head_config_to_json(cfg.batch_dbm_head);
  j["episodes"] = cfg.episodes;
  j["seeds"] = cfg.seeds;
  j["out_dir"] = cfg.out_dir;
  j["record_walltime"] = cfg.record_walltime;
  return j.dump(2) + "\n";
}

// ---- series analysis ----------------------------------------------------------

std::vector<double> moving_average(const std::vector<double>& series,
                                   std::size_t window) {
  if (window == 0) throw std::invalid_argument("moving_average: window == 0");
  if (series.empty())
    throw std::invalid_argument("moving_average: empty series");
  std::vector<double> out;
  if (series.size() < window) return out;
  out.reserve(series.size() - window + 1);
  for (std::size_t i = window - 1; i < series.size(); ++i) {
    double sum = 0.0;
    for (std::size_t k = i + 1 - window; k <= i; ++k) sum += series[k];
    out.push_back(sum / double(window));
  }
  return out;
}

std::optional<std::size_t> plateau_index(const std::vector<double>& ma,
                                         double tolerance_frac,
                                         std::size_t hold) {
  if (ma.empty()) throw std::invalid_argument("plateau_index: empty series");
  if (hold == 0) throw std::invalid_argument("plateau_index: hold == 0");
  if (tolerance_frac < 0.0)
    throw std::invalid_argument("plateau_index: negative tolerance");
  const std::size_t h = std::min(hold, ma.size());
  double level = 0.0;
  for (std::size_t i = ma.size() - h; i < ma.size(); ++i) level += ma[i];
  level /= double(h);
  const double tol = tolerance_frac * std::abs(level);

  // longest suffix that stays inside the band; its first point is the plateau
  std::size_t idx = ma.size();
  for (std::size_t i = ma.size(); i-- > 0;) {
    if (std::abs(ma[i] - level) <= tol)
      idx = i;
    else
      break;
  }
  if (idx == ma.size()) return std::nullopt;
  return idx;
}

std::vector<double> RunMetrics::rewards() const {
  std::vector<double> out;
  out.reserve(episodes.size());
  for (const EpisodeRow& e : episodes) out.push_back(e.total_reward);
  return out;
}

void RunMetrics::finalize() {
  ma5.clear();
  plateau_episode.reset();
  if (episodes.size() < 5) return;
  ma5 = moving_average(rewards(), 5);
  if (const auto idx = plateau_index(ma5)) plateau_episode = *idx + 5;
}

// ---- training runs --------------------------------------------------------------

Head make_head(const HeadConfig& hc, std::size_t n_obs, std::size_t n_act,
               std::uint64_t seed) {
  hc.validate();
  if (hc.type == "mlp")
    return make_mlp(n_obs, hc.hidden, n_act == 0 ? 1 : n_act, seed);
  FreeEnergyHead head;
  head.topo = DbmTopology{n_obs, n_act, hc.hidden};
  head.weights = init_weights(head.topo, derive_seed(seed, "harness.head.init"),
                              hc.init_scale, hc.beta);
  head.kind = n_act == 0 ? HeadKind::value : HeadKind::policy;
  head.backend = hc.backend == "exact"   ? SamplerBackend::exact
                 : hc.backend == "gibbs" ? SamplerBackend::gibbs
                                         : SamplerBackend::anneal;
  head.sampler_cfg = hc.sampler;
  head.sampler_cfg.rng_seed = derive_seed(seed, "harness.head.sampler");
  head.sampler_cfg.invocation = 0;
  head.validate();
  return head;
}

RunMetrics train_run(const ExperimentConfig& cfg, std::uint64_t seed,
                     const std::string& run_dir) {
  cfg.validate();
  CyberEnv env(cfg.resolve_env());
  Agent agent{make_head(cfg.policy_head, env.obs_size(), env.n_actions(),
                        derive_seed(seed, "harness.policy")),
              make_head(cfg.value_head, env.obs_size(), 0,
                        derive_seed(seed, "harness.value"))};
  Trainer t = make_trainer(std::move(agent), derive_seed(seed, "harness.trainer"));

  const bool writing = !run_dir.empty();
  std::ofstream ep_csv, up_csv;
  if (writing) {
    std::filesystem::create_directories(run_dir);
    ExperimentConfig snap = cfg;
    snap.seeds = {seed};
    std::ofstream(run_dir + "/config.json") << experiment_config_to_json(snap);
    ep_csv.open(run_dir + "/episodes.csv");
    up_csv.open(run_dir + "/updates.csv");
    if (!ep_csv || !up_csv)
      throw std::runtime_error("cannot write metrics in " + run_dir);
    ep_csv << "episode,total_reward,steps,ma5_reward,wall_ms\n" << std::flush;
    up_csv << "update,policy_loss,value_loss,entropy,clip_fraction,mean_ratio,"
              "grad_norm,policy_sampler_calls,value_sampler_calls\n"
           << std::flush;
  }

  RunMetrics metrics;
  auto mark = std::chrono::steady_clock::now();

  auto record_episode = [&](double reward, std::size_t steps) {
    EpisodeRow row;
    row.episode = metrics.episodes.size() + 1;
    row.total_reward = reward;
    row.steps = steps;
    if (cfg.record_walltime) {
      const auto now = std::chrono::steady_clock::now();
      row.wall_ms = std::chrono::duration<double, std::milli>(now - mark).count();
      mark = now;
    }
    metrics.episodes.push_back(row);
    if (writing) {
      ep_csv << row.episode << ',' << format_double(row.total_reward) << ','
             << row.steps << ',';
      if (row.episode >= 5) {
        double sum = 0.0;
        for (std::size_t k = metrics.episodes.size() - 5;
             k < metrics.episodes.size(); ++k)
          sum += metrics.episodes[k].total_reward;
        ep_csv << format_double(sum / 5.0);
      }
      ep_csv << ',' << format_double(row.wall_ms) << '\n' << std::flush;
    }
  };

  auto record_update = [&](const UpdateStats& st) {
    UpdateRow row;
    row.update = metrics.updates.size() + 1;
    row.policy_loss = st.policy_loss;
    row.value_loss = st.value_loss;
    row.entropy = st.entropy;
    row.clip_fraction = st.clip_fraction;
    row.mean_ratio = st.mean_ratio;
    row.grad_norm = st.grad_norm;
    row.policy_sampler_calls = head_sampler_calls(t.agent.policy);
    row.value_sampler_calls = head_sampler_calls(t.agent.value);
    metrics.updates.push_back(row);
    if (writing)
      up_csv << row.update << ',' << format_double(row.policy_loss) << ','
             << format_double(row.value_loss) << ','
             << format_double(row.entropy) << ','
             << format_double(row.clip_fraction) << ','
             << format_double(row.mean_ratio) << ','
             << format_double(row.grad_norm) << ','
             << row.policy_sampler_calls << ',' << row.value_sampler_calls
             << '\n'
             << std::flush;
  };

  try {
    while (metrics.episodes.size() < cfg.episodes) {
      RolloutResult rr = collect_rollout(env, t, cfg.ppo.n_steps,
                                         cfg.ppo.reuse_rollout_support);
      double acc = 0.0;
      std::size_t steps = 0;
      for (std::size_t i = 0;
           i < rr.buffer.size() && metrics.episodes.size() < cfg.episodes;
           ++i) {
        acc += rr.buffer.rewards[i];
        ++steps;
        if (rr.buffer.dones[i]) {
          record_episode(acc, steps);
          acc = 0.0;
          steps = 0;
        }
      }
      if (metrics.episodes.size() >= cfg.episodes) break;
      const double bootstrap =
          rr.final_done ? 0.0 : agent_value(t.agent, rr.final_obs);
      compute_gae(rr.buffer, cfg.ppo.gamma, cfg.ppo.gae_lambda, bootstrap);
      record_update(ppo_update(t, rr.buffer, cfg.ppo));
    }
  } catch (const TrainingDiverged&) {
    metrics.aborted = true;
    metrics.finalize();
    if (writing) write_metadata(run_dir, cfg, seed, metrics);
    throw;
  }

  metrics.finalize();
  if (writing) {
    write_metadata(run_dir, cfg, seed, metrics);
    const json extra = {{"episodes", metrics.episodes.size()}};
    save_checkpoint(run_dir + "/checkpoint.json",
                    trainer_checkpoint(t, extra.dump()));
  }
  return metrics;
}

std::vector<RunMetrics> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<RunMetrics> out;
  for (const std::uint64_t seed : cfg.seeds)
    out.push_back(train_run(cfg, seed,
                            cfg.out_dir + "/" + cfg.name + "/seed_" +
                                std::to_string(seed)));
  return out;
}

RunMetrics load_run_metrics(const std::string& run_dir) {
  RunMetrics m;
  std::ifstream ep(run_dir + "/episodes.csv");
  if (!ep)
    throw std::runtime_error("cannot open " + run_dir + "/episodes.csv");
  std::string line;
  std::getline(ep, line);
  if (line != "episode,total_reward,steps,ma5_reward,wall_ms")
    throw std::runtime_error(run_dir + ": unexpected episodes.csv header");
  while (std::getline(ep, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 5)
      throw std::runtime_error(run_dir + ": malformed episodes.csv row");
    EpisodeRow row;
    row.episode = std::stoull(f[0]);
    row.total_reward = std::stod(f[1]);
    row.steps = std::stoull(f[2]);
    row.wall_ms = std::stod(f[4]);
    m.episodes.push_back(row);
  }
  std::ifstream up(run_dir + "/updates.csv");
  if (up) {
    std::getline(up, line);
    while (std::getline(up, line)) {
      if (line.empty()) continue;
      const std::vector<std::string> f = split_csv_line(line);
      if (f.size() != 9)
        throw std::runtime_error(run_dir + ": malformed updates.csv row");
      UpdateRow row;
      row.update = std::stoull(f[0]);
      row.policy_loss = std::stod(f[1]);
      row.value_loss = std::stod(f[2]);
      row.entropy = std::stod(f[3]);
      row.clip_fraction = std::stod(f[4]);
      row.mean_ratio = std::stod(f[5]);
      row.grad_norm = std::stod(f[6]);
      row.policy_sampler_calls = std::stoull(f[7]);
      row.value_sampler_calls = std::stoull(f[8]);
      m.updates.push_back(row);
    }
  }
  std::ifstream meta(run_dir + "/metadata.json");
  if (meta) {
    try {
      json j;
      meta >> j;
      m.aborted = j.value("aborted", false);
    } catch (const json::exception&) {
      throw std::runtime_error(run_dir + ": malformed metadata.json");
    }
  }
  m.finalize();
  return m;
}

// ---- comparison report ------------------------------------------------------------

CompareReport compare_report(const std::vector<VariantRuns>& variants,
                             std::size_t window, double tolerance_frac,
                             std::size_t hold) {
  if (variants.empty())
    throw std::invalid_argument("compare_report: no variants");
  std::size_t n_eps = 0, n_runs = 0;
  for (const VariantRuns& v : variants) {
    if (v.second.empty())
      throw std::invalid_argument("compare_report: variant without runs");
    for (const RunMetrics& run : v.second) {
      if (n_eps == 0) n_eps = run.episodes.size();
      if (run.episodes.size() != n_eps)
        throw std::invalid_argument("compare_report: mismatched run lengths");
    }
    if (n_runs == 0) n_runs = v.second.size();
    if (v.second.size() != n_runs)
      throw std::invalid_argument("compare_report: mismatched seed counts");
  }
  if (n_eps < window)
    throw std::invalid_argument(
        "compare_report: fewer episodes than the moving-average window");

  std::size_t base = 0;
  for (std::size_t i = 0; i < variants.size(); ++i)
    if (variants[i].first == "mlp_mlp") base = i;

  auto build_row = [&](const VariantRuns& v) {
    VariantRow row;
    row.name = v.first;
    double plateau_sum = 0.0, level_sum = 0.0;
    std::size_t plateau_n = 0;
    for (const RunMetrics& run : v.second) {
      const std::vector<double> ma = moving_average(run.rewards(), window);
      const auto idx = plateau_index(ma, tolerance_frac, hold);
      if (idx) {
        row.plateaus.push_back(*idx + window);
        plateau_sum += double(*idx + window);
        ++plateau_n;
      } else {
        row.plateaus.push_back(std::nullopt);
      }
      const std::size_t h = std::min(hold, ma.size());
      double level = 0.0;
      for (std::size_t i = ma.size() - h; i < ma.size(); ++i) level += ma[i];
      level_sum += level / double(h);
    }
    if (plateau_n > 0) row.plateau_mean = plateau_sum / double(plateau_n);
    row.final_ma_level = level_sum / double(v.second.size());
    return row;
  };

  CompareReport report;
  report.rows.push_back(build_row(variants[base]));
  for (std::size_t i = 0; i < variants.size(); ++i)
    if (i != base) report.rows.push_back(build_row(variants[i]));

  const std::optional<double> base_mean = report.rows[0].plateau_mean;
  for (VariantRow& row : report.rows)
    if (row.plateau_mean && base_mean && *base_mean > 0.0)
      row.plateau_pct = 100.0 * *row.plateau_mean / *base_mean;
  return report;
}

void write_compare_report(const CompareReport& report,
                          const std::vector<VariantRuns>& variants,
                          const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream summary(dir + "/summary.csv");
  summary << "variant,plateau_episode,plateau_pct,final_ma_level,"
             "plateau_per_seed\n";
  for (const VariantRow& row : report.rows) {
    std::string per_seed;
    for (std::size_t i = 0; i < row.plateaus.size(); ++i) {
      if (i) per_seed += ';';
      per_seed +=
          row.plateaus[i] ? std::to_string(*row.plateaus[i]) : std::string("-");
    }
    summary << row.name << ',' << fmt_opt(row.plateau_mean) << ','
            << fmt_opt(row.plateau_pct) << ','
            << format_double(row.final_ma_level) << ',' << per_seed << '\n';
  }

  for (const VariantRuns& v : variants) {
    std::ofstream curve(dir + "/curve_" + v.first + ".csv");
    curve << "episode";
    for (std::size_t r = 0; r < v.second.size(); ++r) curve << ",reward" << r;
    curve << ",mean_reward";
    for (std::size_t r = 0; r < v.second.size(); ++r) curve << ",ma5_" << r;
    curve << '\n';
    const std::size_t n = v.second.front().episodes.size();
    for (std::size_t e = 0; e < n; ++e) {
      curve << (e + 1);
      double sum = 0.0;
      for (const RunMetrics& run : v.second) {
        sum += run.episodes[e].total_reward;
        curve << ',' << format_double(run.episodes[e].total_reward);
      }
      curve << ',' << format_double(sum / double(v.second.size()));
      for (const RunMetrics& run : v.second) {
        curve << ',';
        if (e + 1 >= 5 && e + 1 - 5 < run.ma5.size() + 0)
          curve << format_double(run.ma5[e + 1 - 5]);
      }
      curve << '\n';
    }
  }
}

std::string compare_table_text(const CompareReport& report) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %12s %12s %14s\n", "variant",
                "plateau_ep", "pct_of_base", "final_ma");
  out << buf;
  for (const VariantRow& row : report.rows) {
    const std::string p =
        row.plateau_mean ? format_double(*row.plateau_mean) : "-";
    const std::string pct =
        row.plateau_pct ? format_double(*row.plateau_pct) : "-";
    std::snprintf(buf, sizeof buf, "%-10s %12s %12s %14.3f\n",
                  row.name.c_str(), p.c_str(), pct.c_str(),
                  row.final_ma_level);
    out << buf;
  }
  return out.str();
}

std::vector<ExperimentConfig> batch_variants(const ExperimentConfig& cfg) {
  const struct {
    const char* name;
    bool policy_dbm, value_dbm;
  } combos[] = {{"mlp_mlp", false, false},
                {"dbm_mlp", true, false},
                {"mlp_dbm", false, true},
                {"dbm_dbm", true, true}};
  std::vector<ExperimentConfig> out;
  for (const auto& combo : combos) {
    ExperimentConfig v = cfg;
    v.name = combo.name;
    v.policy_head = combo.policy_dbm ? cfg.batch_dbm_head : cfg.batch_mlp_head;
    v.value_head = combo.value_dbm ? cfg.batch_dbm_head : cfg.batch_mlp_head;
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace dbmrl
