#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dbmrl/kernels.hpp"
#include "dbmrl/ppo.hpp"

namespace dbmrl {
namespace {

std::vector<double> obs_to_double(const UnitAssignment& obs) {
  return std::vector<double>(obs.begin(), obs.end());
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.below(i)]);
}

// entropy of a softmax distribution and dH/dlogits
double softmax_entropy(const std::vector<double>& p, std::vector<double>* dh) {
  double h = 0.0;
  for (double x : p)
    if (x >= 1e-300) h -= x * std::log(x);
  if (dh) {
    dh->assign(p.size(), 0.0);
    for (std::size_t j = 0; j < p.size(); ++j)
      if (p[j] >= 1e-300) (*dh)[j] = -p[j] * (std::log(p[j]) + h);
  }
  return h;
}

// Per-action clamped Hamiltonians, the policy-head definition.
ClampedHamiltonian clamp_with_action(const FreeEnergyHead& head,
                                     const UnitAssignment& state,
                                     std::size_t action) {
  UnitAssignment vis(head.topo.n_visible(), 0);
  std::copy(state.begin(), state.end(), vis.begin());
  vis[head.topo.n_state + action] = 1;
  return clamp(head.weights, head.topo, vis);
}

const SampleSet* stored_support(
    const std::vector<std::optional<SampleSet>>& supports, std::size_t i) {
  if (i < supports.size() && supports[i].has_value()) return &*supports[i];
  return nullptr;
}

}  // namespace

// ---- agents -------------------------------------------------------------------

std::size_t head_param_count(const Head& head) {
  if (const auto* mlp = std::get_if<MlpHead>(&head)) return mlp->n_params();
  return param_count(std::get<FreeEnergyHead>(head).topo);
}

void head_flatten(const Head& head, double* out) {
  if (const auto* mlp = std::get_if<MlpHead>(&head)) {
    mlp_flatten(*mlp, out);
  } else {
    flatten_weights(std::get<FreeEnergyHead>(head).weights, out);
  }
}

void head_unflatten(Head& head, const double* in) {
  if (auto* mlp = std::get_if<MlpHead>(&head)) {
    mlp_unflatten(*mlp, in);
  } else {
    unflatten_weights(std::get<FreeEnergyHead>(head).weights, in);
  }
}

void Agent::validate(std::size_t obs_size, std::size_t n_actions) const {
  if (const auto* mlp = std::get_if<MlpHead>(&policy)) {
    mlp->validate();
    if (mlp->dims.front() != obs_size || mlp->dims.back() != n_actions)
      throw std::invalid_argument("policy mlp does not fit the environment");
  } else {
    const auto& dbm = std::get<FreeEnergyHead>(policy);
    dbm.validate();
    if (dbm.kind != HeadKind::policy)
      throw std::invalid_argument("policy head has value kind");
    if (dbm.topo.n_state != obs_size || dbm.topo.n_action != n_actions)
      throw std::invalid_argument("policy head does not fit the environment");
  }
  if (const auto* mlp = std::get_if<MlpHead>(&value)) {
    mlp->validate();
    if (mlp->dims.front() != obs_size || mlp->dims.back() != 1)
      throw std::invalid_argument("value mlp does not fit the environment");
  } else {
    const auto& dbm = std::get<FreeEnergyHead>(value);
    dbm.validate();
    if (dbm.kind != HeadKind::value)
      throw std::invalid_argument("value head has policy kind");
    if (dbm.topo.n_state != obs_size)
      throw std::invalid_argument("value head does not fit the environment");
  }
}

std::vector<double> agent_policy_logits(Agent& agent,
                                        const UnitAssignment& obs) {
  if (auto* mlp = std::get_if<MlpHead>(&agent.policy))
    return mlp_forward(*mlp, obs_to_double(obs));
  return policy_logits(std::get<FreeEnergyHead>(agent.policy), obs);
}

double agent_value(Agent& agent, const UnitAssignment& obs) {
  if (auto* mlp = std::get_if<MlpHead>(&agent.value))
    return mlp_forward(*mlp, obs_to_double(obs))[0];
  return value(std::get<FreeEnergyHead>(agent.value), obs);
}

// ---- rollouts -----------------------------------------------------------------

void RolloutBuffer::validate() const {
  const std::size_t n = actions.size();
  if (obs.size() != n || log_probs.size() != n || rewards.size() != n ||
      values.size() != n || dones.size() != n)
    throw std::invalid_argument("rollout buffer: ragged arrays");
  for (double lp : log_probs)
    if (!std::isfinite(lp))
      throw std::invalid_argument("rollout buffer: non-finite log-prob");
}

void PpoConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate <= 0");
  if (!(clip_epsilon > 0 && clip_epsilon < 1))
    throw std::invalid_argument("clip_epsilon outside (0, 1)");
  if (!(gamma >= 0 && gamma <= 1)) throw std::invalid_argument("gamma outside [0, 1]");
  if (!(gae_lambda >= 0 && gae_lambda <= 1))
    throw std::invalid_argument("gae_lambda outside [0, 1]");
  if (n_steps == 0) throw std::invalid_argument("n_steps == 0");
  if (n_epochs == 0) throw std::invalid_argument("n_epochs == 0");
  if (minibatch_size == 0 || minibatch_size > n_steps)
    throw std::invalid_argument("minibatch_size outside [1, n_steps]");
  if (!(value_coef >= 0)) throw std::invalid_argument("value_coef < 0");
  if (!(entropy_coef >= 0)) throw std::invalid_argument("entropy_coef < 0");
  if (!(max_grad_norm > 0)) throw std::invalid_argument("max_grad_norm <= 0");
}

Trainer make_trainer(Agent agent, std::uint64_t seed) {
  const std::size_t pp = head_param_count(agent.policy);
  const std::size_t vp = head_param_count(agent.value);
  return Trainer{std::move(agent),
                 make_adam_state(pp),
                 make_adam_state(vp),
                 Rng(derive_seed(seed, "ppo.rollout", 0)),
                 Rng(derive_seed(seed, "ppo.update", 0)),
                 0};
}

RolloutResult collect_rollout(RolloutEnv& env, Trainer& t, std::size_t n_steps,
                              bool store_supports) {
  Agent& agent = t.agent;
  agent.validate(env.obs_size(), env.n_actions());

  RolloutResult out;
  RolloutBuffer& buf = out.buffer;
  UnitAssignment obs = env.reset(t.rollout_rng.next_u64());

  for (std::size_t step = 0; step < n_steps; ++step) {
    std::vector<double> logits;
    std::optional<SampleSet> psup, vsup;
    if (auto* mlp = std::get_if<MlpHead>(&agent.policy)) {
      logits = mlp_forward(*mlp, obs_to_double(obs));
    } else {
      PolicyEval pe = eval_policy(std::get<FreeEnergyHead>(agent.policy), obs);
      logits = std::move(pe.logits);
      psup = std::move(pe.support);
    }
    const std::vector<double> probs = action_distribution(logits);
    const std::size_t action = t.rollout_rng.categorical(probs);

    double v;
    if (auto* mlp = std::get_if<MlpHead>(&agent.value)) {
      v = mlp_forward(*mlp, obs_to_double(obs))[0];
    } else {
      ValueEval ve = eval_value(std::get<FreeEnergyHead>(agent.value), obs);
      v = ve.value;
      vsup = std::move(ve.support);
    }

    StepResult sr = env.step(action);
    buf.obs.push_back(obs);
    buf.actions.push_back(action);
    buf.log_probs.push_back(std::log(probs[action]));
    buf.rewards.push_back(sr.reward);
    buf.values.push_back(v);
    buf.dones.push_back(sr.done ? 1 : 0);
    if (store_supports) {
      buf.policy_supports.push_back(std::move(psup));
      buf.value_supports.push_back(std::move(vsup));
    }
    obs = sr.done ? env.reset(t.rollout_rng.next_u64()) : std::move(sr.obs);
    out.final_done = sr.done;
  }
  out.final_obs = std::move(obs);
  buf.validate();
  return out;
}

void compute_gae(RolloutBuffer& buf, double gamma, double gae_lambda,
                 double bootstrap_value) {
  buf.validate();
  const std::size_t n = buf.size();
  buf.advantages.assign(n, 0.0);
  buf.returns.assign(n, 0.0);
  double a_next = 0.0, v_next = bootstrap_value;
  for (std::size_t i = n; i-- > 0;) {
    const double live = buf.dones[i] ? 0.0 : 1.0;
    const double delta =
        buf.rewards[i] + gamma * v_next * live - buf.values[i];
    a_next = delta + gamma * gae_lambda * live * a_next;
    buf.advantages[i] = a_next;
    buf.returns[i] = a_next + buf.values[i];
    v_next = buf.values[i];
  }
}

void normalize_advantages(std::span<double> a) {
  if (a.empty()) return;
  double mean = kernels::sum(a.data(), a.size()) / double(a.size());
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / double(a.size()));
  if (sd < 1e-12) {
    std::fill(a.begin(), a.end(), 0.0);
    return;
  }
  for (double& x : a) x = (x - mean) / sd;
}

// ---- updates ------------------------------------------------------------------

MinibatchGrad ppo_minibatch_gradient(Agent& agent, const RolloutBuffer& buf,
                                     std::span<const std::size_t> idx,
                                     const PpoConfig& cfg) {
  const std::size_t bsz = idx.size();
  if (bsz == 0) throw std::invalid_argument("empty minibatch");

  MinibatchGrad out;
  out.policy_grad.assign(head_param_count(agent.policy), 0.0);
  out.value_grad.assign(head_param_count(agent.value), 0.0);

  std::vector<double> adv(bsz);
  for (std::size_t k = 0; k < bsz; ++k) adv[k] = buf.advantages[idx[k]];
  normalize_advantages(adv);

  auto* pol_mlp = std::get_if<MlpHead>(&agent.policy);
  auto* pol_dbm = std::get_if<FreeEnergyHead>(&agent.policy);
  auto* val_mlp = std::get_if<MlpHead>(&agent.value);
  auto* val_dbm = std::get_if<FreeEnergyHead>(&agent.value);

  ParamGradient pol_acc, val_acc;
  if (pol_dbm) pol_acc = ParamGradient::zeros_like(pol_dbm->topo);
  if (val_dbm) val_acc = ParamGradient::zeros_like(val_dbm->topo);

  std::size_t clipped = 0;
  std::vector<double> dh;
  for (std::size_t k = 0; k < bsz; ++k) {
    const std::size_t i = idx[k];
    const UnitAssignment& obs = buf.obs[i];
    const std::size_t action = buf.actions[i];

    // ---- policy forward
    std::vector<double> logits;
    MlpCache pol_cache;
    std::optional<SampleSet> fresh;
    const SampleSet* sup = nullptr;
    if (pol_mlp) {
      logits = mlp_forward(*pol_mlp, obs_to_double(obs), &pol_cache);
    } else if (cfg.reuse_rollout_support &&
               (sup = stored_support(buf.policy_supports, i)) != nullptr) {
      logits.resize(pol_dbm->topo.n_action);
      for (std::size_t a = 0; a < logits.size(); ++a)
        logits[a] =
            -truncated_free_energy(clamp_with_action(*pol_dbm, obs, a), *sup);
    } else if (pol_dbm->backend == SamplerBackend::exact) {
      logits = policy_logits(*pol_dbm, obs);
    } else {
      PolicyEval pe = eval_policy(*pol_dbm, obs);
      logits = std::move(pe.logits);
      fresh = std::move(pe.support);
      sup = &*fresh;
    }

    const std::vector<double> probs = action_distribution(logits);
    const double logp = std::log(probs[action]);
    const double ratio = std::exp(logp - buf.log_probs[i]);
    const double unclipped = ratio * adv[k];
    const double clip_lo = 1.0 - cfg.clip_epsilon;
    const double clip_hi = 1.0 + cfg.clip_epsilon;
    const double clipped_obj = std::clamp(ratio, clip_lo, clip_hi) * adv[k];
    const double surr = std::min(unclipped, clipped_obj);
    out.policy_loss -= surr;
    out.mean_ratio += ratio / double(bsz);
    if (std::abs(ratio - 1.0) > cfg.clip_epsilon) ++clipped;

    const double h = softmax_entropy(probs, &dh);
    out.entropy += h;

    // dsurr/dlogp is ratio*adv on the unclipped branch, 0 in the clip zone
    const double dsurr = unclipped <= clipped_obj ? unclipped : 0.0;
    std::vector<double> dlogits(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) {
      const double ind = j == action ? 1.0 : 0.0;
      dlogits[j] = (-dsurr * (ind - probs[j]) - cfg.entropy_coef * dh[j]) /
                   double(bsz);
    }
    if (pol_mlp) {
      mlp_backward(*pol_mlp, pol_cache, dlogits, out.policy_grad.data());
    } else {
      for (double& d : dlogits) d = -d;  // logits = -F
      accumulate_policy_gradient(*pol_dbm, obs, dlogits, sup, pol_acc);
    }

    // ---- value forward
    double v;
    MlpCache val_cache;
    std::optional<SampleSet> vfresh;
    const SampleSet* vsup = nullptr;
    if (val_mlp) {
      v = mlp_forward(*val_mlp, obs_to_double(obs), &val_cache)[0];
    } else if (cfg.reuse_rollout_support &&
               (vsup = stored_support(buf.value_supports, i)) != nullptr) {
      v = -truncated_free_energy(clamp(val_dbm->weights, val_dbm->topo, obs),
                                 *vsup);
    } else if (val_dbm->backend == SamplerBackend::exact) {
      v = value(*val_dbm, obs);
    } else {
      ValueEval ve = eval_value(*val_dbm, obs);
      v = ve.value;
      vfresh = std::move(ve.support);
      vsup = &*vfresh;
    }

    const double err = v - buf.returns[i];
    out.value_loss += err * err;
    const double dv = cfg.value_coef * 2.0 * err / double(bsz);
    if (val_mlp) {
      const double dout[1] = {dv};
      mlp_backward(*val_mlp, val_cache, dout, out.value_grad.data());
    } else {
      accumulate_value_gradient(*val_dbm, obs, -dv, vsup, val_acc);
    }
  }

  if (pol_dbm) flatten_gradient(pol_acc, out.policy_grad.data());
  if (val_dbm) flatten_gradient(val_acc, out.value_grad.data());

  out.policy_loss /= double(bsz);
  out.value_loss /= double(bsz);
  out.entropy /= double(bsz);
  out.clip_fraction = double(clipped) / double(bsz);
  out.loss = out.policy_loss + cfg.value_coef * out.value_loss -
             cfg.entropy_coef * out.entropy;
  return out;
}

UpdateStats ppo_update(Trainer& t, const RolloutBuffer& buf,
                       const PpoConfig& cfg) {
  cfg.validate();
  buf.validate();
  const std::size_t n = buf.size();
  if (n == 0) throw std::invalid_argument("ppo_update: empty rollout buffer");
  if (buf.advantages.size() != n || buf.returns.size() != n)
    throw std::invalid_argument("ppo_update: advantages missing (run compute_gae)");

  const std::size_t pp = head_param_count(t.agent.policy);
  const std::size_t vp = head_param_count(t.agent.value);
  std::vector<double> pol_params(pp), val_params(vp);

  UpdateStats stats;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    shuffle_indices(order, t.update_rng);
    for (std::size_t start = 0; start < n; start += cfg.minibatch_size) {
      const std::size_t len = std::min(cfg.minibatch_size, n - start);
      MinibatchGrad g = ppo_minibatch_gradient(
          t.agent, buf, {order.data() + start, len}, cfg);

      if (!std::isfinite(g.loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at update " << t.updates_done << " epoch "
            << epoch << " minibatch offset " << start << ": policy "
            << g.policy_loss << " value " << g.value_loss << " entropy "
            << g.entropy;
        throw TrainingDiverged(msg.str());
      }
      const double sq =
          kernels::dot(g.policy_grad.data(), g.policy_grad.data(), pp) +
          kernels::dot(g.value_grad.data(), g.value_grad.data(), vp);
      const double norm = std::sqrt(sq);
      if (!std::isfinite(norm)) {
        std::ostringstream msg;
        msg << "non-finite gradient at update " << t.updates_done << " epoch "
            << epoch << " minibatch offset " << start;
        throw TrainingDiverged(msg.str());
      }
      if (norm > cfg.max_grad_norm) {
        const double s = cfg.max_grad_norm / norm;
        kernels::scale(g.policy_grad.data(), s, pp);
        kernels::scale(g.value_grad.data(), s, vp);
      }

      head_flatten(t.agent.policy, pol_params.data());
      adam_step(pol_params, g.policy_grad, t.policy_opt, cfg.learning_rate);
      head_unflatten(t.agent.policy, pol_params.data());

      head_flatten(t.agent.value, val_params.data());
      adam_step(val_params, g.value_grad, t.value_opt, cfg.learning_rate);
      head_unflatten(t.agent.value, val_params.data());

      stats.policy_loss += g.policy_loss;
      stats.value_loss += g.value_loss;
      stats.entropy += g.entropy;
      stats.clip_fraction += g.clip_fraction;
      stats.mean_ratio += g.mean_ratio;
      stats.grad_norm += norm;
      ++stats.minibatches;
    }
  }
  const double m = double(stats.minibatches);
  stats.policy_loss /= m;
  stats.value_loss /= m;
  stats.entropy /= m;
  stats.clip_fraction /= m;
  stats.mean_ratio /= m;
  stats.grad_norm /= m;
  ++t.updates_done;
  return stats;
}

// ---- checkpoints ----------------------------------------------------------------

namespace {

using nlohmann::ordered_json;

const char* activation_name(Activation a) {
  return a == Activation::tanh_act ? "tanh" : "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::tanh_act;
  if (name == "identity") return Activation::identity;
  throw std::runtime_error("checkpoint: unknown activation " + name);
}

ordered_json head_to_json(const Head& head) {
  ordered_json j;
  if (const auto* mlp = std::get_if<MlpHead>(&head)) {
    j["type"] = "mlp";
    j["dims"] = mlp->dims;
    j["activation"] = activation_name(mlp->act);
    j["w"] = mlp->w;
    j["b"] = mlp->b;
    return j;
  }
  const auto& dbm = std::get<FreeEnergyHead>(head);
  j["type"] = "dbm";
  j["kind"] = dbm.kind == HeadKind::value ? "value" : "policy";
  j["backend"] = backend_name(dbm.backend);
  ordered_json sc;
  sc["num_reads"] = dbm.sampler_cfg.num_reads;
  sc["burn_in"] = dbm.sampler_cfg.burn_in;
  sc["thin"] = dbm.sampler_cfg.thin;
  sc["anneal_schedule"] = dbm.sampler_cfg.anneal_schedule;
  sc["rng_seed"] = dbm.sampler_cfg.rng_seed;
  sc["exact_cap"] = dbm.sampler_cfg.exact_cap;
  j["sampler"] = sc;
  j["sampler_calls"] = dbm.sampler_calls;
  j["model"] = ordered_json::parse(weights_to_json(dbm.weights, dbm.topo));
  return j;
}

Head head_from_json(const ordered_json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "mlp") {
    MlpHead mlp;
    mlp.dims = j.at("dims").get<std::vector<std::size_t>>();
    mlp.act = activation_from_name(j.at("activation").get<std::string>());
    mlp.w = j.at("w").get<std::vector<std::vector<double>>>();
    mlp.b = j.at("b").get<std::vector<std::vector<double>>>();
    mlp.validate();
    return mlp;
  }
  if (type != "dbm") throw std::runtime_error("checkpoint: unknown head type");
  FreeEnergyHead dbm;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "value") {
    dbm.kind = HeadKind::value;
  } else if (kind == "policy") {
    dbm.kind = HeadKind::policy;
  } else {
    throw std::runtime_error("checkpoint: unknown head kind " + kind);
  }
  dbm.backend = backend_from_name(j.at("backend").get<std::string>());
  const ordered_json& sc = j.at("sampler");
  dbm.sampler_cfg.num_reads = sc.at("num_reads").get<std::size_t>();
  dbm.sampler_cfg.burn_in = sc.at("burn_in").get<std::size_t>();
  dbm.sampler_cfg.thin = sc.at("thin").get<std::size_t>();
  dbm.sampler_cfg.anneal_schedule =
      sc.at("anneal_schedule")
          .get<std::vector<std::pair<double, std::size_t>>>();
  dbm.sampler_cfg.rng_seed = sc.at("rng_seed").get<std::uint64_t>();
  dbm.sampler_cfg.exact_cap = sc.at("exact_cap").get<std::size_t>();
  dbm.sampler_calls = j.at("sampler_calls").get<std::uint64_t>();
  auto [w, topo] = weights_from_json(j.at("model").dump());
  dbm.weights = std::move(w);
  dbm.topo = std::move(topo);
  dbm.validate();
  return dbm;
}

ordered_json adam_to_json(const AdamState& st) {
  return ordered_json{{"m", st.m}, {"v", st.v}, {"t", st.t}};
}

AdamState adam_from_json(const ordered_json& j) {
  AdamState st;
  st.m = j.at("m").get<std::vector<double>>();
  st.v = j.at("v").get<std::vector<double>>();
  st.t = j.at("t").get<std::int64_t>();
  if (st.m.size() != st.v.size())
    throw std::runtime_error("checkpoint: optimizer state shape mismatch");
  return st;
}

}  // namespace

Checkpoint trainer_checkpoint(const Trainer& t, const std::string& extra) {
  Checkpoint c;
  c.agent = t.agent;
  c.policy_opt = t.policy_opt;
  c.value_opt = t.value_opt;
  c.rollout_rng = t.rollout_rng.save_state();
  c.update_rng = t.update_rng.save_state();
  c.updates_done = t.updates_done;
  c.extra = extra;
  return c;
}

void restore_trainer(Trainer& t, const Checkpoint& c) {
  if (c.policy_opt.m.size() != head_param_count(c.agent.policy) ||
      c.value_opt.m.size() != head_param_count(c.agent.value))
    throw std::runtime_error("checkpoint: optimizer/head size mismatch");
  t.agent = c.agent;
  t.policy_opt = c.policy_opt;
  t.value_opt = c.value_opt;
  t.rollout_rng.load_state(c.rollout_rng);
  t.update_rng.load_state(c.update_rng);
  t.updates_done = c.updates_done;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  ordered_json j;
  j["version"] = 1;
  j["policy"] = head_to_json(c.agent.policy);
  j["value"] = head_to_json(c.agent.value);
  j["policy_opt"] = adam_to_json(c.policy_opt);
  j["value_opt"] = adam_to_json(c.value_opt);
  j["rollout_rng"] = c.rollout_rng;
  j["update_rng"] = c.update_rng;
  j["updates_done"] = c.updates_done;
  j["extra"] = c.extra;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  try {
    ordered_json j = ordered_json::parse(in);
    if (j.at("version").get<int>() != 1)
      throw std::runtime_error("checkpoint: unsupported version");
    Checkpoint c;
    c.agent.policy = head_from_json(j.at("policy"));
    c.agent.value = head_from_json(j.at("value"));
    c.policy_opt = adam_from_json(j.at("policy_opt"));
    c.value_opt = adam_from_json(j.at("value_opt"));
    c.rollout_rng = j.at("rollout_rng").get<std::string>();
    c.update_rng = j.at("update_rng").get<std::string>();
    c.updates_done = j.at("updates_done").get<std::uint64_t>();
    c.extra = j.at("extra").get<std::string>();
    if (c.policy_opt.m.size() != head_param_count(c.agent.policy) ||
        c.value_opt.m.size() != head_param_count(c.agent.value))
      throw std::runtime_error("checkpoint: optimizer/head size mismatch");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace dbmrl
