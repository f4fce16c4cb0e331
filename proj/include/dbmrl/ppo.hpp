#pragma once

// Clipped-surrogate PPO over pluggable heads.  Policy and value heads are
// each either a small MLP (tanh hidden layers, linear output) or a
// free-energy head; the four combinations train through one code path.
// Gradients flow by backprop for MLPs and through the fixed-support
// free-energy gradient for Boltzmann heads; both are global-norm clipped
// together and applied by Adam.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dbmrl/env.hpp"
#include "dbmrl/free_energy.hpp"
#include "dbmrl/util.hpp"

namespace dbmrl {

// ---- MLP head -----------------------------------------------------------------

enum class Activation { tanh_act, identity };

struct MlpHead {
  std::vector<std::size_t> dims;           // input, hidden..., output widths
  std::vector<std::vector<double>> w;      // layer k: dims[k+1] x dims[k]
  std::vector<std::vector<double>> b;      // layer k: dims[k+1]
  Activation act = Activation::tanh_act;   // hidden layers; output is linear

  void validate() const;  // throws std::invalid_argument
  std::size_t n_params() const;
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases,
// deterministic in seed.
MlpHead make_mlp(std::size_t n_in, const std::vector<std::size_t>& hidden,
                 std::size_t n_out, std::uint64_t seed,
                 Activation act = Activation::tanh_act);

// act[0] is the input, act[k+1] the output of layer k.
struct MlpCache {
  std::vector<std::vector<double>> act;
};

std::vector<double> mlp_forward(const MlpHead& head,
                                std::span<const double> in,
                                MlpCache* cache = nullptr);

// grad += dL/dparams given dout = dL/doutput, using the forward cache.
// Flat layout: [w0, b0, w1, b1, ...].
void mlp_backward(const MlpHead& head, const MlpCache& cache,
                  std::span<const double> dout, double* grad);

void mlp_flatten(const MlpHead& head, double* out);
void mlp_unflatten(MlpHead& head, const double* in);

// ---- Adam ---------------------------------------------------------------------

struct AdamState {
  std::vector<double> m, v;
  std::int64_t t = 0;
};

AdamState make_adam_state(std::size_t n);

// One bias-corrected Adam step in place; throws on shape mismatch.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& st, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// ---- agents -------------------------------------------------------------------

using Head = std::variant<MlpHead, FreeEnergyHead>;

std::size_t head_param_count(const Head& head);
void head_flatten(const Head& head, double* out);
void head_unflatten(Head& head, const double* in);

struct Agent {
  Head policy;
  Head value;

  // Checks both heads against the environment's shapes (MLP dims or DBM
  // state/action units) and each head's own invariants.
  void validate(std::size_t obs_size, std::size_t n_actions) const;
};

std::vector<double> agent_policy_logits(Agent& agent,
                                        const UnitAssignment& obs);
double agent_value(Agent& agent, const UnitAssignment& obs);

// ---- rollouts -----------------------------------------------------------------

struct RolloutBuffer {
  std::vector<UnitAssignment> obs;
  std::vector<std::size_t> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<double> advantages, returns;  // filled by compute_gae
  // Sampled-backend supports captured at rollout time (empty otherwise),
  // available for reuse during updates.
  std::vector<std::optional<SampleSet>> policy_supports, value_supports;

  std::size_t size() const { return actions.size(); }
  void validate() const;  // equal lengths, finite log-probs
};

struct RolloutResult {
  RolloutBuffer buffer;
  UnitAssignment final_obs;  // for bootstrapping a truncated episode
  bool final_done = false;
};

struct PpoConfig {
  double learning_rate = 3e-4;
  double clip_epsilon = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  std::size_t n_steps = 120;
  std::size_t n_epochs = 4;
  std::size_t minibatch_size = 30;
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  // Re-score rollout-time sample supports during updates instead of
  // drawing fresh ones per minibatch pass (sampled backends only).
  bool reuse_rollout_support = false;

  void validate() const;  // throws std::invalid_argument
};

struct Trainer {
  Agent agent;
  AdamState policy_opt, value_opt;
  Rng rollout_rng, update_rng;
  std::uint64_t updates_done = 0;
};

Trainer make_trainer(Agent agent, std::uint64_t seed);

// Runs n_steps from a fresh episode, auto-resetting on done; every draw
// (episode seeds, action sampling) comes from the trainer's rollout RNG.
RolloutResult collect_rollout(RolloutEnv& env, Trainer& t,
                              std::size_t n_steps,
                              bool store_supports = false);

// delta_t = r_t + gamma V_{t+1} (1-done_t) - V_t;
// A_t = delta_t + gamma lambda (1-done_t) A_{t+1}; R_t = A_t + V_t.
void compute_gae(RolloutBuffer& buf, double gamma, double gae_lambda,
                 double bootstrap_value);

// In-place shift/scale to mean 0, population std 1 (zeros if degenerate).
void normalize_advantages(std::span<double> a);

// ---- updates ------------------------------------------------------------------

struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MinibatchGrad {
  double loss = 0.0;  // policy + value_coef*value - entropy_coef*entropy
  double policy_loss = 0.0, value_loss = 0.0, entropy = 0.0;
  double clip_fraction = 0.0, mean_ratio = 0.0;
  std::vector<double> policy_grad, value_grad;  // flat, pre-clip
};

// Loss and exact gradient of the PPO objective over buf[idx] at the
// agent's current parameters; advantages are normalized over idx.
MinibatchGrad ppo_minibatch_gradient(Agent& agent, const RolloutBuffer& buf,
                                     std::span<const std::size_t> idx,
                                     const PpoConfig& cfg);

struct UpdateStats {
  double policy_loss = 0.0, value_loss = 0.0, entropy = 0.0;
  double clip_fraction = 0.0, grad_norm = 0.0, mean_ratio = 0.0;
  std::size_t minibatches = 0;
};

// n_epochs passes over shuffled minibatches; throws TrainingDiverged with
// diagnostics when a loss or gradient goes non-finite.
UpdateStats ppo_update(Trainer& t, const RolloutBuffer& buf,
                       const PpoConfig& cfg);

// ---- checkpoints ----------------------------------------------------------------
// Versioned JSON: head parameters, optimizer state, RNG streams, and a
// caller-owned extra blob; resuming is bit-exact for deterministic heads.

struct Checkpoint {
  Agent agent;
  AdamState policy_opt, value_opt;
  std::string rollout_rng, update_rng;
  std::uint64_t updates_done = 0;
  std::string extra;  // free-form (harness counters etc.)
};

Checkpoint trainer_checkpoint(const Trainer& t, const std::string& extra = "");
void restore_trainer(Trainer& t, const Checkpoint& c);
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dbmrl
