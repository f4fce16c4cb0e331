#pragma once

// Truncated clamped free energy, its analytic parameter gradient, and the
// two head procedures built on it:
//
//   value head:  clamp the state units, sample the hidden Hamiltonian,
//                return V(s) = -F(s).
//   policy head: build one clamped Hamiltonian per action (state plus
//                one-hot action), sample ONCE from their field-wise mean,
//                score every action's free energy on that shared support,
//                return logits_i = -F_i.
//
// F is computed as -(1/beta) * log sum exp(-beta E) over the support,
// which equals sum pE + (1/beta) sum p log p on the same support; tests
// pin the identity.  Gradients treat the support as fixed data, making
// dF/dtheta the support expectation of dE/dtheta.
//
// With the exact backend the support is the full hidden space; evaluation
// then runs on a table-driven path (per-layer energy tables, per-action
// last-layer deltas) that computes identical sums in a cache-friendly
// order instead of materializing a SampleSet.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dbmrl/energy_model.hpp"
#include "dbmrl/sampler.hpp"

namespace dbmrl {

enum class HeadKind { value, policy };

struct FreeEnergyHead {
  DbmTopology topo;
  DbmWeights weights;
  HeadKind kind = HeadKind::value;
  SamplerBackend backend = SamplerBackend::exact;
  SamplerConfig sampler_cfg;
  // Incremented once per evaluation; doubles as the RNG invocation counter
  // so repeated calls draw independent, order-stable streams.
  std::uint64_t sampler_calls = 0;

  void validate() const;  // throws std::invalid_argument
  std::size_t n_actions() const { return topo.n_action; }
};

// Gradient w.r.t. every Boltzmann parameter; mirrors DbmWeights layout.
struct ParamGradient {
  double d_offset = 0.0;
  std::vector<double> d_bias;                    // per unit, global order
  std::vector<std::vector<double>> d_coupling;   // chain-order blocks

  static ParamGradient zeros_like(const DbmTopology& topo);
  std::size_t flat_size() const;
};

// Which original units were clamped to which values: the full visible
// assignment (state then action) under the topology's unit ordering.
struct ClampMap {
  DbmTopology topo;
  UnitAssignment visible;
};

// ---- core estimator ---------------------------------------------------------

double truncated_free_energy(const ClampedHamiltonian& ch, const SampleSet& s);

// dF/dtheta on the fixed support: d_offset = 1, d_bias_i = <u_i>,
// d_coupling_ij = <u_i u_j>, clamped units contributing their fixed values.
ParamGradient free_energy_gradient(const ClampedHamiltonian& ch,
                                   const SampleSet& s, const ClampMap& cm);

std::vector<double> action_distribution(std::span<const double> logits);

// ---- head evaluation --------------------------------------------------------

struct ValueEval {
  double value = 0.0;
  // Sampled-backend evaluations carry their support so an update phase can
  // optionally reuse it; exact evaluations leave it empty.
  std::optional<SampleSet> support;
};

struct PolicyEval {
  std::vector<double> logits;
  std::optional<SampleSet> support;
};

ValueEval eval_value(FreeEnergyHead& head, const UnitAssignment& state);
PolicyEval eval_policy(FreeEnergyHead& head, const UnitAssignment& state);

double value(FreeEnergyHead& head, const UnitAssignment& state);
std::vector<double> policy_logits(FreeEnergyHead& head,
                                  const UnitAssignment& state);

// ---- training-path gradients ------------------------------------------------
// Both accumulate into acc.  When reuse is null, a sampled backend draws a
// fresh support (advancing sampler_calls); the exact backend runs the
// table path.  When reuse is given, its support is used as-is.

// acc += coef * dF(state)/dtheta
void accumulate_value_gradient(FreeEnergyHead& head,
                               const UnitAssignment& state, double coef,
                               const SampleSet* reuse, ParamGradient& acc);

// acc += sum_i coefs[i] * dF_i(state)/dtheta, all actions sharing one
// support (the policy head's shared-sample contract).
void accumulate_policy_gradient(FreeEnergyHead& head,
                                const UnitAssignment& state,
                                std::span<const double> coefs,
                                const SampleSet* reuse, ParamGradient& acc);

// ---- optimizer plumbing -----------------------------------------------------
// Flat order: offset, biases, coupling blocks in chain order.

std::size_t param_count(const DbmTopology& topo);
void flatten_weights(const DbmWeights& w, double* out);
void unflatten_weights(DbmWeights& w, const double* in);
void flatten_gradient(const ParamGradient& g, double* out);

// ---- tracing ----------------------------------------------------------------
// One row per action: action index, free energy, logit, probability.
void dump_policy_eval_csv(const std::string& path,
                          std::span<const double> logits);

}  // namespace dbmrl
