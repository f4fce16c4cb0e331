#pragma once

// Layered Boltzmann machine: topology, parameters, energy evaluation, and
// the reduction to a hidden-units-only Hamiltonian once visible units are
// fixed.
//
// Unit ordering is fixed everywhere as (state, h_1, ..., h_l, action).
// Units form consecutive groups; couplings exist exactly between adjacent
// groups (state-h_1, h_i-h_{i+1}, h_l-action) and are stored once per
// unordered pair as dense row-major blocks in that chain order.

#include <cstdint>
#include <string>
#include <vector>

namespace dbmrl {

// Binary unit values; every entry must be exactly 0 or 1.
using UnitAssignment = std::vector<std::uint8_t>;

struct DbmTopology {
  std::size_t n_state = 0;
  std::size_t n_action = 0;  // 0 for a value head
  std::vector<std::size_t> hidden_layers;

  std::size_t n_hidden() const;
  std::size_t n_visible() const { return n_state + n_action; }
  std::size_t n_units() const { return n_visible() + n_hidden(); }

  // Offsets into the global unit ordering.
  std::size_t state_offset() const { return 0; }
  std::size_t hidden_offset() const { return n_state; }
  std::size_t layer_offset(std::size_t layer) const;  // within units
  std::size_t action_offset() const { return n_state + n_hidden(); }

  // Number of coupling blocks in chain order:
  // state-h_1, h_1-h_2, ..., h_{l-1}-h_l, then h_l-action when n_action > 0.
  std::size_t n_blocks() const;
  // (rows, cols) of block k.
  std::pair<std::size_t, std::size_t> block_shape(std::size_t k) const;

  // True iff units i and j (global indices) may be coupled.
  bool edge_allowed(std::size_t i, std::size_t j) const;

  void validate() const;  // throws std::invalid_argument
};

struct DbmWeights {
  double offset = 0.0;               // constant energy term
  std::vector<double> biases;        // one per unit, global order
  // Dense row-major coupling blocks in the topology's chain order.
  std::vector<std::vector<double>> coupling_blocks;
  double beta = 1.0;
};

// Hidden-units-only energy function: constant + sum eff_bias_k h_k +
// sum over adjacent-hidden-layer couplings.
struct ClampedHamiltonian {
  double constant = 0.0;
  std::vector<double> eff_bias;              // hidden units, layer order
  std::vector<std::size_t> layer_sizes;      // hidden layer sizes
  std::vector<std::vector<double>> hidden_couplings;  // layer_sizes.size()-1 blocks
  double beta = 1.0;

  std::size_t n_hidden() const { return eff_bias.size(); }
  std::size_t layer_offset(std::size_t layer) const;
};

// offset + sum_i b_i u_i + sum over allowed edges w_ij u_i u_j.
double energy(const DbmWeights& w, const DbmTopology& topo,
              const UnitAssignment& u);

// Fix the visible units (state then action, in order) and fold their
// contributions into a constant and per-hidden effective biases.
ClampedHamiltonian clamp(const DbmWeights& w, const DbmTopology& topo,
                         const UnitAssignment& visible);

double hidden_energy(const ClampedHamiltonian& ch, const UnitAssignment& h);

// Field-wise arithmetic mean; all inputs must share structure and beta.
ClampedHamiltonian mean_hamiltonian(const std::vector<ClampedHamiltonian>& hams);

// Biases and couplings i.i.d. uniform in [-scale, scale], offset 0,
// deterministic in rng_seed.  scale may be 0 (all-zero parameters).
DbmWeights init_weights(const DbmTopology& topo, std::uint64_t rng_seed,
                        double scale = 0.1, double beta = 1.0);

// Throws std::invalid_argument unless w matches topo exactly.
void check_weights(const DbmWeights& w, const DbmTopology& topo);

// ---- weight snapshot --------------------------------------------------------
// JSON with topology sizes, offset, beta, biases in unit order, and
// couplings as (i, j, w) triples over global unit indices, i < j.  Decimal
// doubles use shortest-round-trip form, so save -> load is bit-exact.

std::string weights_to_json(const DbmWeights& w, const DbmTopology& topo);
std::pair<DbmWeights, DbmTopology> weights_from_json(const std::string& text);
void save_weights(const std::string& path, const DbmWeights& w,
                  const DbmTopology& topo);
std::pair<DbmWeights, DbmTopology> load_weights(const std::string& path);

}  // namespace dbmrl
