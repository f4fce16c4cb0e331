#include "dbmrl/energy_model.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dbmrl/kernels.hpp"
#include "dbmrl/util.hpp"

namespace dbmrl {
namespace {

using json = nlohmann::ordered_json;

void check_binary(const UnitAssignment& u, const char* what) {
  for (std::uint8_t v : u)
    if (v > 1)
      throw std::invalid_argument(std::string(what) +
                                  ": entries must be 0 or 1");
}

// Unit groups in chain order: 0 = state, 1..l = hidden layers, l+1 = action.
std::size_t group_count(const DbmTopology& t) {
  return 1 + t.hidden_layers.size() + (t.n_action > 0 ? 1 : 0);
}

std::size_t group_size(const DbmTopology& t, std::size_t g) {
  if (g == 0) return t.n_state;
  if (g <= t.hidden_layers.size()) return t.hidden_layers[g - 1];
  return t.n_action;
}

std::size_t group_base(const DbmTopology& t, std::size_t g) {
  if (g == 0) return 0;
  if (g <= t.hidden_layers.size()) return t.layer_offset(g - 1);
  return t.action_offset();
}

// Group containing a global unit index (index must be in range).
std::size_t group_of(const DbmTopology& t, std::size_t unit) {
  if (unit < t.n_state) return 0;
  std::size_t end = t.n_state;
  for (std::size_t i = 0; i < t.hidden_layers.size(); ++i) {
    end += t.hidden_layers[i];
    if (unit < end) return i + 1;
  }
  return t.hidden_layers.size() + 1;
}

}  // namespace

std::size_t DbmTopology::n_hidden() const {
  std::size_t n = 0;
  for (std::size_t s : hidden_layers) n += s;
  return n;
}

std::size_t DbmTopology::layer_offset(std::size_t layer) const {
  std::size_t off = n_state;
  for (std::size_t i = 0; i < layer; ++i) off += hidden_layers[i];
  return off;
}

std::size_t DbmTopology::n_blocks() const {
  return hidden_layers.size() - 1 + 1 + (n_action > 0 ? 1 : 0);
}

std::pair<std::size_t, std::size_t> DbmTopology::block_shape(
    std::size_t k) const {
  return {group_size(*this, k), group_size(*this, k + 1)};
}

bool DbmTopology::edge_allowed(std::size_t i, std::size_t j) const {
  if (i == j || i >= n_units() || j >= n_units()) return false;
  if (i > j) std::swap(i, j);
  return group_of(*this, j) == group_of(*this, i) + 1;
}

void DbmTopology::validate() const {
  if (n_state == 0)
    throw std::invalid_argument("DbmTopology: n_state must be >= 1");
  if (hidden_layers.empty())
    throw std::invalid_argument("DbmTopology: at least one hidden layer");
  for (std::size_t s : hidden_layers)
    if (s == 0)
      throw std::invalid_argument("DbmTopology: hidden layer size must be >= 1");
}

std::size_t ClampedHamiltonian::layer_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < layer; ++i) off += layer_sizes[i];
  return off;
}

void check_weights(const DbmWeights& w, const DbmTopology& topo) {
  topo.validate();
  if (w.biases.size() != topo.n_units())
    throw std::invalid_argument("DbmWeights: bias count mismatch");
  if (w.coupling_blocks.size() != topo.n_blocks())
    throw std::invalid_argument("DbmWeights: coupling block count mismatch");
  for (std::size_t k = 0; k < w.coupling_blocks.size(); ++k) {
    const auto [rows, cols] = topo.block_shape(k);
    if (w.coupling_blocks[k].size() != rows * cols)
      throw std::invalid_argument("DbmWeights: coupling block shape mismatch");
  }
  if (!(w.beta > 0.0))
    throw std::invalid_argument("DbmWeights: beta must be positive");
}

double energy(const DbmWeights& w, const DbmTopology& topo,
              const UnitAssignment& u) {
  check_weights(w, topo);
  if (u.size() != topo.n_units())
    throw std::invalid_argument("energy: assignment length mismatch");
  check_binary(u, "energy");

  double e = w.offset + kernels::bit_dot(u.data(), w.biases.data(), u.size());
  for (std::size_t k = 0; k < w.coupling_blocks.size(); ++k) {
    const auto [rows, cols] = topo.block_shape(k);
    const std::size_t base_r = group_base(topo, k);
    const std::size_t base_c = group_base(topo, k + 1);
    const double* block = w.coupling_blocks[k].data();
    for (std::size_t r = 0; r < rows; ++r)
      if (u[base_r + r])
        e += kernels::bit_dot(u.data() + base_c, block + r * cols, cols);
  }
  return e;
}

ClampedHamiltonian clamp(const DbmWeights& w, const DbmTopology& topo,
                         const UnitAssignment& visible) {
  check_weights(w, topo);
  if (visible.size() != topo.n_visible())
    throw std::invalid_argument("clamp: visible length mismatch");
  check_binary(visible, "clamp");

  ClampedHamiltonian ch;
  ch.beta = w.beta;
  ch.layer_sizes = topo.hidden_layers;
  ch.eff_bias.assign(topo.n_hidden(), 0.0);
  for (std::size_t k = 0; k < topo.n_hidden(); ++k)
    ch.eff_bias[k] = w.biases[topo.hidden_offset() + k];

  // Visible bias contributions.  The chain topology has no visible-visible
  // edges (state and action are never adjacent groups), so the constant
  // needs no pair terms.
  ch.constant = w.offset;
  for (std::size_t i = 0; i < topo.n_state; ++i)
    if (visible[i]) ch.constant += w.biases[i];
  for (std::size_t i = 0; i < topo.n_action; ++i)
    if (visible[topo.n_state + i])
      ch.constant += w.biases[topo.action_offset() + i];

  // state-h_1 couplings fold into the first layer's biases
  {
    const auto [rows, cols] = topo.block_shape(0);
    const double* block = w.coupling_blocks[0].data();
    for (std::size_t r = 0; r < rows; ++r)
      if (visible[r])
        kernels::axpy(1.0, block + r * cols, ch.eff_bias.data(), cols);
  }
  // h_l-action couplings fold into the last layer's biases
  if (topo.n_action > 0) {
    const std::size_t k = topo.n_blocks() - 1;
    const auto [rows, cols] = topo.block_shape(k);
    const double* block = w.coupling_blocks[k].data();
    const std::size_t last_off = ch.layer_offset(ch.layer_sizes.size() - 1);
    for (std::size_t c = 0; c < cols; ++c)
      if (visible[topo.n_state + c])
        for (std::size_t r = 0; r < rows; ++r)
          ch.eff_bias[last_off + r] += block[r * cols + c];
  }

  // hidden-hidden blocks pass through unchanged
  ch.hidden_couplings.assign(w.coupling_blocks.begin() + 1,
                             w.coupling_blocks.begin() + 1 +
                                 std::ptrdiff_t(topo.hidden_layers.size() - 1));
  return ch;
}

double hidden_energy(const ClampedHamiltonian& ch, const UnitAssignment& h) {
  if (h.size() != ch.n_hidden())
    throw std::invalid_argument("hidden_energy: assignment length mismatch");
  check_binary(h, "hidden_energy");

  double e = ch.constant +
             kernels::bit_dot(h.data(), ch.eff_bias.data(), h.size());
  for (std::size_t k = 0; k < ch.hidden_couplings.size(); ++k) {
    const std::size_t rows = ch.layer_sizes[k];
    const std::size_t cols = ch.layer_sizes[k + 1];
    const std::size_t base_r = ch.layer_offset(k);
    const std::size_t base_c = base_r + rows;
    const double* block = ch.hidden_couplings[k].data();
    for (std::size_t r = 0; r < rows; ++r)
      if (h[base_r + r])
        e += kernels::bit_dot(h.data() + base_c, block + r * cols, cols);
  }
  return e;
}

ClampedHamiltonian mean_hamiltonian(
    const std::vector<ClampedHamiltonian>& hams) {
  if (hams.empty())
    throw std::invalid_argument("mean_hamiltonian: empty list");
  const ClampedHamiltonian& first = hams.front();
  for (const auto& h : hams) {
    if (h.layer_sizes != first.layer_sizes)
      throw std::invalid_argument("mean_hamiltonian: mismatched structure");
    if (h.beta != first.beta)
      throw std::invalid_argument("mean_hamiltonian: mismatched beta");
  }

  ClampedHamiltonian out = first;
  for (std::size_t i = 1; i < hams.size(); ++i) {
    out.constant += hams[i].constant;
    kernels::axpy(1.0, hams[i].eff_bias.data(), out.eff_bias.data(),
                  out.eff_bias.size());
    for (std::size_t k = 0; k < out.hidden_couplings.size(); ++k)
      kernels::axpy(1.0, hams[i].hidden_couplings[k].data(),
                    out.hidden_couplings[k].data(),
                    out.hidden_couplings[k].size());
  }
  const double inv = 1.0 / double(hams.size());
  out.constant *= inv;
  kernels::scale(out.eff_bias.data(), inv, out.eff_bias.size());
  for (auto& block : out.hidden_couplings)
    kernels::scale(block.data(), inv, block.size());
  return out;
}

DbmWeights init_weights(const DbmTopology& topo, std::uint64_t rng_seed,
                        double scale, double beta) {
  topo.validate();
  if (scale < 0.0)
    throw std::invalid_argument("init_weights: scale must be >= 0");
  if (!(beta > 0.0))
    throw std::invalid_argument("init_weights: beta must be positive");

  Rng rng(rng_seed);
  DbmWeights w;
  w.offset = 0.0;
  w.beta = beta;
  w.biases.resize(topo.n_units());
  for (auto& b : w.biases) b = rng.uniform(-scale, scale);
  w.coupling_blocks.resize(topo.n_blocks());
  for (std::size_t k = 0; k < topo.n_blocks(); ++k) {
    const auto [rows, cols] = topo.block_shape(k);
    w.coupling_blocks[k].resize(rows * cols);
    for (auto& c : w.coupling_blocks[k]) c = rng.uniform(-scale, scale);
  }
  return w;
}

std::string weights_to_json(const DbmWeights& w, const DbmTopology& topo) {
  check_weights(w, topo);
  json j;
  j["n_state"] = topo.n_state;
  j["n_action"] = topo.n_action;
  j["hidden_layers"] = topo.hidden_layers;
  j["beta"] = w.beta;
  j["offset"] = w.offset;
  j["biases"] = w.biases;
  json triples = json::array();
  for (std::size_t k = 0; k < w.coupling_blocks.size(); ++k) {
    const auto [rows, cols] = topo.block_shape(k);
    const std::size_t base_r = group_base(topo, k);
    const std::size_t base_c = group_base(topo, k + 1);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        triples.push_back({base_r + r, base_c + c,
                           w.coupling_blocks[k][r * cols + c]});
  }
  j["couplings"] = std::move(triples);
  return j.dump(2);
}

std::pair<DbmWeights, DbmTopology> weights_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("weight snapshot: ") + e.what());
  }
  try {
    DbmTopology topo;
    topo.n_state = j.at("n_state").get<std::size_t>();
    topo.n_action = j.at("n_action").get<std::size_t>();
    topo.hidden_layers = j.at("hidden_layers").get<std::vector<std::size_t>>();
    topo.validate();

    DbmWeights w;
    w.beta = j.at("beta").get<double>();
    w.offset = j.at("offset").get<double>();
    w.biases = j.at("biases").get<std::vector<double>>();
    w.coupling_blocks.resize(topo.n_blocks());
    for (std::size_t k = 0; k < topo.n_blocks(); ++k) {
      const auto [rows, cols] = topo.block_shape(k);
      w.coupling_blocks[k].assign(rows * cols, 0.0);
    }
    for (const auto& t : j.at("couplings")) {
      std::size_t i = t.at(0).get<std::size_t>();
      std::size_t jj = t.at(1).get<std::size_t>();
      const double val = t.at(2).get<double>();
      if (i > jj) std::swap(i, jj);
      if (!topo.edge_allowed(i, jj))
        throw std::runtime_error("weight snapshot: coupling on invalid edge");
      const std::size_t gi = group_of(topo, i);
      const std::size_t base_r = group_base(topo, gi);
      const std::size_t base_c = group_base(topo, gi + 1);
      const auto [rows, cols] = topo.block_shape(gi);
      (void)rows;
      w.coupling_blocks[gi][(i - base_r) * cols + (jj - base_c)] = val;
    }
    check_weights(w, topo);
    return {std::move(w), std::move(topo)};
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("weight snapshot: ") + e.what());
  }
}

void save_weights(const std::string& path, const DbmWeights& w,
                  const DbmTopology& topo) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("save_weights: cannot open " + path);
  out << weights_to_json(w, topo) << '\n';
}

std::pair<DbmWeights, DbmTopology> load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("load_weights: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return weights_from_json(ss.str());
}

}  // namespace dbmrl
