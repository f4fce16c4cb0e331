#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <vector>

#include "dbmrl/energy_model.hpp"
#include "dbmrl/util.hpp"

using namespace dbmrl;

namespace {

// Build a random model alongside an explicit per-edge map so tests can
// evaluate the energy sum naively, independent of the block storage.
struct EdgeModel {
  DbmTopology topo;
  DbmWeights w;
  std::map<std::pair<std::size_t, std::size_t>, double> edges;  // i < j
};

EdgeModel random_edge_model(DbmTopology topo, Rng& rng) {
  EdgeModel m;
  m.topo = topo;
  m.w.beta = 1.0;
  m.w.offset = rng.uniform(-1.0, 1.0);
  m.w.biases.resize(topo.n_units());
  for (auto& b : m.w.biases) b = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < topo.n_units(); ++i)
    for (std::size_t j = i + 1; j < topo.n_units(); ++j)
      if (topo.edge_allowed(i, j)) m.edges[{i, j}] = rng.uniform(-1.0, 1.0);

  // pack the edge map into the dense chain blocks
  m.w.coupling_blocks.resize(topo.n_blocks());
  std::vector<std::size_t> bases;  // group base offsets in chain order
  bases.push_back(0);
  for (std::size_t l = 0; l < topo.hidden_layers.size(); ++l)
    bases.push_back(topo.layer_offset(l));
  if (topo.n_action > 0) bases.push_back(topo.action_offset());
  std::vector<std::size_t> sizes;
  sizes.push_back(topo.n_state);
  for (std::size_t s : topo.hidden_layers) sizes.push_back(s);
  if (topo.n_action > 0) sizes.push_back(topo.n_action);
  for (std::size_t k = 0; k < topo.n_blocks(); ++k) {
    m.w.coupling_blocks[k].assign(sizes[k] * sizes[k + 1], 0.0);
    for (std::size_t r = 0; r < sizes[k]; ++r)
      for (std::size_t c = 0; c < sizes[k + 1]; ++c)
        m.w.coupling_blocks[k][r * sizes[k + 1] + c] =
            m.edges.at({bases[k] + r, bases[k + 1] + c});
  }
  return m;
}

// Naive term-by-term evaluation of the energy sum over the edge map.
double oracle_energy(const EdgeModel& m, const UnitAssignment& u) {
  double e = m.w.offset;
  for (std::size_t i = 0; i < u.size(); ++i) e += m.w.biases[i] * double(u[i]);
  for (const auto& [edge, w] : m.edges)
    e += w * double(u[edge.first]) * double(u[edge.second]);
  return e;
}

UnitAssignment bits_of(std::size_t pattern, std::size_t n) {
  UnitAssignment u(n);
  for (std::size_t k = 0; k < n; ++k) u[k] = (pattern >> k) & 1;
  return u;
}

UnitAssignment random_bits(Rng& rng, std::size_t n) {
  UnitAssignment u(n);
  for (auto& x : u) x = rng.uniform01() < 0.5 ? 0 : 1;
  return u;
}

}  // namespace

TEST_CASE("energy: zero parameters give zero energy") {
  DbmTopology topo{2, 0, {3}};
  DbmWeights w;
  w.biases.assign(topo.n_units(), 0.0);
  w.coupling_blocks = {std::vector<double>(6, 0.0)};
  Rng rng(1);
  for (int i = 0; i < 10; ++i)
    REQUIRE(energy(w, topo, random_bits(rng, 5)) == 0.0);
}

TEST_CASE("energy: three-unit worked example") {
  // units: one state unit, one hidden layer of two; the only nonzero
  // coupling joins units 0 and 2
  DbmTopology topo{1, 0, {2}};
  DbmWeights w;
  w.offset = 0.5;
  w.biases = {1.0, -2.0, 0.25};
  w.coupling_blocks = {{0.0, -1.0}};  // (0,1)=0, (0,2)=-1
  REQUIRE(energy(w, topo, {1, 0, 1}) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("energy: matches naive edge-sum oracle on random models") {
  Rng rng(derive_seed(7, "test.energy", 0));
  const DbmTopology topos[] = {
      {2, 0, {2, 2}},        // 6 units, no action
      {2, 2, {2}},           // 6 units with action
      {3, 2, {3, 2}},        // 10 units
  };
  for (const auto& topo : topos) {
    for (int rep = 0; rep < 20; ++rep) {
      EdgeModel m = random_edge_model(topo, rng);
      UnitAssignment u = random_bits(rng, topo.n_units());
      REQUIRE(energy(m.w, m.topo, u) ==
              doctest::Approx(oracle_energy(m, u)).epsilon(1e-13));
    }
  }
}

TEST_CASE("clamp: one-edge worked example") {
  DbmTopology topo{1, 0, {1}};
  DbmWeights w;
  w.offset = 0.0;
  w.biases = {0.3, 0.1};
  w.coupling_blocks = {{0.7}};
  ClampedHamiltonian ch = clamp(w, topo, {1});
  REQUIRE(ch.constant == doctest::Approx(0.3).epsilon(1e-15));
  REQUIRE(ch.eff_bias.size() == 1);
  REQUIRE(ch.eff_bias[0] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("clamp: all-zero visible leaves biases untouched") {
  Rng rng(derive_seed(7, "test.energy", 1));
  EdgeModel m = random_edge_model({3, 2, {3, 2}}, rng);
  ClampedHamiltonian ch = clamp(m.w, m.topo, UnitAssignment(5, 0));
  REQUIRE(ch.constant == m.w.offset);
  for (std::size_t k = 0; k < ch.n_hidden(); ++k)
    REQUIRE(ch.eff_bias[k] == m.w.biases[m.topo.hidden_offset() + k]);
}

TEST_CASE("clamping identity: hidden_energy(clamp(v), h) == energy(v,h)") {
  Rng rng(derive_seed(7, "test.energy", 2));
  const DbmTopology topos[] = {
      {3, 0, {4}},       // 7 units, single hidden layer
      {3, 0, {2, 2}},    // the 3-state/4-hidden exhaustive case
      {2, 2, {3, 2}},    // 9 units with action clamping
      {2, 3, {2, 2, 2}}, // 11 units, three hidden layers
  };
  for (const auto& topo : topos) {
    EdgeModel m = random_edge_model(topo, rng);
    const std::size_t nv = topo.n_visible();
    const std::size_t nh = topo.n_hidden();
    for (std::size_t vp = 0; vp < (std::size_t(1) << nv); ++vp) {
      UnitAssignment v = bits_of(vp, nv);
      ClampedHamiltonian ch = clamp(m.w, m.topo, v);
      for (std::size_t hp = 0; hp < (std::size_t(1) << nh); ++hp) {
        UnitAssignment h = bits_of(hp, nh);
        // assemble the full assignment in unit order: state, hidden, action
        UnitAssignment full(topo.n_units());
        for (std::size_t i = 0; i < topo.n_state; ++i) full[i] = v[i];
        for (std::size_t i = 0; i < nh; ++i)
          full[topo.hidden_offset() + i] = h[i];
        for (std::size_t i = 0; i < topo.n_action; ++i)
          full[topo.action_offset() + i] = v[topo.n_state + i];
        const double direct = energy(m.w, m.topo, full);
        const double via_clamp = hidden_energy(ch, h);
        REQUIRE(std::abs(direct - via_clamp) <= 1e-12);
      }
    }
  }
}

TEST_CASE("hidden_energy: trivial cases") {
  ClampedHamiltonian ch;
  ch.constant = 0.4;
  ch.eff_bias = {1.0};
  ch.layer_sizes = {1};
  REQUIRE(hidden_energy(ch, {0}) == 0.4);
  ch.constant = 0.0;
  REQUIRE(hidden_energy(ch, {1}) == 1.0);
}

TEST_CASE("energy is invariant under within-layer unit permutations") {
  Rng rng(derive_seed(7, "test.energy", 3));
  DbmTopology topo{3, 2, {3, 2}};
  EdgeModel m = random_edge_model(topo, rng);

  // random permutation of each unit group; identity across groups
  std::vector<std::size_t> perm(topo.n_units());
  std::iota(perm.begin(), perm.end(), 0);
  auto shuffle_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = hi - lo; i > 1; --i)
      std::swap(perm[lo + i - 1], perm[lo + rng.below(i)]);
  };
  shuffle_range(0, topo.n_state);
  shuffle_range(topo.layer_offset(0), topo.layer_offset(0) + 3);
  shuffle_range(topo.layer_offset(1), topo.layer_offset(1) + 2);
  shuffle_range(topo.action_offset(), topo.action_offset() + 2);

  // apply perm to biases, edges and assignment; topology is unchanged
  // because groups map to themselves
  EdgeModel pm;
  pm.topo = topo;
  pm.w.offset = m.w.offset;
  pm.w.beta = m.w.beta;
  pm.w.biases.resize(topo.n_units());
  for (std::size_t i = 0; i < topo.n_units(); ++i)
    pm.w.biases[perm[i]] = m.w.biases[i];
  for (const auto& [edge, wv] : m.edges) {
    std::size_t a = perm[edge.first], b = perm[edge.second];
    if (a > b) std::swap(a, b);
    pm.edges[{a, b}] = wv;
  }
  // repack blocks from the permuted edge map
  pm.w.coupling_blocks.resize(topo.n_blocks());
  EdgeModel fresh = random_edge_model(topo, rng);  // borrow shapes
  for (std::size_t k = 0; k < topo.n_blocks(); ++k)
    pm.w.coupling_blocks[k].assign(fresh.w.coupling_blocks[k].size(), 0.0);
  {
    std::vector<std::size_t> bases = {0, topo.layer_offset(0),
                                      topo.layer_offset(1),
                                      topo.action_offset()};
    std::vector<std::size_t> sizes = {3, 3, 2, 2};
    for (std::size_t k = 0; k < topo.n_blocks(); ++k)
      for (std::size_t r = 0; r < sizes[k]; ++r)
        for (std::size_t c = 0; c < sizes[k + 1]; ++c)
          pm.w.coupling_blocks[k][r * sizes[k + 1] + c] =
              pm.edges.at({bases[k] + r, bases[k + 1] + c});
  }

  for (int rep = 0; rep < 32; ++rep) {
    UnitAssignment u = random_bits(rng, topo.n_units());
    UnitAssignment pu(topo.n_units());
    for (std::size_t i = 0; i < u.size(); ++i) pu[perm[i]] = u[i];
    REQUIRE(energy(m.w, m.topo, u) ==
            doctest::Approx(energy(pm.w, pm.topo, pu)).epsilon(1e-13));
  }
}

TEST_CASE("mean_hamiltonian: idempotence, midpoint, and averaging oracle") {
  Rng rng(derive_seed(7, "test.energy", 4));
  EdgeModel m = random_edge_model({2, 2, {3, 2}}, rng);

  // clamp state with each one-hot action
  UnitAssignment state = random_bits(rng, 2);
  std::vector<ClampedHamiltonian> hams;
  for (std::size_t a = 0; a < 2; ++a) {
    UnitAssignment vis = state;
    vis.push_back(a == 0);
    vis.push_back(a == 1);
    hams.push_back(clamp(m.w, m.topo, vis));
  }

  // idempotence
  ClampedHamiltonian same = mean_hamiltonian({hams[0], hams[0]});
  REQUIRE(same.constant == doctest::Approx(hams[0].constant).epsilon(1e-15));
  for (std::size_t k = 0; k < same.n_hidden(); ++k)
    REQUIRE(same.eff_bias[k] ==
            doctest::Approx(hams[0].eff_bias[k]).epsilon(1e-15));

  // midpoint of eff_bias 0 and 1
  ClampedHamiltonian z0, z1;
  z0.layer_sizes = z1.layer_sizes = {1};
  z0.eff_bias = {0.0};
  z1.eff_bias = {1.0};
  REQUIRE(mean_hamiltonian({z0, z1}).eff_bias[0] == 0.5);

  // field-wise averaging oracle over the two per-action Hamiltonians
  ClampedHamiltonian mean = mean_hamiltonian(hams);
  REQUIRE(mean.constant ==
          doctest::Approx((hams[0].constant + hams[1].constant) / 2)
              .epsilon(1e-14));
  for (std::size_t k = 0; k < mean.n_hidden(); ++k)
    REQUIRE(mean.eff_bias[k] ==
            doctest::Approx((hams[0].eff_bias[k] + hams[1].eff_bias[k]) / 2)
                .epsilon(1e-14));
  for (std::size_t b = 0; b < mean.hidden_couplings.size(); ++b)
    for (std::size_t i = 0; i < mean.hidden_couplings[b].size(); ++i)
      REQUIRE(mean.hidden_couplings[b][i] ==
              doctest::Approx((hams[0].hidden_couplings[b][i] +
                               hams[1].hidden_couplings[b][i]) /
                              2)
                  .epsilon(1e-14));

  // constant-shift affinity
  ClampedHamiltonian shifted = hams[0];
  shifted.constant += 3.0;
  ClampedHamiltonian ms = mean_hamiltonian({hams[0], shifted});
  REQUIRE(ms.constant ==
          doctest::Approx(hams[0].constant + 1.5).epsilon(1e-14));
}

TEST_CASE("mean_hamiltonian rejects empty and mismatched inputs") {
  REQUIRE_THROWS_AS(mean_hamiltonian({}), std::invalid_argument);
  ClampedHamiltonian a, b;
  a.layer_sizes = {2};
  a.eff_bias = {0.0, 0.0};
  b.layer_sizes = {3};
  b.eff_bias = {0.0, 0.0, 0.0};
  REQUIRE_THROWS_AS(mean_hamiltonian({a, b}), std::invalid_argument);
  ClampedHamiltonian c = a;
  c.beta = 2.0;
  REQUIRE_THROWS_AS(mean_hamiltonian({a, c}), std::invalid_argument);
}

TEST_CASE("init_weights: determinism, seed sensitivity, zero scale") {
  DbmTopology topo{3, 2, {4, 3}};
  DbmWeights w1 = init_weights(topo, 99, 0.1);
  DbmWeights w2 = init_weights(topo, 99, 0.1);
  REQUIRE(w1.biases == w2.biases);
  REQUIRE(w1.coupling_blocks == w2.coupling_blocks);
  REQUIRE(w1.offset == 0.0);

  DbmWeights w3 = init_weights(topo, 100, 0.1);
  REQUIRE(w1.biases != w3.biases);

  DbmWeights wz = init_weights(topo, 99, 0.0);
  for (double b : wz.biases) REQUIRE(b == 0.0);
  for (const auto& blk : wz.coupling_blocks)
    for (double c : blk) REQUIRE(c == 0.0);

  for (double b : w1.biases) REQUIRE(std::abs(b) <= 0.1);
  REQUIRE_THROWS_AS(init_weights(topo, 1, -0.5), std::invalid_argument);
}

TEST_CASE("dimension and domain errors are rejected") {
  DbmTopology topo{2, 0, {2}};
  DbmWeights w = init_weights(topo, 5);
  REQUIRE_THROWS_AS(energy(w, topo, {1, 0, 1}), std::invalid_argument);
  REQUIRE_THROWS_AS(energy(w, topo, {1, 0, 1, 2}), std::invalid_argument);
  REQUIRE_THROWS_AS(clamp(w, topo, {1, 0, 1}), std::invalid_argument);
  ClampedHamiltonian ch = clamp(w, topo, {1, 0});
  REQUIRE_THROWS_AS(hidden_energy(ch, {1}), std::invalid_argument);
  DbmWeights bad = w;
  bad.beta = 0.0;
  REQUIRE_THROWS_AS(energy(bad, topo, {1, 0, 1, 1}), std::invalid_argument);
  DbmTopology degenerate{0, 0, {2}};
  REQUIRE_THROWS_AS(degenerate.validate(), std::invalid_argument);
}

TEST_CASE("weight snapshot round-trips bit-exactly") {
  Rng rng(derive_seed(7, "test.energy", 5));
  DbmTopology topo{3, 2, {3, 2}};
  DbmWeights w = init_weights(topo, 321, 0.2, 1.5);
  w.offset = rng.uniform(-1.0, 1.0);

  const std::string text = weights_to_json(w, topo);
  auto [w2, topo2] = weights_from_json(text);
  REQUIRE(topo2.n_state == topo.n_state);
  REQUIRE(topo2.n_action == topo.n_action);
  REQUIRE(topo2.hidden_layers == topo.hidden_layers);
  REQUIRE(w2.offset == w.offset);
  REQUIRE(w2.beta == w.beta);
  REQUIRE(w2.biases == w.biases);
  REQUIRE(w2.coupling_blocks == w.coupling_blocks);

  // file round trip
  const std::string path = "snapshot_roundtrip_test.json";
  save_weights(path, w, topo);
  auto [w3, topo3] = load_weights(path);
  REQUIRE(w3.biases == w.biases);
  REQUIRE(w3.coupling_blocks == w.coupling_blocks);
  std::remove(path.c_str());

  // corrupt snapshot: coupling between non-adjacent units
  REQUIRE_THROWS(weights_from_json(R"({"n_state":2,"n_action":0,
    "hidden_layers":[2],"beta":1.0,"offset":0.0,
    "biases":[0,0,0,0],"couplings":[[0,1,0.5]]})"));
}
