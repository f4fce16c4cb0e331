#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <vector>

#include "dbmrl/energy_model.hpp"
#include "dbmrl/sampler.hpp"
#include "dbmrl/util.hpp"

using namespace dbmrl;

namespace {

// Hamiltonian with explicit fields, bypassing clamp().
ClampedHamiltonian make_ham(std::vector<std::size_t> layers,
                            std::vector<double> eff_bias,
                            std::vector<std::vector<double>> couplings,
                            double beta = 1.0, double constant = 0.0) {
  ClampedHamiltonian ch;
  ch.layer_sizes = std::move(layers);
  ch.eff_bias = std::move(eff_bias);
  ch.hidden_couplings = std::move(couplings);
  ch.beta = beta;
  ch.constant = constant;
  return ch;
}

ClampedHamiltonian zero_ham(std::size_t n_units) {
  return make_ham({n_units}, std::vector<double>(n_units, 0.0), {});
}

ClampedHamiltonian random_ham(Rng& rng, std::vector<std::size_t> layers,
                              double scale) {
  std::vector<double> bias;
  for (std::size_t l : layers)
    for (std::size_t i = 0; i < l; ++i) bias.push_back(rng.uniform(-scale, scale));
  std::vector<std::vector<double>> blocks;
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
    std::vector<double> b(layers[k] * layers[k + 1]);
    for (auto& x : b) x = rng.uniform(-scale, scale);
    blocks.push_back(std::move(b));
  }
  return make_ham(std::move(layers), std::move(bias), std::move(blocks));
}

// Naive Boltzmann distribution over all 2^H configs via hidden_energy.
std::vector<double> oracle_boltzmann(const ClampedHamiltonian& ch) {
  const std::size_t n = ch.n_hidden();
  const std::size_t m = std::size_t(1) << n;
  std::vector<double> w(m);
  double z = 0.0;
  for (std::size_t pat = 0; pat < m; ++pat) {
    UnitAssignment h(n);
    for (std::size_t j = 0; j < n; ++j) h[j] = (pat >> j) & 1;
    w[pat] = std::exp(-ch.beta * hidden_energy(ch, h));
    z += w[pat];
  }
  for (auto& x : w) x /= z;
  return w;
}

std::size_t pattern_of(const SampleSet& s, std::size_t k) {
  std::size_t pat = 0;
  for (std::size_t j = 0; j < s.n_hidden; ++j)
    pat |= std::size_t(s.config(k)[j]) << j;
  return pat;
}

}  // namespace

TEST_CASE("exact_enumerate covers the hidden space exactly once") {
  ClampedHamiltonian one = zero_ham(1);
  SampleSet s1 = exact_enumerate(one);
  REQUIRE(s1.size() == 2);
  REQUIRE(s1.config(0)[0] == 0);
  REQUIRE(s1.config(1)[0] == 1);

  SampleSet s3 = exact_enumerate(zero_ham(3));
  REQUIRE(s3.size() == 8);
  std::set<std::size_t> seen;
  for (std::size_t k = 0; k < 8; ++k) seen.insert(pattern_of(s3, k));
  REQUIRE(seen.size() == 8);
  for (auto c : s3.counts) REQUIRE(c == 1);
}

TEST_CASE("exact_enumerate cap boundary") {
  SampleSet big = exact_enumerate(zero_ham(20), 20);
  REQUIRE(big.size() == (std::size_t(1) << 20));
  REQUIRE_THROWS_AS(exact_enumerate(zero_ham(21), 20), std::invalid_argument);
}

TEST_CASE("gibbs: zero-parameter target is uniform per unit") {
  ClampedHamiltonian ch = zero_ham(4);
  SamplerConfig cfg;
  cfg.num_reads = 100000;
  cfg.burn_in = 10;
  cfg.rng_seed = 11;
  SampleSet s = gibbs_sample(ch, cfg);

  std::uint64_t total = 0;
  std::vector<std::uint64_t> ones(4, 0);
  for (std::size_t k = 0; k < s.size(); ++k) {
    total += s.counts[k];
    for (std::size_t j = 0; j < 4; ++j)
      if (s.config(k)[j]) ones[j] += s.counts[k];
  }
  REQUIRE(total == cfg.num_reads);
  for (std::size_t j = 0; j < 4; ++j) {
    const double mean = double(ones[j]) / double(total);
    REQUIRE(mean >= 0.49);
    REQUIRE(mean <= 0.51);
  }
}

TEST_CASE("gibbs: empirical distribution close to exact in total variation") {
  Rng rng(derive_seed(3, "test.sampler", 0));
  for (int model = 0; model < 3; ++model) {
    ClampedHamiltonian ch = random_ham(rng, {2, 2}, 1.0);
    std::vector<double> exact = oracle_boltzmann(ch);

    SamplerConfig cfg;
    cfg.num_reads = 20000;
    cfg.burn_in = 200;
    cfg.rng_seed = 77 + std::uint64_t(model);
    SampleSet s = gibbs_sample(ch, cfg);

    std::vector<double> emp(exact.size(), 0.0);
    for (std::size_t k = 0; k < s.size(); ++k)
      emp[pattern_of(s, k)] = double(s.counts[k]) / double(cfg.num_reads);
    double tv = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i)
      tv += std::abs(emp[i] - exact[i]);
    tv /= 2.0;
    REQUIRE(tv <= 0.05);
  }
}

TEST_CASE("gibbs: long-run frequencies pass a chi-square fit test") {
  Rng rng(derive_seed(3, "test.sampler", 1));
  ClampedHamiltonian ch = random_ham(rng, {3}, 1.0);
  std::vector<double> exact = oracle_boltzmann(ch);

  SamplerConfig cfg;
  cfg.num_reads = 100000;
  cfg.burn_in = 500;
  cfg.rng_seed = 5;
  SampleSet s = gibbs_sample(ch, cfg);

  std::vector<double> obs(8, 0.0);
  for (std::size_t k = 0; k < s.size(); ++k)
    obs[pattern_of(s, k)] = double(s.counts[k]);
  double chi2 = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    const double expected = exact[i] * double(cfg.num_reads);
    REQUIRE(expected > 5.0);  // classic validity condition for the test
    chi2 += (obs[i] - expected) * (obs[i] - expected) / expected;
  }
  // 0.99 quantile of chi-square with 7 degrees of freedom
  REQUIRE(chi2 < 18.4753);
}

TEST_CASE("gibbs determinism and dedup accounting") {
  Rng rng(derive_seed(3, "test.sampler", 2));
  ClampedHamiltonian ch = random_ham(rng, {3, 2}, 0.8);
  SamplerConfig cfg;
  cfg.num_reads = 500;
  cfg.rng_seed = 21;
  SampleSet a = gibbs_sample(ch, cfg);
  SampleSet b = gibbs_sample(ch, cfg);
  REQUIRE(a == b);

  std::uint64_t total = 0;
  for (auto c : a.counts) total += c;
  REQUIRE(total == cfg.num_reads);

  cfg.invocation = 1;  // a fresh invocation draws a different stream
  SampleSet c = gibbs_sample(ch, cfg);
  REQUIRE(a != c);
}

TEST_CASE("anneal: dominant minimum captured by nearly all reads") {
  ClampedHamiltonian ch =
      make_ham({4}, std::vector<double>(4, -10.0), {});
  SamplerConfig cfg;
  cfg.num_reads = 100;
  cfg.rng_seed = 9;
  SampleSet s = anneal_sample(ch, cfg);

  std::uint32_t ones_count = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    bool all_ones = true;
    for (std::size_t j = 0; j < 4; ++j) all_ones &= s.config(k)[j] == 1;
    if (all_ones) ones_count = s.counts[k];
  }
  REQUIRE(ones_count >= 95);
}

TEST_CASE("anneal: flat landscape spreads reads over many configs") {
  ClampedHamiltonian ch = zero_ham(8);
  SamplerConfig cfg;
  cfg.num_reads = 100;
  cfg.rng_seed = 13;
  SampleSet s = anneal_sample(ch, cfg);
  REQUIRE(s.size() >= 10);

  SampleSet again = anneal_sample(ch, cfg);
  REQUIRE(s == again);
}

TEST_CASE("anneal: schedule validation") {
  ClampedHamiltonian ch = zero_ham(2);
  SamplerConfig cfg;
  cfg.anneal_schedule = {{1.0, 10}, {0.5, 10}};  // decreasing beta
  REQUIRE_THROWS_AS(anneal_sample(ch, cfg), std::invalid_argument);
  cfg.anneal_schedule.clear();
  REQUIRE_THROWS_AS([&] {
    SamplerConfig bad;
    bad.num_reads = 0;
    bad.validate();
  }(), std::invalid_argument);

  auto sched = default_anneal_schedule(2.5);
  REQUIRE(sched.size() == 100);
  REQUIRE(sched.front().first == doctest::Approx(0.1));
  REQUIRE(sched.back().first == doctest::Approx(2.5));
  std::size_t total_sweeps = 0;
  for (auto& [beta, sw] : sched) total_sweeps += sw;
  REQUIRE(total_sweeps == 1000);
}

TEST_CASE("truncated_probs: two-state logistic and uniform cases") {
  // single unit with eff_bias 1: energies 0 and 1
  ClampedHamiltonian ch = make_ham({1}, {1.0}, {});
  SampleSet s = exact_enumerate(ch);
  std::vector<double> p = truncated_probs(ch, s);
  REQUIRE(p[0] == doctest::Approx(0.7311).epsilon(1e-4));
  REQUIRE(p[1] == doctest::Approx(0.2689).epsilon(1e-4));

  ClampedHamiltonian flat = zero_ham(3);
  std::vector<double> u = truncated_probs(flat, exact_enumerate(flat));
  for (double x : u) REQUIRE(x == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("truncated_probs: matches naive Boltzmann on full support") {
  Rng rng(derive_seed(3, "test.sampler", 3));
  for (int model = 0; model < 10; ++model) {
    ClampedHamiltonian ch = random_ham(rng, {2, 2}, 1.0);
    ch.beta = 0.5 + rng.uniform01();
    SampleSet s = exact_enumerate(ch);
    std::vector<double> p = truncated_probs(ch, s);
    std::vector<double> oracle = oracle_boltzmann(ch);
    double total = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      REQUIRE(p[k] == doctest::Approx(oracle[pattern_of(s, k)]).epsilon(1e-12));
      total += p[k];
    }
    REQUIRE(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("truncated_probs: constant energy shift leaves probs unchanged") {
  Rng rng(derive_seed(3, "test.sampler", 4));
  ClampedHamiltonian ch = random_ham(rng, {3, 2}, 1.0);
  SamplerConfig cfg;
  cfg.num_reads = 200;
  cfg.rng_seed = 31;
  SampleSet s = gibbs_sample(ch, cfg);  // truncated (partial) support
  std::vector<double> p = truncated_probs(ch, s);

  ClampedHamiltonian shifted = ch;
  shifted.constant += 123.5;
  std::vector<double> q = truncated_probs(shifted, s);
  for (std::size_t k = 0; k < p.size(); ++k)
    REQUIRE(p[k] == doctest::Approx(q[k]).epsilon(1e-12));

  // extreme energies exercise the log-sum-exp path
  ClampedHamiltonian hot = make_ham({2}, {900.0, -900.0}, {});
  std::vector<double> ph = truncated_probs(hot, exact_enumerate(hot));
  double total = 0.0;
  for (double x : ph) {
    REQUIRE(std::isfinite(x));
    total += x;
  }
  REQUIRE(std::abs(total - 1.0) <= 1e-12);
}

TEST_CASE("sample set debug dump writes one row per config") {
  ClampedHamiltonian ch = make_ham({2}, {0.3, -0.2}, {});
  SampleSet s = exact_enumerate(ch);
  const std::string path = "sampleset_dump_test.csv";
  dump_sample_set_csv(path, ch, s);
  std::ifstream in(path);
  std::string line;
  std::size_t rows = 0;
  REQUIRE(std::getline(in, line));
  REQUIRE(line == "config,count,energy,probability");
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  REQUIRE(rows == 4);
  std::remove(path.c_str());
}
