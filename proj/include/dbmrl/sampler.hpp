#pragma once

// Sample sets over the hidden configurations of a ClampedHamiltonian.
//
// Three interchangeable backends produce SampleSets from the Boltzmann
// distribution p(h) ~ exp(-beta E(h)): exhaustive enumeration (the oracle,
// feasible up to a configured hidden-unit cap), single-site Gibbs MCMC, and
// simulated annealing (the stand-in for a hardware annealer, whose reads
// concentrate on low-energy states).  truncated_probs then renormalizes
// exp(-beta E) over exactly the sampled support, treating every unsampled
// configuration as probability zero.

#include <cstdint>
#include <string>
#include <vector>

#include "dbmrl/energy_model.hpp"

namespace dbmrl {

enum class SamplerBackend { exact, gibbs, anneal };

const char* backend_name(SamplerBackend b);
SamplerBackend backend_from_name(const std::string& name);

// Deduplicated hidden configurations.  Rows of `configs` (n_hidden bytes
// each, values 0/1) are pairwise distinct and ordered by first occurrence;
// counts[k] >= 1 is how many raw reads produced row k.
struct SampleSet {
  std::vector<std::uint8_t> configs;  // flattened size() x n_hidden
  std::vector<std::uint32_t> counts;
  SamplerBackend source = SamplerBackend::exact;
  std::size_t n_hidden = 0;

  std::size_t size() const { return counts.size(); }
  const std::uint8_t* config(std::size_t k) const {
    return configs.data() + k * n_hidden;
  }
  bool operator==(const SampleSet&) const = default;
};

struct SamplerConfig {
  std::size_t num_reads = 100;  // retained Gibbs reads / annealing runs
  std::size_t burn_in = 100;    // Gibbs sweeps discarded up front
  std::size_t thin = 1;         // Gibbs sweeps between retained reads
  // (inverse temperature, sweep count) stages, beta non-decreasing;
  // empty means "use default_anneal_schedule(ch.beta)".
  std::vector<std::pair<double, std::size_t>> anneal_schedule;
  std::uint64_t rng_seed = 0;
  // Every invocation derives a private RNG stream from (rng_seed,
  // invocation); callers increment this to make successive calls
  // independent of each other and of call order elsewhere.
  std::uint64_t invocation = 0;
  std::size_t exact_cap = 20;  // max hidden units for exact_enumerate

  void validate() const;  // throws std::invalid_argument
};

// Geometric ramp from min(0.1, beta_target) up to beta_target over
// `stages` stages of `sweeps_per_stage` sweeps each (1000 sweeps total by
// default).
std::vector<std::pair<double, std::size_t>> default_anneal_schedule(
    double beta_target, std::size_t stages = 100,
    std::size_t sweeps_per_stage = 10);

// All 2^H hidden configurations, count 1 each, row k encoding the pattern
// whose bit j (LSB first) is unit j.  Throws std::invalid_argument when H
// exceeds cap.
SampleSet exact_enumerate(const ClampedHamiltonian& ch, std::size_t cap = 20);

// Heat-bath single-site sweeps at the Hamiltonian's beta.  After burn_in
// sweeps, one read is retained every `thin` sweeps until num_reads reads.
SampleSet gibbs_sample(const ClampedHamiltonian& ch, const SamplerConfig& cfg);

// num_reads independent annealing runs, each sweeping the schedule from hot
// to cold and contributing its final configuration.
SampleSet anneal_sample(const ClampedHamiltonian& ch,
                        const SamplerConfig& cfg);

// Dispatch on backend; exact ignores everything in cfg except exact_cap.
SampleSet draw_samples(const ClampedHamiltonian& ch, SamplerBackend backend,
                       const SamplerConfig& cfg);

// hidden_energy of every config in s (batched).
std::vector<double> support_energies(const ClampedHamiltonian& ch,
                                     const SampleSet& s);

// p_k = exp(-beta E_k) / sum_m exp(-beta E_m) over the support only,
// computed from energies (log-sum-exp stabilized), not from counts.
std::vector<double> truncated_probs(const ClampedHamiltonian& ch,
                                    const SampleSet& s);

// Debug dump: one row per config (bits, count, energy, probability).
void dump_sample_set_csv(const std::string& path,
                         const ClampedHamiltonian& ch, const SampleSet& s);

}  // namespace dbmrl
