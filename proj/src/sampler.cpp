#include "dbmrl/sampler.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "dbmrl/kernels.hpp"
#include "dbmrl/util.hpp"

namespace dbmrl {
namespace {

// Incremental dedup keyed by the bit pattern of a configuration.
// Pattern-based keys need H <= 64; desk-scale models are far below that.
class Dedup {
 public:
  explicit Dedup(std::size_t n_hidden) : n_hidden_(n_hidden) {
    if (n_hidden > 64)
      throw std::invalid_argument(
          "sampler: more than 64 hidden units is not supported");
  }

  void add(const std::uint8_t* h) {
    std::uint64_t key = 0;
    for (std::size_t j = 0; j < n_hidden_; ++j)
      key |= std::uint64_t(h[j]) << j;
    auto [it, inserted] = index_.try_emplace(key, out_.counts.size());
    if (inserted) {
      out_.configs.insert(out_.configs.end(), h, h + n_hidden_);
      out_.counts.push_back(1);
    } else {
      ++out_.counts[it->second];
    }
  }

  SampleSet take(SamplerBackend source) {
    out_.source = source;
    out_.n_hidden = n_hidden_;
    return std::move(out_);
  }

 private:
  std::size_t n_hidden_;
  SampleSet out_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

// Local field of hidden unit (layer, r): eff_bias plus coupling terms from
// the current values of the adjacent layers.
double local_field(const ClampedHamiltonian& ch,
                   const std::vector<std::uint8_t>& h, std::size_t layer,
                   std::size_t r) {
  const std::size_t base = ch.layer_offset(layer);
  double f = ch.eff_bias[base + r];
  if (layer > 0) {
    const std::size_t prows = ch.layer_sizes[layer - 1];
    const std::size_t pbase = base - prows;
    const std::size_t cols = ch.layer_sizes[layer];
    const double* block = ch.hidden_couplings[layer - 1].data();
    for (std::size_t c = 0; c < prows; ++c)
      if (h[pbase + c]) f += block[c * cols + r];
  }
  if (layer + 1 < ch.layer_sizes.size()) {
    const std::size_t cols = ch.layer_sizes[layer + 1];
    const double* row = ch.hidden_couplings[layer].data() + r * cols;
    f += kernels::bit_dot(h.data() + base + ch.layer_sizes[layer], row, cols);
  }
  return f;
}

// One heat-bath sweep over all hidden units at inverse temperature beta.
void sweep(const ClampedHamiltonian& ch, std::vector<std::uint8_t>& h,
           double beta, Rng& rng) {
  for (std::size_t layer = 0; layer < ch.layer_sizes.size(); ++layer)
    for (std::size_t r = 0; r < ch.layer_sizes[layer]; ++r) {
      const double f = local_field(ch, h, layer, r);
      // p(h=1 | rest) = 1 / (1 + exp(beta * f)); setting the unit adds f
      const double p1 = 1.0 / (1.0 + std::exp(beta * f));
      h[ch.layer_offset(layer) + r] = rng.uniform01() < p1 ? 1 : 0;
    }
}

void random_state(std::vector<std::uint8_t>& h, Rng& rng) {
  for (auto& v : h) v = rng.uniform01() < 0.5 ? 1 : 0;
}

void check_hamiltonian(const ClampedHamiltonian& ch) {
  if (ch.layer_sizes.empty() || ch.eff_bias.size() != ch.n_hidden())
    throw std::invalid_argument("sampler: malformed Hamiltonian");
  if (!(ch.beta > 0.0))
    throw std::invalid_argument("sampler: beta must be positive");
}

}  // namespace

const char* backend_name(SamplerBackend b) {
  switch (b) {
    case SamplerBackend::exact: return "exact";
    case SamplerBackend::gibbs: return "gibbs";
    case SamplerBackend::anneal: return "anneal";
  }
  return "unknown";
}

SamplerBackend backend_from_name(const std::string& name) {
  if (name == "exact") return SamplerBackend::exact;
  if (name == "gibbs") return SamplerBackend::gibbs;
  if (name == "anneal") return SamplerBackend::anneal;
  throw std::invalid_argument("unknown sampler backend: " + name);
}

void SamplerConfig::validate() const {
  if (num_reads < 1)
    throw std::invalid_argument("SamplerConfig: num_reads must be >= 1");
  if (thin < 1)
    throw std::invalid_argument("SamplerConfig: thin must be >= 1");
  double prev = 0.0;
  for (const auto& [beta, sweeps] : anneal_schedule) {
    if (!(beta > 0.0) || beta < prev)
      throw std::invalid_argument(
          "SamplerConfig: schedule betas must be positive, non-decreasing");
    if (sweeps < 1)
      throw std::invalid_argument("SamplerConfig: schedule sweeps must be >= 1");
    prev = beta;
  }
}

std::vector<std::pair<double, std::size_t>> default_anneal_schedule(
    double beta_target, std::size_t stages, std::size_t sweeps_per_stage) {
  if (!(beta_target > 0.0))
    throw std::invalid_argument("anneal schedule: beta_target must be > 0");
  const double beta0 = std::min(0.1, beta_target);
  std::vector<std::pair<double, std::size_t>> sched;
  sched.reserve(stages);
  for (std::size_t k = 0; k < stages; ++k) {
    const double t = stages > 1 ? double(k) / double(stages - 1) : 1.0;
    sched.emplace_back(beta0 * std::pow(beta_target / beta0, t),
                       sweeps_per_stage);
  }
  return sched;
}

SampleSet exact_enumerate(const ClampedHamiltonian& ch, std::size_t cap) {
  check_hamiltonian(ch);
  const std::size_t n = ch.n_hidden();
  if (n > cap)
    throw std::invalid_argument(
        "exact_enumerate: hidden unit count exceeds cap");
  const std::size_t m = std::size_t(1) << n;
  SampleSet s;
  s.source = SamplerBackend::exact;
  s.n_hidden = n;
  s.configs.resize(m * n);
  s.counts.assign(m, 1);
  for (std::size_t pat = 0; pat < m; ++pat)
    for (std::size_t j = 0; j < n; ++j)
      s.configs[pat * n + j] = (pat >> j) & 1;
  return s;
}

SampleSet gibbs_sample(const ClampedHamiltonian& ch,
                       const SamplerConfig& cfg) {
  check_hamiltonian(ch);
  cfg.validate();
  Rng rng(derive_seed(cfg.rng_seed, "sampler.gibbs", cfg.invocation));
  std::vector<std::uint8_t> h(ch.n_hidden());
  random_state(h, rng);
  for (std::size_t i = 0; i < cfg.burn_in; ++i) sweep(ch, h, ch.beta, rng);
  Dedup dedup(h.size());
  for (std::size_t read = 0; read < cfg.num_reads; ++read) {
    for (std::size_t i = 0; i < cfg.thin; ++i) sweep(ch, h, ch.beta, rng);
    dedup.add(h.data());
  }
  return dedup.take(SamplerBackend::gibbs);
}

SampleSet anneal_sample(const ClampedHamiltonian& ch,
                        const SamplerConfig& cfg) {
  check_hamiltonian(ch);
  cfg.validate();
  const auto schedule = cfg.anneal_schedule.empty()
                            ? default_anneal_schedule(ch.beta)
                            : cfg.anneal_schedule;
  if (schedule.empty())
    throw std::invalid_argument("anneal_sample: empty schedule");
  Rng rng(derive_seed(cfg.rng_seed, "sampler.anneal", cfg.invocation));
  Dedup dedup(ch.n_hidden());
  std::vector<std::uint8_t> h(ch.n_hidden());
  for (std::size_t read = 0; read < cfg.num_reads; ++read) {
    random_state(h, rng);
    for (const auto& [beta, sweeps] : schedule)
      for (std::size_t i = 0; i < sweeps; ++i) sweep(ch, h, beta, rng);
    dedup.add(h.data());
  }
  return dedup.take(SamplerBackend::anneal);
}

SampleSet draw_samples(const ClampedHamiltonian& ch, SamplerBackend backend,
                       const SamplerConfig& cfg) {
  switch (backend) {
    case SamplerBackend::exact: return exact_enumerate(ch, cfg.exact_cap);
    case SamplerBackend::gibbs: return gibbs_sample(ch, cfg);
    case SamplerBackend::anneal: return anneal_sample(ch, cfg);
  }
  throw std::invalid_argument("draw_samples: unknown backend");
}

std::vector<double> support_energies(const ClampedHamiltonian& ch,
                                     const SampleSet& s) {
  check_hamiltonian(ch);
  if (s.size() == 0)
    throw std::invalid_argument("support_energies: empty sample set");
  if (s.n_hidden != ch.n_hidden())
    throw std::invalid_argument("support_energies: hidden size mismatch");

  const std::size_t nl = ch.layer_sizes.size();
  std::vector<double> e(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    const std::uint8_t* row = s.config(k);
    double acc =
        ch.constant + kernels::bit_dot(row, ch.eff_bias.data(), s.n_hidden);
    for (std::size_t l = 0; l + 1 < nl; ++l) {
      const std::size_t rows = ch.layer_sizes[l];
      const std::size_t cols = ch.layer_sizes[l + 1];
      const std::size_t base = ch.layer_offset(l);
      const double* block = ch.hidden_couplings[l].data();
      for (std::size_t r = 0; r < rows; ++r)
        if (row[base + r])
          acc += kernels::bit_dot(row + base + rows, block + r * cols, cols);
    }
    e[k] = acc;
  }
  return e;
}

std::vector<double> truncated_probs(const ClampedHamiltonian& ch,
                                    const SampleSet& s) {
  const std::vector<double> e = support_energies(ch, s);
  double emin = e[0];
  for (double x : e)
    if (x < emin) emin = x;
  // p_k ~ exp(-beta (E_k - E_min)); the shift cancels in the ratio
  std::vector<double> p(e.size());
  const double total = kernels::exp_affine_sum(e.data(), -ch.beta,
                                               ch.beta * emin, p.data(),
                                               e.size());
  kernels::scale(p.data(), 1.0 / total, p.size());
  return p;
}

void dump_sample_set_csv(const std::string& path,
                         const ClampedHamiltonian& ch, const SampleSet& s) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("dump_sample_set_csv: cannot open " + path);
  const std::vector<double> e = support_energies(ch, s);
  const std::vector<double> p = truncated_probs(ch, s);
  out << "config,count,energy,probability\n";
  for (std::size_t k = 0; k < s.size(); ++k) {
    const std::uint8_t* row = s.config(k);
    for (std::size_t j = 0; j < s.n_hidden; ++j) out << int(row[j]);
    out << ',' << s.counts[k] << ',' << format_double(e[k]) << ','
        << format_double(p[k]) << '\n';
  }
}

}  // namespace dbmrl
