#include "dbmrl/free_energy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

#include "dbmrl/kernels.hpp"
#include "dbmrl/util.hpp"

namespace dbmrl {
namespace {

void check_binary_state(const UnitAssignment& state) {
  for (auto v : state)
    if (v > 1)
      throw std::invalid_argument("head evaluation: state bits must be 0/1");
}

UnitAssignment with_zero_actions(const DbmTopology& topo,
                                 const UnitAssignment& state) {
  UnitAssignment vis(topo.n_visible(), 0);
  std::copy(state.begin(), state.end(), vis.begin());
  return vis;
}

// Per-action change to the state-clamped Hamiltonian: clamping action unit
// i to 1 adds its bias to the constant and its coupling column to the last
// hidden layer's effective biases.
struct ActionDelta {
  double dconst = 0.0;
  std::vector<double> dlast;
};

std::vector<ActionDelta> action_deltas(const DbmWeights& w,
                                       const DbmTopology& topo) {
  const std::size_t kblk = topo.n_blocks() - 1;
  const auto [rows, cols] = topo.block_shape(kblk);
  std::vector<ActionDelta> d(topo.n_action);
  for (std::size_t i = 0; i < topo.n_action; ++i) {
    d[i].dconst = w.biases[topo.action_offset() + i];
    d[i].dlast.resize(rows);
    for (std::size_t r = 0; r < rows; ++r)
      d[i].dlast[r] = w.coupling_blocks[kblk][r * cols + i];
  }
  return d;
}

ClampedHamiltonian apply_delta(ClampedHamiltonian base, const ActionDelta& d) {
  base.constant += d.dconst;
  const std::size_t off = base.layer_offset(base.layer_sizes.size() - 1);
  for (std::size_t r = 0; r < d.dlast.size(); ++r)
    base.eff_bias[off + r] += d.dlast[r];
  return base;
}

// ---- full-enumeration table path -------------------------------------------

// All 2^H hidden patterns as a row-major 0/1 byte matrix (bit j of the row
// index is column j) -- the same layout exact_enumerate produces.  Cached
// per H because it depends on nothing else.
const std::vector<std::uint8_t>& pattern_matrix(std::size_t h) {
  static std::mutex mu;
  static std::unordered_map<std::size_t, std::vector<std::uint8_t>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(h);
  if (it == cache.end()) {
    const std::size_t m = std::size_t(1) << h;
    std::vector<std::uint8_t> bits(m * h);
    for (std::size_t pat = 0; pat < m; ++pat)
      for (std::size_t j = 0; j < h; ++j)
        bits[pat * h + j] = (pat >> j) & 1;
    it = cache.emplace(h, std::move(bits)).first;
  }
  return it->second;
}

struct ExactScratch {
  std::vector<double> efull;    // 2^H core energies (constant excluded)
  std::vector<double> probs;    // per-config weights
  std::vector<double> q;        // combined weights across actions
  std::vector<double> scratch;  // throwaway exp output
};

ExactScratch& exact_scratch() {
  static thread_local ExactScratch s;
  return s;
}

// Exhaustive evaluator over the hidden space of a layered Hamiltonian.
// Energies are assembled once per evaluation with per-layer bit-pattern
// recurrences; per-action deltas then enter as per-slice offsets on the
// last layer (its bits are the high bits of the config index).
class ExactEval {
 public:
  explicit ExactEval(const ClampedHamiltonian& ch) : ch_(ch) {
    h_ = ch.n_hidden();
    if (h_ >= 26)
      throw std::invalid_argument("exact evaluation: hidden space too large");
    m_ = std::size_t(1) << h_;
    n_last_ = ch.layer_sizes.back();
    slices_ = std::size_t(1) << n_last_;
    p_ = m_ >> n_last_;
    build();
  }

  std::size_t configs() const { return m_; }
  std::size_t slices() const { return slices_; }
  std::size_t slice_len() const { return p_; }

  // Free energy of the Hamiltonian with an optional per-slice energy delta
  // t[x_last] and constant shift dconst (an action's contribution).  When
  // probs is non-null it receives the 2^H normalized probabilities; when
  // slice_sums is non-null it receives the per-slice probability masses.
  double free_energy(const double* t, double dconst, double* probs,
                     double* slice_sums) const {
    const double beta = ch_.beta;
    const double* e = exact_scratch().efull.data();

    double emin = slice_min_[0] + (t ? t[0] : 0.0);
    for (std::size_t x = 1; x < slices_; ++x)
      emin = std::min(emin, slice_min_[x] + (t ? t[x] : 0.0));

    auto& scratch = exact_scratch().scratch;
    if (!probs && scratch.size() < p_) scratch.resize(p_);

    double total = 0.0;
    for (std::size_t x = 0; x < slices_; ++x) {
      const double b = beta * (emin - (t ? t[x] : 0.0));
      double* out = probs ? probs + x * p_ : scratch.data();
      const double s = kernels::exp_affine_sum(e + x * p_, -beta, b, out, p_);
      if (slice_sums) slice_sums[x] = s;
      total += s;
    }
    if (probs) kernels::scale(probs, 1.0 / total, m_);
    if (slice_sums)
      for (std::size_t x = 0; x < slices_; ++x) slice_sums[x] /= total;
    return ch_.constant + dconst + emin - std::log(total) / beta;
  }

 private:
  void build() {
    auto& e = exact_scratch().efull;
    if (e.size() < m_) e.resize(m_);
    const auto& sizes = ch_.layer_sizes;

    // layer 0 biases via the low-bit recurrence
    const std::size_t n0 = sizes[0];
    e[0] = 0.0;
    for (std::size_t x = 1; x < (std::size_t(1) << n0); ++x)
      e[x] = e[x & (x - 1)] +
             ch_.eff_bias[std::size_t(std::countr_zero(x))];

    std::size_t prefix = std::size_t(1) << n0;
    for (std::size_t layer = 1; layer < sizes.size(); ++layer) {
      const std::size_t nk = sizes[layer];
      const std::size_t np = sizes[layer - 1];
      const std::size_t patk = std::size_t(1) << nk;
      const std::size_t patp = std::size_t(1) << np;
      const std::size_t low = prefix >> np;  // configs below layer-1 block
      const double* bias = ch_.eff_bias.data() + ch_.layer_offset(layer);
      const double* w = ch_.hidden_couplings[layer - 1].data();  // np x nk

      // bk[y]: bias sum of pattern y; rk[r][y]: coupling row sums
      std::vector<double> bk(patk), rk(np * patk);
      bk[0] = 0.0;
      for (std::size_t y = 1; y < patk; ++y)
        bk[y] = bk[y & (y - 1)] + bias[std::size_t(std::countr_zero(y))];
      for (std::size_t r = 0; r < np; ++r) {
        double* row = rk.data() + r * patk;
        row[0] = 0.0;
        for (std::size_t y = 1; y < patk; ++y)
          row[y] = row[y & (y - 1)] +
                   w[r * nk + std::size_t(std::countr_zero(y))];
      }

      // extend: E[xk:xp:rest] = E[xp:rest] + bk[xk] + sum_r rk[r][xk]
      // descending xk keeps the xk=0 source block intact until last
      for (std::size_t xk = patk; xk-- > 0;) {
        for (std::size_t xp = 0; xp < patp; ++xp) {
          double c = bk[xk];
          for (std::size_t bits = xp; bits;) {
            const std::size_t r = std::size_t(std::countr_zero(bits));
            c += rk[r * patk + xk];
            bits &= bits - 1;
          }
          const double* src = e.data() + xp * low;
          double* dst = e.data() + xk * prefix + xp * low;
          for (std::size_t i = 0; i < low; ++i) dst[i] = src[i] + c;
        }
      }
      prefix <<= nk;
    }

    slice_min_.resize(slices_);
    for (std::size_t x = 0; x < slices_; ++x) {
      const double* s = e.data() + x * p_;
      double lo = s[0];
      for (std::size_t i = 1; i < p_; ++i) lo = std::min(lo, s[i]);
      slice_min_[x] = lo;
    }
  }

  const ClampedHamiltonian& ch_;
  std::size_t h_ = 0, m_ = 0, n_last_ = 0, slices_ = 0, p_ = 0;
  std::vector<double> slice_min_;
};

// Pattern-sum table for an action's last-layer delta: t[y] = dconst-free
// sum of dlast over the set bits of y.
std::vector<double> delta_table(const ActionDelta& d) {
  const std::size_t pat = std::size_t(1) << d.dlast.size();
  std::vector<double> t(pat);
  t[0] = 0.0;
  for (std::size_t y = 1; y < pat; ++y)
    t[y] = t[y & (y - 1)] + d.dlast[std::size_t(std::countr_zero(y))];
  return t;
}

// ---- shared gradient statistics ----------------------------------------------
// Adds the q-weighted support expectations into acc: offset and visible
// biases scale with csum = sum of q (mass times coefficients), hidden
// biases take the q-means, couplings the q-moments.  Action-block terms
// are added only when with_action_terms (single-Hamiltonian case where
// `visible` includes clamped action values).

void add_weighted_stats(const DbmTopology& topo, const UnitAssignment& visible,
                        bool with_action_terms, const std::uint8_t* bits,
                        std::size_t ld, const double* q, std::size_t m,
                        double csum, ParamGradient& acc) {
  const std::size_t nh = topo.n_hidden();
  const std::size_t hoff = topo.hidden_offset();

  acc.d_offset += csum;
  for (std::size_t i = 0; i < topo.n_state; ++i)
    if (visible[i]) acc.d_bias[i] += csum;

  // hidden unit means
  std::vector<double> mean(nh);
  kernels::bit_matvec_t(bits, ld, 0, nh, q, mean.data(), m);
  kernels::axpy(1.0, mean.data(), acc.d_bias.data() + hoff, nh);

  // state-h1 couplings: v_r * <h1_c>
  {
    const auto [rows, cols] = topo.block_shape(0);
    double* blk = acc.d_coupling[0].data();
    for (std::size_t r = 0; r < rows; ++r)
      if (visible[r]) kernels::axpy(1.0, mean.data(), blk + r * cols, cols);
  }

  // hidden-hidden couplings: <h_a h_b> between adjacent layers
  for (std::size_t l = 0; l + 1 < topo.hidden_layers.size(); ++l) {
    const std::size_t offa = topo.layer_offset(l) - hoff;
    const std::size_t offb = topo.layer_offset(l + 1) - hoff;
    kernels::bit_weighted_outer_acc(bits, ld, offa, topo.hidden_layers[l],
                                    offb, topo.hidden_layers[l + 1], q,
                                    acc.d_coupling[1 + l].data(), m);
  }

  if (with_action_terms && topo.n_action > 0) {
    const std::size_t kblk = topo.n_blocks() - 1;
    const auto [rows, cols] = topo.block_shape(kblk);
    const std::size_t last_rel =
        topo.layer_offset(topo.hidden_layers.size() - 1) - hoff;
    double* blk = acc.d_coupling[kblk].data();
    for (std::size_t j = 0; j < topo.n_action; ++j) {
      if (!visible[topo.n_state + j]) continue;
      acc.d_bias[topo.action_offset() + j] += csum;
      for (std::size_t r = 0; r < rows; ++r)
        blk[r * cols + j] += mean[last_rel + r];
    }
  }
}

SampleSet draw_for(FreeEnergyHead& head, const ClampedHamiltonian& ch) {
  SamplerConfig cfg = head.sampler_cfg;
  cfg.invocation = head.sampler_calls;
  return draw_samples(ch, head.backend, cfg);
}

}  // namespace

// ---- ParamGradient -----------------------------------------------------------

ParamGradient ParamGradient::zeros_like(const DbmTopology& topo) {
  ParamGradient g;
  g.d_bias.assign(topo.n_units(), 0.0);
  g.d_coupling.resize(topo.n_blocks());
  for (std::size_t k = 0; k < topo.n_blocks(); ++k) {
    const auto [rows, cols] = topo.block_shape(k);
    g.d_coupling[k].assign(rows * cols, 0.0);
  }
  return g;
}

std::size_t ParamGradient::flat_size() const {
  std::size_t n = 1 + d_bias.size();
  for (const auto& b : d_coupling) n += b.size();
  return n;
}

// ---- head validation ----------------------------------------------------------

void FreeEnergyHead::validate() const {
  check_weights(weights, topo);
  if (kind == HeadKind::value && topo.n_action != 0)
    throw std::invalid_argument("value head must have no action units");
  if (kind == HeadKind::policy && topo.n_action == 0)
    throw std::invalid_argument("policy head needs at least one action unit");
  if (backend == SamplerBackend::exact &&
      topo.n_hidden() > sampler_cfg.exact_cap)
    throw std::invalid_argument(
        "exact backend: hidden units exceed the enumeration cap");
  sampler_cfg.validate();
}

// ---- core estimator -----------------------------------------------------------

double truncated_free_energy(const ClampedHamiltonian& ch,
                             const SampleSet& s) {
  const std::vector<double> e = support_energies(ch, s);
  double emin = e[0];
  for (double x : e) emin = std::min(emin, x);
  std::vector<double> w(e.size());
  const double total = kernels::exp_affine_sum(e.data(), -ch.beta,
                                               ch.beta * emin, w.data(),
                                               e.size());
  return emin - std::log(total) / ch.beta;
}

ParamGradient free_energy_gradient(const ClampedHamiltonian& ch,
                                   const SampleSet& s, const ClampMap& cm) {
  cm.topo.validate();
  if (cm.visible.size() != cm.topo.n_visible())
    throw std::invalid_argument("free_energy_gradient: visible size mismatch");
  if (s.n_hidden != cm.topo.n_hidden() || ch.n_hidden() != s.n_hidden)
    throw std::invalid_argument("free_energy_gradient: hidden size mismatch");
  check_binary_state(cm.visible);

  const std::vector<double> p = truncated_probs(ch, s);
  ParamGradient acc = ParamGradient::zeros_like(cm.topo);
  add_weighted_stats(cm.topo, cm.visible, /*with_action_terms=*/true,
                     s.configs.data(), s.n_hidden, p.data(), s.size(), 1.0,
                     acc);
  return acc;
}

std::vector<double> action_distribution(std::span<const double> logits) {
  if (logits.empty())
    throw std::invalid_argument("action_distribution: empty logits");
  const double m = kernels::reduce_max(logits.data(), logits.size());
  std::vector<double> p(logits.size());
  const double total =
      kernels::exp_affine_sum(logits.data(), 1.0, -m, p.data(), p.size());
  kernels::scale(p.data(), 1.0 / total, p.size());
  return p;
}

// ---- head evaluation ------------------------------------------------------------

ValueEval eval_value(FreeEnergyHead& head, const UnitAssignment& state) {
  head.validate();
  if (head.kind != HeadKind::value)
    throw std::invalid_argument("eval_value: not a value head");
  if (state.size() != head.topo.n_state)
    throw std::invalid_argument("eval_value: state length mismatch");
  check_binary_state(state);

  const ClampedHamiltonian ch = clamp(head.weights, head.topo, state);
  ValueEval out;
  if (head.backend == SamplerBackend::exact) {
    ExactEval ev(ch);
    out.value = -ev.free_energy(nullptr, 0.0, nullptr, nullptr);
  } else {
    SampleSet s = draw_for(head, ch);
    out.value = -truncated_free_energy(ch, s);
    out.support = std::move(s);
  }
  ++head.sampler_calls;
  return out;
}

double value(FreeEnergyHead& head, const UnitAssignment& state) {
  return eval_value(head, state).value;
}

PolicyEval eval_policy(FreeEnergyHead& head, const UnitAssignment& state) {
  head.validate();
  if (head.kind != HeadKind::policy)
    throw std::invalid_argument("eval_policy: not a policy head");
  if (state.size() != head.topo.n_state)
    throw std::invalid_argument("eval_policy: state length mismatch");
  check_binary_state(state);

  const std::size_t n_act = head.topo.n_action;
  const ClampedHamiltonian base =
      clamp(head.weights, head.topo, with_zero_actions(head.topo, state));
  const std::vector<ActionDelta> deltas =
      action_deltas(head.weights, head.topo);

  PolicyEval out;
  out.logits.resize(n_act);
  if (head.backend == SamplerBackend::exact) {
    ExactEval ev(base);
    for (std::size_t i = 0; i < n_act; ++i) {
      const std::vector<double> t = delta_table(deltas[i]);
      out.logits[i] =
          -ev.free_energy(t.data(), deltas[i].dconst, nullptr, nullptr);
    }
  } else {
    std::vector<ClampedHamiltonian> hams;
    hams.reserve(n_act);
    for (std::size_t i = 0; i < n_act; ++i)
      hams.push_back(apply_delta(base, deltas[i]));
    SampleSet s = draw_for(head, mean_hamiltonian(hams));
    for (std::size_t i = 0; i < n_act; ++i)
      out.logits[i] = -truncated_free_energy(hams[i], s);
    out.support = std::move(s);
  }
  ++head.sampler_calls;
  return out;
}

std::vector<double> policy_logits(FreeEnergyHead& head,
                                  const UnitAssignment& state) {
  return eval_policy(head, state).logits;
}

// ---- training-path gradients ------------------------------------------------

void accumulate_value_gradient(FreeEnergyHead& head,
                               const UnitAssignment& state, double coef,
                               const SampleSet* reuse, ParamGradient& acc) {
  if (head.kind != HeadKind::value)
    throw std::invalid_argument("accumulate_value_gradient: not a value head");
  const ClampedHamiltonian ch = clamp(head.weights, head.topo, state);

  if (!reuse && head.backend == SamplerBackend::exact) {
    ExactEval ev(ch);
    auto& probs = exact_scratch().probs;
    if (probs.size() < ev.configs()) probs.resize(ev.configs());
    ev.free_energy(nullptr, 0.0, probs.data(), nullptr);
    kernels::scale(probs.data(), coef, ev.configs());
    add_weighted_stats(head.topo, state, true,
                       pattern_matrix(head.topo.n_hidden()).data(),
                       head.topo.n_hidden(), probs.data(), ev.configs(), coef,
                       acc);
    ++head.sampler_calls;
    return;
  }

  SampleSet fresh;
  const SampleSet* s = reuse;
  if (!s) {
    fresh = draw_for(head, ch);
    ++head.sampler_calls;
    s = &fresh;
  }
  std::vector<double> p = truncated_probs(ch, *s);
  kernels::scale(p.data(), coef, p.size());
  add_weighted_stats(head.topo, state, true, s->configs.data(), s->n_hidden,
                     p.data(), s->size(), coef, acc);
}

void accumulate_policy_gradient(FreeEnergyHead& head,
                                const UnitAssignment& state,
                                std::span<const double> coefs,
                                const SampleSet* reuse, ParamGradient& acc) {
  if (head.kind != HeadKind::policy)
    throw std::invalid_argument(
        "accumulate_policy_gradient: not a policy head");
  const std::size_t n_act = head.topo.n_action;
  if (coefs.size() != n_act)
    throw std::invalid_argument(
        "accumulate_policy_gradient: coefficient count mismatch");

  const ClampedHamiltonian base =
      clamp(head.weights, head.topo, with_zero_actions(head.topo, state));
  const std::vector<ActionDelta> deltas =
      action_deltas(head.weights, head.topo);
  double csum = 0.0;
  for (double c : coefs) csum += c;

  const std::size_t kblk = head.topo.n_blocks() - 1;
  const std::size_t n_last = head.topo.hidden_layers.back();
  const std::size_t last_rel =
      head.topo.n_hidden() - n_last;  // last layer's offset among hidden
  double* action_block = acc.d_coupling[kblk].data();

  if (!reuse && head.backend == SamplerBackend::exact) {
    ExactEval ev(base);
    const std::size_t m = ev.configs();
    auto& probs = exact_scratch().probs;
    auto& q = exact_scratch().q;
    if (probs.size() < m) probs.resize(m);
    q.assign(m, 0.0);
    std::vector<double> slice_sums(ev.slices());

    for (std::size_t i = 0; i < n_act; ++i) {
      const std::vector<double> t = delta_table(deltas[i]);
      ev.free_energy(t.data(), deltas[i].dconst, probs.data(),
                     slice_sums.data());
      kernels::axpy(coefs[i], probs.data(), q.data(), m);
      acc.d_bias[head.topo.action_offset() + i] += coefs[i];
      // last-layer means under this action's distribution, from the
      // per-slice masses (slice index == last-layer pattern)
      for (std::size_t r = 0; r < n_last; ++r) {
        double mr = 0.0;
        for (std::size_t y = 0; y < ev.slices(); ++y)
          if ((y >> r) & 1) mr += slice_sums[y];
        action_block[r * n_act + i] += coefs[i] * mr;
      }
    }
    add_weighted_stats(head.topo, with_zero_actions(head.topo, state), false,
                       pattern_matrix(head.topo.n_hidden()).data(),
                       head.topo.n_hidden(), q.data(), m, csum, acc);
    ++head.sampler_calls;
    return;
  }

  std::vector<ClampedHamiltonian> hams;
  hams.reserve(n_act);
  for (std::size_t i = 0; i < n_act; ++i)
    hams.push_back(apply_delta(base, deltas[i]));

  SampleSet fresh;
  const SampleSet* s = reuse;
  if (!s) {
    fresh = draw_for(head, mean_hamiltonian(hams));
    ++head.sampler_calls;
    s = &fresh;
  }

  std::vector<double> q(s->size(), 0.0);
  std::vector<double> mean_last(n_last);
  for (std::size_t i = 0; i < n_act; ++i) {
    std::vector<double> p = truncated_probs(hams[i], *s);
    kernels::axpy(coefs[i], p.data(), q.data(), q.size());
    acc.d_bias[head.topo.action_offset() + i] += coefs[i];
    kernels::bit_matvec_t(s->configs.data(), s->n_hidden, last_rel, n_last,
                          p.data(), mean_last.data(), s->size());
    for (std::size_t r = 0; r < n_last; ++r)
      action_block[r * n_act + i] += coefs[i] * mean_last[r];
  }
  add_weighted_stats(head.topo, with_zero_actions(head.topo, state), false,
                     s->configs.data(), s->n_hidden, q.data(), s->size(), csum,
                     acc);
}

// ---- optimizer plumbing -------------------------------------------------------

std::size_t param_count(const DbmTopology& topo) {
  std::size_t n = 1 + topo.n_units();
  for (std::size_t k = 0; k < topo.n_blocks(); ++k) {
    const auto [rows, cols] = topo.block_shape(k);
    n += rows * cols;
  }
  return n;
}

void flatten_weights(const DbmWeights& w, double* out) {
  *out++ = w.offset;
  std::copy(w.biases.begin(), w.biases.end(), out);
  out += w.biases.size();
  for (const auto& b : w.coupling_blocks) {
    std::copy(b.begin(), b.end(), out);
    out += b.size();
  }
}

void unflatten_weights(DbmWeights& w, const double* in) {
  w.offset = *in++;
  std::copy(in, in + w.biases.size(), w.biases.begin());
  in += w.biases.size();
  for (auto& b : w.coupling_blocks) {
    std::copy(in, in + b.size(), b.begin());
    in += b.size();
  }
}

void flatten_gradient(const ParamGradient& g, double* out) {
  *out++ = g.d_offset;
  std::copy(g.d_bias.begin(), g.d_bias.end(), out);
  out += g.d_bias.size();
  for (const auto& b : g.d_coupling) {
    std::copy(b.begin(), b.end(), out);
    out += b.size();
  }
}

// ---- tracing -------------------------------------------------------------------

void dump_policy_eval_csv(const std::string& path,
                          std::span<const double> logits) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("dump_policy_eval_csv: cannot open " + path);
  const std::vector<double> p = action_distribution(logits);
  out << "action,free_energy,logit,probability\n";
  for (std::size_t i = 0; i < logits.size(); ++i)
    out << i << ',' << format_double(-logits[i]) << ','
        << format_double(logits[i]) << ',' << format_double(p[i]) << '\n';
}

}  // namespace dbmrl
