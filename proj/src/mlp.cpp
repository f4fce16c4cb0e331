#include <cmath>
#include <stdexcept>

#include "dbmrl/kernels.hpp"
#include "dbmrl/ppo.hpp"
#include "dbmrl/util.hpp"

namespace dbmrl {

void MlpHead::validate() const {
  if (dims.size() < 2)
    throw std::invalid_argument("mlp: need at least input and output dims");
  for (std::size_t d : dims)
    if (d == 0) throw std::invalid_argument("mlp: zero-width layer");
  if (w.size() != dims.size() - 1 || b.size() != dims.size() - 1)
    throw std::invalid_argument("mlp: layer count mismatch");
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    if (w[k].size() != dims[k + 1] * dims[k])
      throw std::invalid_argument("mlp: weight shape mismatch");
    if (b[k].size() != dims[k + 1])
      throw std::invalid_argument("mlp: bias shape mismatch");
  }
}

std::size_t MlpHead::n_params() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k)
    n += dims[k + 1] * dims[k] + dims[k + 1];
  return n;
}

MlpHead make_mlp(std::size_t n_in, const std::vector<std::size_t>& hidden,
                 std::size_t n_out, std::uint64_t seed, Activation act) {
  MlpHead head;
  head.act = act;
  head.dims.push_back(n_in);
  head.dims.insert(head.dims.end(), hidden.begin(), hidden.end());
  head.dims.push_back(n_out);
  for (std::size_t k = 0; k + 1 < head.dims.size(); ++k) {
    Rng rng(derive_seed(seed, "mlp.init", k));
    const double s = 1.0 / std::sqrt(double(head.dims[k]));
    std::vector<double> wk(head.dims[k + 1] * head.dims[k]);
    for (auto& x : wk) x = rng.uniform(-s, s);
    head.w.push_back(std::move(wk));
    head.b.emplace_back(head.dims[k + 1], 0.0);
  }
  head.validate();
  return head;
}

std::vector<double> mlp_forward(const MlpHead& head,
                                std::span<const double> in, MlpCache* cache) {
  if (in.size() != head.dims.front())
    throw std::invalid_argument("mlp_forward: input size mismatch");
  std::vector<double> a(in.begin(), in.end());
  if (cache) {
    cache->act.clear();
    cache->act.push_back(a);
  }
  const std::size_t layers = head.w.size();
  for (std::size_t k = 0; k < layers; ++k) {
    std::vector<double> z(head.dims[k + 1]);
    kernels::matvec(head.w[k].data(), a.data(), z.data(), head.dims[k + 1],
                    head.dims[k]);
    kernels::axpy(1.0, head.b[k].data(), z.data(), z.size());
    if (k + 1 < layers && head.act == Activation::tanh_act)
      for (auto& x : z) x = std::tanh(x);
    a = std::move(z);
    if (cache) cache->act.push_back(a);
  }
  return a;
}

void mlp_backward(const MlpHead& head, const MlpCache& cache,
                  std::span<const double> dout, double* grad) {
  const std::size_t layers = head.w.size();
  if (cache.act.size() != layers + 1)
    throw std::invalid_argument("mlp_backward: cache/layer mismatch");
  if (dout.size() != head.dims.back())
    throw std::invalid_argument("mlp_backward: output grad size mismatch");

  // flat offsets of (w, b) per layer
  std::vector<std::size_t> off(layers);
  std::size_t total = 0;
  for (std::size_t k = 0; k < layers; ++k) {
    off[k] = total;
    total += head.w[k].size() + head.b[k].size();
  }

  std::vector<double> delta(dout.begin(), dout.end());
  for (std::size_t k = layers; k-- > 0;) {
    // dL/dz for this layer: output is linear, hidden layers apply act'
    if (k + 1 < layers && head.act == Activation::tanh_act) {
      const std::vector<double>& post = cache.act[k + 1];
      for (std::size_t i = 0; i < delta.size(); ++i)
        delta[i] *= 1.0 - post[i] * post[i];
    }
    const std::vector<double>& prev = cache.act[k];
    kernels::outer_acc(1.0, delta.data(), prev.data(), grad + off[k],
                       delta.size(), prev.size());
    kernels::axpy(1.0, delta.data(), grad + off[k] + head.w[k].size(),
                  delta.size());
    if (k > 0) {
      std::vector<double> dprev(prev.size());
      kernels::matvec_t(head.w[k].data(), delta.data(), dprev.data(),
                        head.dims[k + 1], head.dims[k]);
      delta = std::move(dprev);
    }
  }
}

void mlp_flatten(const MlpHead& head, double* out) {
  for (std::size_t k = 0; k < head.w.size(); ++k) {
    std::copy(head.w[k].begin(), head.w[k].end(), out);
    out += head.w[k].size();
    std::copy(head.b[k].begin(), head.b[k].end(), out);
    out += head.b[k].size();
  }
}

void mlp_unflatten(MlpHead& head, const double* in) {
  for (std::size_t k = 0; k < head.w.size(); ++k) {
    std::copy(in, in + head.w[k].size(), head.w[k].begin());
    in += head.w[k].size();
    std::copy(in, in + head.b[k].size(), head.b[k].begin());
    in += head.b[k].size();
  }
}

AdamState make_adam_state(std::size_t n) {
  AdamState st;
  st.m.assign(n, 0.0);
  st.v.assign(n, 0.0);
  return st;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& st, double lr, double beta1, double beta2,
               double eps) {
  if (grads.size() != params.size() || st.m.size() != params.size() ||
      st.v.size() != params.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  ++st.t;
  kernels::adam_update(params.data(), st.m.data(), st.v.data(), grads.data(),
                       params.size(), lr, beta1, beta2, eps, st.t);
}

}  // namespace dbmrl
