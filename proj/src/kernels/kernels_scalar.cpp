#include "dbmrl/kernels.hpp"

#include <cmath>

// Reference implementations.  Deliberately straight-line so they are easy
// to audit; the AVX2 variants are tested against these.

namespace dbmrl::kernels {
namespace {

double s_dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double s_sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double s_reduce_max(const double* x, std::size_t n) {
  double best = x[0];
  for (std::size_t i = 1; i < n; ++i)
    if (x[i] > best) best = x[i];
  return best;
}

void s_axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void s_scale(double* x, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double s_exp_affine_sum(const double* x, double a, double b, double* out,
                        std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(a * x[i] + b);
    acc += out[i];
  }
  return acc;
}

void s_matvec(const double* w, const double* x, double* y, std::size_t rows,
              std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

void s_matvec_t(const double* w, const double* x, double* y, std::size_t rows,
                std::size_t cols) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * cols;
    const double xr = x[r];
    for (std::size_t c = 0; c < cols; ++c) y[c] += xr * wr[c];
  }
}

void s_outer_acc(double a, const double* x, const double* y, double* c,
                 std::size_t nx, std::size_t ny) {
  for (std::size_t i = 0; i < nx; ++i) {
    const double ax = a * x[i];
    double* cr = c + i * ny;
    for (std::size_t j = 0; j < ny; ++j) cr[j] += ax * y[j];
  }
}

void s_adam_update(double* w, double* m, double* v, const double* g,
                   std::size_t n, double lr, double beta1, double beta2,
                   double eps, std::int64_t t) {
  const double c1 = 1.0 / (1.0 - std::pow(beta1, double(t)));
  const double c2 = 1.0 / (1.0 - std::pow(beta2, double(t)));
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    w[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
  }
}

void s_add_gathered(const double* src, const double* table,
                    const std::uint32_t* idx, double* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] + table[idx[i]];
}

double s_bit_dot(const std::uint8_t* bits, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (bits[i]) acc += y[i];
  return acc;
}

void s_bit_matvec_t(const std::uint8_t* bits, std::size_t ld, std::size_t off,
                    std::size_t ncols, const double* q, double* out,
                    std::size_t m) {
  for (std::size_t j = 0; j < ncols; ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::uint8_t* row = bits + i * ld + off;
    const double qi = q[i];
    for (std::size_t j = 0; j < ncols; ++j) out[j] += qi * double(row[j]);
  }
}

void s_bit_weighted_outer_acc(const std::uint8_t* bits, std::size_t ld,
                              std::size_t offa, std::size_t na,
                              std::size_t offb, std::size_t nb,
                              const double* q, double* c, std::size_t m) {
  for (std::size_t i = 0; i < m; ++i) {
    const std::uint8_t* ra = bits + i * ld + offa;
    const std::uint8_t* rb = bits + i * ld + offb;
    const double qi = q[i];
    for (std::size_t a = 0; a < na; ++a) {
      if (!ra[a]) continue;
      double* cr = c + a * nb;
      for (std::size_t b = 0; b < nb; ++b) cr[b] += qi * double(rb[b]);
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table = {
      s_dot,          s_sum,
      s_reduce_max,   s_axpy,
      s_scale,        s_exp_affine_sum,
      s_matvec,       s_matvec_t,
      s_outer_acc,    s_adam_update,
      s_add_gathered, s_bit_dot,
      s_bit_matvec_t, s_bit_weighted_outer_acc,
  };
  return table;
}

}  // namespace dbmrl::kernels
