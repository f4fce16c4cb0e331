#include "dbmrl/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <cstring>

// AVX2+FMA backend.  This translation unit is the only one compiled with
// -mavx2 -mfma; it is reached solely through the dispatch table after a
// CPUID check, so no AVX2 instruction can execute on an unsupported CPU.

namespace dbmrl::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// Expand 4 bytes holding 0/1 into 4 doubles.
inline __m256d bits4_to_pd(const std::uint8_t* p) {
  std::int32_t packed;
  std::memcpy(&packed, p, 4);
  __m128i b = _mm_cvtsi32_si128(packed);
  return _mm256_cvtepi32_pd(_mm_cvtepu8_epi32(b));
}

// Vector exp via the classic rational approximation on [-ln2/2, ln2/2]
// (Cephes exp coefficients) plus exponent reconstruction.  Inputs are
// clamped to the finite-result range, so out-of-range arguments saturate
// instead of producing inf/0 -- callers only feed log-sum-exp shifted
// values where that is harmless.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.437);
  const __m256d lo = _mm256_set1_pd(-708.396);
  x = _mm256_max_pd(_mm256_min_pd(x, hi), lo);

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  __m256d fx = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                               _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  // x -= fx * ln2, split into two parts for extra precision
  x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(6.93145751953125e-1), x);
  x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(1.42860682030941723212e-6), x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_set1_pd(1.26177193074810590878e-4);
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(3.02994407707441961300e-2));
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(9.99999999999999999910e-1));
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_set1_pd(3.00198505138664455042e-6);
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.52448340349684104192e-3));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.27265548208155028766e-1));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.00000000000000000005e0));
  // e^r = 1 + 2 px / (qx - px)
  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  e = _mm256_fmadd_pd(e, _mm256_set1_pd(2.0), _mm256_set1_pd(1.0));

  // multiply by 2^fx via exponent bits
  __m128i n32 = _mm256_cvtpd_epi32(fx);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  n64 = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(e, _mm256_castsi256_pd(n64));
}

double v_dot(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  double r = hsum(acc);
  for (; i < n; ++i) r += x[i] * y[i];
  return r;
}

double v_sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double r = hsum(acc);
  for (; i < n; ++i) r += x[i];
  return r;
}

double v_reduce_max(const double* x, std::size_t n) {
  std::size_t i = 0;
  double r = x[0];
  if (n >= 4) {
    __m256d acc = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4)
      acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
    __m128d m2 = _mm_max_pd(_mm256_castpd256_pd128(acc),
                            _mm256_extractf128_pd(acc, 1));
    m2 = _mm_max_sd(m2, _mm_unpackhi_pd(m2, m2));
    r = _mm_cvtsd_f64(m2);
  }
  for (; i < n; ++i)
    if (x[i] > r) r = x[i];
  return r;
}

void v_axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void v_scale(double* x, double a, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

double v_exp_affine_sum(const double* x, double a, double b, double* out,
                        std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  const __m256d bv = _mm256_set1_pd(b);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d e = exp_pd(_mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), bv));
    _mm256_storeu_pd(out + i, e);
    acc = _mm256_add_pd(acc, e);
  }
  double r = hsum(acc);
  for (; i < n; ++i) {
    // keep the tail consistent with the vector lanes
    double buf[4] = {a * x[i] + b, 0.0, 0.0, 0.0};
    __m256d e = exp_pd(_mm256_loadu_pd(buf));
    out[i] = _mm_cvtsd_f64(_mm256_castpd256_pd128(e));
    r += out[i];
  }
  return r;
}

void v_matvec(const double* w, const double* x, double* y, std::size_t rows,
              std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = v_dot(w + r * cols, x, cols);
}

void v_matvec_t(const double* w, const double* x, double* y,
                std::size_t rows, std::size_t cols) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * cols;
    const __m256d xv = _mm256_set1_pd(x[r]);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      __m256d yv = _mm256_loadu_pd(y + c);
      yv = _mm256_fmadd_pd(xv, _mm256_loadu_pd(wr + c), yv);
      _mm256_storeu_pd(y + c, yv);
    }
    for (; c < cols; ++c) y[c] += x[r] * wr[c];
  }
}

void v_outer_acc(double a, const double* x, const double* y, double* c,
                 std::size_t nx, std::size_t ny) {
  for (std::size_t i = 0; i < nx; ++i) {
    const __m256d ax = _mm256_set1_pd(a * x[i]);
    double* cr = c + i * ny;
    std::size_t j = 0;
    for (; j + 4 <= ny; j += 4) {
      __m256d cv = _mm256_loadu_pd(cr + j);
      cv = _mm256_fmadd_pd(ax, _mm256_loadu_pd(y + j), cv);
      _mm256_storeu_pd(cr + j, cv);
    }
    const double axs = a * x[i];
    for (; j < ny; ++j) cr[j] += axs * y[j];
  }
}

void v_adam_update(double* w, double* m, double* v, const double* g,
                   std::size_t n, double lr, double beta1, double beta2,
                   double eps, std::int64_t t) {
  const double c1s = 1.0 / (1.0 - std::pow(beta1, double(t)));
  const double c2s = 1.0 / (1.0 - std::pow(beta2, double(t)));
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d ob1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d ob2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d c1 = _mm256_set1_pd(c1s);
  const __m256d c2 = _mm256_set1_pd(c2s);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_fmadd_pd(b1, _mm256_loadu_pd(m + i),
                                 _mm256_mul_pd(ob1, gv));
    __m256d vv = _mm256_fmadd_pd(b2, _mm256_loadu_pd(v + i),
                                 _mm256_mul_pd(ob2, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d den =
        _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vv, c2)), epsv);
    const __m256d step =
        _mm256_div_pd(_mm256_mul_pd(lrv, _mm256_mul_pd(mv, c1)), den);
    _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    w[i] -= lr * (m[i] * c1s) / (std::sqrt(v[i] * c2s) + eps);
  }
}

void v_add_gathered(const double* src, const double* table,
                    const std::uint32_t* idx, double* dst, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m128i iv = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i));
    __m256d tv = _mm256_i32gather_pd(table, iv, 8);
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(src + i), tv));
  }
  for (; i < n; ++i) dst[i] = src[i] + table[idx[i]];
}

double v_bit_dot(const std::uint8_t* bits, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(bits4_to_pd(bits + i), _mm256_loadu_pd(y + i), acc);
  double r = hsum(acc);
  for (; i < n; ++i)
    if (bits[i]) r += y[i];
  return r;
}

void v_bit_matvec_t(const std::uint8_t* bits, std::size_t ld, std::size_t off,
                    std::size_t ncols, const double* q, double* out,
                    std::size_t m) {
  for (std::size_t j = 0; j < ncols; ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::uint8_t* row = bits + i * ld + off;
    const __m256d qv = _mm256_set1_pd(q[i]);
    std::size_t j = 0;
    for (; j + 4 <= ncols; j += 4) {
      __m256d ov = _mm256_loadu_pd(out + j);
      ov = _mm256_fmadd_pd(qv, bits4_to_pd(row + j), ov);
      _mm256_storeu_pd(out + j, ov);
    }
    for (; j < ncols; ++j)
      if (row[j]) out[j] += q[i];
  }
}

void v_bit_weighted_outer_acc(const std::uint8_t* bits, std::size_t ld,
                              std::size_t offa, std::size_t na,
                              std::size_t offb, std::size_t nb,
                              const double* q, double* c, std::size_t m) {
  for (std::size_t i = 0; i < m; ++i) {
    const std::uint8_t* ra = bits + i * ld + offa;
    const std::uint8_t* rb = bits + i * ld + offb;
    const __m256d qv = _mm256_set1_pd(q[i]);
    for (std::size_t a = 0; a < na; ++a) {
      if (!ra[a]) continue;
      double* cr = c + a * nb;
      std::size_t b = 0;
      for (; b + 4 <= nb; b += 4) {
        __m256d cv = _mm256_loadu_pd(cr + b);
        cv = _mm256_fmadd_pd(qv, bits4_to_pd(rb + b), cv);
        _mm256_storeu_pd(cr + b, cv);
      }
      for (; b < nb; ++b)
        if (rb[b]) cr[b] += q[i];
    }
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table = {
      v_dot,          v_sum,
      v_reduce_max,   v_axpy,
      v_scale,        v_exp_affine_sum,
      v_matvec,       v_matvec_t,
      v_outer_acc,    v_adam_update,
      v_add_gathered, v_bit_dot,
      v_bit_matvec_t, v_bit_weighted_outer_acc,
  };
  return table;
}

}  // namespace dbmrl::kernels
