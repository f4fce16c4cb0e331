#pragma once

// Numeric kernels used by the energy models, samplers and optimizers.
//
// Every kernel has a plain scalar reference implementation and (on x86)
// an AVX2+FMA variant.  The backend is picked once at runtime from CPUID;
// tests can pin a backend with force_isa() to check the variants against
// each other.  All kernels are pure functions of their arguments -- no
// hidden state beyond the selected backend.

#include <cstddef>
#include <cstdint>

namespace dbmrl::kernels {

enum class Isa {
  scalar,
  avx2,
};

// Backend currently in effect (auto-detected unless forced).
Isa active_isa();
// Pin a backend; throws std::runtime_error if it is not available.
void force_isa(Isa isa);
// Return to auto-detection.
void reset_isa();
const char* isa_name(Isa isa);

// ---- dense double kernels -------------------------------------------------

// sum_i x[i] * y[i]
double dot(const double* x, const double* y, std::size_t n);
// sum_i x[i]
double sum(const double* x, std::size_t n);
// max_i x[i]; n must be > 0
double reduce_max(const double* x, std::size_t n);
// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);
// x[i] *= a
void scale(double* x, double a, std::size_t n);

// out[i] = exp(a * x[i] + b); returns sum_i out[i].
// The AVX2 variant uses a polynomial exp accurate to a few ulps, so
// cross-backend results agree to ~1e-14 relative, not bit-exactly.
double exp_affine_sum(const double* x, double a, double b, double* out,
                      std::size_t n);

// y = W x            (W is rows x cols, row-major; y has length rows)
void matvec(const double* w, const double* x, double* y, std::size_t rows,
            std::size_t cols);
// y = W^T x          (W is rows x cols, row-major; y has length cols)
void matvec_t(const double* w, const double* x, double* y, std::size_t rows,
              std::size_t cols);
// C += a * x y^T     (C is nx x ny, row-major)
void outer_acc(double a, const double* x, const double* y, double* c,
               std::size_t nx, std::size_t ny);

// One fused Adam step with bias correction (t counts from 1):
//   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2
//   w -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
void adam_update(double* w, double* m, double* v, const double* g,
                 std::size_t n, double lr, double beta1, double beta2,
                 double eps, std::int64_t t);

// dst[i] = src[i] + table[idx[i]]
void add_gathered(const double* src, const double* table,
                  const std::uint32_t* idx, double* dst, std::size_t n);

// ---- kernels over 0/1 byte matrices ---------------------------------------
//
// Sample supports are stored as row-major byte matrices (one row per
// configuration, entries 0 or 1).  These kernels take the row stride `ld`
// and a column window [off, off+ncols) so a single layer's block can be
// addressed inside a wider matrix.

// sum_j bits[j] * y[j]
double bit_dot(const std::uint8_t* bits, const double* y, std::size_t n);

// out[j] = sum_i q[i] * bits[i*ld + off + j]   for j in [0, ncols)
void bit_matvec_t(const std::uint8_t* bits, std::size_t ld, std::size_t off,
                  std::size_t ncols, const double* q, double* out,
                  std::size_t m);

// C[a*nb + b] += sum_i q[i] * bits[i*ld + offa + a] * bits[i*ld + offb + b]
void bit_weighted_outer_acc(const std::uint8_t* bits, std::size_t ld,
                            std::size_t offa, std::size_t na,
                            std::size_t offb, std::size_t nb, const double* q,
                            double* c, std::size_t m);

// ---- backend tables (internal wiring) --------------------------------------

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*reduce_max)(const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double*, double, std::size_t);
  double (*exp_affine_sum)(const double*, double, double, double*,
                           std::size_t);
  void (*matvec)(const double*, const double*, double*, std::size_t,
                 std::size_t);
  void (*matvec_t)(const double*, const double*, double*, std::size_t,
                   std::size_t);
  void (*outer_acc)(double, const double*, const double*, double*,
                    std::size_t, std::size_t);
  void (*adam_update)(double*, double*, double*, const double*, std::size_t,
                      double, double, double, double, std::int64_t);
  void (*add_gathered)(const double*, const double*, const std::uint32_t*,
                       double*, std::size_t);
  double (*bit_dot)(const std::uint8_t*, const double*, std::size_t);
  void (*bit_matvec_t)(const std::uint8_t*, std::size_t, std::size_t,
                       std::size_t, const double*, double*, std::size_t);
  void (*bit_weighted_outer_acc)(const std::uint8_t*, std::size_t,
                                 std::size_t, std::size_t, std::size_t,
                                 std::size_t, const double*, double*,
                                 std::size_t);
};

const KernelTable& scalar_table();
#if defined(DBMRL_ENABLE_AVX2)
const KernelTable& avx2_table();
#endif

}  // namespace dbmrl::kernels
