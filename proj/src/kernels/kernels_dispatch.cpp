#include "dbmrl/kernels.hpp"

#include <stdexcept>
#include <string>

namespace dbmrl::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(DBMRL_ENABLE_AVX2)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* table_for(Isa isa) {
  if (isa == Isa::scalar) return &scalar_table();
#if defined(DBMRL_ENABLE_AVX2)
  if (isa == Isa::avx2 && cpu_has_avx2()) return &avx2_table();
#endif
  return nullptr;
}

struct Active {
  Isa isa;
  const KernelTable* table;
};

Active& active_state() {
  static Active a = [] {
    if (cpu_has_avx2()) return Active{Isa::avx2, table_for(Isa::avx2)};
    return Active{Isa::scalar, &scalar_table()};
  }();
  return a;
}

}  // namespace

Isa active_isa() { return active_state().isa; }

void force_isa(Isa isa) {
  const KernelTable* t = table_for(isa);
  if (!t)
    throw std::runtime_error(std::string("kernel backend unavailable: ") +
                             isa_name(isa));
  active_state() = {isa, t};
}

void reset_isa() {
  if (cpu_has_avx2())
    active_state() = {Isa::avx2, table_for(Isa::avx2)};
  else
    active_state() = {Isa::scalar, &scalar_table()};
}

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

double dot(const double* x, const double* y, std::size_t n) {
  return active_state().table->dot(x, y, n);
}
double sum(const double* x, std::size_t n) {
  return active_state().table->sum(x, n);
}
double reduce_max(const double* x, std::size_t n) {
  return active_state().table->reduce_max(x, n);
}
void axpy(double a, const double* x, double* y, std::size_t n) {
  active_state().table->axpy(a, x, y, n);
}
void scale(double* x, double a, std::size_t n) {
  active_state().table->scale(x, a, n);
}
double exp_affine_sum(const double* x, double a, double b, double* out,
                      std::size_t n) {
  return active_state().table->exp_affine_sum(x, a, b, out, n);
}
void matvec(const double* w, const double* x, double* y, std::size_t rows,
            std::size_t cols) {
  active_state().table->matvec(w, x, y, rows, cols);
}
void matvec_t(const double* w, const double* x, double* y, std::size_t rows,
              std::size_t cols) {
  active_state().table->matvec_t(w, x, y, rows, cols);
}
void outer_acc(double a, const double* x, const double* y, double* c,
               std::size_t nx, std::size_t ny) {
  active_state().table->outer_acc(a, x, y, c, nx, ny);
}
void adam_update(double* w, double* m, double* v, const double* g,
                 std::size_t n, double lr, double beta1, double beta2,
                 double eps, std::int64_t t) {
  active_state().table->adam_update(w, m, v, g, n, lr, beta1, beta2, eps, t);
}
void add_gathered(const double* src, const double* table,
                  const std::uint32_t* idx, double* dst, std::size_t n) {
  active_state().table->add_gathered(src, table, idx, dst, n);
}
double bit_dot(const std::uint8_t* bits, const double* y, std::size_t n) {
  return active_state().table->bit_dot(bits, y, n);
}
void bit_matvec_t(const std::uint8_t* bits, std::size_t ld, std::size_t off,
                  std::size_t ncols, const double* q, double* out,
                  std::size_t m) {
  active_state().table->bit_matvec_t(bits, ld, off, ncols, q, out, m);
}
void bit_weighted_outer_acc(const std::uint8_t* bits, std::size_t ld,
                            std::size_t offa, std::size_t na,
                            std::size_t offb, std::size_t nb, const double* q,
                            double* c, std::size_t m) {
  active_state().table->bit_weighted_outer_acc(bits, ld, offa, na, offb, nb,
                                               q, c, m);
}

}  // namespace dbmrl::kernels
