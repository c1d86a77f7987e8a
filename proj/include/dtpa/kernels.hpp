#pragma once

// Dense f64 inner loops with a scalar reference implementation and SIMD
// variants. The active backend is picked once at startup from CPU features
// and can be pinned for testing.

#include <cstddef>
#include <string_view>

namespace dtpa::num::kernels {

enum class Backend { Scalar, Avx2, Neon };

struct KernelTable {
  Backend backend;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y[r] = bias[r] + sum_c w[r * cols + c] * x[c]; bias may be null.
  void (*matvec)(const double* w, const double* x, const double* bias,
                 double* y, std::size_t rows, std::size_t cols);
  // y[c] += sum_r w[r * cols + c] * x[r]  (transposed product, accumulating)
  void (*matvec_t_acc)(const double* w, const double* x, double* y,
                       std::size_t rows, std::size_t cols);
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void matvec(const double* w, const double* x, const double* bias, double* y,
            std::size_t rows, std::size_t cols);
void matvec_t_acc(const double* w, const double* x, double* y,
                  std::size_t rows, std::size_t cols);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define DTPA_HAVE_AVX2_KERNELS 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void matvec(const double* w, const double* x, const double* bias, double* y,
            std::size_t rows, std::size_t cols);
void matvec_t_acc(const double* w, const double* x, double* y,
                  std::size_t rows, std::size_t cols);
}  // namespace avx2
#endif

#if defined(__aarch64__) || defined(__ARM_NEON)
#define DTPA_HAVE_NEON_KERNELS 1
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void matvec(const double* w, const double* x, const double* bias, double* y,
            std::size_t rows, std::size_t cols);
void matvec_t_acc(const double* w, const double* x, double* y,
                  std::size_t rows, std::size_t cols);
}  // namespace neon
#endif

// Compiled in and supported by the running CPU.
bool available(Backend backend);

// Throws DomainError if the backend is unavailable.
const KernelTable& table_for(Backend backend);

// The table used by all numkernel entry points.
const KernelTable& active();
Backend active_backend();

// Pins the active backend. Not synchronized; call before spawning work.
void set_backend(Backend backend);

std::string_view name(Backend backend);

}  // namespace dtpa::num::kernels
