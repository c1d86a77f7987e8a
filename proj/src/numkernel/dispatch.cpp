#include <string>

#include "dtpa/errors.hpp"
#include "dtpa/kernels.hpp"

namespace dtpa::num::kernels {
namespace {

constexpr KernelTable kScalar{Backend::Scalar, scalar::dot, scalar::axpy,
                              scalar::matvec, scalar::matvec_t_acc};
#ifdef DTPA_HAVE_AVX2_KERNELS
constexpr KernelTable kAvx2{Backend::Avx2, avx2::dot, avx2::axpy, avx2::matvec,
                            avx2::matvec_t_acc};
#endif
#ifdef DTPA_HAVE_NEON_KERNELS
constexpr KernelTable kNeon{Backend::Neon, neon::dot, neon::axpy, neon::matvec,
                            neon::matvec_t_acc};
#endif

const KernelTable* detect() {
#ifdef DTPA_HAVE_AVX2_KERNELS
  if (available(Backend::Avx2)) return &kAvx2;
#endif
#ifdef DTPA_HAVE_NEON_KERNELS
  return &kNeon;
#endif
  return &kScalar;
}

const KernelTable*& current() {
  static const KernelTable* table = detect();
  return table;
}

}  // namespace

bool available(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#ifdef DTPA_HAVE_AVX2_KERNELS
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::Neon:
#ifdef DTPA_HAVE_NEON_KERNELS
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table_for(Backend backend) {
  if (!available(backend)) {
    throw DomainError("kernel backend unavailable: " + std::string(name(backend)));
  }
  switch (backend) {
#ifdef DTPA_HAVE_AVX2_KERNELS
    case Backend::Avx2:
      return kAvx2;
#endif
#ifdef DTPA_HAVE_NEON_KERNELS
    case Backend::Neon:
      return kNeon;
#endif
    default:
      return kScalar;
  }
}

const KernelTable& active() { return *current(); }

Backend active_backend() { return current()->backend; }

void set_backend(Backend backend) { current() = &table_for(backend); }

std::string_view name(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

}  // namespace dtpa::num::kernels
