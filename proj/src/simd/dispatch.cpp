#include <atomic>

#include "fluxmod/simd/kernels.hpp"

namespace fluxmod::simd {

namespace {

Isa probe() {
#if defined(__x86_64__) || defined(__i386__)
  if (avx2::compiled()) {
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
      return Isa::avx2;
    }
  }
#endif
  return Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{probe()};
  return isa;
}

}  // namespace

Isa detected_isa() {
  static const Isa isa = probe();
  return isa;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

Isa set_active_isa(Isa isa) {
  if (isa == Isa::avx2 && detected_isa() != Isa::avx2) isa = Isa::scalar;
  return current().exchange(isa);
}

const char* isa_name(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

std::ptrdiff_t frequency_batch(const TransduceParams& p,
                               std::span<const double> phi,
                               std::span<double> omega) {
  return active_isa() == Isa::avx2 ? avx2::frequency_batch(p, phi, omega)
                                   : scalar::frequency_batch(p, phi, omega);
}

void commutator_batch(std::span<const SparseTerm> h, int dim, int batch,
                      std::span<const std::complex<double>> in,
                      std::span<std::complex<double>> out) {
  if (active_isa() == Isa::avx2) {
    avx2::commutator_batch(h, dim, batch, in, out);
  } else {
    scalar::commutator_batch(h, dim, batch, in, out);
  }
}

void sandwich_batch(std::span<const SparseTerm> l, double rate, int dim,
                    int batch, std::span<const std::complex<double>> in,
                    std::span<std::complex<double>> out) {
  if (active_isa() == Isa::avx2) {
    avx2::sandwich_batch(l, rate, dim, batch, in, out);
  } else {
    scalar::sandwich_batch(l, rate, dim, batch, in, out);
  }
}

void elementwise_batch(std::span<const double> w, int dim, int batch,
                       std::span<const std::complex<double>> in,
                       std::span<std::complex<double>> out) {
  if (active_isa() == Isa::avx2) {
    avx2::elementwise_batch(w, dim, batch, in, out);
  } else {
    scalar::elementwise_batch(w, dim, batch, in, out);
  }
}

}  // namespace fluxmod::simd
