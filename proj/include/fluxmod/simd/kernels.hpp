#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference
// implementation and an AVX2/FMA variant; the public entry points dispatch
// on the instruction set detected at runtime (overridable for testing).

#include <complex>
#include <cstddef>
#include <span>

namespace fluxmod::simd {

enum class Isa { scalar, avx2 };

/// Best instruction set supported by this CPU and build.
Isa detected_isa();
/// Instruction set currently used by the dispatching entry points.
Isa active_isa();
/// Forces a particular instruction set; requesting avx2 on a machine
/// without it falls back to scalar. Returns the previous setting.
Isa set_active_isa(Isa isa);
const char* isa_name(Isa isa);

/// Precomputed constants for the flux-to-frequency map.
struct TransduceParams {
  double e_c = 0.0;
  double ej_sq_sum = 0.0;  ///< E_J1^2 + E_J2^2
  double ej_cross = 0.0;   ///< 2 E_J1 E_J2
  double xi_limit = 0.5;
};

/// omega[i] = omega_T(phi[i]). Returns the index of the first element whose
/// expansion parameter is outside the limit, or -1.
std::ptrdiff_t frequency_batch(const TransduceParams& p,
                               std::span<const double> phi,
                               std::span<double> omega);

/// One nonzero entry `value * |row><col|` of a sparse operator.
///
/// The Lindblad kernels act on a stack of `batch` dim x dim operators stored
/// entry-major: element (i, j) of operator b lives at [(i*dim + j)*batch + b],
/// so the innermost loop runs over the stack.
struct SparseTerm {
  int row = 0;
  int col = 0;
  std::complex<double> value;
};

/// out = -i [H, in] with H = sum of the given terms. `out` is overwritten.
void commutator_batch(std::span<const SparseTerm> h, int dim, int batch,
                      std::span<const std::complex<double>> in,
                      std::span<std::complex<double>> out);

/// out += rate * (L in L^dagger) for sparse L.
void sandwich_batch(std::span<const SparseTerm> l, double rate, int dim,
                    int batch, std::span<const std::complex<double>> in,
                    std::span<std::complex<double>> out);

/// out[i, j] += w[i*dim + j] * in[i, j] (diagonal Lindblad pieces).
void elementwise_batch(std::span<const double> w, int dim, int batch,
                       std::span<const std::complex<double>> in,
                       std::span<std::complex<double>> out);

namespace scalar {
std::ptrdiff_t frequency_batch(const TransduceParams& p,
                               std::span<const double> phi,
                               std::span<double> omega);
void commutator_batch(std::span<const SparseTerm> h, int dim, int batch,
                      std::span<const std::complex<double>> in,
                      std::span<std::complex<double>> out);
void sandwich_batch(std::span<const SparseTerm> l, double rate, int dim,
                    int batch, std::span<const std::complex<double>> in,
                    std::span<std::complex<double>> out);
void elementwise_batch(std::span<const double> w, int dim, int batch,
                       std::span<const std::complex<double>> in,
                       std::span<std::complex<double>> out);
}  // namespace scalar

namespace avx2 {
bool compiled();
std::ptrdiff_t frequency_batch(const TransduceParams& p,
                               std::span<const double> phi,
                               std::span<double> omega);
void commutator_batch(std::span<const SparseTerm> h, int dim, int batch,
                      std::span<const std::complex<double>> in,
                      std::span<std::complex<double>> out);
void sandwich_batch(std::span<const SparseTerm> l, double rate, int dim,
                    int batch, std::span<const std::complex<double>> in,
                    std::span<std::complex<double>> out);
void elementwise_batch(std::span<const double> w, int dim, int batch,
                       std::span<const std::complex<double>> in,
                       std::span<std::complex<double>> out);
}  // namespace avx2

}  // namespace fluxmod::simd
