#include <cmath>

#include "fluxmod/simd/kernels.hpp"
#include "fluxmod/transmon.hpp"
#include "fluxmod/units.hpp"

namespace fluxmod::simd::scalar {

using cplx = std::complex<double>;

std::ptrdiff_t frequency_batch(const TransduceParams& p,
                               std::span<const double> phi,
                               std::span<double> omega) {
  std::ptrdiff_t bad = -1;
  const std::size_t n = phi.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double c = std::cos(kTwoPi * phi[i]);
    const double ej = std::sqrt(p.ej_sq_sum + p.ej_cross * c);
    const double x = std::sqrt(2.0 * p.e_c / ej);
    if (bad < 0 && !(x < p.xi_limit)) bad = static_cast<std::ptrdiff_t>(i);
    omega[i] = transmon::frequency_from_xi(p.e_c, x);
  }
  return bad;
}

void commutator_batch(std::span<const SparseTerm> h, int dim, int batch,
                      std::span<const cplx> in, std::span<cplx> out) {
  const std::size_t total = static_cast<std::size_t>(dim) * dim * batch;
  for (std::size_t i = 0; i < total; ++i) out[i] = 0.0;
  const cplx minus_i(0.0, -1.0);
  for (const SparseTerm& t : h) {
    const cplx v = minus_i * t.value;
    // -i H in: row t.row of out gets v * row t.col of in.
    for (int j = 0; j < dim; ++j) {
      const cplx* src = &in[(static_cast<std::size_t>(t.col) * dim + j) * batch];
      cplx* dst = &out[(static_cast<std::size_t>(t.row) * dim + j) * batch];
      for (int b = 0; b < batch; ++b) dst[b] += v * src[b];
    }
    // +i in H: column t.col of out gets -v * column t.row of in.
    for (int i = 0; i < dim; ++i) {
      const cplx* src = &in[(static_cast<std::size_t>(i) * dim + t.row) * batch];
      cplx* dst = &out[(static_cast<std::size_t>(i) * dim + t.col) * batch];
      for (int b = 0; b < batch; ++b) dst[b] -= v * src[b];
    }
  }
}

void sandwich_batch(std::span<const SparseTerm> l, double rate, int dim,
                    int batch, std::span<const cplx> in, std::span<cplx> out) {
  for (const SparseTerm& a : l) {
    for (const SparseTerm& c : l) {
      const cplx v = rate * a.value * std::conj(c.value);
      const cplx* src =
          &in[(static_cast<std::size_t>(a.col) * dim + c.col) * batch];
      cplx* dst = &out[(static_cast<std::size_t>(a.row) * dim + c.row) * batch];
      for (int b = 0; b < batch; ++b) dst[b] += v * src[b];
    }
  }
}

void elementwise_batch(std::span<const double> w, int dim, int batch,
                       std::span<const cplx> in, std::span<cplx> out) {
  const std::size_t entries = static_cast<std::size_t>(dim) * dim;
  for (std::size_t e = 0; e < entries; ++e) {
    const double we = w[e];
    if (we == 0.0) continue;
    const cplx* src = &in[e * batch];
    cplx* dst = &out[e * batch];
    for (int b = 0; b < batch; ++b) dst[b] += we * src[b];
  }
}

}  // namespace fluxmod::simd::scalar
