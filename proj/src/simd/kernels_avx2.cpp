// Compiled with -mavx2 -mfma; only entered after a runtime CPU check.

#include "fluxmod/simd/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

#include <cmath>

#include "fluxmod/transmon.hpp"
#include "fluxmod/units.hpp"

namespace fluxmod::simd::avx2 {

using cplx = std::complex<double>;

bool compiled() { return true; }

namespace {

// cos(2 pi y) for arbitrary y. The argument is already in turns, so the
// range reduction y - round(y) is exact.
inline __m256d cos_turns(__m256d y) {
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d quarter = _mm256_set1_pd(0.25);
  const __m256d eighth = _mm256_set1_pd(0.125);
  const __m256d sign_mask = _mm256_set1_pd(-0.0);

  __m256d r = _mm256_sub_pd(
      y, _mm256_round_pd(y, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC));
  __m256d u = _mm256_andnot_pd(sign_mask, r);  // |r| in [0, 0.5]
  // cos(2 pi u) = -cos(2 pi (0.5 - u))
  const __m256d upper = _mm256_cmp_pd(u, quarter, _CMP_GT_OQ);
  u = _mm256_blendv_pd(u, _mm256_sub_pd(half, u), upper);
  const __m256d flip = _mm256_and_pd(upper, sign_mask);
  // For u > 1/8 use sin(2 pi (1/4 - u)).
  const __m256d use_sin = _mm256_cmp_pd(u, eighth, _CMP_GT_OQ);
  const __m256d v = _mm256_blendv_pd(u, _mm256_sub_pd(quarter, u), use_sin);
  const __m256d t = _mm256_mul_pd(v, _mm256_set1_pd(kTwoPi));
  const __m256d t2 = _mm256_mul_pd(t, t);

  // Taylor series through t^16 / t^17; |t| <= pi/4.
  __m256d pc = _mm256_set1_pd(1.0 / 20922789888000.0);  // 1/16!
  pc = _mm256_fmadd_pd(pc, t2, _mm256_set1_pd(-1.0 / 87178291200.0));
  pc = _mm256_fmadd_pd(pc, t2, _mm256_set1_pd(1.0 / 479001600.0));
  pc = _mm256_fmadd_pd(pc, t2, _mm256_set1_pd(-1.0 / 3628800.0));
  pc = _mm256_fmadd_pd(pc, t2, _mm256_set1_pd(1.0 / 40320.0));
  pc = _mm256_fmadd_pd(pc, t2, _mm256_set1_pd(-1.0 / 720.0));
  pc = _mm256_fmadd_pd(pc, t2, _mm256_set1_pd(1.0 / 24.0));
  pc = _mm256_fmadd_pd(pc, t2, _mm256_set1_pd(-0.5));
  pc = _mm256_fmadd_pd(pc, t2, _mm256_set1_pd(1.0));

  __m256d ps = _mm256_set1_pd(1.0 / 355687428096000.0);  // 1/17!
  ps = _mm256_fmadd_pd(ps, t2, _mm256_set1_pd(-1.0 / 1307674368000.0));
  ps = _mm256_fmadd_pd(ps, t2, _mm256_set1_pd(1.0 / 6227020800.0));
  ps = _mm256_fmadd_pd(ps, t2, _mm256_set1_pd(-1.0 / 39916800.0));
  ps = _mm256_fmadd_pd(ps, t2, _mm256_set1_pd(1.0 / 362880.0));
  ps = _mm256_fmadd_pd(ps, t2, _mm256_set1_pd(-1.0 / 5040.0));
  ps = _mm256_fmadd_pd(ps, t2, _mm256_set1_pd(1.0 / 120.0));
  ps = _mm256_fmadd_pd(ps, t2, _mm256_set1_pd(-1.0 / 6.0));
  ps = _mm256_fmadd_pd(ps, t2, _mm256_set1_pd(1.0));
  ps = _mm256_mul_pd(ps, t);

  const __m256d res = _mm256_blendv_pd(pc, ps, use_sin);
  return _mm256_xor_pd(res, flip);
}

// a * s for one complex scalar s broadcast as (re, im) against two packed
// complex values in a.
inline __m256d cmul(__m256d a, __m256d s_re, __m256d s_im) {
  const __m256d swapped = _mm256_permute_pd(a, 0b0101);
  return _mm256_fmaddsub_pd(a, s_re, _mm256_mul_pd(swapped, s_im));
}

inline void axpy(cplx v, const cplx* src, cplx* dst, int batch) {
  const __m256d vr = _mm256_set1_pd(v.real());
  const __m256d vi = _mm256_set1_pd(v.imag());
  const double* s = reinterpret_cast<const double*>(src);
  double* d = reinterpret_cast<double*>(dst);
  int b = 0;
  for (; b + 2 <= batch; b += 2) {
    const __m256d a = _mm256_loadu_pd(s + 2 * b);
    const __m256d acc = _mm256_loadu_pd(d + 2 * b);
    _mm256_storeu_pd(d + 2 * b, _mm256_add_pd(acc, cmul(a, vr, vi)));
  }
  for (; b < batch; ++b) dst[b] += v * src[b];
}

}  // namespace

std::ptrdiff_t frequency_batch(const TransduceParams& p,
                               std::span<const double> phi,
                               std::span<double> omega) {
  const std::size_t n = phi.size();
  const __m256d ej_sq = _mm256_set1_pd(p.ej_sq_sum);
  const __m256d ej_x = _mm256_set1_pd(p.ej_cross);
  const __m256d two_ec = _mm256_set1_pd(2.0 * p.e_c);
  const __m256d ec = _mm256_set1_pd(p.e_c);
  const __m256d lead = _mm256_set1_pd(transmon::kFrequencySeries[0]);
  const __m256d limit = _mm256_set1_pd(p.xi_limit);
  const auto& series = transmon::kFrequencySeries;

  std::ptrdiff_t bad = -1;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d c = cos_turns(_mm256_loadu_pd(phi.data() + i));
    const __m256d ej = _mm256_sqrt_pd(_mm256_fmadd_pd(ej_x, c, ej_sq));
    const __m256d x = _mm256_sqrt_pd(_mm256_div_pd(two_ec, ej));
    if (bad < 0) {
      const int m = _mm256_movemask_pd(_mm256_cmp_pd(x, limit, _CMP_NLT_UQ));
      if (m != 0) bad = static_cast<std::ptrdiff_t>(i) + __builtin_ctz(m);
    }
    __m256d poly = _mm256_set1_pd(series[series.size() - 1]);
    for (int k = static_cast<int>(series.size()) - 2; k >= 1; --k) {
      poly = _mm256_fmadd_pd(poly, x, _mm256_set1_pd(series[k]));
    }
    const __m256d w =
        _mm256_mul_pd(ec, _mm256_add_pd(_mm256_div_pd(lead, x), poly));
    _mm256_storeu_pd(omega.data() + i, w);
  }
  if (i < n) {
    const std::ptrdiff_t tail =
        scalar::frequency_batch(p, phi.subspan(i), omega.subspan(i));
    if (bad < 0 && tail >= 0) bad = static_cast<std::ptrdiff_t>(i) + tail;
  }
  return bad;
}

void commutator_batch(std::span<const SparseTerm> h, int dim, int batch,
                      std::span<const cplx> in, std::span<cplx> out) {
  const std::size_t total = static_cast<std::size_t>(dim) * dim * batch;
  double* o = reinterpret_cast<double*>(out.data());
  const __m256d zero = _mm256_setzero_pd();
  std::size_t d = 0;
  for (; d + 4 <= 2 * total; d += 4) _mm256_storeu_pd(o + d, zero);
  for (; d < 2 * total; ++d) o[d] = 0.0;

  const cplx minus_i(0.0, -1.0);
  for (const SparseTerm& t : h) {
    const cplx v = minus_i * t.value;
    for (int j = 0; j < dim; ++j) {
      axpy(v, &in[(static_cast<std::size_t>(t.col) * dim + j) * batch],
           &out[(static_cast<std::size_t>(t.row) * dim + j) * batch], batch);
    }
    for (int i = 0; i < dim; ++i) {
      axpy(-v, &in[(static_cast<std::size_t>(i) * dim + t.row) * batch],
           &out[(static_cast<std::size_t>(i) * dim + t.col) * batch], batch);
    }
  }
}

void sandwich_batch(std::span<const SparseTerm> l, double rate, int dim,
                    int batch, std::span<const cplx> in, std::span<cplx> out) {
  for (const SparseTerm& a : l) {
    for (const SparseTerm& c : l) {
      const cplx v = rate * a.value * std::conj(c.value);
      axpy(v, &in[(static_cast<std::size_t>(a.col) * dim + c.col) * batch],
           &out[(static_cast<std::size_t>(a.row) * dim + c.row) * batch],
           batch);
    }
  }
}

void elementwise_batch(std::span<const double> w, int dim, int batch,
                       std::span<const cplx> in, std::span<cplx> out) {
  const std::size_t entries = static_cast<std::size_t>(dim) * dim;
  for (std::size_t e = 0; e < entries; ++e) {
    const double we = w[e];
    if (we == 0.0) continue;
    const __m256d wv = _mm256_set1_pd(we);
    const double* s = reinterpret_cast<const double*>(&in[e * batch]);
    double* d = reinterpret_cast<double*>(&out[e * batch]);
    int k = 0;
    for (; k + 4 <= 2 * batch; k += 4) {
      _mm256_storeu_pd(d + k, _mm256_fmadd_pd(wv, _mm256_loadu_pd(s + k),
                                              _mm256_loadu_pd(d + k)));
    }
    for (; k < 2 * batch; ++k) d[k] += we * s[k];
  }
}

}  // namespace fluxmod::simd::avx2

#else

namespace fluxmod::simd::avx2 {

bool compiled() { return false; }

std::ptrdiff_t frequency_batch(const TransduceParams& p,
                               std::span<const double> phi,
                               std::span<double> omega) {
  return scalar::frequency_batch(p, phi, omega);
}
void commutator_batch(std::span<const SparseTerm> h, int dim, int batch,
                      std::span<const std::complex<double>> in,
                      std::span<std::complex<double>> out) {
  scalar::commutator_batch(h, dim, batch, in, out);
}
void sandwich_batch(std::span<const SparseTerm> l, double rate, int dim,
                    int batch, std::span<const std::complex<double>> in,
                    std::span<std::complex<double>> out) {
  scalar::sandwich_batch(l, rate, dim, batch, in, out);
}
void elementwise_batch(std::span<const double> w, int dim, int batch,
                       std::span<const std::complex<double>> in,
                       std::span<std::complex<double>> out) {
  scalar::elementwise_batch(w, dim, batch, in, out);
}

}  // namespace fluxmod::simd::avx2

#endif
