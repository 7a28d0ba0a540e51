#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace fluxmod {

template <std::size_t N>
struct NmResult {
  std::array<double, N> x{};
  double f = 0.0;
  int evals = 0;
};

// Plain Nelder-Mead minimiser for the few low-dimensional searches in the
// library (Z-rotation refinement, pulse tuning). Stops when the simplex
// spread in f falls below ftol or after max_evals evaluations.
template <std::size_t N, class F>
NmResult<N> nelder_mead(F&& f, std::array<double, N> x0,
                        std::array<double, N> step, int max_evals, double ftol) {
  using Pt = std::array<double, N>;
  std::array<Pt, N + 1> p;
  std::array<double, N + 1> v;
  int evals = 0;
  p[0] = x0;
  v[0] = f(x0);
  ++evals;
  for (std::size_t i = 0; i < N; ++i) {
    p[i + 1] = x0;
    p[i + 1][i] += step[i];
    v[i + 1] = f(p[i + 1]);
    ++evals;
  }
  auto order = [&] {
    std::array<std::size_t, N + 1> idx;
    for (std::size_t i = 0; i <= N; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    auto pp = p;
    auto vv = v;
    for (std::size_t i = 0; i <= N; ++i) {
      p[i] = pp[idx[i]];
      v[i] = vv[idx[i]];
    }
  };
  auto blend = [](const Pt& a, const Pt& b, double t) {
    Pt out;
    for (std::size_t i = 0; i < N; ++i) out[i] = a[i] + t * (b[i] - a[i]);
    return out;
  };
  while (evals < max_evals) {
    order();
    if (std::fabs(v[N] - v[0]) <= ftol) break;
    Pt c{};
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t k = 0; k < N; ++k) c[k] += p[i][k] / N;
    const Pt xr = blend(c, p[N], -1.0);
    const double fr = f(xr);
    ++evals;
    if (fr < v[0]) {
      const Pt xe = blend(c, p[N], -2.0);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        p[N] = xe;
        v[N] = fe;
      } else {
        p[N] = xr;
        v[N] = fr;
      }
    } else if (fr < v[N - 1]) {
      p[N] = xr;
      v[N] = fr;
    } else {
      const bool outside = fr < v[N];
      const Pt xc = outside ? blend(c, xr, 0.5) : blend(c, p[N], 0.5);
      const double fc = f(xc);
      ++evals;
      if (fc < std::min(fr, v[N])) {
        p[N] = xc;
        v[N] = fc;
      } else {
        for (std::size_t i = 1; i <= N; ++i) {
          p[i] = blend(p[0], p[i], 0.5);
          v[i] = f(p[i]);
          ++evals;
        }
      }
    }
  }
  order();
  return {p[0], v[0], evals};
}

}  // namespace fluxmod
