#include "fluxmod/specialfn.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fluxmod/errors.hpp"

namespace fluxmod::specialfn {

namespace {

constexpr int kMaxOrder = 64;
constexpr double kMaxArgument = 1e4;

// Miller start index: comfortably above both the order and the argument so
// the recurrence has forgotten its arbitrary seed by the time it reaches
// the orders we keep.
int miller_start(int kmax, double ax) {
  const double m = std::max(static_cast<double>(kmax), ax);
  int start = static_cast<int>(m + 30.0 + 6.0 * std::sqrt(m + 1.0));
  return start + (start & 1);
}

}  // namespace

void SeriesTolerance::validate() const {
  if (!(rel_tol > 0.0 && rel_tol <= 1e-6)) {
    throw DomainError("SeriesTolerance.rel_tol must be in (0, 1e-6]");
  }
  if (max_terms < 32) {
    throw DomainError("SeriesTolerance.max_terms must be >= 32");
  }
}

void bessel_j_all(double x, std::span<double> out) {
  if (out.empty()) return;
  const int kmax = static_cast<int>(out.size()) - 1;
  if (kmax > kMaxOrder + 1) {
    throw DomainError("bessel_j: order " + std::to_string(kmax) +
                      " exceeds supported maximum");
  }
  const double ax = std::fabs(x);
  if (!(ax < kMaxArgument)) {
    throw DomainError("bessel_j: |x| must be below 1e4");
  }
  if (ax == 0.0) {
    out[0] = 1.0;
    for (int k = 1; k <= kmax; ++k) out[k] = 0.0;
    return;
  }

  // Downward recurrence J_{k-1} = (2k/x) J_k - J_{k+1}, normalised with
  // J_0 + 2 sum_{m>=1} J_{2m} = 1.
  const int start = miller_start(kmax, ax);
  double jp1 = 0.0;
  double j = 1e-300;
  double norm = 0.0;
  for (int k = start; k >= 1; --k) {
    const double jm1 = (2.0 * k / ax) * j - jp1;
    jp1 = j;
    j = jm1;
    if (k - 1 <= kmax) out[k - 1] = j;
    if (((k - 1) & 1) == 0 && k - 1 > 0) norm += 2.0 * j;
    if (std::fabs(j) > 1e250) {
      // Rescale to stay in range; everything kept so far scales too.
      const double s = 1e-250;
      j *= s;
      jp1 *= s;
      norm *= s;
      for (int m = k - 1; m <= kmax; ++m) out[m] *= s;
    }
  }
  norm += j;  // J_0 term
  const double inv = 1.0 / norm;
  for (int k = 0; k <= kmax; ++k) {
    out[k] *= inv;
    if (x < 0.0 && (k & 1)) out[k] = -out[k];
  }
}

double bessel_j(int k, double x) {
  const int ak = k < 0 ? -k : k;
  if (ak > kMaxOrder) {
    throw DomainError("bessel_j: order " + std::to_string(k) +
                      " outside [-64, 64]");
  }
  double buf[kMaxOrder + 1];
  bessel_j_all(x, std::span<double>(buf, static_cast<std::size_t>(ak) + 1));
  const double v = buf[ak];
  return (k < 0 && (ak & 1)) ? -v : v;
}

double rising_factorial(double a, int n) {
  double p = 1.0;
  for (int i = 0; i < n; ++i) p *= a + i;
  return p;
}

double hyp2f1(double a, double b, double c, double z,
              const SeriesTolerance& tol) {
  tol.validate();
  if (!(z >= 0.0 && z < 1.0)) {
    throw DomainError("hyp2f1: argument must satisfy 0 <= z < 1");
  }
  if (c <= 0.0 && c == std::floor(c)) {
    throw DomainError("hyp2f1: c must not be a non-positive integer");
  }
  double term = 1.0;
  double sum = 1.0;
  for (int m = 0; m < tol.max_terms; ++m) {
    term *= (a + m) * (b + m) / ((c + m) * (m + 1.0)) * z;
    sum += term;
    if (term == 0.0 || std::fabs(term) <= tol.rel_tol * std::fabs(sum)) {
      return sum;
    }
  }
  throw ConvergenceError("hyp2f1: series did not converge", tol.max_terms,
                         std::fabs(term / sum));
}

double erf(double x) {
  const double ax = std::fabs(x);
  // erfc(6) ~ 2e-17: saturated to double precision.
  if (ax > 6.0) return x < 0.0 ? -1.0 : 1.0;
  double r;
  if (ax < 3.0) {
    // erf x = 2/sqrt(pi) e^{-x^2} sum_n 2^n x^{2n+1} / (1*3*...*(2n+1));
    // every term is positive so there is no cancellation.
    const double x2 = ax * ax;
    double term = ax;
    double sum = ax;
    for (int n = 1; n < 200; ++n) {
      term *= 2.0 * x2 / (2.0 * n + 1.0);
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    r = 2.0 / std::sqrt(std::numbers::pi) * std::exp(-x2) * sum;
  } else {
    // erfc x = e^{-x^2}/sqrt(pi) * 1/(x + 1/2/(x + 1/(x + 3/2/(x + ...))))
    // evaluated with the modified Lentz algorithm.
    const double tiny = 1e-300;
    double f = ax;
    double c = ax;
    double d = 0.0;
    for (int n = 1; n < 300; ++n) {
      const double an = 0.5 * n;
      d = ax + an * d;
      d = (d == 0.0) ? tiny : 1.0 / d;
      c = ax + an / c;
      if (c == 0.0) c = tiny;
      const double delta = c * d;
      f *= delta;
      if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    r = 1.0 - std::exp(-ax * ax) / (std::sqrt(std::numbers::pi) * f);
  }
  return x < 0.0 ? -r : r;
}

}  // namespace fluxmod::specialfn
