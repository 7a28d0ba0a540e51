#pragma once

#include <span>
#include <vector>

namespace fluxmod::specialfn {

/// Truncation control for the infinite series used by the Fourier-Bessel
/// machinery.
struct SeriesTolerance {
  double rel_tol = 1e-14;
  int max_terms = 400;

  /// Throws DomainError unless rel_tol is in (0, 1e-6] and max_terms >= 32.
  void validate() const;
};

/// Bessel function of the first kind J_k(x) for integer order |k| <= 64 and
/// |x| < 1e4. Negative orders use J_{-k} = (-1)^k J_k.
double bessel_j(int k, double x);

/// Fills out[k] = J_k(x) for k = 0 .. out.size()-1 from a single normalised
/// downward recurrence.
void bessel_j_all(double x, std::span<double> out);

/// Pochhammer symbol a (a+1) ... (a+n-1); the empty product for n = 0 is 1.
double rising_factorial(double a, int n);

/// Gauss hypergeometric 2F1(a, b; c; z) for 0 <= z < 1.
double hyp2f1(double a, double b, double c, double z,
              const SeriesTolerance& tol = {});

/// Error function with |error| < 1e-10 everywhere.
double erf(double x);

}  // namespace fluxmod::specialfn
