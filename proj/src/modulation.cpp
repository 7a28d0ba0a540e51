#include "fluxmod/modulation.hpp"

#include <array>
#include <cmath>
#include <string>

#include "fluxmod/errors.hpp"
#include "fluxmod/units.hpp"

namespace fluxmod::modulation {

namespace {

// cos(x + k pi/2) and sin(x + k pi/2) without rounding the quarter turns.
double cos_shift(double c, double s, int k) {
  switch (k & 3) {
    case 0: return c;
    case 1: return -s;
    case 2: return -c;
    default: return s;
  }
}

double sin_shift(double c, double s, int k) {
  switch (k & 3) {
    case 0: return s;
    case 1: return c;
    case 2: return -s;
    default: return -c;
  }
}

}  // namespace

double ModulationSpec::sigma() const {
  return t_ramp / (4.0 * std::sqrt(2.0 * std::log(2.0)));
}

void ModulationSpec::validate() const {
  if (!(phi_ac >= 0.0)) throw DomainError("ModulationSpec: phi_ac must be >= 0");
  if (!(f_m > 0.0)) throw DomainError("ModulationSpec: f_m must be positive");
  if (!(t_ramp >= 0.0 && 2.0 * t_ramp <= t_f)) {
    throw DomainError("ModulationSpec: require 0 <= 2 t_ramp <= t_f");
  }
}

double ModulationSpec::envelope(double t) const {
  if (t_ramp <= 0.0) return phi_ac;
  const double s = sigma();
  return 0.5 * phi_ac *
         (specialfn::erf((t - t_ramp) / s) -
          specialfn::erf((t + t_ramp - t_f) / s));
}

double ModulationSpec::flux(double t) const {
  return phi_dc + envelope(t) * std::cos(kTwoPi * f_m * t + theta_m);
}

FourierSeries fourier_series(const transmon::StaticCoeffs& coeffs,
                             double phi_dc, double phi_ac, int K) {
  if (K < 0 || K > kMaxHarmonics) {
    throw DomainError("fourier_series: K must be in [0, 32]");
  }
  const double pdc = flux_to_phase(phi_dc);
  const double pac = flux_to_phase(phi_ac);

  FourierSeries out;
  out.K = K;
  out.omega.assign(K + 1, 0.0);
  out.d_dc.assign(K + 1, 0.0);
  out.d_ac.assign(K + 1, 0.0);

  std::vector<double> jn(K + 2);
  const int nmax = static_cast<int>(coeffs.s.size()) - 1;
  for (int n = 0; n <= nmax; ++n) {
    const double sn = coeffs.s[n];
    specialfn::bessel_j_all(n * pac, jn);
    const double c = std::cos(n * pdc);
    const double s = std::sin(n * pdc);
    for (int k = 0; k <= K; ++k) {
      const double ck = cos_shift(c, s, k);
      const double sk = sin_shift(c, s, k);
      const double jk = jn[k];
      // J_{k-1} for k = 0 is J_{-1} = -J_1.
      const double jkm1 = k == 0 ? -jn[1] : jn[k - 1];
      const double weight = k == 0 ? 1.0 : 2.0;
      out.omega[k] += weight * sn * ck * jk;
      out.d_dc[k] -= weight * n * sn * sk * jk;
      out.d_ac[k] -= weight * n * sn * ck * 0.5 * (jn[k + 1] - jkm1);
    }
  }
  for (int k = 0; k <= K; ++k) {
    out.d_dc[k] *= kTwoPi;
    out.d_ac[k] *= kTwoPi;
  }
  return out;
}

double average_frequency(const FourierSeries& series) {
  return series.omega.at(0);
}

double average_frequency_ac_slope(const transmon::StaticCoeffs& coeffs,
                                  double phi_dc, double phi_ac) {
  const double pdc = flux_to_phase(phi_dc);
  const double pac = flux_to_phase(phi_ac);
  double acc = 0.0;
  for (std::size_t n = 1; n < coeffs.s.size(); ++n) {
    acc -= n * coeffs.s[n] * std::cos(n * pdc) *
           specialfn::bessel_j(1, n * pac);
  }
  return kTwoPi * acc;
}

double average_frequency_dc_slope(const transmon::StaticCoeffs& coeffs,
                                  double phi_dc, double phi_ac) {
  const double pdc = flux_to_phase(phi_dc);
  const double pac = flux_to_phase(phi_ac);
  double acc = 0.0;
  for (std::size_t n = 1; n < coeffs.s.size(); ++n) {
    acc -= n * coeffs.s[n] * std::sin(n * pdc) *
           specialfn::bessel_j(0, n * pac);
  }
  return kTwoPi * acc;
}

double average_anharmonicity(const transmon::TransmonParams& params,
                             double phi_dc, double phi_ac) {
  constexpr int kPoints = 64;
  double acc = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    const double theta = kTwoPi * i / kPoints;
    acc += transmon::anharmonicity(params, phi_dc + phi_ac * std::cos(theta));
  }
  return acc / kPoints;
}

double instantaneous_frequency(const transmon::TransmonParams& params,
                               const ModulationSpec& spec, double t) {
  if (!(t >= 0.0 && t <= spec.t_f)) {
    throw DomainError("instantaneous_frequency: t = " + std::to_string(t) +
                      " outside the pulse window");
  }
  return transmon::frequency(params, spec.flux(t));
}

double find_ac_sweet_spot(const transmon::StaticCoeffs& coeffs, double phi_dc,
                          double lo, double hi) {
  auto slope = [&](double a) {
    return average_frequency_ac_slope(coeffs, phi_dc, a);
  };
  double a = lo;
  double b = hi;
  double fa = slope(a);
  double fb = slope(b);
  if (!(fa * fb < 0.0)) {
    throw DomainError("find_ac_sweet_spot: no sign change of the average-"
                      "frequency slope in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  }
  while (b - a > 1e-4) {
    const double m = 0.5 * (a + b);
    const double fm = slope(m);
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
      fb = fm;
    }
  }
  // Secant polish, kept inside the bracket.
  double x0 = a;
  double x1 = b;
  double f0 = fa;
  double f1 = fb;
  for (int it = 0; it < 50; ++it) {
    if (f1 == f0) break;
    double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
    if (x2 < a || x2 > b) x2 = 0.5 * (a + b);
    x0 = x1;
    f0 = f1;
    x1 = x2;
    f1 = slope(x1);
    if (std::fabs(x1 - x0) < 1e-9) break;
  }
  // Curvature must be nonzero for a genuine extremum.
  const double h = 1e-4;
  const double curv = (slope(x1 + h) - slope(x1 - h)) / (2.0 * h);
  if (curv == 0.0 || !std::isfinite(curv)) {
    throw DomainError("find_ac_sweet_spot: degenerate extremum");
  }
  return x1;
}

SweetSpot find_joint_sweet_spot(const transmon::StaticCoeffs& coeffs,
                                double phi_dc, double phi_ac) {
  auto grad = [&](double d, double a) {
    return std::array<double, 2>{average_frequency_dc_slope(coeffs, d, a),
                                 average_frequency_ac_slope(coeffs, d, a)};
  };
  const double scale = std::fabs(coeffs.s.at(1)) * kTwoPi;
  double d = phi_dc;
  double a = phi_ac;
  double res = 0.0;
  for (int it = 0; it < 60; ++it) {
    const auto f = grad(d, a);
    res = std::hypot(f[0], f[1]) / scale;
    if (res < 1e-12) return {d, a, it};
    const double h = 1e-6;
    const auto fd = grad(d + h, a);
    const auto fa = grad(d, a + h);
    const double j00 = (fd[0] - f[0]) / h, j10 = (fd[1] - f[1]) / h;
    const double j01 = (fa[0] - f[0]) / h, j11 = (fa[1] - f[1]) / h;
    const double det = j00 * j11 - j01 * j10;
    if (det == 0.0 || !std::isfinite(det)) break;
    double sd = -(j11 * f[0] - j01 * f[1]) / det;
    double sa = -(-j10 * f[0] + j00 * f[1]) / det;
    const double len = std::hypot(sd, sa);
    if (len > 0.05) {
      sd *= 0.05 / len;
      sa *= 0.05 / len;
    }
    d += sd;
    a += sa;
    if (len < 1e-10) return {d, a, it};
  }
  throw ConvergenceError("find_joint_sweet_spot: Newton did not converge", 60,
                         res);
}

}  // namespace fluxmod::modulation
