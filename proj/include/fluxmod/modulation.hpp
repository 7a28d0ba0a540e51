#pragma once

#include <vector>

#include "fluxmod/specialfn.hpp"
#include "fluxmod/transmon.hpp"

namespace fluxmod::modulation {

/// Sinusoidal flux drive Phi(t) = phi_dc + A(t) cos(2 pi f_m t + theta_m)
/// with an erf-edged envelope A(t) of height phi_ac.
struct ModulationSpec {
  double phi_dc = 0.0;   ///< parking flux (Phi0)
  double phi_ac = 0.0;   ///< modulation amplitude (Phi0)
  double f_m = 300e6;    ///< modulation frequency (Hz)
  double theta_m = 0.0;  ///< modulation phase (rad)
  double t_ramp = 0.0;   ///< rise time (s); 0 gives a square pulse
  double t_f = 0.0;      ///< total pulse length (s)

  /// Edge width t_ramp / (4 sqrt(2 ln 2)).
  double sigma() const;
  void validate() const;

  /// Envelope A(t); equals phi_ac in the square-pulse limit.
  double envelope(double t) const;
  /// Total flux at time t.
  double flux(double t) const;
};

/// Harmonic coefficients of omega_T(t) = sum_k omega[k] cos(k(w_m t + theta_m))
/// and their derivatives with respect to the parking flux and the
/// modulation amplitude (rad/s per Phi0).
struct FourierSeries {
  std::vector<double> omega;
  std::vector<double> d_dc;
  std::vector<double> d_ac;
  int K = 0;
};

inline constexpr int kDefaultHarmonics = 10;
inline constexpr int kMaxHarmonics = 32;

FourierSeries fourier_series(const transmon::StaticCoeffs& coeffs,
                             double phi_dc, double phi_ac,
                             int K = kDefaultHarmonics);

/// Average frequency over a modulation period (the k = 0 coefficient).
double average_frequency(const FourierSeries& series);

/// d(average frequency)/d(phi_ac), rad/s per Phi0, from the static series.
double average_frequency_ac_slope(const transmon::StaticCoeffs& coeffs,
                                  double phi_dc, double phi_ac);

/// d(average frequency)/d(phi_dc), rad/s per Phi0.
double average_frequency_dc_slope(const transmon::StaticCoeffs& coeffs,
                                  double phi_dc, double phi_ac);

/// Period average of the anharmonicity by 64-point periodic trapezoid.
double average_anharmonicity(const transmon::TransmonParams& params,
                             double phi_dc, double phi_ac);

double instantaneous_frequency(const transmon::TransmonParams& params,
                               const ModulationSpec& spec, double t);

/// Root of d(average frequency)/d(phi_ac) inside [lo, hi].
/// Throws DomainError when the derivative has no sign change.
double find_ac_sweet_spot(const transmon::StaticCoeffs& coeffs, double phi_dc,
                          double lo, double hi);

/// Point where the average frequency is stationary in both phi_dc and
/// phi_ac, i.e. first-order insensitive to additive and multiplicative
/// low-frequency noise at once.
struct SweetSpot {
  double phi_dc = 0.0;
  double phi_ac = 0.0;
  int iterations = 0;
};

/// Newton search for a joint stationary point starting at (phi_dc, phi_ac).
SweetSpot find_joint_sweet_spot(const transmon::StaticCoeffs& coeffs,
                                double phi_dc, double phi_ac);

}  // namespace fluxmod::modulation
