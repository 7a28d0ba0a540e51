#pragma once

#include <array>
#include <vector>

#include "fluxmod/specialfn.hpp"

namespace fluxmod::transmon {

/// Circuit energies of the asymmetric tunable transmon, all angular (rad/s).
struct TransmonParams {
  double e_c = 0.0;
  double e_j1 = 0.0;
  double e_j2 = 0.0;

  /// 4 E_C^2 / (E_J1^2 + E_J2^2).
  double xi_bar() const;
  /// 2 E_J1 E_J2 / (E_J1^2 + E_J2^2); lies in [0, 1).
  double chi() const;
  /// Expansion parameter at the bottom of the band (Phi = Phi0/2).
  double xi_max() const;

  /// Throws DomainError unless E_J1 >= E_J2 > 0, E_C > 0 and xi_max() < 0.5.
  void validate() const;
};

/// Measured band edges (Hz).
struct QubitBand {
  double f_max = 0.0;  ///< frequency at Phi = 0
  double f_min = 0.0;  ///< frequency at Phi = Phi0/2
  double eta0 = 0.0;   ///< anharmonicity at Phi = 0

  void validate() const;
};

/// Perturbative coefficients omega^(p), p = -1 .. 8, of
/// omega_T = E_C sum_p omega^(p) xi^p.
inline constexpr int kSeriesMinPower = -1;
inline constexpr std::array<double, 10> kFrequencySeries = {
    4.0,
    -1.0,
    -1.0 / 4.0,
    -21.0 / 128.0,
    -19.0 / 128.0,
    -5319.0 / 32768.0,
    -6649.0 / 32768.0,
    -1180581.0 / 4194304.0,
    -446287.0 / 1048576.0,
    -1489138635.0 / 2147483648.0,
};

/// Upper bound on xi for which the perturbation series is trusted.
inline constexpr double kXiLimit = 0.5;

/// Cosine-series coefficients of the static band,
/// omega_T(Phi) = sum_n s[n] cos(2 pi n Phi).
struct StaticCoeffs {
  TransmonParams params;
  std::vector<double> s;
  int n_max = 0;

  static constexpr const std::array<double, 10>& perturbation_table() {
    return kFrequencySeries;
  }
};

double effective_ej(const TransmonParams& params, double phi);

/// sqrt(2 E_C / E_Jeff(phi)).
double xi(const TransmonParams& params, double phi);

/// omega_T from the expansion parameter; no range check.
double frequency_from_xi(double e_c, double xi);

/// Anharmonicity as a function of the transition frequency:
/// eta = E_C / (1 - 9 E_C / (4 omega)).
double anharmonicity_from_frequency(double e_c, double omega);

/// d eta / d omega of the model above, which is -(9/4) (eta/omega)^2.
double anharmonicity_slope(double e_c, double omega);

/// Qubit transition frequency (rad/s) at flux phi (units of Phi0).
/// Throws DomainError when xi(phi) >= kXiLimit.
double frequency(const TransmonParams& params, double phi);

/// Anharmonicity eta_T (rad/s), positive.
double anharmonicity(const TransmonParams& params, double phi);

/// Solves for circuit energies reproducing the band edges and the
/// zero-flux anharmonicity. Throws CalibrationError on failure.
TransmonParams calibrate(const QubitBand& band);

/// Fourier-cosine coefficients of omega_T(Phi) via the hypergeometric
/// closed form. Throws ConvergenceError if 40 terms are not enough.
StaticCoeffs static_coeffs(const TransmonParams& params,
                           const specialfn::SeriesTolerance& tol = {});

/// Evaluates sum_n s_n cos(n * 2 pi phi).
double evaluate(const StaticCoeffs& coeffs, double phi);

}  // namespace fluxmod::transmon
