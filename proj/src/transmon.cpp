#include "fluxmod/transmon.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "fluxmod/errors.hpp"
#include "fluxmod/units.hpp"

namespace fluxmod::transmon {

namespace {

constexpr int kMaxCoeffs = 40;

double ej_sq_sum(const TransmonParams& p) {
  return p.e_j1 * p.e_j1 + p.e_j2 * p.e_j2;
}

}  // namespace

double TransmonParams::xi_bar() const {
  return 4.0 * e_c * e_c / ej_sq_sum(*this);
}

double TransmonParams::chi() const {
  return 2.0 * e_j1 * e_j2 / ej_sq_sum(*this);
}

double TransmonParams::xi_max() const {
  return std::sqrt(2.0 * e_c / (e_j1 - e_j2));
}

void TransmonParams::validate() const {
  if (!(e_c > 0.0)) throw DomainError("TransmonParams: E_C must be positive");
  if (!(e_j2 > 0.0)) throw DomainError("TransmonParams: E_J2 must be positive");
  if (!(e_j1 > e_j2)) {
    throw DomainError("TransmonParams: require E_J1 > E_J2 (asymmetric SQUID)");
  }
  if (!(xi_max() < kXiLimit)) {
    throw DomainError("TransmonParams: xi at Phi0/2 is " +
                      std::to_string(xi_max()) +
                      ", outside the perturbative regime");
  }
}

void QubitBand::validate() const {
  if (!(f_min > 0.0 && f_max > f_min)) {
    throw DomainError("QubitBand: require f_max > f_min > 0");
  }
  if (!(eta0 > 0.0 && eta0 < f_min)) {
    throw DomainError("QubitBand: require 0 < eta0 < f_min");
  }
}

double effective_ej(const TransmonParams& p, double phi) {
  const double c = std::cos(flux_to_phase(phi));
  return std::sqrt(ej_sq_sum(p) + 2.0 * p.e_j1 * p.e_j2 * c);
}

double xi(const TransmonParams& p, double phi) {
  return std::sqrt(2.0 * p.e_c / effective_ej(p, phi));
}

double frequency_from_xi(double e_c, double x) {
  // Horner over p = 0..8, then the 1/xi term.
  double poly = 0.0;
  for (int i = static_cast<int>(kFrequencySeries.size()) - 1; i >= 1; --i) {
    poly = poly * x + kFrequencySeries[i];
  }
  return e_c * (kFrequencySeries[0] / x + poly);
}

double anharmonicity_from_frequency(double e_c, double omega) {
  return e_c / (1.0 - 9.0 * e_c / (4.0 * omega));
}

double anharmonicity_slope(double e_c, double omega) {
  const double eta = anharmonicity_from_frequency(e_c, omega);
  return -2.25 * (eta / omega) * (eta / omega);
}

double frequency(const TransmonParams& p, double phi) {
  const double x = xi(p, phi);
  if (!(x < kXiLimit)) {
    throw DomainError("transmon: xi = " + std::to_string(x) + " at flux " +
                      std::to_string(phi) + " outside perturbative regime");
  }
  return frequency_from_xi(p.e_c, x);
}

double anharmonicity(const TransmonParams& p, double phi) {
  return anharmonicity_from_frequency(p.e_c, frequency(p, phi));
}

TransmonParams calibrate(const QubitBand& band) {
  band.validate();
  const double w_max = hz_to_angular(band.f_max);
  const double w_min = hz_to_angular(band.f_min);
  const double eta0 = hz_to_angular(band.eta0);

  // Unknowns are logs of (E_C, E_J1 + E_J2, E_J1 - E_J2); at Phi = 0 and
  // Phi0/2 the effective Josephson energy is exactly the sum / difference.
  auto residual = [&](const Eigen::Vector3d& u) {
    const double ec = std::exp(u[0]);
    const double es = std::exp(u[1]);
    const double ed = std::exp(u[2]);
    const double f0 = frequency_from_xi(ec, std::sqrt(2.0 * ec / es));
    const double fh = frequency_from_xi(ec, std::sqrt(2.0 * ec / ed));
    Eigen::Vector3d r;
    r[0] = f0 / w_max - 1.0;
    r[1] = fh / w_min - 1.0;
    r[2] = anharmonicity_from_frequency(ec, f0) / eta0 - 1.0;
    return r;
  };

  const double ec0 = eta0;
  const double es0 = (w_max + ec0) * (w_max + ec0) / (8.0 * ec0);
  const double ed0 = (w_min + ec0) * (w_min + ec0) / (8.0 * ec0);
  Eigen::Vector3d u(std::log(ec0), std::log(es0), std::log(ed0));
  Eigen::Vector3d r = residual(u);

  constexpr int kMaxIter = 100;
  constexpr double kTol = 1e-10;
  int iter = 0;
  for (; iter < kMaxIter && r.cwiseAbs().maxCoeff() > kTol; ++iter) {
    Eigen::Matrix3d jac;
    for (int j = 0; j < 3; ++j) {
      const double h = 1e-7;
      Eigen::Vector3d up = u;
      Eigen::Vector3d um = u;
      up[j] += h;
      um[j] -= h;
      jac.col(j) = (residual(up) - residual(um)) / (2.0 * h);
    }
    const Eigen::Vector3d step = jac.fullPivLu().solve(-r);
    double damping = 1.0;
    const double norm0 = r.norm();
    for (int k = 0; k < 30; ++k) {
      const Eigen::Vector3d trial = u + damping * step;
      const Eigen::Vector3d rt = residual(trial);
      if (rt.allFinite() && rt.norm() < norm0) {
        u = trial;
        r = rt;
        break;
      }
      damping *= 0.5;
      if (k == 29) {
        throw CalibrationError("calibrate: line search stalled", iter, norm0);
      }
    }
  }
  const double res = r.cwiseAbs().maxCoeff();
  if (res > kTol) {
    throw CalibrationError("calibrate: Newton iteration did not converge", iter,
                           res);
  }

  const double es = std::exp(u[1]);
  const double ed = std::exp(u[2]);
  TransmonParams p{std::exp(u[0]), 0.5 * (es + ed), 0.5 * (es - ed)};
  if (!(p.e_j2 > 0.0) || !(p.xi_max() < kXiLimit)) {
    throw CalibrationError("calibrate: solution outside the physical region",
                           iter, res);
  }
  return p;
}

StaticCoeffs static_coeffs(const TransmonParams& params,
                           const specialfn::SeriesTolerance& tol) {
  params.validate();
  tol.validate();
  const double chi = params.chi();
  const double z = chi * chi;
  const double xi_bar = params.xi_bar();

  StaticCoeffs out;
  out.params = params;
  double prefactor = 1.0;  // (-chi/2)^n / n!
  for (int n = 0; n < kMaxCoeffs; ++n) {
    if (n > 0) prefactor *= -0.5 * chi / n;
    double acc = 0.0;
    for (std::size_t i = 0; i < kFrequencySeries.size(); ++i) {
      const int p = kSeriesMinPower + static_cast<int>(i);
      const double a = 0.25 * p;
      const double r = specialfn::rising_factorial(a, n);
      if (r == 0.0) continue;
      const double f = specialfn::hyp2f1(0.5 * n + 0.125 * p,
                                         0.5 * (n + 1) + 0.125 * p, n + 1.0,
                                         z, tol);
      acc += kFrequencySeries[i] * std::pow(xi_bar, a) * r * f;
    }
    const double sn = prefactor * (n == 0 ? 1.0 : 2.0) * params.e_c * acc;
    out.s.push_back(sn);
    if (n > 0 && std::fabs(sn) < tol.rel_tol * std::fabs(out.s[0])) {
      out.n_max = n;
      return out;
    }
  }
  throw ConvergenceError("static_coeffs: cosine series did not converge",
                         kMaxCoeffs,
                         std::fabs(out.s.back() / out.s.front()));
}

double evaluate(const StaticCoeffs& coeffs, double phi) {
  // Clenshaw recurrence for sum s_n T_n(cos phase).
  const double c = std::cos(flux_to_phase(phi));
  double b1 = 0.0;
  double b2 = 0.0;
  for (int n = static_cast<int>(coeffs.s.size()) - 1; n >= 1; --n) {
    const double b0 = coeffs.s[n] + 2.0 * c * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return coeffs.s[0] + c * b1 - b2;
}

}  // namespace fluxmod::transmon
