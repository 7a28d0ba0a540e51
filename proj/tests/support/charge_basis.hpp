#pragma once

#include <Eigen/Dense>
#include <array>

namespace testsupport {

// Lowest three levels of 4 E_C n^2 - E_J cos(phi), n in [-n_max, n_max],
// relative to the ground state. Energies in the units of the inputs.
inline std::array<double, 2> transmon_levels(double e_c, double e_j, int n_max = 40) {
  const int dim = 2 * n_max + 1;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const double n = i - n_max;
    h(i, i) = 4.0 * e_c * n * n;
    if (i + 1 < dim) h(i, i + 1) = h(i + 1, i) = -0.5 * e_j;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  const auto& e = es.eigenvalues();
  return {e(1) - e(0), e(2) - e(0)};
}

// omega_01 and eta = omega_01 - omega_12.
inline std::array<double, 2> transmon_omega_eta(double e_c, double e_j) {
  const auto l = transmon_levels(e_c, e_j);
  return {l[0], 2.0 * l[0] - l[1]};
}

}  // namespace testsupport
