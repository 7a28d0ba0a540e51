#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "fluxmod/errors.hpp"
#include "fluxmod/modulation.hpp"
#include "fluxmod/transmon.hpp"
#include "fluxmod/units.hpp"

using namespace fluxmod;
using namespace fluxmod::modulation;

namespace {

const transmon::TransmonParams& device() {
  static const auto p = transmon::calibrate({5.1e9, 4.1e9, 0.2e9});
  return p;
}
const transmon::StaticCoeffs& coeffs() {
  static const auto c = transmon::static_coeffs(device());
  return c;
}

// Harmonics of omega_T(phi_dc + phi_ac cos theta) by periodic trapezoid.
std::vector<double> harmonics_by_quadrature(double phi_dc, double phi_ac, int K) {
  constexpr int n = 512;
  std::vector<double> out(K + 1, 0.0);
  for (int i = 0; i < n; ++i) {
    const double th = kTwoPi * i / n;
    const double w = transmon::frequency(device(), phi_dc + phi_ac * std::cos(th));
    for (int k = 0; k <= K; ++k) out[k] += w * std::cos(k * th);
  }
  for (int k = 0; k <= K; ++k) out[k] *= (k == 0 ? 1.0 : 2.0) / n;
  return out;
}

}  // namespace

TEST_CASE("harmonics match direct quadrature") {
  const double scale = hz_to_angular(5e9);
  for (double pdc : {0.0, 0.1, 0.25, 0.4}) {
    for (double pac : {0.0, 0.15, 0.3, 0.61}) {
      const auto s = fourier_series(coeffs(), pdc, pac, 8);
      const auto q = harmonics_by_quadrature(pdc, pac, 8);
      for (int k = 0; k <= 8; ++k) {
        CHECK(std::abs(s.omega[k] - q[k]) < 1e-10 * scale);
      }
    }
  }
}

TEST_CASE("flux derivatives match finite differences") {
  const double h = 1e-6;
  const double scale = hz_to_angular(5e9);
  for (auto [pdc, pac] : {std::pair{0.1, 0.3}, std::pair{0.3, 0.2}, std::pair{0.0, 0.55}}) {
    const auto s = fourier_series(coeffs(), pdc, pac, 6);
    const auto up_dc = fourier_series(coeffs(), pdc + h, pac, 6);
    const auto dn_dc = fourier_series(coeffs(), pdc - h, pac, 6);
    const auto up_ac = fourier_series(coeffs(), pdc, pac + h, 6);
    const auto dn_ac = fourier_series(coeffs(), pdc, pac - h, 6);
    for (int k = 0; k <= 6; ++k) {
      CHECK(std::abs(s.d_dc[k] - (up_dc.omega[k] - dn_dc.omega[k]) / (2 * h)) < 1e-6 * scale);
      CHECK(std::abs(s.d_ac[k] - (up_ac.omega[k] - dn_ac.omega[k]) / (2 * h)) < 1e-6 * scale);
    }
    CHECK(average_frequency_ac_slope(coeffs(), pdc, pac) ==
          doctest::Approx(s.d_ac[0]).epsilon(1e-12).scale(scale));
    CHECK(average_frequency_dc_slope(coeffs(), pdc, pac) ==
          doctest::Approx(s.d_dc[0]).epsilon(1e-12).scale(scale));
  }
}

TEST_CASE("first DC harmonic derivative is twice the AC slope of the mean") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> udc(-0.5, 0.5), uac(0.0, 0.7);
  for (int i = 0; i < 50; ++i) {
    const auto s = fourier_series(coeffs(), udc(gen), uac(gen), 4);
    const double scale = std::max(std::abs(s.d_dc[1]), hz_to_angular(1e6));
    CHECK(std::abs(s.d_dc[1] - 2.0 * s.d_ac[0]) < 1e-8 * scale);
  }
}

TEST_CASE("parity at the upper sweet spot") {
  const double scale = hz_to_angular(5e9);
  for (double pac : {0.1, 0.3, 0.6}) {
    const auto s = fourier_series(coeffs(), 0.0, pac, 9);
    for (int k = 1; k <= 9; k += 2) {
      CHECK(std::abs(s.omega[k]) < 1e-10 * scale);
      CHECK(std::abs(s.d_ac[k]) < 1e-10 * scale);
    }
    for (int k = 0; k <= 9; k += 2) CHECK(std::abs(s.d_dc[k]) < 1e-10 * scale);
  }
}

TEST_CASE("no modulation reproduces the static band") {
  for (double pdc : {0.0, 0.2, 0.45}) {
    const auto s = fourier_series(coeffs(), pdc, 0.0, 3);
    CHECK(average_frequency(s) ==
          doctest::Approx(transmon::frequency(device(), pdc)).epsilon(1e-12));
    CHECK(s.omega[1] == doctest::Approx(0.0).scale(1.0));
    CHECK(average_anharmonicity(device(), pdc, 0.0) ==
          doctest::Approx(transmon::anharmonicity(device(), pdc)).epsilon(1e-14));
  }
  CHECK(average_frequency(fourier_series(coeffs(), 0.0, 0.0, 1)) ==
        doctest::Approx(hz_to_angular(5.1e9)).epsilon(1e-9));
}

TEST_CASE("average anharmonicity stays inside the band range") {
  const double lo = transmon::anharmonicity(device(), 0.0);
  const double hi = transmon::anharmonicity(device(), 0.5);
  for (double pac : {0.1, 0.3, 0.5, 0.7}) {
    const double e = average_anharmonicity(device(), 0.0, pac);
    CHECK(e >= lo);
    CHECK(e <= hi);
  }
}

TEST_CASE("AC sweet spot of the first device") {
  const double star = find_ac_sweet_spot(coeffs(), 0.0, 0.4, 0.8);
  CHECK(star >= 0.58);
  CHECK(star <= 0.64);
  CHECK(std::abs(average_frequency_ac_slope(coeffs(), 0.0, star)) < 1e-6 * hz_to_angular(1e9));
  // A single harmonic would put it at the first zero of J_1.
  CHECK(star == doctest::Approx(3.8317059702075125 / kTwoPi).epsilon(0.03));
  CHECK_THROWS_AS(find_ac_sweet_spot(coeffs(), 0.0, 0.1, 0.3), DomainError);
}

TEST_CASE("joint sweet spot near a quarter flux quantum") {
  const auto js = find_joint_sweet_spot(coeffs(), 0.25, 0.4);
  CHECK(js.phi_dc == doctest::Approx(0.2357).epsilon(0.01));
  CHECK(js.phi_ac >= 0.36);
  CHECK(js.phi_ac <= 0.42);
  CHECK(std::abs(average_frequency_ac_slope(coeffs(), js.phi_dc, js.phi_ac)) < 1e-3);
  CHECK(std::abs(average_frequency_dc_slope(coeffs(), js.phi_dc, js.phi_ac)) < 1e-3);
}

TEST_CASE("pulse envelope") {
  ModulationSpec m;
  m.phi_dc = 0.1;
  m.phi_ac = 0.3;
  m.f_m = 300e6;
  m.t_ramp = 10e-9;
  m.t_f = 200e-9;
  CHECK_NOTHROW(m.validate());
  CHECK(m.envelope(m.t_f / 2) == doctest::Approx(m.phi_ac).epsilon(1e-12));
  CHECK(m.envelope(0.0) < 1e-6);
  CHECK(m.envelope(m.t_ramp) == doctest::Approx(0.5 * m.phi_ac).epsilon(1e-9));
  for (double t : {1e-9, 7e-9, 30e-9}) {
    CHECK(m.envelope(t) == doctest::Approx(m.envelope(m.t_f - t)).epsilon(1e-12));
  }
  ModulationSpec sq = m;
  sq.t_ramp = 0.0;
  for (double t : {0.0, 3.3e-9, 100e-9}) {
    CHECK(sq.flux(t) == doctest::Approx(0.1 + 0.3 * std::cos(kTwoPi * 300e6 * t)));
  }
  CHECK(instantaneous_frequency(device(), sq, 5e-9) ==
        doctest::Approx(transmon::frequency(device(), sq.flux(5e-9))));
  CHECK_THROWS_AS(instantaneous_frequency(device(), sq, -1e-9), DomainError);
  CHECK_THROWS_AS(instantaneous_frequency(device(), sq, 1e-6), DomainError);
  ModulationSpec bad = m;
  bad.t_ramp = 150e-9;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = m;
  bad.f_m = 0.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  CHECK_THROWS_AS(fourier_series(coeffs(), 0.0, 0.1, 33), DomainError);
}
