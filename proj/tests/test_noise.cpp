#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fluxmod/errors.hpp"
#include "fluxmod/noise.hpp"

using namespace fluxmod;
using namespace fluxmod::noise;

namespace {

double variance(const std::vector<double>& x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double acc = 0.0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return acc / (x.size() - 1);
}

// Mean of the estimated density over [f_lo, f_hi).
double band_mean(const Psd& psd, double f_lo, double f_hi) {
  double acc = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < psd.f.size(); ++k) {
    if (psd.f[k] >= f_lo && psd.f[k] < f_hi) {
      acc += psd.s[k];
      ++n;
    }
  }
  REQUIRE(n > 0);
  return acc / n;
}

}  // namespace

TEST_CASE("white samples have variance A^2/dt") {
  const auto tr = synth_white(10e-9, 50e-9, 1 << 20, 5);
  CHECK(tr.samples.size() == (1u << 20));
  CHECK(std::sqrt(variance(tr.samples)) == doctest::Approx(10e-9 / std::sqrt(50e-9)).epsilon(0.03));
}

TEST_CASE("white PSD is flat at A^2") {
  const auto tr = synth_white(10e-9, 50e-9, 1 << 18, 6);
  const auto psd = estimate_psd(tr, 32);
  const double fn = 0.5 / 50e-9;
  for (double f0 : {0.05 * fn, 0.3 * fn, 0.7 * fn}) {
    CHECK(band_mean(psd, f0, f0 + 0.1 * fn) == doctest::Approx(1e-16).epsilon(0.1));
  }
  CHECK(psd.total_power() == doctest::Approx(variance(tr.samples)).epsilon(0.05));
}

TEST_CASE("pink PSD follows A^2/f with slope -1") {
  const double amp = 3.63e-6;
  const double dt = 1e-5;
  const int seeds = 20;
  Psd avg;
  for (int s = 0; s < seeds; ++s) {
    const auto psd = estimate_psd(synth_pink(amp, 1.0, dt, 1 << 17, 100 + s), 8);
    if (s == 0) {
      avg = psd;
    } else {
      for (std::size_t k = 0; k < psd.s.size(); ++k) avg.s[k] += psd.s[k];
    }
  }
  for (double& v : avg.s) v /= seeds;

  std::vector<double> lx, ly;
  for (double f0 = 10.0; f0 < 1e4; f0 *= 2.0) {
    const double f1 = 2.0 * f0;
    const double measured = band_mean(avg, f0, f1);
    // Band average of A^2/f over the same bins.
    double expect = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < avg.f.size(); ++k) {
      if (avg.f[k] >= f0 && avg.f[k] < f1) {
        expect += amp * amp / avg.f[k];
        ++n;
      }
    }
    expect /= n;
    CHECK(measured == doctest::Approx(expect).epsilon(0.1));
    lx.push_back(std::log(std::sqrt(f0 * f1)));
    ly.push_back(std::log(measured));
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  CHECK(sxy / sxx == doctest::Approx(-1.0).epsilon(0.05));
}

TEST_CASE("pink trace has no DC component and is reproducible") {
  const auto a = synth_pink(1e-6, 1.0, 50e-9, 4096, 9);
  const auto b = synth_pink(1e-6, 1.0, 50e-9, 4096, 9);
  const auto c = synth_pink(1e-6, 1.0, 50e-9, 4096, 10);
  CHECK(a.samples == b.samples);
  CHECK(a.samples != c.samples);
  const double mean = std::accumulate(a.samples.begin(), a.samples.end(), 0.0) / 4096;
  CHECK(std::abs(mean) < 1e-12 * std::sqrt(variance(a.samples)));
  CHECK_THROWS_AS(synth_pink(1e-6, 1.0, 50e-9, 3000, 1), DomainError);
  CHECK_THROWS_AS(synth_pink(1e-6, 1.0, 50e-9, 512, 1), DomainError);
}

TEST_CASE("brick-wall lowpass keeps only the passband") {
  const double dt = 1e-9;
  const double fc = 100e6;
  const auto tr = synth_white(50e-9, dt, 1 << 16, 12);
  const auto lp = lowpass(tr, fc);
  CHECK(lp.kind == TraceKind::filtered);
  CHECK(variance(lp.samples) == doctest::Approx(50e-9 * 50e-9 * 2.0 * fc).epsilon(0.05));
  const auto psd = estimate_psd(lp, 16);
  CHECK(band_mean(psd, 1.5 * fc, 4.5e8) < 1e-3 * 2.5e-15);

  std::vector<double> direct(1 << 16);
  synth_white_lowpass(50e-9, dt, fc, direct, 13);
  CHECK(variance(direct) == doctest::Approx(50e-9 * 50e-9 * 2.0 * fc).epsilon(0.05));
  const auto dpsd = estimate_psd(NoiseTrace{dt, direct, TraceKind::filtered, 13}, 16);
  CHECK(band_mean(dpsd, 0.1 * fc, 0.9 * fc) == doctest::Approx(2.5e-15).epsilon(0.1));
  CHECK(band_mean(dpsd, 1.5 * fc, 4.5e8) < 1e-3 * 2.5e-15);

  CHECK_THROWS_AS(lowpass(tr, 1e9), DomainError);
  CHECK_THROWS_AS(lowpass(tr, 0.0), DomainError);
}

TEST_CASE("smooth rolloff attenuates but keeps the passband") {
  const auto tr = synth_white(1.0, 1e-3, 1 << 14, 3);
  const auto lp = lowpass(tr, 50.0, Rolloff::order4);
  const auto psd = estimate_psd(lp, 8);
  CHECK(band_mean(psd, 1.0, 20.0) == doctest::Approx(1.0).epsilon(0.15));
  CHECK(band_mean(psd, 300.0, 500.0) < 1e-4);
}

TEST_CASE("noise spec validation") {
  NoiseSpec s;
  CHECK_NOTHROW(s.validate());
  CHECK_FALSE(s.has_pink());
  s.a_ac_pink = 1e-6;
  CHECK(s.has_pink());
  s.a_dc_white = -1.0;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = {};
  s.alpha = 2.0;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = {};
  s.f_ir = 1e10;
  CHECK_THROWS_AS(s.validate(), DomainError);
  CHECK(is_power_of_two(1024));
  CHECK_FALSE(is_power_of_two(1000));
  CHECK_FALSE(is_power_of_two(0));
}

TEST_CASE("CSV writers") {
  NoiseTrace t{0.5, {1.0, -2.0, 0.25}, TraceKind::white, 0};
  std::ostringstream os;
  write_trace_csv(os, t);
  CHECK(os.str() == "t_s,dphi_phi0\n0,1\n0.5,-2\n1,0.25\n");
  Psd p;
  p.f = {0.0, 2.0};
  p.s = {3.0, 4.0};
  std::ostringstream ps;
  write_psd_csv(ps, p);
  CHECK(ps.str() == "f_hz,psd_phi0sq_per_hz\n0,3\n2,4\n");
  CHECK(p.total_power() == doctest::Approx(14.0));
  CHECK_THROWS_AS(estimate_psd(t, 2), DomainError);
}
