#include "fluxmod/noise.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <string>

#include "fluxmod/errors.hpp"
#include "fluxmod/rng.hpp"
#include "fluxmod/units.hpp"

namespace fluxmod::noise {

namespace {

// FFTW planning is not thread safe; execution on fresh arrays is.
std::mutex& plan_mutex() {
  static std::mutex mu;
  return mu;
}

struct FftBuffers {
  explicit FftBuffers(std::size_t n)
      : n(n),
        real(fftw_alloc_real(n)),
        spec(fftw_alloc_complex(n / 2 + 1)) {
    std::lock_guard lk(plan_mutex());
    forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), real, spec,
                                   FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, real,
                                    FFTW_ESTIMATE);
  }
  ~FftBuffers() {
    std::lock_guard lk(plan_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
    fftw_free(real);
    fftw_free(spec);
  }
  FftBuffers(const FftBuffers&) = delete;
  FftBuffers& operator=(const FftBuffers&) = delete;

  std::size_t n;
  double* real;
  fftw_complex* spec;
  fftw_plan forward;
  fftw_plan backward;
};

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be positive and finite");
  }
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void NoiseSpec::validate() const {
  for (double a : {a_dc_pink, a_ac_pink, a_dc_white, a_ac_white}) {
    if (!(a >= 0.0) || !std::isfinite(a)) {
      throw DomainError("noise amplitudes must be non-negative");
    }
  }
  if (!(f_ir > 0.0 && f_ir < f_uv)) {
    throw DomainError("noise cutoffs must satisfy 0 < f_ir < f_uv");
  }
  if (!(alpha >= 0.5 && alpha <= 1.5)) {
    throw DomainError("spectral exponent alpha must lie in [0.5, 1.5]");
  }
  if (lowpass_cutoff < 0.0) {
    throw DomainError("lowpass cutoff must be >= 0");
  }
}

const char* trace_kind_name(TraceKind kind) {
  switch (kind) {
    case TraceKind::white: return "white";
    case TraceKind::pink: return "pink";
    case TraceKind::filtered: return "filtered";
  }
  return "?";
}

NoiseTrace synth_white(double amplitude, double dt, std::size_t n,
                       std::uint64_t seed) {
  check_positive(dt, "dt");
  if (n < 2) throw DomainError("synth_white: need at least 2 samples");
  if (amplitude < 0.0) throw DomainError("synth_white: negative amplitude");
  NoiseTrace tr;
  tr.dt = dt;
  tr.kind = TraceKind::white;
  tr.seed = seed;
  tr.samples.resize(n);
  auto eng = rng::make_engine(seed, rng::Stream::generic, 0);
  rng::fill_normal(eng, tr.samples, amplitude / std::sqrt(dt));
  return tr;
}

NoiseTrace synth_pink(double amplitude, double alpha, double dt, std::size_t n,
                      std::uint64_t seed) {
  check_positive(dt, "dt");
  if (!is_power_of_two(n) || n < 1024) {
    throw DomainError("synth_pink: n must be a power of two >= 1024");
  }
  if (amplitude < 0.0) throw DomainError("synth_pink: negative amplitude");
  NoiseTrace tr;
  tr.dt = dt;
  tr.kind = TraceKind::pink;
  tr.seed = seed;
  tr.samples.assign(n, 0.0);
  if (amplitude == 0.0) return tr;

  FftBuffers fft(n);
  auto eng = rng::make_engine(seed, rng::Stream::generic, 0);
  boost::random::normal_distribution<double> nd(0.0, 1.0);
  const double df = 1.0 / (n * dt);
  // x_j = (1/n) sum_k X_k e^{2 pi i jk/n} has two-sided PSD S(f_k) when
  // E|X_k|^2 = n S(f_k) / dt.
  fft.spec[0][0] = 0.0;
  fft.spec[0][1] = 0.0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double f = k * df;
    const double s = amplitude * amplitude / std::pow(f, alpha);
    const double var = n * s / dt;
    if (k == n / 2) {
      fft.spec[k][0] = std::sqrt(var) * nd(eng);
      fft.spec[k][1] = 0.0;
    } else {
      const double sd = std::sqrt(0.5 * var);
      fft.spec[k][0] = sd * nd(eng);
      fft.spec[k][1] = sd * nd(eng);
    }
  }
  fftw_execute_dft_c2r(fft.backward, fft.spec, fft.real);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) tr.samples[j] = fft.real[j] * inv_n;
  return tr;
}

void synth_white_lowpass(double amplitude, double dt, double cutoff,
                         std::span<double> out, std::uint64_t seed) {
  check_positive(dt, "dt");
  check_positive(cutoff, "cutoff");
  const std::size_t n = out.size();
  if (n < 2) throw DomainError("synth_white_lowpass: need at least 2 samples");
  FftBuffers fft(n);
  for (std::size_t k = 0; k <= n / 2; ++k) fft.spec[k][0] = fft.spec[k][1] = 0.0;
  auto eng = rng::make_engine(seed, rng::Stream::generic, 0);
  boost::random::normal_distribution<double> nd(0.0, 1.0);
  const double df = 1.0 / (n * dt);
  const double var = n * amplitude * amplitude / dt;
  for (std::size_t k = 0; k <= n / 2 && k * df <= cutoff * (1.0 + 1e-12); ++k) {
    if (k == 0 || (n % 2 == 0 && k == n / 2)) {
      fft.spec[k][0] = std::sqrt(var) * nd(eng);
    } else {
      const double sd = std::sqrt(0.5 * var);
      fft.spec[k][0] = sd * nd(eng);
      fft.spec[k][1] = sd * nd(eng);
    }
  }
  fftw_execute_dft_c2r(fft.backward, fft.spec, fft.real);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = fft.real[j] * inv_n;
}

void lowpass_inplace(std::span<double> x, double dt, double cutoff,
                     Rolloff rolloff) {
  check_positive(dt, "dt");
  check_positive(cutoff, "cutoff");
  const double nyquist = 0.5 / dt;
  if (cutoff > nyquist * (1.0 + 1e-12)) {
    throw DomainError("lowpass: cutoff " + std::to_string(cutoff) +
                      " Hz above Nyquist " + std::to_string(nyquist) + " Hz");
  }
  const std::size_t n = x.size();
  if (n < 2) return;
  FftBuffers fft(n);
  std::copy(x.begin(), x.end(), fft.real);
  fftw_execute_dft_r2c(fft.forward, fft.real, fft.spec);
  const double df = 1.0 / (n * dt);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double f = k * df;
    double gain = 1.0;
    if (rolloff == Rolloff::brick_wall) {
      gain = f <= cutoff * (1.0 + 1e-12) ? 1.0 : 0.0;
    } else {
      const double r = f / cutoff;
      gain = 1.0 / std::sqrt(1.0 + r * r * r * r * r * r * r * r);
    }
    fft.spec[k][0] *= gain;
    fft.spec[k][1] *= gain;
  }
  fftw_execute_dft_c2r(fft.backward, fft.spec, fft.real);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) x[j] = fft.real[j] * inv_n;
}

NoiseTrace lowpass(const NoiseTrace& trace, double cutoff, Rolloff rolloff) {
  NoiseTrace out = trace;
  lowpass_inplace(out.samples, trace.dt, cutoff, rolloff);
  out.kind = TraceKind::filtered;
  return out;
}

double Psd::total_power() const {
  if (f.size() < 2) return 0.0;
  const double df = f[1] - f[0];
  double acc = s.front() + s.back();
  for (std::size_t k = 1; k + 1 < s.size(); ++k) acc += 2.0 * s[k];
  return acc * df;
}

Psd estimate_psd(const NoiseTrace& trace, int n_segments) {
  if (n_segments < 4) throw DomainError("estimate_psd: need >= 4 segments");
  const std::size_t n = trace.samples.size();
  const std::size_t len = n / static_cast<std::size_t>(n_segments);
  if (len < 16) throw DomainError("estimate_psd: trace too short");
  const std::size_t hop = len / 2;

  std::vector<double> win(len);
  double u = 0.0;
  for (std::size_t j = 0; j < len; ++j) {
    win[j] = 0.5 - 0.5 * std::cos(kTwoPi * j / len);
    u += win[j] * win[j];
  }
  u /= len;

  FftBuffers fft(len);
  Psd psd;
  psd.f.resize(len / 2 + 1);
  psd.s.assign(len / 2 + 1, 0.0);
  int count = 0;
  for (std::size_t start = 0; start + len <= n; start += hop) {
    double mean = 0.0;
    for (std::size_t j = 0; j < len; ++j) mean += trace.samples[start + j];
    mean /= len;
    for (std::size_t j = 0; j < len; ++j) {
      fft.real[j] = (trace.samples[start + j] - mean) * win[j];
    }
    fftw_execute_dft_r2c(fft.forward, fft.real, fft.spec);
    for (std::size_t k = 0; k <= len / 2; ++k) {
      psd.s[k] += fft.spec[k][0] * fft.spec[k][0] +
                  fft.spec[k][1] * fft.spec[k][1];
    }
    ++count;
  }
  const double norm = trace.dt / (len * u * count);
  for (std::size_t k = 0; k <= len / 2; ++k) {
    psd.f[k] = k / (len * trace.dt);
    psd.s[k] *= norm;
  }
  return psd;
}

void write_trace_csv(std::ostream& os, const NoiseTrace& trace) {
  char buf[64];
  os << "t_s,dphi_phi0\n";
  for (std::size_t j = 0; j < trace.samples.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", j * trace.dt,
                  trace.samples[j]);
    os << buf;
  }
}

void write_psd_csv(std::ostream& os, const Psd& psd) {
  char buf[64];
  os << "f_hz,psd_phi0sq_per_hz\n";
  for (std::size_t k = 0; k < psd.f.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", psd.f[k], psd.s[k]);
    os << buf;
  }
}

}  // namespace fluxmod::noise
