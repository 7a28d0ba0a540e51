#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace fluxmod::noise {

/// Flux-noise amplitudes. PSDs are two-sided in f:
///   pink  S(f) = A^2 / |f|^alpha   (A is the amplitude at 1 Hz, Phi0)
///   white S(f) = A_w^2             (A_w in Phi0/sqrt(Hz))
struct NoiseSpec {
  double a_dc_pink = 0.0;
  double a_ac_pink = 0.0;
  double a_dc_white = 0.0;
  double a_ac_white = 0.0;
  double alpha = 1.0;
  double f_ir = 1.0;     ///< Hz
  double f_uv = 3e9;     ///< Hz; bounds the harmonic sum of the white rate
  double lowpass_cutoff = 0.0;  ///< Hz; 0 disables filtering
  /// Filter the total flux-noise signal with one filter instead of the
  /// DC and AC lines separately.
  bool shared_filter = false;

  bool has_pink() const { return a_dc_pink > 0.0 || a_ac_pink > 0.0; }
  bool has_white() const { return a_dc_white > 0.0 || a_ac_white > 0.0; }
  bool filtered() const { return lowpass_cutoff > 0.0; }
  void validate() const;
};

enum class TraceKind { white, pink, filtered };
const char* trace_kind_name(TraceKind kind);

struct NoiseTrace {
  double dt = 0.0;
  std::vector<double> samples;
  TraceKind kind = TraceKind::white;
  std::uint64_t seed = 0;
};

enum class Rolloff { brick_wall, order4 };

/// i.i.d. Gaussian samples with variance amplitude^2 / dt.
NoiseTrace synth_white(double amplitude, double dt, std::size_t n,
                       std::uint64_t seed);

/// Spectrally shaped Gaussian noise with two-sided PSD A^2/|f|^alpha on the
/// FFT grid; the DC bin is zero. n must be a power of two >= 1024.
NoiseTrace synth_pink(double amplitude, double alpha, double dt, std::size_t n,
                      std::uint64_t seed);

/// White noise already passed through a brick-wall lowpass: flat two-sided
/// PSD amplitude^2 up to `cutoff`, zero above. Same distribution as
/// lowpass(synth_white(...)) on a circular trace, at one inverse FFT.
void synth_white_lowpass(double amplitude, double dt, double cutoff,
                         std::span<double> out, std::uint64_t seed);

/// In-place spectral lowpass on a real sequence of any length.
void lowpass_inplace(std::span<double> x, double dt, double cutoff,
                     Rolloff rolloff = Rolloff::brick_wall);

NoiseTrace lowpass(const NoiseTrace& trace, double cutoff,
                   Rolloff rolloff = Rolloff::brick_wall);

struct Psd {
  std::vector<double> f;  ///< Hz, 0 .. Nyquist
  std::vector<double> s;  ///< two-sided density, Phi0^2/Hz

  /// Integral of the two-sided density over all frequencies.
  double total_power() const;
};

/// Welch estimate: Hann-windowed segments of length n / n_segments with 50%
/// overlap.
Psd estimate_psd(const NoiseTrace& trace, int n_segments);

void write_trace_csv(std::ostream& os, const NoiseTrace& trace);
void write_psd_csv(std::ostream& os, const Psd& psd);

bool is_power_of_two(std::size_t n);

}  // namespace fluxmod::noise
