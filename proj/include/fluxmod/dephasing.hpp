#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fluxmod/modulation.hpp"
#include "fluxmod/noise.hpp"
#include "fluxmod/transmon.hpp"

namespace fluxmod::dephasing {

/// Rates of the decay |rho01(t)| = exp(-(gamma_pink t)^2 - gamma_white t).
struct DephasingRates {
  double gamma_pink = 0.0;
  double gamma_white = 0.0;
  /// White rate when both flux lines are lowpass filtered (k_uv = 1).
  double gamma_white_filtered = 0.0;
  /// White rate when one filter acts on the total flux signal.
  double gamma_white_shared = 0.0;
  /// Same, treating the filtered sum as stationary noise of density
  /// S(w_m) = A_dc^2 + A_ac^2 / 2 (exact only without AC white noise).
  double gamma_white_shared_stationary = 0.0;
  std::vector<double> b_k;  ///< oscillation amplitudes, k = 1 .. K
  double lambda_used = 0.0;
  int k_uv = 0;
};

/// sqrt(3/2 - gamma_E - ln(2 pi f_ir t)); requires 2 pi f_ir t < 0.1.
double lambda_factor(double f_ir, double t);

DephasingRates analytic_rates(const modulation::FourierSeries& series,
                              const noise::NoiseSpec& spec, double f_m,
                              double lambda);

/// Pink rate with lambda evaluated self-consistently at t = 1/gamma_pink.
/// Returns the rates; lambda_used reports the converged value (3 when the
/// pink rate vanishes).
DephasingRates analytic_rates_self_consistent(
    const modulation::FourierSeries& series, const noise::NoiseSpec& spec,
    double f_m);

struct CoherenceCurve {
  std::vector<double> t;
  std::vector<double> magnitude;
  int n_windows = 0;
};

struct McBudget {
  int n_windows = 4000;
  double window_len = 250e-6;  ///< s
  double dt = 50e-9;           ///< step of the low-frequency noise (s)
  double dt_white = 0.0;       ///< fine step when white noise is present; 0 -> 1/(32 f_m)
  int n_times = 200;           ///< output points per curve
  /// Independent pink traces the windows are spread over (round robin).
  int n_traces = 1;
  int threads = 1;

  void validate() const;
};

/// Simulated Ramsey experiment under a constant-amplitude modulation.
/// Each window accumulates phi(t) = int [omega_T(Phi + dPhi) - omega_T(Phi)]
/// with the full nonlinear flux-to-frequency map; returns |<e^{i phi}>|.
CoherenceCurve ramsey_mc(const transmon::TransmonParams& params,
                         const modulation::ModulationSpec& mod,
                         const noise::NoiseSpec& spec, const McBudget& budget,
                         std::uint64_t seed);

/// Effective infrared cutoff of a finite pink trace of the given duration.
double effective_f_ir(double trace_duration);
/// lambda for the discrete spectrum a ramsey_mc run realizes: FFT lines of
/// the finite trace, the sample-and-hold response of the step dt, and the
/// removal of the component common to all windows.
double lambda_for_budget(const McBudget& budget, double t);
/// Duration of the pink trace ramsey_mc synthesizes for a budget.
double pink_trace_duration(const McBudget& budget);

enum class FitModel { stretched, combined };

struct DecayFit {
  double gamma = 0.0;
  double beta = 1.0;
  double residual = 0.0;
  FitModel model = FitModel::stretched;
  /// The curve never decayed enough: gamma is an upper bound.
  bool censored = false;
  double gamma_white = 0.0;  ///< combined model: linear coefficient
  double gamma_pink = 0.0;   ///< combined model: sqrt of quadratic coefficient
};

/// Fits gamma(t) = -ln|rho01| to (Gamma t)^beta (log-log least squares) or
/// to a t + b t^2. Points too close to 1 or to the statistical floor of
/// n_windows unit phasors are excluded.
DecayFit fit_decay(const CoherenceCurve& curve, FitModel model);

enum class SweepMode { analytic, mc };
const char* sweep_mode_name(SweepMode mode);

struct SweepRow {
  double phi_ac = 0.0;
  double tphi_pink = 0.0;
  double tphi_white = 0.0;
  double tphi_white_lp = 0.0;
  double beta = 0.0;
  SweepMode mode = SweepMode::analytic;
  /// Bit set: 1 pink, 2 white, 4 filtered; marks times that were clamped
  /// (analytic) or are lower bounds (censored MC fits).
  int clamped = 0;
};

struct SweepOptions {
  bool pink = true;
  bool white = true;
  bool filtered = true;
  double phi_dc = 0.0;
  double theta_m = 0.0;
  McBudget budget;
  std::uint64_t seed = 1;
};

inline constexpr double kTimeClamp = 10.0;

std::vector<SweepRow> sweep_dephasing(const transmon::TransmonParams& params,
                                      const noise::NoiseSpec& spec, double f_m,
                                      const std::vector<double>& phi_ac_grid,
                                      SweepMode mode,
                                      const SweepOptions& opts);

}  // namespace fluxmod::dephasing
