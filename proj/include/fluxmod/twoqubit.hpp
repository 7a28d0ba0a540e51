#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include "fluxmod/modulation.hpp"
#include "fluxmod/noise.hpp"
#include "fluxmod/ode.hpp"
#include "fluxmod/transmon.hpp"

namespace fluxmod::twoqubit {

using cplx = std::complex<double>;

/// Three levels per transmon; states |nF nT> are indexed 3 nF + nT, the
/// computational ones 2 nF + nT.
inline constexpr int kLevels = 3;
inline constexpr int kDim = kLevels * kLevels;
inline constexpr int kQubitDim = 4;

/// Fixed-frequency transmon F capacitively coupled to a flux-tunable
/// transmon T. Frequencies angular (rad/s), rates 1/s.
struct TwoQubitSystem {
  double fixed_f = 0.0;
  double fixed_eta = 0.0;  ///< positive; level 2 sits at 2 w_F - eta_F
  transmon::TransmonParams tunable;
  double g = 0.0;
  double gamma1_f = 0.0;
  double gamma1_t = 0.0;
  double gammaphi_f = 0.0;
  double gammaphi_bkgd = 0.0;

  void validate() const;
};

/// Coherence times (s); zero or infinity disables a channel.
struct CoherenceTimes {
  double t1_f = 0.0;
  double t1_t = 0.0;
  double t2star_f = 0.0;
  double tphi_bkgd = 0.0;
};

/// Fills the relaxation and background rates of `sys`. The fixed qubit's
/// pure dephasing is 1/T2* - 1/(2 T1).
void apply_coherence_times(TwoQubitSystem& sys, const CoherenceTimes& times);

/// Flux-noise dephasing of the tunable qubit during the gate.
struct DecoherenceConfig {
  double gammaphi_w = 0.0;     ///< white-noise rate (1/s)
  double gammaphi_pink = 0.0;  ///< 1/f rate (1/s) with exponent beta
  double beta = 2.0;
  double lambda_qutrit = 1.0;  ///< weight of |2><2| in the flux dissipators

  void validate() const;
};

/// eta'/omega' for the tunable qubit at transition frequency omega.
double qutrit_kappa(const transmon::TransmonParams& params, double omega);
/// |1 - kappa/2|.
double qutrit_lambda(const transmon::TransmonParams& params, double omega);

enum class Gate { identity, cz02, cz20, iswap };
const char* gate_name(Gate gate);

/// Modulation frequencies (Hz) that bring a transition into resonance with
/// the second harmonic of the tunable frequency (the first one present at
/// phi_dc = 0), and the frequencies at which the fourth harmonic does.
struct GateFrequencies {
  double cz02 = 0.0;
  double cz20 = 0.0;
  double iswap = 0.0;
  double cz02_h2 = 0.0;
  double cz20_h2 = 0.0;
  double iswap_h2 = 0.0;
};

GateFrequencies gate_frequencies(const TwoQubitSystem& sys,
                                 const transmon::StaticCoeffs& coeffs,
                                 double phi_dc, double phi_ac);

/// sqrt(2) g J_1(omega_2 / (2 w_m)) in rad/s, omega_2 the second harmonic
/// of the tunable frequency.
double effective_coupling_closed(const TwoQubitSystem& sys,
                                 const transmon::StaticCoeffs& coeffs,
                                 double phi_dc, double phi_ac, double f_m);

struct EvolveOptions {
  ode::Options ode{};
  /// Integrate in the interaction frame of the diagonal Hamiltonian (fast).
  /// The lab frame is kept as a cross-check.
  bool lab_frame = false;
};

/// |11> -> |02> transfer under a square pulse.
struct RabiFit {
  double f_m = 0.0;     ///< Hz
  double g_eff = 0.0;   ///< rad/s, pi / (2 t_peak)
  double t_peak = 0.0;  ///< first maximum of P_02 (s)
  double p_peak = 0.0;
};

/// Evolves |11> (or |11> for the |20> target when gate = cz20) with a square
/// pulse up to t_max and locates the first transfer maximum.
RabiFit rabi_transfer(const TwoQubitSystem& sys, double phi_dc, double phi_ac,
                      double f_m, double t_max, Gate gate = Gate::cz02,
                      const EvolveOptions& opts = {});

/// Scans f_m over f_guess +- span in steps of `step` and keeps the largest
/// transfer maximum; the numeric effective coupling at resonance.
RabiFit tune_resonance(const TwoQubitSystem& sys,
                       const transmon::StaticCoeffs& coeffs, double phi_dc,
                       double phi_ac, double f_guess, Gate gate = Gate::cz02,
                       double span = 5e6, double step = 0.1e6,
                       const EvolveOptions& opts = {});

/// pi / g_eff + 2 t_ramp. Throws DomainError when g_eff <= 0.
double gate_time(double g_eff, double t_ramp);

/// Pauli transfer matrix R_ij = Tr[P_i E(P_j)] / 4 over the normalised
/// two-qubit Pauli basis P_{4a+b} = sigma_a (x) sigma_b (fixed qubit first),
/// with E the map induced on the computational subspace.
struct ProcessMatrix {
  std::array<double, 256> r{};

  double operator()(int i, int j) const { return r[i * 16 + j]; }
  double& operator()(int i, int j) { return r[i * 16 + j]; }
  /// Population lost from the computational subspace, 1 - R_00.
  double leakage() const { return 1.0 - r[0]; }
};

/// Ideal unitary on the computational subspace (row-major 4x4).
std::array<cplx, 16> ideal_unitary(Gate gate);
ProcessMatrix unitary_ptm(const std::array<cplx, 16>& u);

/// Builds the transfer matrix from images of the matrix units:
/// images[4a + b] = E(|a><b|) as a row-major 4x4 block.
ProcessMatrix ptm_from_images(const std::vector<std::array<cplx, 16>>& images);

struct GateResult {
  double fidelity = 0.0;
  double fidelity_raw = 0.0;  ///< before the Z-rotation optimisation
  double theta_f = 0.0;
  double theta_t = 0.0;
  double f_m_opt = 0.0;
  double t_f_opt = 0.0;
  double leakage = 0.0;
};

/// (Tr[R_ideal^T R] + d) / (d (d + 1)); with `optimize`, maximised over
/// R_Z(theta_F) (x) R_Z(theta_T) applied after the process (64 x 64 grid,
/// then local refinement).
GateResult average_fidelity(const ProcessMatrix& process, Gate ideal,
                            bool optimize);

/// Transfer matrix of the gate driven by `mod` on the tunable qubit.
/// Without any decoherence the four computational kets are propagated;
/// otherwise the sixteen matrix units go through the Lindblad equation as
/// one batch. The result is expressed in the interaction frame of the
/// diagonal Hamiltonian, i.e. up to deterministic single-qubit Z phases.
ProcessMatrix evolve_process(const TwoQubitSystem& sys,
                             const modulation::ModulationSpec& mod,
                             const DecoherenceConfig& dec,
                             const EvolveOptions& opts = {});

/// Density matrix (row-major 9x9) sampled at `times` (ascending, >= 0),
/// same dynamics and frame as evolve_process.
std::vector<std::vector<cplx>> evolve_density(
    const TwoQubitSystem& sys, const modulation::ModulationSpec& mod,
    const DecoherenceConfig& dec, const std::vector<cplx>& rho0,
    const std::vector<double>& times, const EvolveOptions& opts = {});

/// Calibration of one operating point: resonance scan, numeric g_eff, gate
/// time, then a joint Nelder-Mead on (f_m, t_f) for the coherent fidelity.
struct TunedGate {
  modulation::ModulationSpec mod;
  RabiFit rabi;
  GateResult coherent;
};

struct TuneOptions {
  double t_ramp = 10e-9;
  double scan_span = 5e6;
  double scan_step = 0.1e6;
  bool refine = true;
  int max_refine_evals = 60;
  EvolveOptions evolve{};
};

TunedGate tune_gate(const TwoQubitSystem& sys,
                    const transmon::StaticCoeffs& coeffs, double phi_dc,
                    double phi_ac, Gate gate, const TuneOptions& opts = {});

struct FidelitySweepConfig {
  double phi_dc = 0.0;
  Gate gate = Gate::cz02;
  noise::NoiseSpec noise{};
  /// If positive, the lowpass corner is this multiple of f_m at each point.
  double lowpass_factor = 0.0;
  double beta = 2.0;
  TuneOptions tune{};
  int threads = 1;
};

struct FidelityRow {
  double phi_ac = 0.0;
  double f_m_hz = 0.0;
  double geff_hz = 0.0;
  double tcz_s = 0.0;
  double infidelity = 0.0;
  double infidelity_nodecoherence = 0.0;
  double leakage = 0.0;
  double gammaphi_w = 0.0;
  double gammaphi_pink = 0.0;
};

/// Optimised infidelity along a grid of modulation amplitudes, with the
/// flux-noise rates of each point taken from the analytic dephasing model.
std::vector<FidelityRow> fidelity_sweep(const TwoQubitSystem& sys,
                                        const std::vector<double>& phi_ac_grid,
                                        const FidelitySweepConfig& cfg);

/// 1 - c (t_cz / t_phi)^beta with c = 61/80 (CZ02) or 29/80 (CZ20).
/// Throws DomainError unless 0 <= t_cz / t_phi < 0.2.
double asymptotic_fidelity(double t_cz, double t_phi, double beta, Gate gate);

/// Resonant exchange |11> <-> |02> (or |20>) at rate g_eff under 1/f
/// dephasing of the tunable qubit with Ramsey decay exp(-(t/t_phi)^beta).
struct IdealGateNoise {
  Gate gate = Gate::cz02;
  double t_phi = 18e-6;
  double beta = 1.9;
  double kappa = 0.0;  ///< eta'/omega'; level 2 of T shifts by (2 - kappa) d omega
  double f_m = 300e6;  ///< kept for bookkeeping; the ideal model has no carrier
};

/// Master-equation fidelity with the time-dependent qutrit dissipator.
double ideal_gate_me_fidelity(const IdealGateNoise& model, double g_eff,
                              const ode::Options& opts = {});

/// Fidelity of the trajectory-averaged process, phase noise sampled as a
/// Gaussian process with the exact Ramsey variance 2 (t/t_phi)^beta.
struct CoherentAverage {
  double fidelity = 0.0;
  double std_error = 0.0;
};

CoherentAverage ideal_gate_coherent_average(const IdealGateNoise& model,
                                            double g_eff, int n_traj,
                                            int n_segments, std::uint64_t seed,
                                            int threads = 1);

struct IdealGateRow {
  double tcz_over_tphi = 0.0;
  double f_me = 0.0;
  double f_avg_coherent = 0.0;
  double f_avg_std_error = 0.0;
  double f_asymptotic = 0.0;
  Gate gate = Gate::cz02;
};

std::vector<IdealGateRow> coherent_noise_average(
    const IdealGateNoise& model, const std::vector<double>& g_eff_grid,
    int n_traj, int n_segments, std::uint64_t seed, int threads = 1);

}  // namespace fluxmod::twoqubit
