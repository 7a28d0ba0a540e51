#include "fluxmod/twoqubit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "fluxmod/dephasing.hpp"
#include "fluxmod/errors.hpp"
#include "fluxmod/parallel.hpp"
#include "fluxmod/rng.hpp"
#include "fluxmod/simd/kernels.hpp"
#include "fluxmod/units.hpp"
#include "nelder_mead.hpp"

namespace fluxmod::twoqubit {

namespace {

using simd::SparseTerm;
using Mat4 = std::array<cplx, 16>;

constexpr int nf(int a) { return a / kLevels; }
constexpr int nt(int a) { return a % kLevels; }
constexpr int full_index(int c) { return kLevels * (c / 2) + c % 2; }
// n(n-1)/2: how many times the anharmonicity enters level n.
constexpr double anh_count(int n) { return n == 2 ? 1.0 : 0.0; }

const double kSqrt2 = std::sqrt(2.0);

double ladder(int m, int n) {
  // <m| (b + b^dagger) |n> on three levels.
  if (m == n + 1) return std::sqrt(static_cast<double>(m));
  if (n == m + 1) return std::sqrt(static_cast<double>(n));
  return 0.0;
}

// g (b_F + b_F^dag)(b_T + b_T^dag) without the coupling constant.
std::vector<SparseTerm> coupling_pattern() {
  std::vector<SparseTerm> out;
  for (int a = 0; a < kDim; ++a) {
    for (int b = 0; b < kDim; ++b) {
      const double v = ladder(nf(a), nf(b)) * ladder(nt(a), nt(b));
      if (v != 0.0) out.push_back({a, b, v});
    }
  }
  return out;
}

// Lowering operator of one transmon; `fixed` picks the first factor.
std::vector<SparseTerm> lowering(bool fixed) {
  std::vector<SparseTerm> out;
  for (int a = 0; a < kDim; ++a) {
    for (int b = 0; b < kDim; ++b) {
      const bool other_same = fixed ? nt(a) == nt(b) : nf(a) == nf(b);
      const int m = fixed ? nf(a) : nt(a);
      const int n = fixed ? nf(b) : nt(b);
      if (other_same && n == m + 1) out.push_back({a, b, std::sqrt(double(n))});
    }
  }
  return out;
}

// Tunable frequency and anharmonicity along the pulse.
struct Drive {
  transmon::TransmonParams params;
  modulation::ModulationSpec mod;
  bool modulated = false;
  double omega_ref = 0.0;
  double eta_ref = 0.0;

  Drive(const transmon::TransmonParams& p, const modulation::ModulationSpec& m)
      : params(p), mod(m) {
    modulated = m.phi_ac > 0.0;
    if (modulated) {
      const auto coeffs = transmon::static_coeffs(p);
      const auto series = modulation::fourier_series(coeffs, m.phi_dc, m.phi_ac, 2);
      omega_ref = modulation::average_frequency(series);
      eta_ref = modulation::average_anharmonicity(p, m.phi_dc, m.phi_ac);
    } else {
      omega_ref = transmon::frequency(p, m.phi_dc);
      eta_ref = transmon::anharmonicity_from_frequency(p.e_c, omega_ref);
    }
  }

  void at(double t, double& omega, double& eta) const {
    if (!modulated) {
      omega = omega_ref;
      eta = eta_ref;
      return;
    }
    omega = transmon::frequency(params, mod.flux(t));
    eta = transmon::anharmonicity_from_frequency(params.e_c, omega);
  }
};

double dephasing_weight(double la, double lb) { return -0.5 * (la - lb) * (la - lb); }

// Right-hand side of the 9-level problem. State layout: the operator (or
// ket) stack first, then the two frame phases
//   theta1 = int (omega_T - omega_ref), theta2 = int (eta_T - eta_ref).
class Model {
 public:
  Model(const TwoQubitSystem& sys, const modulation::ModulationSpec& mod,
        const DecoherenceConfig& dec, bool lab)
      : sys_(sys), dec_(dec), drive_(sys.tunable, mod), lab_(lab) {
    pattern_ = coupling_pattern();
    low_f_ = lowering(true);
    low_t_ = lowering(false);
    h_.resize(pattern_.size() + (lab_ ? kDim : 0));
    jf_ = low_f_;
    jt_ = low_t_;

    const double lam = dec_.lambda_qutrit;
    w_static_.assign(kDim * kDim, 0.0);
    w_pink_.assign(kDim * kDim, 0.0);
    for (int i = 0; i < kDim; ++i) {
      for (int j = 0; j < kDim; ++j) {
        auto lt = [&](int a) { return nt(a) == 2 ? 2.0 * lam : double(nt(a)); };
        double w = -0.5 * sys_.gamma1_f * (nf(i) + nf(j)) -
                   0.5 * sys_.gamma1_t * (nt(i) + nt(j));
        w += 2.0 * sys_.gammaphi_f * dephasing_weight(nf(i), nf(j));
        w += 2.0 * sys_.gammaphi_bkgd * dephasing_weight(nt(i), nt(j));
        w += 2.0 * dec_.gammaphi_w * dephasing_weight(lt(i), lt(j));
        w_static_[i * kDim + j] = w;
        w_pink_[i * kDim + j] = dephasing_weight(lt(i), lt(j));
      }
    }
    w_.assign(kDim * kDim, 0.0);
  }

  bool dissipative() const {
    return sys_.gamma1_f > 0.0 || sys_.gamma1_t > 0.0 || sys_.gammaphi_f > 0.0 ||
           sys_.gammaphi_bkgd > 0.0 || dec_.gammaphi_w > 0.0 ||
           dec_.gammaphi_pink > 0.0;
  }

  const Drive& drive() const { return drive_; }

  // Frame phases Theta_a for all nine levels.
  void frame_phases(double t, double th1, double th2, double* theta) const {
    for (int a = 0; a < kDim; ++a) {
      const int f = nf(a), n = nt(a);
      theta[a] = (f * sys_.fixed_f - anh_count(f) * sys_.fixed_eta) * t +
                 n * (drive_.omega_ref * t + th1) -
                 anh_count(n) * (drive_.eta_ref * t + th2);
    }
  }

  void terms(double t, double th1, double th2) {
    if (lab_) {
      double om = 0.0, eta = 0.0;
      drive_.at(t, om, eta);
      std::size_t k = 0;
      for (const auto& p : pattern_) h_[k++] = {p.row, p.col, sys_.g * p.value};
      for (int a = 0; a < kDim; ++a) {
        const double e = nf(a) * sys_.fixed_f - anh_count(nf(a)) * sys_.fixed_eta +
                         nt(a) * om - anh_count(nt(a)) * eta;
        h_[k++] = {a, a, e};
      }
      return;
    }
    double theta[kDim];
    frame_phases(t, th1, th2, theta);
    cplx ph[kDim];
    for (int a = 0; a < kDim; ++a) ph[a] = std::polar(1.0, theta[a]);
    for (std::size_t k = 0; k < pattern_.size(); ++k) {
      const auto& p = pattern_[k];
      h_[k] = {p.row, p.col, sys_.g * p.value.real() * ph[p.row] * std::conj(ph[p.col])};
    }
    for (std::size_t k = 0; k < low_f_.size(); ++k) {
      const auto& p = low_f_[k];
      jf_[k].value = p.value * ph[p.row] * std::conj(ph[p.col]);
    }
    for (std::size_t k = 0; k < low_t_.size(); ++k) {
      const auto& p = low_t_[k];
      jt_[k].value = p.value * ph[p.row] * std::conj(ph[p.col]);
    }
  }

  double pink_rate(double t) const {
    if (dec_.gammaphi_pink <= 0.0) return 0.0;
    const double b = dec_.beta;
    return 2.0 * b * std::pow(t, b - 1.0) * std::pow(dec_.gammaphi_pink, b);
  }

  void phase_rates(double t, cplx* d) const {
    double om = 0.0, eta = 0.0;
    drive_.at(t, om, eta);
    d[0] = om - drive_.omega_ref;
    d[1] = eta - drive_.eta_ref;
  }

  void density_rhs(double t, int batch, const cplx* y, cplx* dy) {
    const std::size_t n = static_cast<std::size_t>(kDim) * kDim * batch;
    terms(t, y[n].real(), y[n + 1].real());
    std::span<const cplx> in(y, n);
    std::span<cplx> out(dy, n);
    simd::commutator_batch(h_, kDim, batch, in, out);
    if (sys_.gamma1_f > 0.0) simd::sandwich_batch(jf_, sys_.gamma1_f, kDim, batch, in, out);
    if (sys_.gamma1_t > 0.0) simd::sandwich_batch(jt_, sys_.gamma1_t, kDim, batch, in, out);
    const double rp = pink_rate(t);
    for (int e = 0; e < kDim * kDim; ++e) w_[e] = w_static_[e] + rp * w_pink_[e];
    simd::elementwise_batch(w_, kDim, batch, in, out);
    phase_rates(t, dy + n);
  }

  void ket_rhs(double t, int batch, const cplx* y, cplx* dy) {
    const std::size_t n = static_cast<std::size_t>(kDim) * batch;
    terms(t, y[n].real(), y[n + 1].real());
    std::fill(dy, dy + n, cplx(0.0));
    for (const auto& term : h_) {
      const cplx v = cplx(0.0, -1.0) * term.value;
      const cplx* src = y + static_cast<std::size_t>(term.col) * batch;
      cplx* dst = dy + static_cast<std::size_t>(term.row) * batch;
      for (int b = 0; b < batch; ++b) dst[b] += v * src[b];
    }
    phase_rates(t, dy + n);
  }

 private:
  TwoQubitSystem sys_;
  DecoherenceConfig dec_;
  Drive drive_;
  bool lab_;
  std::vector<SparseTerm> pattern_, low_f_, low_t_;
  std::vector<SparseTerm> h_, jf_, jt_;
  std::vector<double> w_static_, w_pink_, w_;
};

ode::Options carrier_options(const EvolveOptions& opts,
                             const modulation::ModulationSpec& mod) {
  ode::Options o = opts.ode;
  if (mod.phi_ac > 0.0) {
    const double h = 1.0 / (20.0 * mod.f_m);
    o.h_max = o.h_max > 0.0 ? std::min(o.h_max, h) : h;
  }
  return o;
}

const std::array<Mat4, 16>& paulis() {
  static const std::array<Mat4, 16> p = [] {
    const cplx I(0.0, 1.0);
    const std::array<std::array<cplx, 4>, 4> s = {{
        {1.0, 0.0, 0.0, 1.0},
        {0.0, 1.0, 1.0, 0.0},
        {0.0, -I, I, 0.0},
        {1.0, 0.0, 0.0, -1.0},
    }};
    std::array<Mat4, 16> out{};
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        Mat4& m = out[4 * a + b];
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
              for (int l = 0; l < 2; ++l)
                m[(2 * i + j) * 4 + 2 * k + l] = s[a][2 * i + k] * s[b][2 * j + l];
      }
    }
    return out;
  }();
  return p;
}

// E(|a><b|) recovered from the transfer matrix.
std::vector<Mat4> images_from_ptm(const ProcessMatrix& r) {
  const auto& P = paulis();
  std::vector<Mat4> out(16);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      Mat4 m{};
      for (int j = 0; j < 16; ++j) {
        const cplx cj = P[j][b * 4 + a] / 4.0;  // Tr(P_j |a><b|) / d
        if (cj == 0.0) continue;
        for (int i = 0; i < 16; ++i) {
          const double rij = r(i, j);
          if (rij == 0.0) continue;
          for (int e = 0; e < 16; ++e) m[e] += cj * rij * P[i][e];
        }
      }
      out[4 * a + b] = m;
    }
  }
  return out;
}

std::vector<Mat4> images_from_kets(const std::vector<cplx>& psi, int batch) {
  // psi[(level)*batch + a] for computational input a.
  std::vector<Mat4> out(16);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      Mat4 m{};
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d)
          m[c * 4 + d] = psi[full_index(c) * batch + a] *
                         std::conj(psi[full_index(d) * batch + b]);
      out[4 * a + b] = m;
    }
  }
  return out;
}

std::vector<Mat4> images_from_density(const std::vector<cplx>& rho, int batch) {
  std::vector<Mat4> out(16);
  for (int k = 0; k < 16; ++k) {
    Mat4 m{};
    for (int c = 0; c < 4; ++c)
      for (int d = 0; d < 4; ++d)
        m[c * 4 + d] =
            rho[(static_cast<std::size_t>(full_index(c)) * kDim + full_index(d)) * batch + k];
    out[k] = m;
  }
  return out;
}

}  // namespace

void TwoQubitSystem::validate() const {
  if (!(g > 0.0)) throw DomainError("TwoQubitSystem: g must be positive");
  if (!(fixed_f > 0.0) || !(fixed_eta > 0.0)) {
    throw DomainError("TwoQubitSystem: fixed qubit frequency and anharmonicity must be positive");
  }
  for (double r : {gamma1_f, gamma1_t, gammaphi_f, gammaphi_bkgd}) {
    if (!(r >= 0.0)) throw DomainError("TwoQubitSystem: rates must be >= 0");
  }
  tunable.validate();
}

void apply_coherence_times(TwoQubitSystem& sys, const CoherenceTimes& t) {
  auto rate = [](double time) {
    return time > 0.0 && std::isfinite(time) ? 1.0 / time : 0.0;
  };
  sys.gamma1_f = rate(t.t1_f);
  sys.gamma1_t = rate(t.t1_t);
  sys.gammaphi_bkgd = rate(t.tphi_bkgd);
  sys.gammaphi_f = rate(t.t2star_f) > 0.0 ? rate(t.t2star_f) - 0.5 * sys.gamma1_f : 0.0;
  if (sys.gammaphi_f < 0.0) {
    throw DomainError("apply_coherence_times: T2* exceeds 2 T1 on the fixed qubit");
  }
}

void DecoherenceConfig::validate() const {
  if (!(gammaphi_w >= 0.0 && gammaphi_pink >= 0.0)) {
    throw DomainError("DecoherenceConfig: rates must be >= 0");
  }
  if (!(beta >= 1.0)) throw DomainError("DecoherenceConfig: beta must be >= 1");
  if (!(lambda_qutrit > 0.0)) throw DomainError("DecoherenceConfig: lambda must be positive");
}

double qutrit_kappa(const transmon::TransmonParams& params, double omega) {
  return transmon::anharmonicity_slope(params.e_c, omega);
}

double qutrit_lambda(const transmon::TransmonParams& params, double omega) {
  return std::fabs(1.0 - 0.5 * qutrit_kappa(params, omega));
}

const char* gate_name(Gate gate) {
  switch (gate) {
    case Gate::identity: return "identity";
    case Gate::cz02: return "CZ02";
    case Gate::cz20: return "CZ20";
    case Gate::iswap: return "iSWAP";
  }
  return "?";
}

GateFrequencies gate_frequencies(const TwoQubitSystem& sys,
                                 const transmon::StaticCoeffs& coeffs,
                                 double phi_dc, double phi_ac) {
  const auto series = modulation::fourier_series(coeffs, phi_dc, phi_ac, 2);
  const double w_bar = modulation::average_frequency(series);
  const double eta_bar =
      modulation::average_anharmonicity(coeffs.params, phi_dc, phi_ac);
  GateFrequencies out;
  out.cz02 = angular_to_hz(std::fabs(w_bar - sys.fixed_f - eta_bar) / 2.0);
  out.cz20 = angular_to_hz(std::fabs(w_bar - sys.fixed_f + sys.fixed_eta) / 2.0);
  out.iswap = angular_to_hz(std::fabs(w_bar - sys.fixed_f) / 2.0);
  out.cz02_h2 = out.cz02 / 2.0;
  out.cz20_h2 = out.cz20 / 2.0;
  out.iswap_h2 = out.iswap / 2.0;
  return out;
}

double effective_coupling_closed(const TwoQubitSystem& sys,
                                 const transmon::StaticCoeffs& coeffs,
                                 double phi_dc, double phi_ac, double f_m) {
  const auto series = modulation::fourier_series(coeffs, phi_dc, phi_ac, 2);
  const double wm = hz_to_angular(f_m);
  return kSqrt2 * sys.g * specialfn::bessel_j(1, std::fabs(series.omega[2]) / (2.0 * wm));
}

double gate_time(double g_eff, double t_ramp) {
  if (!(g_eff > 0.0)) {
    throw DomainError("gate_time: effective coupling vanishes (degenerate operating point)");
  }
  if (!(t_ramp >= 0.0)) throw DomainError("gate_time: t_ramp must be >= 0");
  return kPi / g_eff + 2.0 * t_ramp;
}

RabiFit rabi_transfer(const TwoQubitSystem& sys, double phi_dc, double phi_ac,
                      double f_m, double t_max, Gate gate,
                      const EvolveOptions& opts) {
  if (!(t_max > 0.0)) throw DomainError("rabi_transfer: t_max must be positive");
  modulation::ModulationSpec mod;
  mod.phi_dc = phi_dc;
  mod.phi_ac = phi_ac;
  mod.f_m = f_m;
  mod.t_ramp = 0.0;
  mod.t_f = t_max;
  TwoQubitSystem coherent = sys;
  coherent.gamma1_f = coherent.gamma1_t = coherent.gammaphi_f = coherent.gammaphi_bkgd = 0.0;
  Model model(coherent, mod, {}, opts.lab_frame);

  int from = 3 * 1 + 1;
  int to = 3 * 0 + 2;
  if (gate == Gate::cz20) to = 3 * 2 + 0;
  if (gate == Gate::iswap) {
    from = 3 * 0 + 1;
    to = 3 * 1 + 0;
  }
  std::vector<cplx> y(kDim + 2, 0.0);
  y[from] = 1.0;
  ode::Stepper stepper(
      [&](double t, const cplx* in, cplx* out) { model.ket_rhs(t, 1, in, out); },
      y.size(), carrier_options(opts, mod));

  constexpr int kSamples = 400;
  std::vector<double> ts(kSamples + 1), ps(kSamples + 1);
  double t = 0.0;
  ts[0] = 0.0;
  ps[0] = std::norm(y[to]);
  for (int i = 1; i <= kSamples; ++i) {
    const double te = t_max * i / kSamples;
    stepper.advance_to(t, te, y);
    ts[i] = te;
    ps[i] = std::norm(y[to]);
  }
  const int imax = static_cast<int>(std::max_element(ps.begin(), ps.end()) - ps.begin());
  RabiFit fit;
  fit.f_m = f_m;
  fit.t_peak = ts[imax];
  fit.p_peak = ps[imax];
  if (imax > 0 && imax < kSamples) {
    const double pm = ps[imax - 1], p0 = ps[imax], pp = ps[imax + 1];
    const double den = pm - 2.0 * p0 + pp;
    if (den < 0.0) {
      const double off = 0.5 * (pm - pp) / den;
      fit.t_peak = ts[imax] + off * (ts[1] - ts[0]);
      fit.p_peak = p0 - 0.25 * (pm - pp) * off;
    }
  }
  fit.g_eff = fit.t_peak > 0.0 ? kPi / (2.0 * fit.t_peak) : 0.0;
  return fit;
}

RabiFit tune_resonance(const TwoQubitSystem& sys,
                       const transmon::StaticCoeffs& coeffs, double phi_dc,
                       double phi_ac, double f_guess, Gate gate, double span,
                       double step, const EvolveOptions& opts) {
  if (!(step > 0.0) || !(span >= 0.0)) {
    throw DomainError("tune_resonance: need step > 0 and span >= 0");
  }
  const double g_closed =
      effective_coupling_closed(sys, coeffs, phi_dc, phi_ac, f_guess);
  if (!(g_closed > 0.0)) {
    throw DomainError("tune_resonance: no sideband coupling at phi_ac = " +
                      std::to_string(phi_ac));
  }
  // Window for the first transfer maximum, with room for the closed form
  // overestimating the coupling.
  const double t_est = kPi / (2.0 * g_closed);
  const double t_max = 2.0 * t_est;
  RabiFit best;
  best.p_peak = -1.0;
  auto scan = [&](double center, double half, double h) {
    const int n = static_cast<int>(std::floor(half / h + 1e-9));
    for (int i = -n; i <= n; ++i) {
      const double f = center + i * h;
      if (std::fabs(f - f_guess) > span * (1.0 + 1e-12)) continue;
      const auto fit = rabi_transfer(sys, phi_dc, phi_ac, f, t_max, gate, opts);
      if (fit.p_peak > best.p_peak) best = fit;
    }
  };
  // The transfer peak is a Lorentzian of width ~ g_eff around resonance, so
  // a pass at ten times the step followed by the fine step around its best
  // point finds the same grid maximum as the full fine scan.
  const double coarse = 10.0 * step;
  if (span > 2.0 * coarse) {
    scan(f_guess, span, coarse);
    const double c = best.f_m;
    best.p_peak = -1.0;
    scan(c, coarse, step);
  } else {
    scan(f_guess, span, step);
  }
  return best;
}

std::array<cplx, 16> ideal_unitary(Gate gate) {
  std::array<cplx, 16> u{};
  for (int i = 0; i < 4; ++i) u[i * 4 + i] = 1.0;
  switch (gate) {
    case Gate::identity: break;
    case Gate::cz02:
    case Gate::cz20: u[15] = -1.0; break;
    case Gate::iswap:
      u[1 * 4 + 1] = 0.0;
      u[2 * 4 + 2] = 0.0;
      u[1 * 4 + 2] = cplx(0.0, 1.0);
      u[2 * 4 + 1] = cplx(0.0, 1.0);
      break;
  }
  return u;
}

ProcessMatrix ptm_from_images(const std::vector<std::array<cplx, 16>>& images) {
  if (images.size() != 16) throw DomainError("ptm_from_images: need 16 images");
  const auto& P = paulis();
  ProcessMatrix r;
  for (int j = 0; j < 16; ++j) {
    Mat4 ej{};
    for (int ab = 0; ab < 16; ++ab) {
      const cplx c = P[j][ab];
      if (c == 0.0) continue;
      for (int e = 0; e < 16; ++e) ej[e] += c * images[ab][e];
    }
    for (int i = 0; i < 16; ++i) {
      cplx tr = 0.0;
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d) tr += P[i][d * 4 + c] * ej[c * 4 + d];
      r(i, j) = tr.real() / 4.0;
    }
  }
  return r;
}

ProcessMatrix unitary_ptm(const std::array<cplx, 16>& u) {
  std::vector<Mat4> images(16);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d)
          images[4 * a + b][c * 4 + d] = u[c * 4 + a] * std::conj(u[d * 4 + b]);
  return ptm_from_images(images);
}

GateResult average_fidelity(const ProcessMatrix& process, Gate ideal, bool optimize) {
  const auto u = ideal_unitary(ideal);
  const auto m = images_from_ptm(process);
  // T_cd = sum_ab conj(U_ca) E(|a><b|)_cd U_db, so that the entanglement
  // fidelity after Z rotations is sum_cd z_c conj(z_d) T_cd / d^2.
  std::array<cplx, 16> T{};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d)
          T[c * 4 + d] += std::conj(u[c * 4 + a]) * m[4 * a + b][c * 4 + d] * u[d * 4 + b];

  auto fid = [&](double tf, double tt) {
    cplx z[4];
    for (int c = 0; c < 4; ++c) z[c] = std::polar(1.0, -(tf * (c / 2) + tt * (c % 2)));
    cplx acc = 0.0;
    for (int c = 0; c < 4; ++c)
      for (int d = 0; d < 4; ++d) acc += z[c] * std::conj(z[d]) * T[c * 4 + d];
    const double fe = acc.real() / 16.0;
    return (4.0 * fe + 1.0) / 5.0;
  };

  GateResult out;
  out.leakage = process.leakage();
  out.fidelity_raw = fid(0.0, 0.0);
  out.fidelity = out.fidelity_raw;
  if (!optimize) return out;

  constexpr int kGrid = 64;
  double best = -1.0, bf = 0.0, bt = 0.0;
  for (int i = 0; i < kGrid; ++i) {
    for (int j = 0; j < kGrid; ++j) {
      const double tf = kTwoPi * i / kGrid, tt = kTwoPi * j / kGrid;
      const double f = fid(tf, tt);
      if (f > best) {
        best = f;
        bf = tf;
        bt = tt;
      }
    }
  }
  const auto res = nelder_mead<2>(
      [&](const std::array<double, 2>& x) { return -fid(x[0], x[1]); },
      std::array<double, 2>{bf, bt}, std::array<double, 2>{kTwoPi / kGrid, kTwoPi / kGrid}, 400, 1e-15);
  if (-res.f > best) {
    best = -res.f;
    bf = res.x[0];
    bt = res.x[1];
  }
  if (best > out.fidelity_raw) {
    out.fidelity = best;
    out.theta_f = std::remainder(bf, kTwoPi);
    out.theta_t = std::remainder(bt, kTwoPi);
  }
  return out;
}

ProcessMatrix evolve_process(const TwoQubitSystem& sys,
                             const modulation::ModulationSpec& mod,
                             const DecoherenceConfig& dec,
                             const EvolveOptions& opts) {
  mod.validate();
  dec.validate();
  if (!(mod.t_f > 0.0)) throw DomainError("evolve_process: t_f must be positive");
  Model model(sys, mod, dec, opts.lab_frame);
  const auto ode_opts = carrier_options(opts, mod);
  double t = 0.0;

  if (!model.dissipative()) {
    constexpr int kBatch = 4;
    std::vector<cplx> y(kDim * kBatch + 2, 0.0);
    for (int a = 0; a < kBatch; ++a) y[full_index(a) * kBatch + a] = 1.0;
    ode::Stepper stepper(
        [&](double tt, const cplx* in, cplx* out) { model.ket_rhs(tt, kBatch, in, out); },
        y.size(), ode_opts);
    stepper.advance_to(t, mod.t_f, y);
    return ptm_from_images(images_from_kets(y, kBatch));
  }

  constexpr int kBatch = 16;
  const std::size_t n = static_cast<std::size_t>(kDim) * kDim * kBatch;
  std::vector<cplx> y(n + 2, 0.0);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      y[(static_cast<std::size_t>(full_index(a)) * kDim + full_index(b)) * kBatch + 4 * a + b] = 1.0;
  ode::Stepper stepper(
      [&](double tt, const cplx* in, cplx* out) { model.density_rhs(tt, kBatch, in, out); },
      y.size(), ode_opts);
  stepper.advance_to(t, mod.t_f, y);
  return ptm_from_images(images_from_density(y, kBatch));
}

std::vector<std::vector<cplx>> evolve_density(
    const TwoQubitSystem& sys, const modulation::ModulationSpec& mod,
    const DecoherenceConfig& dec, const std::vector<cplx>& rho0,
    const std::vector<double>& times, const EvolveOptions& opts) {
  dec.validate();
  if (rho0.size() != static_cast<std::size_t>(kDim * kDim)) {
    throw DomainError("evolve_density: rho0 must be 9x9");
  }
  Model model(sys, mod, dec, opts.lab_frame);
  std::vector<cplx> y(rho0);
  y.push_back(0.0);
  y.push_back(0.0);
  ode::Stepper stepper(
      [&](double tt, const cplx* in, cplx* out) { model.density_rhs(tt, 1, in, out); },
      y.size(), carrier_options(opts, mod));
  std::vector<std::vector<cplx>> out;
  out.reserve(times.size());
  double t = 0.0;
  for (double te : times) {
    if (te < t) throw DomainError("evolve_density: times must be ascending and >= 0");
    stepper.advance_to(t, te, y);
    out.emplace_back(y.begin(), y.begin() + kDim * kDim);
  }
  return out;
}

TunedGate tune_gate(const TwoQubitSystem& sys,
                    const transmon::StaticCoeffs& coeffs, double phi_dc,
                    double phi_ac, Gate gate, const TuneOptions& opts) {
  if (gate == Gate::identity) throw DomainError("tune_gate: identity needs no tuning");
  const auto gf = gate_frequencies(sys, coeffs, phi_dc, phi_ac);
  const double f_guess = gate == Gate::cz02 ? gf.cz02 : gate == Gate::cz20 ? gf.cz20 : gf.iswap;

  TwoQubitSystem coherent = sys;
  coherent.gamma1_f = coherent.gamma1_t = coherent.gammaphi_f = coherent.gammaphi_bkgd = 0.0;

  TunedGate out;
  out.rabi = tune_resonance(coherent, coeffs, phi_dc, phi_ac, f_guess, gate,
                            opts.scan_span, opts.scan_step, opts.evolve);
  out.mod.phi_dc = phi_dc;
  out.mod.phi_ac = phi_ac;
  out.mod.f_m = out.rabi.f_m;
  out.mod.t_ramp = opts.t_ramp;
  // CZ needs a full |11> -> |X> -> |11> cycle, iSWAP half of one.
  out.mod.t_f = gate == Gate::iswap ? out.rabi.t_peak + 2.0 * opts.t_ramp
                                    : gate_time(out.rabi.g_eff, opts.t_ramp);

  auto coherent_fid = [&](double f_m, double t_f) {
    modulation::ModulationSpec m = out.mod;
    m.f_m = f_m;
    m.t_f = std::max(t_f, 2.0 * m.t_ramp + 1e-12);
    return average_fidelity(evolve_process(coherent, m, {}, opts.evolve), gate, true);
  };
  out.coherent = coherent_fid(out.mod.f_m, out.mod.t_f);
  if (opts.refine && opts.max_refine_evals > 0) {
    const double t0 = out.mod.t_f;
    const auto res = nelder_mead<2>(
        [&](const std::array<double, 2>& x) {
          return -coherent_fid(out.mod.f_m + x[0] * 1e6, t0 * (1.0 + x[1])).fidelity;
        },
        std::array<double, 2>{0.0, 0.0}, std::array<double, 2>{0.1, 0.02}, opts.max_refine_evals, 1e-10);
    if (-res.f > out.coherent.fidelity) {
      out.mod.f_m += res.x[0] * 1e6;
      out.mod.t_f = t0 * (1.0 + res.x[1]);
      out.coherent = coherent_fid(out.mod.f_m, out.mod.t_f);
    }
  }
  out.coherent.f_m_opt = out.mod.f_m;
  out.coherent.t_f_opt = out.mod.t_f;
  return out;
}

std::vector<FidelityRow> fidelity_sweep(const TwoQubitSystem& sys,
                                        const std::vector<double>& phi_ac_grid,
                                        const FidelitySweepConfig& cfg) {
  sys.validate();
  cfg.noise.validate();
  const auto coeffs = transmon::static_coeffs(sys.tunable);
  std::vector<FidelityRow> rows(phi_ac_grid.size());
  parallel_for(phi_ac_grid.size(), cfg.threads, [&](std::size_t i) {
    const double phi_ac = phi_ac_grid[i];
    const auto tuned = tune_gate(sys, coeffs, cfg.phi_dc, phi_ac, cfg.gate, cfg.tune);
    noise::NoiseSpec spec = cfg.noise;
    if (cfg.lowpass_factor > 0.0) spec.lowpass_cutoff = cfg.lowpass_factor * tuned.mod.f_m;
    const auto series = modulation::fourier_series(coeffs, cfg.phi_dc, phi_ac);
    const auto rates = dephasing::analytic_rates_self_consistent(series, spec, tuned.mod.f_m);

    DecoherenceConfig dec;
    dec.gammaphi_w = !spec.filtered()      ? rates.gamma_white
                     : spec.shared_filter ? rates.gamma_white_shared
                                          : rates.gamma_white_filtered;
    dec.gammaphi_pink = rates.gamma_pink;
    dec.beta = cfg.beta;
    dec.lambda_qutrit = qutrit_lambda(sys.tunable, modulation::average_frequency(series));

    const auto noisy = average_fidelity(
        evolve_process(sys, tuned.mod, dec, cfg.tune.evolve), cfg.gate, true);

    FidelityRow& row = rows[i];
    row.phi_ac = phi_ac;
    row.f_m_hz = tuned.mod.f_m;
    row.geff_hz = angular_to_hz(tuned.rabi.g_eff);
    row.tcz_s = tuned.mod.t_f;
    row.infidelity = 1.0 - noisy.fidelity;
    row.infidelity_nodecoherence = 1.0 - tuned.coherent.fidelity;
    row.leakage = noisy.leakage;
    row.gammaphi_w = dec.gammaphi_w;
    row.gammaphi_pink = dec.gammaphi_pink;
  });
  return rows;
}

double asymptotic_fidelity(double t_cz, double t_phi, double beta, Gate gate) {
  if (!(t_phi > 0.0) || !(beta > 0.0)) {
    throw DomainError("asymptotic_fidelity: t_phi and beta must be positive");
  }
  const double x = t_cz / t_phi;
  if (!(x >= 0.0 && x < 0.2)) {
    throw DomainError("asymptotic_fidelity: requires 0 <= t_cz/t_phi < 0.2, got " +
                      std::to_string(x));
  }
  double c = 0.0;
  if (gate == Gate::cz02) c = 61.0 / 80.0;
  else if (gate == Gate::cz20) c = 29.0 / 80.0;
  else throw DomainError("asymptotic_fidelity: only CZ02 and CZ20 are covered");
  return 1.0 - c * std::pow(x, beta);
}

namespace {

// Level of the exchange partner of |11>.
int partner(Gate gate) {
  if (gate == Gate::cz02) return 3 * 0 + 2;
  if (gate == Gate::cz20) return 3 * 2 + 0;
  throw DomainError("ideal gate model: only CZ02 and CZ20 are covered");
}

void check_ideal(const IdealGateNoise& m, double g_eff) {
  partner(m.gate);
  if (!(m.t_phi > 0.0)) throw DomainError("ideal gate model: t_phi must be positive");
  if (!(m.beta >= 1.0 && m.beta < 2.0)) {
    throw DomainError("ideal gate model: beta must be in [1, 2)");
  }
  if (!(g_eff > 0.0)) throw DomainError("ideal gate model: g_eff must be positive");
}

}  // namespace

double ideal_gate_me_fidelity(const IdealGateNoise& m, double g_eff,
                              const ode::Options& opts) {
  check_ideal(m, g_eff);
  const int x = partner(m.gate);
  const int p11 = 3 * 1 + 1;
  const double lam = std::fabs(1.0 - 0.5 * m.kappa);
  const std::vector<SparseTerm> h = {{p11, x, g_eff}, {x, p11, g_eff}};
  std::vector<double> wp(kDim * kDim);
  for (int i = 0; i < kDim; ++i)
    for (int j = 0; j < kDim; ++j) {
      auto l = [&](int a) { return nt(a) == 2 ? 2.0 * lam : double(nt(a)); };
      wp[i * kDim + j] = dephasing_weight(l(i), l(j));
    }
  const double gam = 1.0 / m.t_phi;
  constexpr int kBatch = 16;
  const std::size_t n = static_cast<std::size_t>(kDim) * kDim * kBatch;
  std::vector<double> w(kDim * kDim);
  auto rhs = [&](double t, const cplx* in, cplx* out) {
    std::span<const cplx> vin(in, n);
    std::span<cplx> vout(out, n);
    simd::commutator_batch(h, kDim, kBatch, vin, vout);
    const double rate = 2.0 * m.beta * std::pow(t, m.beta - 1.0) * std::pow(gam, m.beta);
    for (int e = 0; e < kDim * kDim; ++e) w[e] = rate * wp[e];
    simd::elementwise_batch(w, kDim, kBatch, vin, vout);
  };
  std::vector<cplx> y(n, 0.0);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      y[(static_cast<std::size_t>(full_index(a)) * kDim + full_index(b)) * kBatch + 4 * a + b] = 1.0;
  ode::Stepper stepper(rhs, n, opts);
  double t = 0.0;
  stepper.advance_to(t, kPi / g_eff, y);
  return average_fidelity(ptm_from_images(images_from_density(y, kBatch)), m.gate, true)
      .fidelity;
}

CoherentAverage ideal_gate_coherent_average(const IdealGateNoise& m, double g_eff,
                                            int n_traj, int n_segments,
                                            std::uint64_t seed, int threads) {
  check_ideal(m, g_eff);
  if (n_traj < 2 || n_segments < 1) {
    throw DomainError("coherent average: need n_traj >= 2 and n_segments >= 1");
  }
  const double t_cz = kPi / g_eff;
  const double dt = t_cz / n_segments;
  // Phase of the tunable qubit at the segment ends: Gaussian with
  // Var[phi(t) - phi(s)] = 2 (|t - s| / t_phi)^beta, i.e. exact Ramsey decay
  // exp(-(t / t_phi)^beta).
  const int N = n_segments;
  Eigen::MatrixXd cov(N, N);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      const double ti = (i + 1) * dt / m.t_phi, tj = (j + 1) * dt / m.t_phi;
      cov(i, j) = std::pow(ti, m.beta) + std::pow(tj, m.beta) -
                  std::pow(std::fabs(ti - tj), m.beta);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw ConvergenceError("coherent average: covariance not positive definite", 0, 0.0);
  }
  const Eigen::MatrixXd L = llt.matrixL();
  // Energy shift of the exchange partner per unit tunable-frequency shift.
  const double shift_x = m.gate == Gate::cz02 ? 2.0 - m.kappa : 0.0;

  constexpr int kChunks = 64;
  const int chunks = std::min(kChunks, n_traj);
  struct Acc {
    std::vector<Mat4> images = std::vector<Mat4>(16, Mat4{});
    double f_sum = 0.0, f_sq = 0.0;
  };
  std::vector<Acc> acc(chunks);
  const auto u_ideal = ideal_unitary(m.gate);
  parallel_for(static_cast<std::size_t>(chunks), threads, [&](std::size_t c) {
    Eigen::VectorXd z(N), phi(N);
    Acc& a = acc[c];
    for (int j = static_cast<int>(c); j < n_traj; j += chunks) {
      auto eng = rng::make_engine(seed, rng::Stream::trajectory, static_cast<std::uint64_t>(j));
      rng::fill_normal(eng, std::span<double>(z.data(), N), 1.0);
      phi = L * z;
      // {|11>, |X>} block, piecewise-constant frequency shift per segment.
      cplx u00 = 1.0, u01 = 0.0, u10 = 0.0, u11 = 1.0;
      double prev = 0.0;
      for (int k = 0; k < N; ++k) {
        const double dw = (phi(k) - prev) / dt;
        prev = phi(k);
        const double h0 = dw, h1 = shift_x * dw;
        const double mean = 0.5 * (h0 + h1), half = 0.5 * (h0 - h1);
        const double r = std::hypot(half, g_eff);
        const double c0 = std::cos(r * dt), s0 = r > 0.0 ? std::sin(r * dt) / r : dt;
        const cplx ph = std::polar(1.0, -mean * dt);
        const cplx e00 = ph * cplx(c0, -s0 * half), e11 = ph * cplx(c0, s0 * half);
        const cplx e01 = ph * cplx(0.0, -s0 * g_eff);
        const cplx n00 = e00 * u00 + e01 * u10, n01 = e00 * u01 + e01 * u11;
        const cplx n10 = e01 * u00 + e11 * u10, n11 = e01 * u01 + e11 * u11;
        u00 = n00; u01 = n01; u10 = n10; u11 = n11;
      }
      // Computational amplitudes: |00>, |10> untouched, |01> picks up the
      // accumulated phase, |11> keeps the u00 component.
      const cplx d[4] = {1.0, std::polar(1.0, -phi(N - 1)), 1.0, u00};
      Mat4 u{};
      for (int q = 0; q < 4; ++q) u[q * 4 + q] = d[q];
      for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q)
          for (int r = 0; r < 4; ++r)
            for (int s = 0; s < 4; ++s)
              a.images[4 * p + q][r * 4 + s] += u[r * 4 + p] * std::conj(u[s * 4 + q]);
      // Linear (unoptimised) fidelity of this trajectory for the error bar.
      cplx tr = 0.0;
      for (int q = 0; q < 4; ++q) tr += std::conj(u_ideal[q * 4 + q]) * d[q];
      const double fe = std::norm(tr) / 16.0;
      const double f = (4.0 * fe + 1.0) / 5.0;
      a.f_sum += f;
      a.f_sq += f * f;
    }
  });
  std::vector<Mat4> images(16, Mat4{});
  double f_sum = 0.0, f_sq = 0.0;
  for (const auto& a : acc) {
    for (int k = 0; k < 16; ++k)
      for (int e = 0; e < 16; ++e) images[k][e] += a.images[k][e];
    f_sum += a.f_sum;
    f_sq += a.f_sq;
  }
  for (auto& im : images)
    for (auto& v : im) v /= static_cast<double>(n_traj);
  const double mean = f_sum / n_traj;
  const double var = std::max(0.0, f_sq / n_traj - mean * mean) * n_traj / (n_traj - 1.0);
  CoherentAverage out;
  out.fidelity = average_fidelity(ptm_from_images(images), m.gate, true).fidelity;
  out.std_error = std::sqrt(var / n_traj);
  return out;
}

std::vector<IdealGateRow> coherent_noise_average(
    const IdealGateNoise& model, const std::vector<double>& g_eff_grid,
    int n_traj, int n_segments, std::uint64_t seed, int threads) {
  std::vector<IdealGateRow> rows;
  rows.reserve(g_eff_grid.size());
  for (std::size_t i = 0; i < g_eff_grid.size(); ++i) {
    const double g = hz_to_angular(g_eff_grid[i]);
    IdealGateRow row;
    row.gate = model.gate;
    const double t_cz = kPi / g;
    row.tcz_over_tphi = t_cz / model.t_phi;
    row.f_me = ideal_gate_me_fidelity(model, g);
    const auto avg = ideal_gate_coherent_average(
        model, g, n_traj, n_segments, rng::derive_seed(seed, rng::Stream::generic, i), threads);
    row.f_avg_coherent = avg.fidelity;
    row.f_avg_std_error = avg.std_error;
    row.f_asymptotic = row.tcz_over_tphi < 0.2
                           ? asymptotic_fidelity(t_cz, model.t_phi, model.beta, model.gate)
                           : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fluxmod::twoqubit
