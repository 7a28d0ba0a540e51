#include "fluxmod/dephasing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "fluxmod/errors.hpp"
#include "fluxmod/parallel.hpp"
#include "fluxmod/rng.hpp"
#include "fluxmod/simd/kernels.hpp"
#include "fluxmod/units.hpp"

namespace fluxmod::dephasing {

namespace {

constexpr int kPeriodPoints = 64;

// 8-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 8> kGlNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
    -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
    0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
    0.2223810344533745, 0.1012285362903763};
constexpr int kArcPanels = 4;
constexpr int kArcPoints = kArcPanels * 8;

simd::TransduceParams transduce_params(const transmon::TransmonParams& p) {
  return {p.e_c, p.e_j1 * p.e_j1 + p.e_j2 * p.e_j2, 2.0 * p.e_j1 * p.e_j2,
          transmon::kXiLimit};
}

void transduce(const simd::TransduceParams& tp, std::span<const double> phi,
               std::span<double> omega) {
  const auto bad = simd::frequency_batch(tp, phi, omega);
  if (bad >= 0) {
    throw DomainError("ramsey_mc: flux excursion " +
                      std::to_string(phi[static_cast<std::size_t>(bad)]) +
                      " Phi0 leaves the perturbative range");
  }
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::size_t pink_steps(const McBudget& b) {
  return static_cast<std::size_t>(std::ceil(b.window_len / b.dt - 1e-9));
}

std::size_t windows_per_trace(const McBudget& b) {
  return (static_cast<std::size_t>(b.n_windows) + b.n_traces - 1) / b.n_traces;
}

std::size_t pink_length(const McBudget& b) {
  return next_pow2(std::max<std::size_t>(1024, pink_steps(b) * windows_per_trace(b)));
}

double rate_from_derivs(const std::vector<double>& d_dc,
                        const std::vector<double>& d_ac, double a_dc,
                        double a_ac, int k_uv) {
  double acc = 0.0;
  for (int k = 0; k <= k_uv; ++k) {
    const double w = k == 0 ? 2.0 : 1.0;
    acc += w * (d_dc[k] * d_dc[k] * a_dc * a_dc + d_ac[k] * d_ac[k] * a_ac * a_ac);
  }
  return 0.25 * acc;
}

}  // namespace

double lambda_factor(double f_ir, double t) {
  if (!(f_ir > 0.0) || !(t > 0.0)) {
    throw DomainError("lambda_factor: f_ir and t must be positive");
  }
  const double x = kTwoPi * f_ir * t;
  if (!(x < 0.1)) {
    throw DomainError("lambda_factor: 2 pi f_ir t = " + std::to_string(x) +
                      " is not << 1");
  }
  return std::sqrt(1.5 - kEulerGamma - std::log(x));
}

DephasingRates analytic_rates(const modulation::FourierSeries& series,
                              const noise::NoiseSpec& spec, double f_m,
                              double lambda) {
  spec.validate();
  if (!(f_m > 0.0)) throw DomainError("analytic_rates: f_m must be positive");
  const auto& d_dc = series.d_dc;
  const auto& d_ac = series.d_ac;
  const int K = series.K;

  DephasingRates r;
  r.lambda_used = lambda;
  r.k_uv = std::clamp(static_cast<int>(std::floor(spec.f_uv / f_m)), 1, K);
  r.gamma_pink = lambda * std::sqrt(d_dc[0] * d_dc[0] * spec.a_dc_pink * spec.a_dc_pink +
                                    d_ac[0] * d_ac[0] * spec.a_ac_pink * spec.a_ac_pink);
  r.gamma_white = rate_from_derivs(d_dc, d_ac, spec.a_dc_white, spec.a_ac_white, r.k_uv);
  r.gamma_white_filtered =
      rate_from_derivs(d_dc, d_ac, spec.a_dc_white, spec.a_ac_white, 1);
  // One filter on the total noise dPhi_dc + dPhi_ac cos(theta). Moving the
  // (even) filter onto the transduction leaves d0 + d1 cos(theta), so
  //   Gamma = A_dc^2 <(d0 + d1 c)^2> / 2 + A_ac^2 <c^2 (d0 + d1 c)^2> / 2.
  // Treating the product as stationary noise of density
  // A_dc^2 + A_ac^2 / 2 instead drops the coherence between the dPhi_ac
  // components at 0 and 2 w_m (1/4 in place of 3/8 below).
  const double d0 = d_dc[0];
  const double d1 = d_dc[1];
  const double adc2 = spec.a_dc_white * spec.a_dc_white;
  const double aac2 = spec.a_ac_white * spec.a_ac_white;
  r.gamma_white_shared = 0.5 * adc2 * (d0 * d0 + 0.5 * d1 * d1) +
                         0.5 * aac2 * (0.5 * d0 * d0 + 0.375 * d1 * d1);
  r.gamma_white_shared_stationary =
      0.25 * (2.0 * d0 * d0 + d1 * d1) * (adc2 + 0.5 * aac2);

  const double w_m = hz_to_angular(f_m);
  r.b_k.assign(K, 0.0);
  for (int k = 1; k <= K; ++k) {
    double sdc = 0.0;
    double sac = 0.0;
    for (int l = 0; l <= k; ++l) {
      sdc += d_dc[k - l] * d_dc[l];
      sac += d_ac[k - l] * d_ac[l];
    }
    for (int l = 0; k + l <= K; ++l) {
      sdc += 2.0 * d_dc[k + l] * d_dc[l];
      sac += 2.0 * d_ac[k + l] * d_ac[l];
    }
    r.b_k[k - 1] = (spec.a_dc_white * spec.a_dc_white * sdc +
                    spec.a_ac_white * spec.a_ac_white * sac) /
                   (4.0 * k * w_m);
  }
  return r;
}

DephasingRates analytic_rates_self_consistent(
    const modulation::FourierSeries& series, const noise::NoiseSpec& spec,
    double f_m) {
  double lambda = 3.0;
  DephasingRates r = analytic_rates(series, spec, f_m, lambda);
  for (int it = 0; it < 50 && r.gamma_pink > 0.0; ++it) {
    const double t = 1.0 / r.gamma_pink;
    if (!(kTwoPi * spec.f_ir * t < 0.1)) break;
    const double next = lambda_factor(spec.f_ir, t);
    const bool done = std::fabs(next - lambda) < 1e-12 * lambda;
    lambda = next;
    r = analytic_rates(series, spec, f_m, lambda);
    if (done) break;
  }
  return r;
}

void McBudget::validate() const {
  if (n_windows < 1) throw DomainError("McBudget: n_windows must be >= 1");
  if (!(window_len > 0.0 && dt > 0.0 && dt_white >= 0.0)) {
    throw DomainError("McBudget: window_len and dt must be positive");
  }
  if (dt > window_len) throw DomainError("McBudget: dt exceeds the window");
  if (n_times < 2) throw DomainError("McBudget: n_times must be >= 2");
  if (n_traces < 1 || n_traces > n_windows) {
    throw DomainError("McBudget: n_traces must lie in [1, n_windows]");
  }
}

double effective_f_ir(double trace_duration) {
  // A discrete 1/f spectrum starting at 1/T sums like a continuous one with
  // lower limit e^{-gamma_E} / T.
  return std::exp(-kEulerGamma) / trace_duration;
}

double lambda_for_budget(const McBudget& budget, double t) {
  if (!(t > 0.0)) throw DomainError("lambda_for_budget: t must be positive");
  budget.validate();
  const std::size_t steps = pink_steps(budget);
  const std::size_t n = pink_length(budget);
  const double df = 1.0 / (n * budget.dt);
  const double t_win = steps * budget.dt;
  const auto nw = static_cast<double>(windows_per_trace(budget));
  double acc = 0.0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double f = k * df;
    const double x = kPi * f * t;
    const double sinc = std::sin(x) / x;
    // Fejer kernel of the window start times: the part of each spectral
    // line common to all windows only rotates the average phasor.
    const double y = kPi * f * t_win;
    const double sy = std::sin(y);
    const double fejer = sy == 0.0 ? 1.0 : std::sin(nw * y) / (nw * sy);
    // Piecewise-constant samples: the held noise has a sinc-shaped response.
    const double z = kPi * f * budget.dt;
    const double hold = std::sin(z) / z;
    acc += df / f * sinc * sinc * hold * hold * (1.0 - fejer * fejer);
  }
  return std::sqrt(acc);
}

double pink_trace_duration(const McBudget& budget) {
  return pink_length(budget) * budget.dt;
}

CoherenceCurve ramsey_mc(const transmon::TransmonParams& params,
                         const modulation::ModulationSpec& mod,
                         const noise::NoiseSpec& spec, const McBudget& budget,
                         std::uint64_t seed) {
  params.validate();
  spec.validate();
  budget.validate();
  if (!(mod.f_m > 0.0) || mod.phi_ac < 0.0) {
    throw DomainError("ramsey_mc: invalid modulation");
  }
  const auto tp = transduce_params(params);
  const double w_m = hz_to_angular(mod.f_m);
  const double period = 1.0 / mod.f_m;
  const bool white = spec.has_white();
  const bool pink = spec.has_pink();
  const int n_windows = budget.n_windows;

  const double dt_p = budget.dt;
  const std::size_t steps_p = pink_steps(budget);
  // Window w reads slot w / n_traces of trace w % n_traces.
  std::vector<std::vector<double>> pink_dc(budget.n_traces);
  std::vector<std::vector<double>> pink_ac(budget.n_traces);
  if (pink) {
    const std::size_t n = pink_length(budget);
    for (int r = 0; r < budget.n_traces; ++r) {
      if (spec.a_dc_pink > 0.0) {
        pink_dc[r] = noise::synth_pink(spec.a_dc_pink, spec.alpha, dt_p, n,
                                       rng::derive_seed(seed, rng::Stream::dc_pink, r))
                         .samples;
      }
      if (spec.a_ac_pink > 0.0) {
        pink_ac[r] = noise::synth_pink(spec.a_ac_pink, spec.alpha, dt_p, n,
                                       rng::derive_seed(seed, rng::Stream::ac_pink, r))
                         .samples;
      }
    }
  }
  auto pink_ptr = [&](const std::vector<std::vector<double>>& v, std::size_t w) -> const double* {
    const auto& tr = v[w % budget.n_traces];
    return tr.empty() ? nullptr : tr.data() + (w / budget.n_traces) * steps_p;
  };

  const double dt = white ? (budget.dt_white > 0.0 ? budget.dt_white : period / 32.0)
                          : dt_p;
  if (white && dt * mod.f_m > 1.0 / 20.0 + 1e-12) {
    throw DomainError("ramsey_mc: white noise needs >= 20 samples per modulation period");
  }
  if (white && spec.filtered() && spec.lowpass_cutoff > 0.5 / dt) {
    throw DomainError("ramsey_mc: lowpass cutoff above the sampling Nyquist");
  }
  const auto steps = static_cast<std::size_t>(std::ceil(budget.window_len / dt - 1e-9));
  const std::size_t stride = std::max<std::size_t>(1, steps / budget.n_times);
  const std::size_t n_out = steps / stride + 1;

  CoherenceCurve curve;
  curve.n_windows = n_windows;
  curve.t.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) curve.t[i] = i * stride * dt;

  std::vector<std::vector<std::complex<double>>> per_window(n_windows);

  if (!white) {
    // Coarse steps: integrate the modulation exactly inside each step as
    // whole periods (period average) plus a Gauss-Legendre partial arc.
    double cycles = dt * mod.f_m;
    double n_full_d = std::floor(cycles + 1e-9);
    double arc = (cycles - n_full_d) * period;
    if (arc < 1e-9 * period) arc = 0.0;
    const bool has_arc = arc > 0.0;
    const double full_time = n_full_d * period;

    std::array<double, kPeriodPoints> cos_grid{};
    for (int i = 0; i < kPeriodPoints; ++i) cos_grid[i] = std::cos(kTwoPi * i / kPeriodPoints);

    // Arc node carriers and weights per step.
    std::vector<double> arc_cos;
    std::vector<double> arc_w;
    if (has_arc) {
      arc_cos.resize(steps * kArcPoints);
      arc_w.resize(kArcPoints);
      const double panel = arc / kArcPanels;
      for (int p = 0; p < kArcPanels; ++p) {
        for (int q = 0; q < 8; ++q) arc_w[p * 8 + q] = 0.5 * panel * kGlWeights[q];
      }
      for (std::size_t j = 0; j < steps; ++j) {
        const double t0 = j * dt + full_time;
        for (int p = 0; p < kArcPanels; ++p) {
          for (int q = 0; q < 8; ++q) {
            const double t = t0 + panel * (p + 0.5 * (kGlNodes[q] + 1.0));
            arc_cos[j * kArcPoints + p * 8 + q] = std::cos(w_m * t + mod.theta_m);
          }
        }
      }
    }
    const int per_step = kPeriodPoints + (has_arc ? kArcPoints : 0);

    auto step_integrals = [&](std::size_t j0, std::size_t count,
                              const double* ddc, const double* dac,
                              std::vector<double>& phi, std::vector<double>& om,
                              double* out) {
      phi.resize(count * per_step);
      om.resize(count * per_step);
      for (std::size_t s = 0; s < count; ++s) {
        const double dc = mod.phi_dc + (ddc ? ddc[s] : 0.0);
        const double ac = mod.phi_ac + (dac ? dac[s] : 0.0);
        double* row = phi.data() + s * per_step;
        for (int i = 0; i < kPeriodPoints; ++i) row[i] = dc + ac * cos_grid[i];
        if (has_arc) {
          const double* c = arc_cos.data() + (j0 + s) * kArcPoints;
          for (int q = 0; q < kArcPoints; ++q) row[kPeriodPoints + q] = dc + ac * c[q];
        }
      }
      transduce(tp, phi, om);
      for (std::size_t s = 0; s < count; ++s) {
        const double* row = om.data() + s * per_step;
        double avg = 0.0;
        for (int i = 0; i < kPeriodPoints; ++i) avg += row[i];
        double val = full_time * avg / kPeriodPoints;
        if (has_arc) {
          for (int q = 0; q < kArcPoints; ++q) val += arc_w[q] * row[kPeriodPoints + q];
        }
        out[s] = val;
      }
    };

    std::vector<double> base(steps);
    {
      std::vector<double> phi, om;
      constexpr std::size_t kBlock = 64;
      for (std::size_t j0 = 0; j0 < steps; j0 += kBlock) {
        const std::size_t cnt = std::min(kBlock, steps - j0);
        step_integrals(j0, cnt, nullptr, nullptr, phi, om, base.data() + j0);
      }
    }

    parallel_for(n_windows, budget.threads, [&](std::size_t w) {
      std::vector<double> phi, om, incr;
      auto& acc = per_window[w];
      acc.assign(n_out, {0.0, 0.0});
      acc[0] = 1.0;
      double phase = 0.0;
      constexpr std::size_t kBlock = 64;
      incr.resize(kBlock);
      const double* pdc = pink_ptr(pink_dc, w);
      const double* pac = pink_ptr(pink_ac, w);
      for (std::size_t j0 = 0; j0 < steps; j0 += kBlock) {
        const std::size_t cnt = std::min(kBlock, steps - j0);
        step_integrals(j0, cnt, pdc ? pdc + j0 : nullptr, pac ? pac + j0 : nullptr, phi,
                       om, incr.data());
        for (std::size_t s = 0; s < cnt; ++s) {
          phase += incr[s] - base[j0 + s];
          const std::size_t j = j0 + s + 1;
          if (j % stride == 0 && j / stride < n_out) acc[j / stride] = std::polar(1.0, phase);
        }
      }
    });
  } else {
    // Fine steps resolving the modulation; midpoint rule per step, the
    // low-frequency noise held constant over its own coarser step.
    std::vector<double> carrier(steps);
    std::vector<double> base(steps);
    for (std::size_t j = 0; j < steps; ++j) {
      carrier[j] = std::cos(w_m * (j + 0.5) * dt + mod.theta_m);
    }
    {
      std::vector<double> phi(steps);
      for (std::size_t j = 0; j < steps; ++j) phi[j] = mod.phi_dc + mod.phi_ac * carrier[j];
      transduce(tp, phi, base);
    }
    const bool filt = spec.filtered();
    const std::size_t n_gen = filt ? next_pow2(steps) : steps;

    parallel_for(n_windows, budget.threads, [&](std::size_t w) {
      std::vector<double> ddc(n_gen, 0.0), dac(n_gen, 0.0);
      const bool direct = filt && !spec.shared_filter;
      if (spec.a_dc_white > 0.0) {
        const auto sd = rng::derive_seed(seed, rng::Stream::dc_white, w);
        if (direct) {
          noise::synth_white_lowpass(spec.a_dc_white, dt, spec.lowpass_cutoff, ddc, sd);
        } else {
          rng::Engine eng(sd);
          rng::fill_normal(eng, ddc, spec.a_dc_white / std::sqrt(dt));
        }
      }
      if (spec.a_ac_white > 0.0) {
        const auto sd = rng::derive_seed(seed, rng::Stream::ac_white, w);
        if (direct) {
          noise::synth_white_lowpass(spec.a_ac_white, dt, spec.lowpass_cutoff, dac, sd);
        } else {
          rng::Engine eng(sd);
          rng::fill_normal(eng, dac, spec.a_ac_white / std::sqrt(dt));
        }
      }
      if (filt && spec.shared_filter) {
        // Total flux noise dPhi_dc + dPhi_ac cos(w_m t) through one filter.
        for (std::size_t j = 0; j < n_gen; ++j) {
          const double c = j < steps ? carrier[j]
                                     : std::cos(w_m * (j + 0.5) * dt + mod.theta_m);
          ddc[j] += dac[j] * c;
          dac[j] = 0.0;
        }
        noise::lowpass_inplace(ddc, dt, spec.lowpass_cutoff);
      }
      auto& acc = per_window[w];
      acc.assign(n_out, {0.0, 0.0});
      acc[0] = 1.0;
      double phase = 0.0;
      constexpr std::size_t kBlock = 4096;
      std::vector<double> phi(kBlock), om(kBlock);
      const double* pdc = pink ? pink_ptr(pink_dc, w) : nullptr;
      const double* pac = pink ? pink_ptr(pink_ac, w) : nullptr;
      for (std::size_t j0 = 0; j0 < steps; j0 += kBlock) {
        const std::size_t cnt = std::min(kBlock, steps - j0);
        for (std::size_t s = 0; s < cnt; ++s) {
          const std::size_t j = j0 + s;
          double dc = mod.phi_dc + ddc[j];
          double ac = mod.phi_ac + dac[j];
          if (pink) {
            const std::size_t k = std::min(
                steps_p - 1, static_cast<std::size_t>(((j + 0.5) * dt) / dt_p));
            if (pdc) dc += pdc[k];
            if (pac) ac += pac[k];
          }
          phi[s] = dc + ac * carrier[j];
        }
        transduce(tp, std::span<const double>(phi.data(), cnt),
                  std::span<double>(om.data(), cnt));
        for (std::size_t s = 0; s < cnt; ++s) {
          phase += dt * (om[s] - base[j0 + s]);
          const std::size_t j = j0 + s + 1;
          if (j % stride == 0 && j / stride < n_out) acc[j / stride] = std::polar(1.0, phase);
        }
      }
    });
  }

  curve.magnitude.assign(n_out, 0.0);
  std::vector<std::complex<double>> total(n_out, {0.0, 0.0});
  for (int w = 0; w < n_windows; ++w) {
    for (std::size_t i = 0; i < n_out; ++i) total[i] += per_window[w][i];
  }
  for (std::size_t i = 0; i < n_out; ++i) {
    curve.magnitude[i] = std::abs(total[i]) / n_windows;
  }
  return curve;
}

DecayFit fit_decay(const CoherenceCurve& curve, FitModel model) {
  if (curve.t.size() != curve.magnitude.size() || curve.t.size() < 2) {
    throw DomainError("fit_decay: malformed curve");
  }
  const double n = std::max(1, curve.n_windows);
  // Below gamma_lo the decay is buried in the 1/sqrt(N) phasor noise; below
  // m_lo the magnitude is dominated by its own floor.
  const double gamma_lo = std::max(0.02, 2.0 / std::sqrt(n));
  const double m_lo = std::max(0.05, 3.0 / std::sqrt(n));
  const double gamma_hi = -std::log(m_lo);

  std::vector<double> ts, gs, ws;
  for (std::size_t i = 1; i < curve.t.size(); ++i) {
    const double m = curve.magnitude[i];
    if (!(m > 0.0)) continue;
    const double g = -std::log(std::min(m, 1.0));
    if (g >= gamma_lo && g <= gamma_hi) {
      ts.push_back(curve.t[i]);
      gs.push_back(g);
      // var(ln g) ~ (1 - m^2) / (2 N m^2 g^2) for the averaged phasor.
      ws.push_back(m * m * g * g / std::max(1.0 - m * m, 1e-6));
    }
  }

  DecayFit fit;
  fit.model = model;
  if (ts.size() < 4) {
    // Not enough decay to fit. Bound the rate from the end of the curve,
    // using the exponent that gives the weaker bound for beta in [1, 2].
    const double t_end = curve.t.back();
    const double g_end = -std::log(std::clamp(curve.magnitude.back(), 1e-300, 1.0));
    if (g_end > gamma_hi) {
      throw FitError("fit_decay: curve decays within its first samples", g_end);
    }
    const double g_up = std::max(g_end, 0.0) + gamma_lo;
    fit.censored = true;
    fit.beta = model == FitModel::stretched ? 2.0 : 1.0;
    fit.gamma = std::sqrt(g_up) / t_end;
    fit.gamma_white = g_up / t_end;
    fit.gamma_pink = std::sqrt(g_up) / t_end;
    return fit;
  }

  const std::size_t m = ts.size();
  if (model == FitModel::stretched) {
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const double x = std::log(ts[i]);
      const double y = std::log(gs[i]);
      const double w = ws[i];
      sw += w;
      sx += w * x;
      sy += w * y;
      sxx += w * x * x;
      sxy += w * x * y;
    }
    const double den = sw * sxx - sx * sx;
    const double beta = (sw * sxy - sx * sy) / den;
    const double icpt = (sy - beta * sx) / sw;
    double rss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = std::log(gs[i]) - (icpt + beta * std::log(ts[i]));
      rss += r * r;
    }
    fit.beta = beta;
    fit.gamma = std::exp(icpt / beta);
    fit.residual = std::sqrt(rss / m);
  } else {
    // gamma(t) = a t + b t^2 via normal equations.
    double s11 = 0, s12 = 0, s22 = 0, r1 = 0, r2 = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const double t = ts[i];
      s11 += t * t;
      s12 += t * t * t;
      s22 += t * t * t * t;
      r1 += t * gs[i];
      r2 += t * t * gs[i];
    }
    const double det = s11 * s22 - s12 * s12;
    const double a = (r1 * s22 - r2 * s12) / det;
    const double b = (s11 * r2 - s12 * r1) / det;
    double rss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double model_g = a * ts[i] + b * ts[i] * ts[i];
      const double r = model_g > 0.0 ? std::log(gs[i] / model_g) : 1.0;
      rss += r * r;
    }
    fit.gamma_white = std::max(a, 0.0);
    fit.gamma_pink = std::sqrt(std::max(b, 0.0));
    // Report the 1/e rate of the combined decay and its local exponent.
    const double t_e = b > 0.0 ? (-a + std::sqrt(a * a + 4.0 * b)) / (2.0 * b)
                               : (a > 0.0 ? 1.0 / a : std::numeric_limits<double>::infinity());
    fit.gamma = 1.0 / t_e;
    fit.beta = (a * t_e + 2.0 * b * t_e * t_e);
    fit.residual = std::sqrt(rss / m);
  }
  if (!std::isfinite(fit.gamma) || !(fit.gamma > 0.0) || fit.residual > 0.5) {
    throw FitError("fit_decay: decay does not follow the model", fit.residual);
  }
  return fit;
}

const char* sweep_mode_name(SweepMode mode) {
  return mode == SweepMode::analytic ? "analytic" : "mc";
}

std::vector<SweepRow> sweep_dephasing(const transmon::TransmonParams& params,
                                      const noise::NoiseSpec& spec, double f_m,
                                      const std::vector<double>& phi_ac_grid,
                                      SweepMode mode,
                                      const SweepOptions& opts) {
  spec.validate();
  const auto coeffs = transmon::static_coeffs(params);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double cutoff = spec.filtered() ? spec.lowpass_cutoff : 1.5 * f_m;
  std::vector<SweepRow> rows;
  rows.reserve(phi_ac_grid.size());

  auto to_time = [](double rate, int bit, int& flags) {
    if (!(rate > 1.0 / kTimeClamp)) {
      flags |= bit;
      return kTimeClamp;
    }
    return 1.0 / rate;
  };

  for (std::size_t i = 0; i < phi_ac_grid.size(); ++i) {
    const double phi_ac = phi_ac_grid[i];
    SweepRow row;
    row.phi_ac = phi_ac;
    row.mode = mode;
    row.tphi_pink = row.tphi_white = row.tphi_white_lp = row.beta = nan;

    if (mode == SweepMode::analytic) {
      const auto series = modulation::fourier_series(coeffs, opts.phi_dc, phi_ac);
      const auto r = analytic_rates_self_consistent(series, spec, f_m);
      if (opts.pink) {
        row.tphi_pink = to_time(r.gamma_pink, 1, row.clamped);
        row.beta = 2.0;
      }
      if (opts.white) row.tphi_white = to_time(r.gamma_white, 2, row.clamped);
      if (opts.filtered) {
        row.tphi_white_lp = to_time(
            spec.shared_filter ? r.gamma_white_shared : r.gamma_white_filtered, 4,
            row.clamped);
      }
    } else {
      modulation::ModulationSpec mod;
      mod.phi_dc = opts.phi_dc;
      mod.phi_ac = phi_ac;
      mod.f_m = f_m;
      mod.theta_m = opts.theta_m;
      const std::uint64_t point_seed = rng::derive_seed(opts.seed, rng::Stream::generic, i);
      auto run = [&](noise::NoiseSpec s, FitModel model, int bit, double& t_out,
                     double* beta_out) {
        const auto curve = ramsey_mc(params, mod, s, opts.budget, point_seed);
        const auto fit = fit_decay(curve, model);
        if (fit.censored) row.clamped |= bit;
        t_out = std::min(1.0 / fit.gamma, kTimeClamp);
        if (beta_out) *beta_out = fit.beta;
      };
      if (opts.pink && spec.has_pink()) {
        noise::NoiseSpec s = spec;
        s.a_dc_white = s.a_ac_white = 0.0;
        s.lowpass_cutoff = 0.0;
        run(s, FitModel::stretched, 1, row.tphi_pink, &row.beta);
      }
      if (opts.white && spec.has_white()) {
        noise::NoiseSpec s = spec;
        s.a_dc_pink = s.a_ac_pink = 0.0;
        s.lowpass_cutoff = 0.0;
        run(s, FitModel::stretched, 2, row.tphi_white, nullptr);
      }
      if (opts.filtered && spec.has_white()) {
        noise::NoiseSpec s = spec;
        s.a_dc_pink = s.a_ac_pink = 0.0;
        s.lowpass_cutoff = cutoff;
        run(s, FitModel::stretched, 4, row.tphi_white_lp, nullptr);
      }
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fluxmod::dephasing
