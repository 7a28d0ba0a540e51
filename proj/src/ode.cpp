#include "fluxmod/ode.hpp"

#include <algorithm>
#include <cmath>

#include "fluxmod/errors.hpp"

namespace fluxmod::ode {

namespace {

// Dormand-Prince tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

Stepper::Stepper(Rhs rhs, std::size_t n, Options opts)
    : rhs_(std::move(rhs)), n_(n), opts_(opts) {
  for (auto& k : k_) k.assign(n_, 0.0);
  tmp_.assign(n_, 0.0);
  ynew_.assign(n_, 0.0);
  h_ = opts_.h_init;
}

double Stepper::initial_step(double t, double t_end, const std::vector<cplx>& y) {
  double d0 = 0.0, d1 = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const double sc = opts_.atol + opts_.rtol * std::abs(y[i]);
    d0 += std::norm(y[i]) / (sc * sc);
    d1 += std::norm(k_[0][i]) / (sc * sc);
  }
  d0 = std::sqrt(d0 / n_);
  d1 = std::sqrt(d1 / n_);
  double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * (t_end - t) : 0.01 * d0 / d1;
  return std::min(h, t_end - t);
}

void Stepper::advance_to(double& t, double t_end, std::vector<cplx>& y) {
  if (t_end <= t) return;
  if (!have_k1_ || t_k1_ != t) {
    rhs_(t, y.data(), k_[0].data());
    ++stats_.rhs_evals;
    have_k1_ = true;
    t_k1_ = t;
  }
  if (h_ <= 0.0) h_ = initial_step(t, t_end, y);

  constexpr double kSafety = 0.9;
  constexpr double kAlpha = 0.7 / 5.0;
  constexpr double kBeta = 0.4 / 5.0;
  long steps = 0;
  bool reject_prev = false;

  while (t < t_end) {
    if (++steps > opts_.max_steps) {
      throw ConvergenceError("ode: step budget exhausted", static_cast<int>(steps),
                             t_end - t);
    }
    double h = h_;
    if (opts_.h_max > 0.0) h = std::min(h, opts_.h_max);
    bool last = false;
    if (t + h >= t_end || t + 1.01 * h >= t_end) {
      h = t_end - t;
      last = true;
    }
    if (!(h > 0.0) || t + h == t) {
      throw ConvergenceError("ode: step size underflow", static_cast<int>(steps), h);
    }

    auto& k1 = k_[0];
    auto& k2 = k_[1];
    auto& k3 = k_[2];
    auto& k4 = k_[3];
    auto& k5 = k_[4];
    auto& k6 = k_[5];
    auto& k7 = k_[6];
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = y[i] + h * a21 * k1[i];
    rhs_(t + c2 * h, tmp_.data(), k2.data());
    for (std::size_t i = 0; i < n_; ++i)
      tmp_[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    rhs_(t + c3 * h, tmp_.data(), k3.data());
    for (std::size_t i = 0; i < n_; ++i)
      tmp_[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs_(t + c4 * h, tmp_.data(), k4.data());
    for (std::size_t i = 0; i < n_; ++i)
      tmp_[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs_(t + c5 * h, tmp_.data(), k5.data());
    for (std::size_t i = 0; i < n_; ++i)
      tmp_[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                            a64 * k4[i] + a65 * k5[i]);
    rhs_(t + h, tmp_.data(), k6.data());
    for (std::size_t i = 0; i < n_; ++i)
      ynew_[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] +
                             b5 * k5[i] + b6 * k6[i]);
    rhs_(t + h, ynew_.data(), k7.data());
    stats_.rhs_evals += 6;

    double err = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const cplx e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                          e6 * k6[i] + e7 * k7[i]);
      const double sc =
          opts_.atol + opts_.rtol * std::max(std::abs(y[i]), std::abs(ynew_[i]));
      err += std::norm(e) / (sc * sc);
    }
    err = std::sqrt(err / n_);

    if (err <= 1.0) {
      double fac = err == 0.0 ? 5.0
                              : kSafety * std::pow(err, -kAlpha) *
                                    std::pow(err_prev_, kBeta);
      fac = std::clamp(fac, 0.2, 5.0);
      if (reject_prev) fac = std::min(fac, 1.0);
      err_prev_ = std::max(err, 1e-4);
      t = last ? t_end : t + h;
      y.swap(ynew_);
      k1.swap(k7);
      t_k1_ = t;
      ++stats_.accepted;
      reject_prev = false;
      // Keep the controller's step rather than the truncated final one.
      if (!last) h_ = h * fac;
    } else {
      const double fac =
          std::isfinite(err) ? std::max(0.2, kSafety * std::pow(err, -kAlpha)) : 0.2;
      h_ = h * fac;
      ++stats_.rejected;
      reject_prev = true;
    }
  }
}

}  // namespace fluxmod::ode
