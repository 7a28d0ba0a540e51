#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

namespace fluxmod::ode {

using cplx = std::complex<double>;

/// dy/dt = f(t, y). `dy` has the size of `y` and must be fully overwritten.
using Rhs = std::function<void(double t, const cplx* y, cplx* dy)>;

struct Options {
  double rtol = 1e-9;
  double atol = 1e-10;
  double h_init = 0.0;  ///< 0 picks a step from the first derivative
  double h_max = 0.0;   ///< 0 means unbounded
  long max_steps = 50'000'000;
};

struct Stats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evals = 0;
};

/// Dormand-Prince 5(4) with PI step control. The step size carries over
/// between successive advance_to calls so a trajectory can be sampled on an
/// output grid without restarting.
class Stepper {
 public:
  Stepper(Rhs rhs, std::size_t n, Options opts = {});

  /// Integrates y from t to t_end in place. Throws ConvergenceError when the
  /// step size underflows or max_steps is exceeded.
  void advance_to(double& t, double t_end, std::vector<cplx>& y);

  const Stats& stats() const { return stats_; }

 private:
  double initial_step(double t, double t_end, const std::vector<cplx>& y);

  Rhs rhs_;
  std::size_t n_;
  Options opts_;
  Stats stats_;
  double h_ = 0.0;
  double err_prev_ = 1e-4;
  bool have_k1_ = false;
  double t_k1_ = 0.0;
  std::vector<cplx> k_[7];
  std::vector<cplx> tmp_, ynew_;
};

}  // namespace fluxmod::ode
