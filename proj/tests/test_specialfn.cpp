#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "fluxmod/errors.hpp"
#include "fluxmod/specialfn.hpp"

using namespace fluxmod;
using specialfn::bessel_j;

TEST_CASE("bessel_j matches boost over orders and arguments") {
  for (int k = 0; k <= 40; ++k) {
    for (double x : {0.0, 1e-8, 0.3, 1.0, 2.404825557695773, 7.5, 19.0, 38.0, 75.0, 250.0}) {
      const double ref = boost::math::cyl_bessel_j(k, x);
      CHECK(bessel_j(k, x) == doctest::Approx(ref).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("bessel_j trivial values and reflection") {
  CHECK(bessel_j(0, 0.0) == 1.0);
  CHECK(bessel_j(3, 0.0) == 0.0);
  CHECK(std::abs(bessel_j(0, 2.404825557695773)) < 1e-14);
  for (double x : {0.7, 4.2, 13.1}) {
    CHECK(bessel_j(-3, x) == doctest::Approx(-bessel_j(3, x)).epsilon(1e-15));
    CHECK(bessel_j(-4, x) == doctest::Approx(bessel_j(4, x)).epsilon(1e-15));
    CHECK(bessel_j(2, -x) == doctest::Approx(bessel_j(2, x)).epsilon(1e-15));
    CHECK(bessel_j(1, -x) == doctest::Approx(-bessel_j(1, x)).epsilon(1e-15));
  }
}

TEST_CASE("bessel_j_all agrees with single orders and obeys the sum rule") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> ux(0.0, 30.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double x = ux(gen);
    std::vector<double> all(65);
    specialfn::bessel_j_all(x, all);
    double sum = all[0] * all[0];
    for (int k = 1; k < 65; ++k) sum += 2.0 * all[k] * all[k];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (int k : {0, 1, 5, 17, 40}) {
      CHECK(all[k] == doctest::Approx(bessel_j(k, x)).epsilon(1e-12).scale(1.0));
    }
    // Three-term recurrence as an independent identity.
    for (int k = 1; k < 40; ++k) {
      if (x > 0.5) {
        CHECK(all[k - 1] + all[k + 1] ==
              doctest::Approx(2.0 * k / x * all[k]).epsilon(1e-10).scale(1.0));
      }
    }
  }
}

TEST_CASE("bessel_j domain") {
  CHECK_THROWS_AS(bessel_j(65, 1.0), DomainError);
  CHECK_THROWS_AS(bessel_j(1, 2e4), DomainError);
  CHECK_THROWS_AS(bessel_j(1, std::nan("")), DomainError);
  std::vector<double> too_many(80);
  CHECK_THROWS_AS(specialfn::bessel_j_all(1.0, too_many), DomainError);
}

TEST_CASE("rising_factorial against the gamma ratio") {
  CHECK(specialfn::rising_factorial(3.7, 0) == 1.0);
  CHECK(specialfn::rising_factorial(1.0, 5) == doctest::Approx(120.0));
  for (double a : {0.5, 1.25, 3.0, 7.5}) {
    for (int n : {1, 2, 6, 11}) {
      const double ref = std::exp(std::lgamma(a + n) - std::lgamma(a));
      CHECK(specialfn::rising_factorial(a, n) == doctest::Approx(ref).epsilon(1e-13));
    }
  }
  CHECK(specialfn::rising_factorial(-2.0, 3) == doctest::Approx(0.0));
}

TEST_CASE("hyp2f1 closed forms") {
  for (double z : {0.0, 0.1, 0.5, 0.9}) {
    const double log_form = z == 0.0 ? 1.0 : -std::log1p(-z) / z;
    CHECK(specialfn::hyp2f1(1.0, 1.0, 2.0, z) == doctest::Approx(log_form).epsilon(1e-12));
    CHECK(specialfn::hyp2f1(0.75, 2.5, 2.5, z) ==
          doctest::Approx(std::pow(1.0 - z, -0.75)).epsilon(1e-12));
    const double s = std::sqrt(z);
    const double asin_form = z == 0.0 ? 1.0 : std::asin(s) / s;
    CHECK(specialfn::hyp2f1(0.5, 0.5, 1.5, z) == doctest::Approx(asin_form).epsilon(1e-12));
  }
}

TEST_CASE("hyp2f1 near z = 1 needs a larger term budget") {
  const double z = 0.97;
  CHECK_THROWS_AS(specialfn::hyp2f1(1.0, 1.0, 2.0, z), ConvergenceError);
  specialfn::SeriesTolerance tol;
  tol.max_terms = 4000;
  CHECK(specialfn::hyp2f1(1.0, 1.0, 2.0, z, tol) ==
        doctest::Approx(-std::log1p(-z) / z).epsilon(1e-12));
}

TEST_CASE("hyp2f1 terminating series and domain") {
  // 2F1(-2, b; c; z) = 1 - 2bz/c + b(b+1) z^2 / (c(c+1)).
  const double b = 1.3, c = 2.2, z = 0.4;
  const double ref = 1.0 - 2.0 * b * z / c + b * (b + 1) * z * z / (c * (c + 1));
  CHECK(specialfn::hyp2f1(-2.0, b, c, z) == doctest::Approx(ref).epsilon(1e-14));
  CHECK_THROWS_AS(specialfn::hyp2f1(1.0, 1.0, 2.0, 1.0), DomainError);
  CHECK_THROWS_AS(specialfn::hyp2f1(1.0, 1.0, 2.0, -0.1), DomainError);
  specialfn::SeriesTolerance bad;
  bad.rel_tol = 1e-3;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("erf against the standard library") {
  for (double x = -7.0; x <= 7.0; x += 0.0137) {
    CHECK(std::abs(specialfn::erf(x) - std::erf(x)) < 1e-10);
  }
  CHECK(specialfn::erf(0.0) == 0.0);
  CHECK(specialfn::erf(-0.8) == doctest::Approx(-specialfn::erf(0.8)));
}
