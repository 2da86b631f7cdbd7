#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mfsbm/error.hpp"
#include "mfsbm/heat_kernel.hpp"
#include "mfsbm/quadrature.hpp"
#include "mfsbm/rng.hpp"

using namespace mfsbm;

TEST_CASE("kernel values match high-precision references") {
  // Frozen from a 30-digit arbitrary-precision evaluation of
  // (2 pi t)^{-1/2} exp(-x^2 / (2 t)).
  CHECK(heat_kernel_value(1.0, 0.0) == doctest::Approx(0.39894228040143268).epsilon(1e-15));
  CHECK(heat_kernel_value(1.0, 1.0) == doctest::Approx(0.24197072451914335).epsilon(1e-15));
  CHECK(heat_kernel_value(2.0, 0.0) == doctest::Approx(0.28209479177387814).epsilon(1e-15));
  CHECK(heat_kernel_value(2.0, 1.0) == doctest::Approx(0.2196956447338612).epsilon(1e-15));
  CHECK(heat_kernel_value(0.25, -0.3) == doctest::Approx(0.66644920578359927).epsilon(1e-15));
  CHECK(heat_kernel_value(0.5, 1.7) == doctest::Approx(0.031355520248434193).epsilon(1e-15));
}

TEST_CASE("kernel square prefactor matches (4 pi t)^{-1/2}") {
  CHECK(heat_kernel_square_prefactor(1.0) == doctest::Approx(0.28209479177387814).epsilon(1e-15));
  CHECK(heat_kernel_square_prefactor(0.1) == doctest::Approx(0.89206205807638556).epsilon(1e-15));
}

TEST_CASE("square identity p_t(x)^2 = prefactor(t) * p_{t/2}(x) on a random cloud") {
  CounterRng rng(stream_key(20260801, 1));
  for (int i = 0; i < 1000; ++i) {
    const double t = rng.uniform(0.01, 5.0);
    const double x = rng.uniform(-10.0, 10.0);
    const double lhs = heat_kernel_value(t, x) * heat_kernel_value(t, x);
    const double rhs = heat_kernel_square_prefactor(t) * heat_kernel_value(t / 2.0, x);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("kernel never exceeds its stated sup bound") {
  CounterRng rng(stream_key(20260801, 2));
  const double two_pi = 6.283185307179586476925286766559;
  for (int i = 0; i < 1000; ++i) {
    const double t = rng.uniform(0.001, 10.0);
    const double x = rng.uniform(-20.0, 20.0);
    CHECK(heat_kernel_value(t, x) <= 1.0 / std::sqrt(two_pi * t) + 1e-16);
  }
}

TEST_CASE("semigroup: convolving p_s with p_t integrates to p_{s+t}") {
  const double s = 0.3;
  const double t = 0.9;
  for (const double x : {0.0, 0.5, -1.3}) {
    const double expected = heat_kernel_value(s + t, x);
    const double halfwidth = gaussian_tail_halfwidth(s + t, 1e-14) + std::abs(x);
    const QuadratureResult got = integrate(
        [&](double y) { return heat_kernel_value(s, x - y) * heat_kernel_value(t, y); },
        -halfwidth, halfwidth, 1e-12, 1e-12);
    CHECK(got.value == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("tail halfwidth leaves at most eps of mass outside") {
  // Frozen reference: a variance-2 Gaussian has mass 1.9662e-10 outside
  // [-9, 9] (exact quantile 9.0).  The returned halfwidth must leave at most
  // eps of mass outside, and may be conservative only by a bounded pad.
  for (const double eps : {1e-6, 1e-9, 1.9662e-10}) {
    const double L = gaussian_tail_halfwidth(2.0, eps);
    CHECK(L > 0.0);
    const double outside = std::erfc(L / (std::sqrt(2.0) * std::sqrt(2.0)));
    CHECK(outside <= eps);
  }
  // Not absurdly conservative: within two standard deviations of the exact
  // variance-2 quantile for this tail mass.
  const double L = gaussian_tail_halfwidth(2.0, 1.9662e-10);
  CHECK(L >= 9.0);
  CHECK(L <= 9.0 + 2.0 * std::sqrt(2.0));
}

TEST_CASE("nonpositive times are rejected") {
  CHECK_THROWS_AS(heat_kernel_value(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(heat_kernel_value(-1.0, 0.0), DomainError);
}
