#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mfsbm/error.hpp"
#include "mfsbm/quadrature.hpp"

using namespace mfsbm;

namespace {

// Monomial moments of exp(-x^2): integral x^{2k} exp(-x^2) dx
// = sqrt(pi) * (2k-1)!! / 2^k; odd moments vanish.
double hermite_moment(int power) {
  if (power % 2 == 1) return 0.0;
  const double sqrt_pi = 1.7724538509055160272981674833411;
  double value = sqrt_pi;
  for (int k = 1; 2 * k <= power; ++k) value *= (2.0 * k - 1.0) / 2.0;
  return value;
}

}  // namespace

TEST_CASE("Gauss-Hermite integrates monomials exactly up to degree 2m-1") {
  for (const int m : {1, 2, 5, 9, 21, 48}) {
    const QuadratureRule& rule = gauss_hermite(m);
    REQUIRE(rule.nodes.size() == static_cast<std::size_t>(m));
    for (int power = 0; power <= 2 * m - 1; ++power) {
      double sum = 0.0;
      double scale = 0.0;  // natural roundoff scale of the signed sum
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double term = rule.weights[i] * std::pow(std::abs(rule.nodes[i]), power);
        scale += term;
        sum += rule.nodes[i] < 0.0 && power % 2 == 1 ? -term : term;
      }
      const double expected = hermite_moment(power);
      CHECK(std::abs(sum - expected) <= 1e-10 * std::max(1.0, scale));
    }
  }
}

TEST_CASE("high-order Gauss-Hermite reproduces oscillatory integrals") {
  // integral exp(-x^2) cos(a x) dx = sqrt(pi) exp(-a^2/4); smooth integrand,
  // so node/weight errors are not amplified.
  const double sqrt_pi = 1.7724538509055160272981674833411;
  for (const int m : {21, 48, 96}) {
    const QuadratureRule& rule = gauss_hermite(m);
    for (const double a : {1.0, 3.0}) {
      double sum = 0.0;
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        sum += rule.weights[i] * std::cos(a * rule.nodes[i]);
      }
      const double expected = sqrt_pi * std::exp(-a * a / 4.0);
      CHECK(std::abs(sum - expected) <= 1e-13);
    }
  }
}

TEST_CASE("Gauss-Legendre integrates monomials exactly up to degree 2m-1") {
  for (const int m : {1, 2, 5, 16, 48}) {
    const QuadratureRule& rule = gauss_legendre(m);
    REQUIRE(rule.nodes.size() == static_cast<std::size_t>(m));
    for (int power = 0; power <= 2 * m - 1; ++power) {
      double sum = 0.0;
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        sum += rule.weights[i] * std::pow(rule.nodes[i], power);
      }
      const double expected = power % 2 == 1 ? 0.0 : 2.0 / (power + 1.0);
      CHECK(std::abs(sum - expected) <= 1e-12 * std::max(1.0, std::abs(expected)));
    }
  }
}

TEST_CASE("adaptive integration reproduces closed forms") {
  const QuadratureResult a = integrate([](double x) { return std::sin(x); }, 0.0, 3.14159265358979323846);
  CHECK(a.value == doctest::Approx(2.0).epsilon(1e-12));

  const QuadratureResult b = integrate([](double x) { return std::exp(-x * x); }, -8.0, 8.0);
  CHECK(b.value == doctest::Approx(1.7724538509055160273).epsilon(1e-12));

  // Integrable endpoint singularity 1/sqrt(x) on (0, 1].
  const QuadratureResult c =
      integrate([](double x) { return 1.0 / std::sqrt(x); }, 1e-12, 1.0, 1e-9, 1e-9, 20000);
  CHECK(c.value == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("reversed limits flip the sign") {
  const QuadratureResult fwd = integrate([](double x) { return x * x; }, 0.0, 2.0);
  const QuadratureResult rev = integrate([](double x) { return x * x; }, 2.0, 0.0);
  CHECK(fwd.value == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
  CHECK(rev.value == doctest::Approx(-8.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("exhausting the interval budget raises") {
  // A single interval cannot push a broad Gaussian to 1e-14, and a budget of
  // one forbids splitting, so the error bound must stay above tolerance.
  CHECK_THROWS_AS(integrate([](double x) { return std::exp(-x * x); }, -8.0, 8.0,
                            1e-14, 1e-14, 1),
                  NumericError);
  // The thrown error still carries a usable best estimate.
  try {
    integrate([](double x) { return std::exp(-x * x); }, -8.0, 8.0, 1e-14, 1e-14, 1);
    CHECK(false);
  } catch (const NumericError& e) {
    CHECK(std::abs(e.best_estimate - 1.7724538509055160273) < 0.5);
    CHECK(e.error_bound > 1e-14);
  }
}
