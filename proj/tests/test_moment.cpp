#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mfsbm/error.hpp"
#include "mfsbm/heat_kernel.hpp"
#include "mfsbm/index_set.hpp"
#include "mfsbm/initial_density.hpp"
#include "mfsbm/moment_mc.hpp"
#include "mfsbm/quadrature.hpp"

using namespace mfsbm;

namespace {

const InitialDensity kGaussInit = InitialDensity::gaussian_mixture({{1.0, 0.0, 1.0}});
const InitialDensity kMixInit =
    InitialDensity::gaussian_mixture({{0.7, -0.5, 0.8}, {0.5, 1.5, 1.2}});

SigmaHatSqField constant_field(double gamma) {
  return [gamma](double, double) { return gamma; };
}

McOptions quick(long samples, std::uint64_t seed = 11) {
  McOptions opt;
  opt.samples = samples;
  opt.seed = seed;
  return opt;
}

/// Independent second-moment oracle: direct 2-D tensor quadrature of
///   conv(t,x)^2 + gamma * int_0^t int p_{t-s}(x-z)^2 conv(s, z) dz ds.
/// Substituting s = t - w^2 and z = x + w y makes the integrand jointly
/// smooth: p_{w^2}(x-z)^2 dz = (1/w) p_1(y)^2 dy and ds = 2 w dw, so
///   term = 2 gamma int_0^{sqrt(t)} int p_1(y)^2 conv(t-w^2, x+wy) dy dw.
/// No shared code with classical_second_moment beyond the kernel itself.
double second_moment_tensor_oracle(double t, double x, const InitialDensity& init, double gamma) {
  const QuadratureRule& gl = gauss_legendre(96);
  const double ymax = 8.5;  // p_1(y)^2 mass beyond is ~1e-31
  double outer = 0.0;
  const double wmax = std::sqrt(t);
  for (std::size_t a = 0; a < gl.nodes.size(); ++a) {
    const double w = 0.5 * wmax * (gl.nodes[a] + 1.0);
    const double s = t - w * w;
    if (s <= 0.0 || s >= t) continue;
    double inner = 0.0;
    for (std::size_t b = 0; b < gl.nodes.size(); ++b) {
      const double y = ymax * gl.nodes[b];
      const double k = heat_kernel_value(1.0, y);
      inner += ymax * gl.weights[b] * k * k * init.heat_convolve(s, x + w * y);
    }
    outer += 0.5 * wmax * gl.weights[a] * 2.0 * inner;
  }
  const double mean = init.heat_convolve(t, x);
  return mean * mean + gamma * outer;
}

}  // namespace

TEST_CASE("order 1 is quadrature-exact with zero variance") {
  for (const double t : {0.25, 1.0}) {
    for (const double x : {0.0, 0.8, -1.7}) {
      const McEstimate est = moment_formula_mc(1, t, x, kMixInit, constant_field(1.0), quick(50));
      CHECK(est.std_error == 0.0);
      CHECK(est.value == doctest::Approx(kMixInit.heat_convolve(t, x)).epsilon(1e-12));
    }
  }
}

TEST_CASE("order 1 with smoothing evaluates the widened kernel") {
  const double delta = 0.05;
  const McEstimate est =
      moment_formula_mc(1, 0.7, 0.4, kMixInit, constant_field(1.0), quick(50), delta);
  CHECK(est.value == doctest::Approx(kMixInit.heat_convolve(0.7 + delta, 0.4)).epsilon(1e-12));
}

TEST_CASE("vanishing coefficient field reproduces pure heat-flow powers exactly") {
  const SigmaHatSqField zero = constant_field(0.0);
  for (int n = 1; n <= 6; ++n) {
    const McEstimate est = moment_formula_mc(n, 0.9, 0.3, kGaussInit, zero, quick(64));
    const double conv = kGaussInit.heat_convolve(0.9, 0.3);
    CHECK(est.std_error == 0.0);
    CHECK(est.value == doctest::Approx(std::pow(conv, n)).epsilon(1e-12));
  }
}

TEST_CASE("deterministic second moment matches the independent tensor oracle") {
  for (const double t : {0.5, 1.0}) {
    for (const double x : {0.0, 0.9}) {
      const double closed = classical_second_moment(t, x, kGaussInit, 1.0);
      const double oracle = second_moment_tensor_oracle(t, x, kGaussInit, 1.0);
      CHECK(closed == doctest::Approx(oracle).epsilon(1e-6));
    }
  }
  // Mixture initial data and non-unit gamma.
  const double closed = classical_second_moment(0.8, -0.4, kMixInit, 0.6);
  const double oracle = second_moment_tensor_oracle(0.8, -0.4, kMixInit, 0.6);
  CHECK(closed == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("second-moment Monte Carlo agrees with the deterministic evaluation") {
  const McEstimate est = moment_formula_mc(2, 1.0, 0.0, kGaussInit, constant_field(1.0),
                                           quick(200000, 13));
  const double target = classical_second_moment(1.0, 0.0, kGaussInit, 1.0);
  REQUIRE(est.std_error > 0.0);
  CHECK(std::abs(est.value - target) <= 3.0 * est.std_error);
  CHECK(est.std_error <= 0.01 * target);
}

TEST_CASE("smoothed second moment matches the smoothed closed form") {
  const double delta = 0.04;
  const McEstimate est = moment_formula_mc(2, 1.0, 0.5, kGaussInit, constant_field(1.0),
                                           quick(200000, 17), delta);
  const double target = classical_second_moment(1.0, 0.5, kGaussInit, 1.0, delta);
  CHECK(std::abs(est.value - target) <= 3.0 * est.std_error);
}

TEST_CASE("estimates increase with gamma under common random numbers") {
  // Every sample's integrand is a sum over depths of gamma^depth times a
  // positive factor, so with identical streams the whole estimate is
  // deterministically monotone in gamma.
  for (int n = 2; n <= 4; ++n) {
    const McEstimate lo = moment_formula_mc(n, 1.0, 0.2, kGaussInit, constant_field(0.8),
                                            quick(20000, 5));
    const McEstimate hi = moment_formula_mc(n, 1.0, 0.2, kGaussInit, constant_field(1.3),
                                            quick(20000, 5));
    CHECK(lo.value < hi.value);
  }
}

TEST_CASE("Jensen ordering across orders") {
  const McEstimate m1 = moment_formula_mc(1, 1.0, 0.0, kMixInit, constant_field(1.0), quick(50));
  const McEstimate m2 =
      moment_formula_mc(2, 1.0, 0.0, kMixInit, constant_field(1.0), quick(100000, 23));
  CHECK(m2.value >= m1.value * m1.value - 3.0 * m2.std_error);
}

TEST_CASE("visited triple counts match the closed-form enumeration sizes") {
  const McEstimate est =
      moment_formula_mc(4, 0.5, 0.0, kGaussInit, constant_field(1.0), quick(512, 3));
  REQUIRE(est.triples_per_depth.size() == 3);
  for (int depth = 1; depth <= 3; ++depth) {
    CHECK(u128_to_string(count_triples(4, depth)) ==
          std::to_string(est.triples_per_depth[depth - 1]));
  }
}

TEST_CASE("serial and parallel paths agree bit for bit") {
  for (int n = 2; n <= 3; ++n) {
    const McEstimate par =
        moment_formula_mc(n, 1.0, 0.4, kMixInit, constant_field(1.0), quick(30000, 29));
    const McEstimate ser =
        moment_formula_mc_serial(n, 1.0, 0.4, kMixInit, constant_field(1.0), quick(30000, 29));
    CHECK(par.value == ser.value);
    CHECK(par.std_error == ser.std_error);
  }
}

TEST_CASE("importance-sampling switch changes streams but not the answer") {
  McOptions on = quick(150000, 31);
  on.importance = ImportanceMode::On;
  McOptions off = quick(150000, 31);
  off.importance = ImportanceMode::Off;
  const McEstimate a = moment_formula_mc(2, 1.0, 0.0, kGaussInit, constant_field(1.0), on);
  const McEstimate b = moment_formula_mc(2, 1.0, 0.0, kGaussInit, constant_field(1.0), off);
  const double combined = std::hypot(a.std_error, b.std_error);
  CHECK(std::abs(a.value - b.value) <= 3.0 * combined);
}

TEST_CASE("orders above the cap are refused") {
  McOptions opt = quick(10);
  CHECK_THROWS_AS(moment_formula_mc(7, 1.0, 0.0, kGaussInit, constant_field(1.0), opt),
                  CapacityError);
  opt.order_cap = 3;
  CHECK_THROWS_AS(moment_formula_mc(4, 1.0, 0.0, kGaussInit, constant_field(1.0), opt),
                  CapacityError);
}

TEST_CASE("growth envelope evaluates in log space without overflow") {
  CHECK(moment_upper_bound(1, 2.0, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(moment_upper_bound(2, 2.0, 0.5) ==
        doctest::Approx(2.0 * 0.25 * std::pow(2.0, 1.5)).epsilon(1e-12));
  CHECK(std::isinf(moment_upper_bound(300, 1.0, 10.0)));
}
