#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mfsbm/dual.hpp"
#include "mfsbm/error.hpp"
#include "mfsbm/heat_kernel.hpp"
#include "mfsbm/initial_density.hpp"
#include "mfsbm/moment_mc.hpp"
#include "mfsbm/quadrature.hpp"
#include "mfsbm/rng.hpp"

using namespace mfsbm;

namespace {

const InitialDensity kGaussInit = InitialDensity::gaussian_mixture({{1.0, 0.0, 1.0}});
const InitialDensity kMixInit =
    InitialDensity::gaussian_mixture({{0.6, -0.5, 0.7}, {0.8, 1.0, 0.4}});
const InitialDensity kBumpInit = InitialDensity::bump(0.2, 1.5, 0.8);

GaussianFunctional random_functional(int dim, std::uint64_t key) {
  CounterRng rng(key);
  GaussianFunctional g;
  g.weight = rng.uniform(0.5, 2.0);
  g.mean = Eigen::VectorXd(dim);
  for (int i = 0; i < dim; ++i) g.mean(i) = rng.uniform(-1.0, 1.0);
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) a(i, j) = rng.uniform(-0.6, 0.6);
  }
  g.cov = a * a.transpose() + 0.4 * Eigen::MatrixXd::Identity(dim, dim);
  return g;
}

}  // namespace

TEST_CASE("delta tensor is a product of one-dimensional observation kernels") {
  const double x = 0.4;
  const double delta = 0.03;
  const GaussianFunctional g = GaussianFunctional::delta_tensor(3, x, delta);
  CHECK(g.weight == 1.0);
  CHECK(g.dim() == 3);
  Eigen::VectorXd y(3);
  y << 0.1, 0.55, -0.2;
  double prod = 1.0;
  for (int i = 0; i < 3; ++i) prod *= heat_kernel_value(delta, y(i) - x);
  CHECK(g.evaluate(y) == doctest::Approx(prod).epsilon(1e-12));
  CHECK_THROWS_AS(GaussianFunctional::delta_tensor(0, x, delta), DomainError);
  CHECK_THROWS_AS(GaussianFunctional::delta_tensor(2, x, 0.0), DomainError);
}

TEST_CASE("heat flow is a weight-preserving semigroup") {
  const GaussianFunctional g = random_functional(3, 7);
  const GaussianFunctional one = heat_evolve(heat_evolve(g, 0.125), 0.375);
  const GaussianFunctional two = heat_evolve(g, 0.5);
  CHECK(one.weight == g.weight);
  CHECK((one.mean - g.mean).norm() == 0.0);
  CHECK((one.cov - two.cov).norm() == 0.0);  // diagonal adds are exact here
  CHECK_THROWS_AS(heat_evolve(g, -0.1), DomainError);
}

TEST_CASE("coalescence equals variable identification pointwise") {
  for (const auto [i, j] : {std::pair{1, 2}, std::pair{1, 4}, std::pair{2, 3}, std::pair{3, 4}}) {
    const GaussianFunctional g = random_functional(4, 100 + static_cast<std::uint64_t>(4 * i + j));
    const GaussianFunctional c = coalesce(g, i, j);
    REQUIRE(c.dim() == 3);
    CounterRng rng(555);
    for (int rep = 0; rep < 100; ++rep) {
      Eigen::VectorXd y(3);
      for (int a = 0; a < 3; ++a) y(a) = rng.uniform(-2.0, 2.0);
      // Rebuild the 4-vector with variable j set to variable i's value.
      Eigen::VectorXd full(4);
      int col = 0;
      for (int m = 1; m <= 4; ++m) {
        if (m == j) continue;
        full(m - 1) = y(col++);
      }
      full(j - 1) = full(i - 1);
      CHECK(c.evaluate(y) == doctest::Approx(g.evaluate(full)).epsilon(1e-10));
    }
  }
}

TEST_CASE("coalescing a two-variable observation pair gives the squared kernel") {
  const double x = -0.3;
  const double delta = 0.05;
  const GaussianFunctional pair = GaussianFunctional::delta_tensor(2, x, delta);
  const GaussianFunctional c = coalesce(pair, 1, 2);
  REQUIRE(c.dim() == 1);
  // p_delta(y-x)^2 = (4 pi delta)^{-1/2} p_{delta/2}(y-x): the collapsed
  // functional is the half-width kernel with the square prefactor as weight.
  CHECK(c.weight == doctest::Approx(heat_kernel_square_prefactor(delta)).epsilon(1e-12));
  CHECK(c.mean(0) == doctest::Approx(x).epsilon(1e-12));
  CHECK(c.cov(0, 0) == doctest::Approx(0.5 * delta).epsilon(1e-12));
  for (const double y : {-0.42, -0.3, 0.11}) {
    Eigen::VectorXd v(1);
    v << y;
    const double kernel = heat_kernel_value(delta, y - x);
    CHECK(c.evaluate(v) == doctest::Approx(kernel * kernel).epsilon(1e-12));
  }
}

TEST_CASE("coalesce rejects bad indices and degenerate covariances") {
  const GaussianFunctional g = random_functional(3, 11);
  CHECK_THROWS_AS(coalesce(g, 0, 2), DomainError);
  CHECK_THROWS_AS(coalesce(g, 2, 2), DomainError);
  CHECK_THROWS_AS(coalesce(g, 1, 4), DomainError);
  GaussianFunctional bad = g;
  bad.cov << 1.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0;  // indefinite block
  CHECK_THROWS_AS(coalesce(bad, 1, 2), NumericError);
  CHECK_THROWS_AS(bad.evaluate(Eigen::VectorXd::Zero(3)), NumericError);
}

TEST_CASE("pairing with a Gaussian mixture matches the heat convolution") {
  // One variable: <X0, p_s(x - .)> is the mixture heat convolution.
  for (const InitialDensity* init : {&kGaussInit, &kMixInit}) {
    for (const double s : {0.3, 1.02}) {
      GaussianFunctional g;
      g.weight = 1.0;
      g.mean = Eigen::VectorXd::Constant(1, 0.7);
      g.cov = s * Eigen::MatrixXd::Identity(1, 1);
      CHECK(pair_with_initial(g, *init) ==
            doctest::Approx(init->heat_convolve(s, 0.7)).epsilon(1e-12));
    }
  }
  // Independent coordinates factorize: a diagonal two-variable functional
  // pairs to the product of one-variable pairings.
  GaussianFunctional g2;
  g2.weight = 1.3;
  g2.mean = Eigen::VectorXd(2);
  g2.mean << 0.2, -0.4;
  g2.cov = Eigen::MatrixXd::Zero(2, 2);
  g2.cov(0, 0) = 0.5;
  g2.cov(1, 1) = 0.8;
  const double expected =
      1.3 * kMixInit.heat_convolve(0.5, 0.2) * kMixInit.heat_convolve(0.8, -0.4);
  CHECK(pair_with_initial(g2, kMixInit) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("pairing with bump initial data matches adaptive quadrature") {
  GaussianFunctional g;
  g.weight = 1.0;
  g.mean = Eigen::VectorXd::Constant(1, 0.5);
  g.cov = 0.4 * Eigen::MatrixXd::Identity(1, 1);
  const double lo = kBumpInit.bump_center() - kBumpInit.bump_radius();
  const double hi = kBumpInit.bump_center() + kBumpInit.bump_radius();
  const QuadratureResult oracle = integrate(
      [&](double y) { return kBumpInit.value(y) * heat_kernel_value(0.4, y - 0.5); }, lo, hi,
      1e-12, 1e-12);
  CHECK(pair_with_initial(g, kBumpInit, 64) == doctest::Approx(oracle.value).epsilon(1e-8));
  // Three variables still work; four exceed the tensor-quadrature capacity.
  CHECK(pair_with_initial(GaussianFunctional::delta_tensor(3, 0.2, 0.5), kBumpInit, 24) > 0.0);
  CHECK_THROWS_AS(pair_with_initial(GaussianFunctional::delta_tensor(4, 0.2, 0.5), kBumpInit),
                  CapacityError);
}

TEST_CASE("death chain: counts, ordering, and pair frequencies") {
  const double horizon = 1.0;
  int first_pair_counts[3] = {0, 0, 0};  // (1,2), (1,3), (2,3)
  int jumped = 0;
  long total_jumps = 0;
  const long paths = 30000;
  for (long s = 0; s < paths; ++s) {
    CounterRng rng(stream_key(2024, 1, static_cast<std::uint64_t>(s)));
    const DualPath path = simulate_dual_path(3, horizon, rng);
    REQUIRE(path.start == 3);
    REQUIRE(path.jumps.size() <= 2);
    total_jumps += static_cast<long>(path.jumps.size());
    double prev = 0.0;
    int k = 3;
    for (const DualJump& jump : path.jumps) {
      CHECK(jump.time > prev);
      CHECK(jump.time <= horizon);
      CHECK(jump.i >= 1);
      CHECK(jump.i < jump.j);
      CHECK(jump.j <= k);
      prev = jump.time;
      --k;
    }
    if (!path.jumps.empty()) {
      ++jumped;
      const DualJump& f = path.jumps.front();
      const int slot = (f.i == 1) ? (f.j == 2 ? 0 : 1) : 2;
      ++first_pair_counts[slot];
    }
  }
  // Mean jump count for the 3 -> 2 -> 1 chain with rates 3 and 1 over [0, 1]:
  // E[J] = 2 - 0.5 e^{-3} - 1.5 e^{-1}.
  const double expected_jumps = 2.0 - 0.5 * std::exp(-3.0) - 1.5 * std::exp(-1.0);
  const double mean_jumps = static_cast<double>(total_jumps) / static_cast<double>(paths);
  CHECK(std::abs(mean_jumps - expected_jumps) < 0.02);
  // First jump picks each of the three pairs uniformly.
  for (int c : first_pair_counts) {
    const double frac = static_cast<double>(c) / static_cast<double>(jumped);
    CHECK(std::abs(frac - 1.0 / 3.0) < 0.02);
  }
  // A single variable never jumps.
  CounterRng rng(9);
  CHECK(simulate_dual_path(1, 5.0, rng).jumps.empty());
}

TEST_CASE("order one is the smoothed heat convolution with zero variance") {
  DualOptions opt;
  opt.paths = 500;
  opt.seed = 3;
  const double t = 0.8;
  const double x = 0.25;
  const double delta = 0.02;
  const DualEstimate est = dual_moment_estimate(1, t, x, {delta}, {}, 1.0, kMixInit, opt);
  CHECK(est.value == doctest::Approx(kMixInit.heat_convolve(t + delta, x)).epsilon(1e-12));
  CHECK(est.std_error == 0.0);
  CHECK(est.mean_jumps == 0.0);
}

TEST_CASE("zero branching rate reproduces powers of the heat flow") {
  DualOptions opt;
  opt.paths = 20000;
  opt.seed = 5;
  const double t = 0.3;
  const double x = 0.1;
  const double delta = 0.04;
  for (const int n : {2, 3}) {
    const DualEstimate est = dual_moment_estimate(n, t, x, {delta}, {}, 0.0, kGaussInit, opt);
    const double conv = kGaussInit.heat_convolve(t + delta, x);
    const double expected = std::pow(conv, n);
    REQUIRE(est.std_error > 0.0);
    CHECK(std::abs(est.value - expected) <= 3.0 * est.std_error);
    // The no-jump paths carry e^{n(n-1)t/2} conv^n and occur with the
    // complementary probability, so the relative noise is known a priori.
    CHECK(est.std_error < 0.1 * expected);
  }
}

TEST_CASE("second moment agrees with the closed form") {
  DualOptions opt;
  opt.paths = 120000;
  opt.seed = 17;
  const double delta = 0.02;
  struct Case {
    const InitialDensity* init;
    double t, x, gamma;
  };
  for (const Case& c : {Case{&kGaussInit, 1.0, 0.0, 1.0}, Case{&kGaussInit, 1.0, 1.0, 1.0},
                        Case{&kMixInit, 0.7, 0.4, 0.6}}) {
    const DualEstimate est =
        dual_moment_estimate(2, c.t, c.x, {delta}, {}, c.gamma, *c.init, opt);
    const double exact = classical_second_moment(c.t, c.x, *c.init, c.gamma, delta);
    REQUIRE(est.std_error > 0.0);
    CHECK(std::abs(est.value - exact) <= 3.0 * est.std_error);
    CHECK(est.std_error <= 0.01 * exact);
  }
}

TEST_CASE("multi-delta estimates combine linearly with the given weights") {
  DualOptions opt;
  opt.paths = 4000;
  opt.seed = 23;
  const std::vector<double> deltas{0.04, 0.02};
  const std::vector<double> weights{-1.0, 2.0};
  const DualEstimate est = dual_moment_estimate(2, 0.5, 0.3, deltas, weights, 1.0, kGaussInit, opt);
  REQUIRE(est.delta_values.size() == 2);
  const double combo = weights[0] * est.delta_values[0] + weights[1] * est.delta_values[1];
  CHECK(est.value == doctest::Approx(combo).epsilon(1e-12));
  // The two ladder estimates are strongly correlated, so the combination's
  // standard error is far below the weighted-absolute sum.
  CHECK(est.std_error < std::abs(weights[0]) * est.delta_std_errors[0] +
                            std::abs(weights[1]) * est.delta_std_errors[1]);
}

TEST_CASE("estimates are reproducible and stream-separated") {
  DualOptions opt;
  opt.paths = 3000;
  opt.seed = 31;
  const auto run = [&](const DualOptions& o) {
    return dual_moment_estimate(3, 0.6, 0.2, {0.03}, {}, 1.0, kMixInit, o);
  };
  const DualEstimate a = run(opt);
  const DualEstimate b = run(opt);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
  CHECK(a.mean_jumps == b.mean_jumps);
  DualOptions serial = opt;
  serial.use_openmp = false;
  const DualEstimate c = run(serial);
  CHECK(a.value == c.value);
  CHECK(a.std_error == c.std_error);
  DualOptions other = opt;
  other.stream_tag = 1;
  CHECK(run(other).value != a.value);
}

TEST_CASE("invalid requests are rejected") {
  DualOptions opt;
  opt.paths = 10;
  CHECK_THROWS_AS(dual_moment_estimate(0, 1.0, 0.0, {0.02}, {}, 1.0, kGaussInit, opt), DomainError);
  CHECK_THROWS_AS(dual_moment_estimate(2, 0.0, 0.0, {0.02}, {}, 1.0, kGaussInit, opt), DomainError);
  CHECK_THROWS_AS(dual_moment_estimate(2, 1.0, 0.0, {}, {}, 1.0, kGaussInit, opt), DomainError);
  CHECK_THROWS_AS(dual_moment_estimate(2, 1.0, 0.0, {0.02, -0.01}, {1.0, 1.0}, 1.0, kGaussInit, opt),
                  DomainError);
  CHECK_THROWS_AS(dual_moment_estimate(2, 1.0, 0.0, {0.04, 0.02}, {}, 1.0, kGaussInit, opt),
                  DomainError);
  CHECK_THROWS_AS(dual_moment_estimate(2, 1.0, 0.0, {0.04, 0.02}, {1.0}, 1.0, kGaussInit, opt),
                  DomainError);
  CHECK_THROWS_AS(dual_moment_estimate(2, 1.0, 0.0, {0.02}, {}, -1.0, kGaussInit, opt), DomainError);
  DualOptions tiny = opt;
  tiny.paths = 1;
  CHECK_THROWS_AS(dual_moment_estimate(2, 1.0, 0.0, {0.02}, {}, 1.0, kGaussInit, tiny), DomainError);
}
