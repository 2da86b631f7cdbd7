#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mfsbm/initial_density.hpp"
#include "mfsbm/rng.hpp"

namespace mfsbm {

/// Third moment route, for constant branching coefficients: moments equal
/// expectations over a pure-death pair-coalescence chain carrying a function
/// that stays a scaled multivariate Gaussian under both of its dynamics
/// (coordinatewise heat flow between jumps, variable identification at jumps).

/// A scaled Gaussian function of k variables,
///   g(y) = weight * N(y; mean, cov),
/// where N is the *normalized* multivariate Gaussian density.  Storing the
/// weight against the normalized density keeps heat flow weight-preserving
/// (convolution of a probability density with a probability density).
struct GaussianFunctional {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int dim() const { return static_cast<int>(mean.size()); }

  /// p_delta(x - .)^{tensor n}: weight 1, mean x*ones, covariance delta*I.
  static GaussianFunctional delta_tensor(int n, double x, double delta);

  /// weight * N(y; mean, cov).  Throws NumericError if cov is not SPD.
  double evaluate(const Eigen::VectorXd& y) const;
};

/// Coordinatewise heat flow for time dt: cov += dt * I.  Weight and mean are
/// unchanged.  heat_evolve(heat_evolve(g,a),b) == heat_evolve(g,a+b) exactly.
GaussianFunctional heat_evolve(const GaussianFunctional& g, double dt);

/// Identify variable j with variable i (1-based, i < j) and drop variable j:
/// the result satisfies coalesce(g,i,j)(y) = g(y with y_j := y_i) pointwise.
/// The restricted quadratic form is completed to a new mean/covariance and the
/// constant is absorbed into the weight.  Throws DomainError for bad indices
/// and NumericError if the covariance algebra degenerates.
GaussianFunctional coalesce(const GaussianFunctional& g, int i, int j);

/// <X0^{tensor k}, g>: closed form for Gaussian-mixture initial data (sum over
/// component assignments of k-dimensional Gaussian-Gaussian integrals);
/// tensorized Gauss-Legendre quadrature for bump initial data, which is
/// limited to k <= 3 (CapacityError above).
double pair_with_initial(const GaussianFunctional& g, const InitialDensity& init,
                         int quad_nodes = 48);

/// One coalescence event: at `time`, variables (i, j) of the then-current
/// k-variable functional were identified (indices are 1-based against the
/// pre-jump count).
struct DualJump {
  double time;
  int i;
  int j;
};

struct DualPath {
  int start;                    ///< initial variable count n
  std::vector<DualJump> jumps;  ///< strictly increasing times within the horizon
};

/// Sample the death chain from count n over [0, horizon]: waiting times are
/// Exponential(k(k-1)/2) at count k, and each jump picks a uniformly random
/// pair.  The chain halts at count 1 (rate 0).
DualPath simulate_dual_path(int n, double horizon, CounterRng& rng);

struct DualOptions {
  std::uint64_t seed = 1;
  std::uint64_t stream_tag = 0;
  std::int64_t paths = 100000;
  int block_size = 4096;  ///< deterministic blocked reduction granularity
  int quad_nodes = 48;    ///< per-axis nodes for bump-initial pairing
  bool use_openmp = true;
};

struct DualEstimate {
  /// Estimate of E[<X_t, p_delta(x-.)>^n] per requested delta.
  std::vector<double> delta_values;
  std::vector<double> delta_std_errors;
  /// Weighted combination across deltas (delta extrapolation); equals the
  /// single-delta estimate when only one delta is given.
  double value = 0.0;
  double std_error = 0.0;
  double mean_jumps = 0.0;
  std::int64_t paths = 0;
};

/// Monte Carlo over dual paths.  Each path is simulated once and evaluated at
/// every delta (and their weighted combination) so the combination's standard
/// error includes cross-delta correlations.  `combo_weights` must either be
/// empty with a single delta, or match deltas in length.
DualEstimate dual_moment_estimate(int n, double t, double x, const std::vector<double>& deltas,
                                  const std::vector<double>& combo_weights, double gamma,
                                  const InitialDensity& init, const DualOptions& opt = {});

}  // namespace mfsbm
