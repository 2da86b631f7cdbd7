#pragma once

#include <functional>
#include <vector>

namespace mfsbm {

struct QuadratureResult {
  double value = 0.0;
  double error_bound = 0.0; // sum of per-interval Gauss/Kronrod discrepancies
  int intervals = 0;        // intervals in the final partition
};

/// Adaptive Gauss-Kronrod (7/15) integration of f over [a, b].
///
/// Splits the interval with the largest local error estimate until the summed
/// estimate drops below max(abs_tol, rel_tol * |value|) or the interval budget
/// is exhausted.  On exhaustion throws NumericError carrying the best estimate
/// and its error bound.  a > b integrates with the usual sign flip.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double abs_tol = 1e-10, double rel_tol = 1e-10,
                           int max_intervals = 4000);

/// Nodes and weights of an m-point rule, computed once via the Golub-Welsch
/// eigenvalue method (symmetric tridiagonal Jacobi matrix).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Hermite rule for weight exp(-x^2) on the whole line:
/// sum_i w_i g(x_i) ~ integral exp(-x^2) g(x) dx.
/// Against a Gaussian density: E[g(Z)] for Z ~ N(mu, v) is
/// (1/sqrt(pi)) sum_i w_i g(mu + sqrt(2 v) x_i).
const QuadratureRule& gauss_hermite(int m);

/// Gauss-Legendre rule on [-1, 1].
const QuadratureRule& gauss_legendre(int m);

} // namespace mfsbm
