#include "mfsbm/heat_kernel.hpp"

#include <cmath>

#include "mfsbm/error.hpp"

namespace mfsbm {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

double heat_kernel_value(double t, double x) {
  if (!(t > 0.0) || !std::isfinite(t) || !std::isfinite(x)) {
    throw DomainError("heat_kernel_value: requires finite x and t > 0");
  }
  return std::exp(-x * x / (2.0 * t)) / std::sqrt(kTwoPi * t);
}

double heat_kernel_square_prefactor(double t) {
  if (!(t > 0.0)) {
    throw DomainError("heat_kernel_square_prefactor: requires t > 0");
  }
  return 1.0 / std::sqrt(2.0 * kTwoPi * t);
}

double gaussian_tail_halfwidth(double variance, double eps) {
  if (!(variance > 0.0) || !(eps > 0.0) || !(eps < 1.0)) {
    throw DomainError("gaussian_tail_halfwidth: requires variance > 0 and eps in (0,1)");
  }
  // Two-sided tail of N(0, v) outside [-L, L] is bounded by exp(-L^2/(2v)),
  // so L = sqrt(2 v log(1/eps)) suffices; pad by one standard deviation.
  return std::sqrt(2.0 * variance * std::log(1.0 / eps)) + std::sqrt(variance);
}

} // namespace mfsbm
