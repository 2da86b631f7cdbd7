#pragma once

namespace mfsbm {

/// One-dimensional heat kernel p_t(x) = (2*pi*t)^{-1/2} exp(-x^2 / (2t)).
/// Throws DomainError for t <= 0.  Always <= (2*pi*t)^{-1/2}.
double heat_kernel_value(double t, double x);

/// Pointwise square identity: p_t(x)^2 = (4*pi*t)^{-1/2} * p_{t/2}(x).
/// Returned value is the prefactor (4*pi*t)^{-1/2}.
double heat_kernel_square_prefactor(double t);

/// Half-width L such that the mass of a centred Gaussian with the given
/// variance outside [-L, L] is below eps.  Used to truncate integration
/// domains with a controlled tail.
double gaussian_tail_halfwidth(double variance, double eps);

} // namespace mfsbm
