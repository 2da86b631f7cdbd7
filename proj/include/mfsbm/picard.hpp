#pragma once

#include <cstdint>
#include <vector>

#include "mfsbm/initial_density.hpp"
#include "mfsbm/moment_field.hpp"
#include "mfsbm/moment_mc.hpp"
#include "mfsbm/sigma.hpp"

namespace mfsbm {

struct PicardOptions {
  int orders = 2;        // N: moments u_1 ... u_N carried on the grid
  double horizon = 1.0;  // T
  int time_nodes = 33;   // grid nodes including t = 0
  int space_nodes = 65;
  /// Spatial box [-L, L]; 0 derives L = 6 * (max initial std + sqrt(T)) + |furthest centre|.
  double space_halfwidth = 0.0;
  long samples = 4000;
  std::uint64_t seed = 1;
  ImportanceMode importance = ImportanceMode::Auto;
  int max_iterations = 40;
  /// Convergence threshold on the sup-norm difference between iterates.
  double tol = 1e-5;
  int order_cap = 6;
};

struct PicardDiagnostics {
  /// h[k-1] = sup-norm difference between iterates k and k-1 (k = 1, 2, ...).
  std::vector<double> h;
  int iterations = 0;
  bool converged = false;
};

/// Spatial grid the solver uses for the given options/initial condition.
MomentField make_picard_grid(const InitialDensity& init, const PicardOptions& opt);

/// Zeroth iterate: the moment formula driven by the coefficient functional
/// evaluated on powers of the initial density, f(s, z, (X0(z), ..., X0(z)^N)).
MomentField picard_initial(const SigmaSpec& sigma, const InitialDensity& init,
                           const PicardOptions& opt);

/// One fixed-point update: re-evaluates every grid moment with the coefficient
/// field f(s, z, u_prev(s, z)).  Random streams are keyed by (seed, node,
/// sample) only, never by iteration index, so successive steps reuse the same
/// sample set (common random numbers) and the iteration is a deterministic
/// contraction.  Order-1 entries are quadrature-exact and identical in every
/// iterate.
MomentField picard_step(const MomentField& prev, const SigmaSpec& sigma,
                        const InitialDensity& init, const PicardOptions& opt);

/// Iterate from picard_initial until the sup-difference drops below tol or the
/// iteration budget is reached.
MomentField picard_solve(const SigmaSpec& sigma, const InitialDensity& init,
                         const PicardOptions& opt, PicardDiagnostics* diagnostics = nullptr);

/// Coefficient field induced by a solved moment grid: f(s, z, u(s, z)).
SigmaHatSqField sigma_field_from_moments(const SigmaSpec& sigma, const MomentField& u);

} // namespace mfsbm
