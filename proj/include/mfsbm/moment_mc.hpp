#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mfsbm/index_set.hpp"
#include "mfsbm/initial_density.hpp"

namespace mfsbm {

/// Squared branching coefficient as a field over (s, z).
using SigmaHatSqField = std::function<double(double s, double z)>;

enum class ImportanceMode { Auto, On, Off };

struct McOptions {
  long samples = 100000;
  std::uint64_t seed = 1;
  /// Extra stream-key component, so different grid nodes / callers draw
  /// independent streams from the same seed.
  std::uint64_t stream_tag = 0;
  ImportanceMode importance = ImportanceMode::Auto;
  /// Orders above this raise CapacityError (enumeration growth is factorial).
  int order_cap = 6;
  /// Samples per reduction block; the estimate is the ordered sum of block
  /// sums, identical for the serial and OpenMP paths.
  int block_size = 4096;
};

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long samples = 0;
  /// Triples visited per positive depth (diagnostic; index 0 <-> depth 1).
  std::vector<long> triples_per_depth;
  long degenerate_samples = 0; // samples dropped for exactly-tied times
};

/// Precomputed integrand structure for every triple of one order: per
/// coalescence label the two kernel-factor slots, each anchored either at the
/// observation point (alpha slot) or at an earlier label's point (beta slot).
class TripleTable {
public:
  struct Anchor {
    bool at_observation; // alpha slot: kernel links z_k to the observation point
    int parent;          // beta slot: links z_k to z_parent, parent < k
  };
  struct CompiledTriple {
    int depth;                        // nprime
    int a_exponent;                   // n - |alpha|
    std::vector<Anchor> first_anchor; // per label k (0-based k-1)
    std::vector<Anchor> second_anchor;
    std::vector<int> density_positions; // i with beta_i == 0: density factor at (s_i, z_i)
  };

  explicit TripleTable(int n);

  /// Cached table for an order (thread-safe; enumeration runs once per order).
  static const TripleTable& shared(int n);

  int order() const { return n_; }
  const std::vector<CompiledTriple>& triples() const { return triples_; }
  const std::vector<long>& count_per_depth() const { return count_per_depth_; }

private:
  int n_;
  std::vector<CompiledTriple> triples_;
  std::vector<long> count_per_depth_;
};

/// Monte Carlo evaluation of the order-n moment of the measure density at
/// (t, x): the sum over depths and triples of simplex/space integrals of the
/// kernel-product integrand, with sigma_hat_sq supplying the squared
/// coefficient at the integration nodes.  `delta > 0` returns the
/// delta-smoothed moment (the observation kernels widen by delta; the
/// integration range and coefficient field are unchanged).
///
/// The depth-0 term is deterministic, so order 1 has zero variance, and a
/// vanishing coefficient field reproduces the pure heat-flow power exactly.
McEstimate moment_formula_mc(int n, double t, double x, const InitialDensity& init,
                             const SigmaHatSqField& sigma_hat_sq, const McOptions& opt,
                             double delta = 0.0);

/// Serial reference implementation: same sampling streams, same blocked
/// reduction, no OpenMP.  Agrees with moment_formula_mc bit for bit.
McEstimate moment_formula_mc_serial(int n, double t, double x, const InitialDensity& init,
                                    const SigmaHatSqField& sigma_hat_sq, const McOptions& opt,
                                    double delta = 0.0);

/// Deterministic second moment for a constant coefficient gamma:
///   conv(t+delta, x)^2 + gamma * int_0^t (4 pi (t+delta-s))^{-1/2}
///                         * conv((t+delta+s)/2, x) ds,
/// evaluated by adaptive quadrature after the square-root substitution that
/// removes the endpoint singularity at s = t (delta = 0).
double classical_second_moment(double t, double x, const InitialDensity& init, double gamma,
                               double delta = 0.0, double tol = 1e-10);

/// Growth envelope c1 * c2^n * (n!)^{3/2}, evaluated in log space; saturates
/// to +infinity instead of overflowing.
double moment_upper_bound(int n, double c1, double c2);

} // namespace mfsbm
