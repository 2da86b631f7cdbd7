#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mfsbm/initial_density.hpp"
#include "mfsbm/sigma.hpp"

namespace mfsbm {

/// Branching Brownian particle ensemble approximating the measure-valued
/// process.  Particles carry mass 1/n, diffuse with variance t, and branch
/// critically (0 or 2 offspring, fair coin) at rate n * sigma_tilde^2, where
/// sigma_tilde is the delta-smoothed square root of the branching functional
/// evaluated on ensemble-estimated law moments (mean-field closure across
/// replicas).
///
/// Time stepping: the branching rate of each particle is frozen at the start
/// of the step (at the particle's position and the step-start law field), and
/// the event indicator for the step is a single thinning uniform.  Conditional
/// on an event, the event time inside the step is drawn exactly (truncated
/// exponential, reusing the thinning uniform), the particle diffuses to the
/// event time, and children born there continue within the same step with the
/// same frozen law field.  For a constant branching coefficient the scheme is
/// therefore an exact simulation of the continuous-time system: lifetimes are
/// exactly exponential and Brownian increments are pieced at the true event
/// times.  For law-dependent coefficients the rate freeze contributes an
/// O(dt) bias controlled by the step-size invariant below.

struct ParticleConfig {
  int scaling_n = 100;      ///< mass 1/n per particle, rate multiplier n
  double delta = 0.02;      ///< smoothing parameter (> 0)
  double dt = 1e-3;         ///< time step; requires dt * n * band_upper <= 0.1
  double horizon = 1.0;     ///< terminal time T
  int replicas = 1000;      ///< lockstep replica count M (>= 2)
  std::uint64_t seed = 1;
  std::uint64_t stream_tag = 0;  ///< extra stream separator for independent runs

  /// Law-closure grid (used only when sigma reads moments): nodes on
  /// [-space_halfwidth, space_halfwidth]; 0 auto-sizes from init and horizon.
  double space_halfwidth = 0.0;
  int law_nodes = 41;
  int smoothing_nodes = 9;  ///< Gauss-Hermite nodes for the coefficient smoothing

  std::int64_t population_cap = 1'000'000;  ///< per replica, hard stop

  bool record_lifetimes = false;
  std::size_t lifetime_cap = 1u << 22;  ///< per replica, memory guard
  bool record_tree = false;             ///< full ancestry dump (small runs only)

  std::vector<double> probe_times;  ///< snapshot times; must sit on the step grid
  bool use_openmp = true;
};

/// (birth time, lifetime) of a particle whose branching event was observed.
struct LifetimeRecord {
  float birth;
  float lifetime;
};

/// One node of the recorded ancestry forest (record_tree only).
struct TreeNode {
  std::int64_t parent;  ///< index into the same replica's node list; -1 for roots
  double birth;
  double death;  ///< branching-event time; -1 while alive at the horizon
  double birth_position;
  double death_position;  ///< position at the event; NaN while alive
  int offspring;          ///< 0 or 2; -1 while alive
};

/// Particle positions of every replica at one probe time.
struct EnsembleSnapshot {
  double time;
  std::vector<std::vector<float>> positions;  ///< [replica][particle]
};

struct EnsembleResult {
  ParticleConfig config;  ///< echoed, with the resolved space halfwidth
  double particle_mass;   ///< 1 / scaling_n
  std::int64_t initial_count;  ///< particles per replica at time 0

  std::vector<EnsembleSnapshot> snapshots;  ///< aligned with config.probe_times

  std::uint64_t total_events = 0;
  std::uint64_t total_splits = 0;

  std::vector<LifetimeRecord> lifetimes;  ///< merged in replica order
  bool lifetimes_truncated = false;

  std::vector<double> law_grid;  ///< law-closure nodes (empty when unused)
  /// Law moments at each probe time: [probe][(order-1)*law_grid.size() + node].
  std::vector<std::vector<double>> law_moments_at_probes;

  std::vector<std::vector<TreeNode>> trees;  ///< [replica] when record_tree

  /// Smoothed-field values (1/n) sum_i p_delta(x - xi_i) per replica at a
  /// recorded snapshot; the backbone of every moment estimate.
  std::vector<double> smoothed_values(std::size_t probe, double x, double delta) const;

  /// Test-functional values (1/n) sum_i phi(xi_i) per replica at a snapshot.
  std::vector<double> functional_values(std::size_t probe,
                                        const std::function<double(double)>& phi) const;

  /// Alive-count per replica at a snapshot.
  std::vector<std::int64_t> alive_counts(std::size_t probe) const;
};

/// Across-replica mean and standard error of (Y_t^delta(x))^k.
struct MomentEstimate {
  double value;
  double std_error;
  int replicas;
};

/// delta-smoothed branching coefficient sigma_tilde(t, x): Gauss-Hermite
/// quadrature of y -> sqrt(sigma^2(t, y, law_moments(y))) against the Gaussian
/// of variance delta centred at x.  `law_moments` fills moments[0..count-1]
/// with the law moments at y.
double smooth_sigma_delta(double t, double x, double delta, const SigmaSpec& sigma,
                          const std::function<void(double y, double* moments, int count)>& law_moments,
                          int nodes = 21);

/// Run the lockstep replica ensemble.  Throws DomainError for invalid
/// configuration (including probe times off the step grid and violation of
/// the step-size invariant), CapacityError when a replica exceeds the
/// population cap, and propagates coefficient contract violations.
EnsembleResult run_ensemble(const ParticleConfig& config, const SigmaSpec& sigma,
                            const InitialDensity& init);

/// Mean and standard error of the k-th power of the smoothed field at
/// (snapshot `probe`, x) with smoothing `delta`.
MomentEstimate empirical_moment(const EnsembleResult& ensemble, std::size_t probe, double x,
                                int k, double delta);

/// Kolmogorov-Smirnov distance between recorded lifetimes (restricted to
/// births no later than `birth_cutoff`) and the Exponential(rate) law,
/// together with the sample count used.
struct KsResult {
  double statistic;
  std::size_t samples;
};
KsResult ks_exponential(const std::vector<LifetimeRecord>& lifetimes, double rate,
                        double birth_cutoff);

}  // namespace mfsbm
