#include "mfsbm/particle.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <sstream>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mfsbm/error.hpp"
#include "mfsbm/heat_kernel.hpp"
#include "mfsbm/quadrature.hpp"
#include "mfsbm/rng.hpp"

namespace mfsbm {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr std::uint64_t kParticleStream = 0x706172746963ULL;

/// Work item inside one step: a particle at `x`, born at absolute time
/// `birth`, processed from offset `off` (relative to the step start).
struct Pending {
  double x;
  double birth;
  double off;
  std::int64_t node;
};

struct Replica {
  std::vector<double> x;
  std::vector<double> birth;
  std::vector<std::int64_t> node;  // tree ids (record_tree only)
  std::vector<double> next_x;
  std::vector<double> next_birth;
  std::vector<std::int64_t> next_node;
  CounterRng rng{0};
  std::uint64_t events = 0;
  std::uint64_t splits = 0;
  std::vector<LifetimeRecord> lifetimes;
  bool lifetimes_truncated = false;
  bool over_cap = false;
  std::vector<TreeNode> tree;
  std::vector<double> field_row;  // smoothed field on the law grid
  std::vector<Pending> stack;  // within-step work items (scratch)
};

void check_config(const ParticleConfig& cfg, const SigmaSpec& sigma) {
  if (cfg.scaling_n < 1) throw DomainError("run_ensemble: scaling_n must be >= 1");
  if (!(cfg.delta > 0.0)) throw DomainError("run_ensemble: delta must be > 0");
  if (!(cfg.dt > 0.0)) throw DomainError("run_ensemble: dt must be > 0");
  if (!(cfg.horizon > 0.0)) throw DomainError("run_ensemble: horizon must be > 0");
  if (cfg.replicas < 2) throw DomainError("run_ensemble: need at least 2 replicas");
  if (cfg.population_cap < 1) throw DomainError("run_ensemble: population cap must be >= 1");
  if (cfg.law_nodes < 2) throw DomainError("run_ensemble: law grid needs >= 2 nodes");
  if (cfg.smoothing_nodes < 1) {
    throw DomainError("run_ensemble: smoothing quadrature needs >= 1 node");
  }
  const double step_load = cfg.dt * cfg.scaling_n * sigma.k_upper();
  if (step_load > 0.1 * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "run_ensemble: dt * n * sup sigma^2 = " << step_load
        << " exceeds the 0.1 step-size invariant";
    throw DomainError(msg.str());
  }
}

std::int64_t step_index_of(double time, double dt, std::int64_t steps, const char* what) {
  const double raw = time / dt;
  const std::int64_t idx = static_cast<std::int64_t>(std::llround(raw));
  if (idx < 0 || idx > steps) {
    std::ostringstream msg;
    msg << "run_ensemble: " << what << " " << time << " lies outside [0, horizon] (horizon = "
        << static_cast<double>(steps) * dt << ")";
    throw DomainError(msg.str());
  }
  if (std::abs(idx * dt - time) > 1e-9 * std::max(1.0, std::abs(time))) {
    std::ostringstream msg;
    msg << "run_ensemble: " << what << " " << time << " does not sit on the step grid (dt = "
        << dt << ")";
    throw DomainError(msg.str());
  }
  return idx;
}

double auto_law_halfwidth(const InitialDensity& init, double horizon) {
  double lo = 0.0, hi = 0.0;
  init.support_hint(1e-6, lo, hi);
  return std::max(std::abs(lo), std::abs(hi)) + 6.0 * std::sqrt(horizon) + 1.0;
}

/// Scatter one replica's particles onto the law grid: row[g] becomes the
/// smoothed field (1/n) sum_i p_delta(z_g - x_i).  Per particle the Gaussian
/// values along consecutive nodes follow a two-multiplier recurrence, so only
/// two exponentials are evaluated per particle.
void scatter_field(const std::vector<double>& xs, double mass, double delta, double x0, double h,
                   int nodes, double tail, std::vector<double>& row) {
  row.assign(static_cast<std::size_t>(nodes), 0.0);
  const double q = std::exp(-h * h / delta);
  for (double x : xs) {
    int lo = static_cast<int>(std::ceil((x - tail - x0) / h));
    int hi = static_cast<int>(std::floor((x + tail - x0) / h));
    lo = std::max(lo, 0);
    hi = std::min(hi, nodes - 1);
    if (lo > hi) continue;
    const double d0 = x0 + lo * h - x;
    double cur = std::exp(-d0 * d0 / (2.0 * delta));
    double fac = std::exp(-h * (2.0 * d0 + h) / (2.0 * delta));
    for (int g = lo; g <= hi; ++g) {
      row[static_cast<std::size_t>(g)] += cur;
      cur *= fac;
      fac *= q;
    }
  }
  const double norm = mass / std::sqrt(kTwoPi * delta);
  for (double& v : row) v *= norm;
}

/// Clamped linear interpolation on the uniform law grid.
inline double lerp_grid(const std::vector<double>& values, double x0, double h, int nodes,
                        double y) {
  double u = (y - x0) / h;
  if (u <= 0.0) return values.front();
  if (u >= nodes - 1) return values.back();
  const int i = static_cast<int>(u);
  const double f = u - i;
  return values[static_cast<std::size_t>(i)] * (1.0 - f) +
         values[static_cast<std::size_t>(i) + 1] * f;
}

}  // namespace

double smooth_sigma_delta(double t, double x, double delta, const SigmaSpec& sigma,
                          const std::function<void(double, double*, int)>& law_moments,
                          int nodes) {
  if (!(delta > 0.0)) throw DomainError("smooth_sigma_delta: delta must be > 0");
  if (nodes < 1) throw DomainError("smooth_sigma_delta: need at least one node");
  const int order = sigma.moment_order();
  if (order > 0 && !law_moments) {
    throw DomainError("smooth_sigma_delta: sigma reads moments but no law field was given");
  }
  const QuadratureRule& rule = gauss_hermite(nodes);
  const double scale = std::sqrt(2.0 * delta);
  const double inv_sqrt_pi = 1.0 / std::sqrt(3.14159265358979323846);
  double moments[kMaxSigmaOrder] = {0.0};
  double acc = 0.0;
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    const double y = x + scale * rule.nodes[j];
    if (order > 0) law_moments(y, moments, order);
    acc += rule.weights[j] * inv_sqrt_pi * std::sqrt(sigma.evaluate(t, y, moments, order));
  }
  return acc;
}

EnsembleResult run_ensemble(const ParticleConfig& config, const SigmaSpec& sigma,
                            const InitialDensity& init) {
  check_config(config, sigma);

  EnsembleResult out;
  out.config = config;
  const int n = config.scaling_n;
  const double mass = 1.0 / static_cast<double>(n);
  out.particle_mass = mass;

  const double dt = config.dt;
  const std::int64_t steps = step_index_of(config.horizon, dt, std::numeric_limits<std::int64_t>::max(),
                                           "horizon");
  if (steps < 1) throw DomainError("run_ensemble: horizon must cover at least one step");

  // Probe bookkeeping: snapshots are taken at step boundaries.
  std::vector<std::int64_t> probe_steps(config.probe_times.size());
  for (std::size_t p = 0; p < config.probe_times.size(); ++p) {
    probe_steps[p] = step_index_of(config.probe_times[p], dt, steps, "probe time");
  }
  out.snapshots.resize(config.probe_times.size());

  const std::int64_t initial_count = std::llround(static_cast<double>(n) * init.mass());
  if (initial_count < 1) {
    throw DomainError("run_ensemble: n * initial mass rounds to zero particles");
  }
  if (initial_count > config.population_cap) {
    throw CapacityError("run_ensemble: initial population already exceeds the cap");
  }
  out.initial_count = initial_count;

  const bool needs_law = sigma.moment_order() > 0;
  const int order = sigma.moment_order();
  const int law_nodes = config.law_nodes;
  const double law_half = config.space_halfwidth > 0.0
                              ? config.space_halfwidth
                              : auto_law_halfwidth(init, config.horizon);
  const double law_x0 = -law_half;
  const double law_h = 2.0 * law_half / (law_nodes - 1);
  const double tail = gaussian_tail_halfwidth(config.delta, 1e-12);
  if (needs_law) {
    out.law_grid.resize(static_cast<std::size_t>(law_nodes));
    for (int g = 0; g < law_nodes; ++g) out.law_grid[static_cast<std::size_t>(g)] = law_x0 + g * law_h;
    out.config.space_halfwidth = law_half;
  }
  out.law_moments_at_probes.assign(config.probe_times.size(), {});

  // Constant coefficients skip the law machinery entirely; smoothing a
  // constant is the identity, so the rate is exact.
  const double const_rate =
      needs_law ? 0.0 : static_cast<double>(n) * sigma.evaluate(0.0, 0.0, nullptr, 0);

  // Gauss-Hermite offsets for the per-particle coefficient smoothing.
  std::vector<double> gh_off, gh_w;
  if (needs_law) {
    const QuadratureRule& rule = gauss_hermite(config.smoothing_nodes);
    const double scale = std::sqrt(2.0 * config.delta);
    const double inv_sqrt_pi = 1.0 / std::sqrt(3.14159265358979323846);
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      gh_off.push_back(scale * rule.nodes[j]);
      gh_w.push_back(rule.weights[j] * inv_sqrt_pi);
    }
  }

  const int M = config.replicas;
  std::vector<Replica> reps(static_cast<std::size_t>(M));
  std::exception_ptr first_error;

  const bool use_openmp = config.use_openmp;
#pragma omp parallel for schedule(static) if (use_openmp)
  for (int r = 0; r < M; ++r) {
    try {
      Replica& R = reps[static_cast<std::size_t>(r)];
      R.rng = CounterRng(stream_key(config.seed, kParticleStream, config.stream_tag,
                                    static_cast<std::uint64_t>(r)));
      R.x.resize(static_cast<std::size_t>(initial_count));
      R.birth.assign(static_cast<std::size_t>(initial_count), 0.0);
      for (auto& xi : R.x) xi = init.sample(R.rng);
      if (config.record_tree) {
        R.node.resize(static_cast<std::size_t>(initial_count));
        R.tree.reserve(static_cast<std::size_t>(initial_count) * 2);
        for (std::size_t i = 0; i < R.x.size(); ++i) {
          R.node[i] = static_cast<std::int64_t>(R.tree.size());
          R.tree.push_back(TreeNode{-1, 0.0, -1.0, R.x[i],
                                    std::numeric_limits<double>::quiet_NaN(), -1});
        }
      }
    } catch (...) {
#pragma omp critical
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  // Shared per-step law field: sqrt of the coefficient on the law grid.
  std::vector<double> sqrt_sigma_grid(needs_law ? static_cast<std::size_t>(law_nodes) : 0);

  auto reduce_law_moments = [&](std::vector<double>& law_moments) {
    law_moments.assign(static_cast<std::size_t>(order) * static_cast<std::size_t>(law_nodes), 0.0);
    for (int r = 0; r < M; ++r) {
      const std::vector<double>& row = reps[static_cast<std::size_t>(r)].field_row;
      for (int g = 0; g < law_nodes; ++g) {
        double p = 1.0;
        for (int k = 0; k < order; ++k) {
          p *= row[static_cast<std::size_t>(g)];
          law_moments[static_cast<std::size_t>(k) * law_nodes + g] += p;
        }
      }
    }
    const double inv_m = 1.0 / static_cast<double>(M);
    for (double& v : law_moments) v *= inv_m;
  };

  auto scatter_all = [&]() {
#pragma omp parallel for schedule(static) if (use_openmp)
    for (int r = 0; r < M; ++r) {
      Replica& R = reps[static_cast<std::size_t>(r)];
      scatter_field(R.x, mass, config.delta, law_x0, law_h, law_nodes, tail, R.field_row);
    }
  };

  std::vector<double> law_moments;

  auto record_probe = [&](std::size_t p) {
    EnsembleSnapshot& snap = out.snapshots[p];
    snap.time = config.probe_times[p];
    snap.positions.resize(static_cast<std::size_t>(M));
    for (int r = 0; r < M; ++r) {
      const Replica& R = reps[static_cast<std::size_t>(r)];
      std::vector<float>& dst = snap.positions[static_cast<std::size_t>(r)];
      dst.resize(R.x.size());
      for (std::size_t i = 0; i < R.x.size(); ++i) dst[i] = static_cast<float>(R.x[i]);
    }
    if (needs_law) {
      scatter_all();
      reduce_law_moments(out.law_moments_at_probes[p]);
    }
  };

  for (std::size_t p = 0; p < probe_steps.size(); ++p) {
    if (probe_steps[p] == 0) record_probe(p);
  }

  for (std::int64_t j = 0; j < steps; ++j) {
    const double tj = j * dt;

    if (needs_law) {
      scatter_all();
      reduce_law_moments(law_moments);
      // Coefficient on the grid; contract violations surface here, serially.
      double buf[kMaxSigmaOrder];
      for (int g = 0; g < law_nodes; ++g) {
        for (int k = 0; k < order; ++k) {
          buf[k] = law_moments[static_cast<std::size_t>(k) * law_nodes + g];
        }
        sqrt_sigma_grid[static_cast<std::size_t>(g)] =
            std::sqrt(sigma.evaluate(tj, law_x0 + g * law_h, buf, order));
      }
    }

    const double full_event_prob = needs_law ? 0.0 : -std::expm1(-const_rate * dt);

#pragma omp parallel for schedule(static) if (use_openmp)
    for (int r = 0; r < M; ++r) {
      Replica& R = reps[static_cast<std::size_t>(r)];
      if (R.over_cap) continue;
      try {
        R.next_x.clear();
        R.next_birth.clear();
        if (config.record_tree) R.next_node.clear();

        auto rate_at = [&](double x) -> double {
          if (!needs_law) return const_rate;
          double s = 0.0;
          for (std::size_t m = 0; m < gh_off.size(); ++m) {
            s += gh_w[m] * lerp_grid(sqrt_sigma_grid, law_x0, law_h, law_nodes, x + gh_off[m]);
          }
          return static_cast<double>(n) * s * s;
        };

        std::vector<Pending>& stack = R.stack;
        stack.clear();
        const std::size_t count = R.x.size();
        for (std::size_t i = 0; i < count; ++i) {
          stack.push_back(Pending{R.x[i], R.birth[i], 0.0,
                                  config.record_tree ? R.node[i] : -1});
          while (!stack.empty()) {
            const Pending cur = stack.back();
            stack.pop_back();
            const double rem = dt - cur.off;
            const double lam = cur.off == 0.0 && !needs_law ? const_rate : rate_at(cur.x);
            const double u = R.rng.uniform();
            const double event_prob =
                cur.off == 0.0 && !needs_law ? full_event_prob
                                             : (lam > 0.0 ? -std::expm1(-lam * rem) : 0.0);
            if (u < event_prob) {
              double eps = -std::log1p(-u) / lam;
              if (eps > rem) eps = rem;  // floating-point guard
              const double xe = cur.x + R.rng.normal() * std::sqrt(eps);
              const double te = tj + cur.off + eps;
              ++R.events;
              if (config.record_lifetimes) {
                if (R.lifetimes.size() < config.lifetime_cap) {
                  R.lifetimes.push_back(LifetimeRecord{static_cast<float>(cur.birth),
                                                       static_cast<float>(te - cur.birth)});
                } else {
                  R.lifetimes_truncated = true;
                }
              }
              const bool split = R.rng.uniform() < 0.5;
              if (config.record_tree && cur.node >= 0) {
                TreeNode& nd = R.tree[static_cast<std::size_t>(cur.node)];
                nd.death = te;
                nd.death_position = xe;
                nd.offspring = split ? 2 : 0;
              }
              if (split) {
                ++R.splits;
                for (int c = 0; c < 2; ++c) {
                  std::int64_t child = -1;
                  if (config.record_tree) {
                    child = static_cast<std::int64_t>(R.tree.size());
                    R.tree.push_back(TreeNode{cur.node, te, -1.0, xe,
                                              std::numeric_limits<double>::quiet_NaN(), -1});
                  }
                  stack.push_back(Pending{xe, te, cur.off + eps, child});
                }
                if (static_cast<std::int64_t>(R.next_x.size() + stack.size()) >
                    config.population_cap) {
                  R.over_cap = true;
                  break;
                }
              }
            } else {
              R.next_x.push_back(cur.x + R.rng.normal() * std::sqrt(rem));
              R.next_birth.push_back(cur.birth);
              if (config.record_tree) R.next_node.push_back(cur.node);
              if (static_cast<std::int64_t>(R.next_x.size()) > config.population_cap) {
                R.over_cap = true;
                break;
              }
            }
          }
          if (R.over_cap) break;
        }
        R.x.swap(R.next_x);
        R.birth.swap(R.next_birth);
        if (config.record_tree) R.node.swap(R.next_node);
      } catch (...) {
#pragma omp critical
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
    for (int r = 0; r < M; ++r) {
      if (reps[static_cast<std::size_t>(r)].over_cap) {
        std::ostringstream msg;
        msg << "run_ensemble: replica " << r << " exceeded the population cap of "
            << config.population_cap << " during step " << j;
        throw CapacityError(msg.str());
      }
    }

    for (std::size_t p = 0; p < probe_steps.size(); ++p) {
      if (probe_steps[p] == j + 1) record_probe(p);
    }
  }

  for (int r = 0; r < M; ++r) {
    Replica& R = reps[static_cast<std::size_t>(r)];
    out.total_events += R.events;
    out.total_splits += R.splits;
    if (config.record_lifetimes) {
      out.lifetimes_truncated = out.lifetimes_truncated || R.lifetimes_truncated;
      out.lifetimes.insert(out.lifetimes.end(), R.lifetimes.begin(), R.lifetimes.end());
    }
    if (config.record_tree) out.trees.push_back(std::move(R.tree));
  }
  return out;
}

std::vector<double> EnsembleResult::smoothed_values(std::size_t probe, double x,
                                                    double delta) const {
  if (probe >= snapshots.size()) throw DomainError("smoothed_values: probe index out of range");
  if (!(delta > 0.0)) throw DomainError("smoothed_values: delta must be > 0");
  const EnsembleSnapshot& snap = snapshots[probe];
  const double norm = particle_mass / std::sqrt(kTwoPi * delta);
  const double inv_two_delta = 1.0 / (2.0 * delta);
  std::vector<double> values(snap.positions.size());
  for (std::size_t r = 0; r < snap.positions.size(); ++r) {
    double acc = 0.0;
    for (float xi : snap.positions[r]) {
      const double d = x - static_cast<double>(xi);
      acc += std::exp(-d * d * inv_two_delta);
    }
    values[r] = acc * norm;
  }
  return values;
}

std::vector<double> EnsembleResult::functional_values(
    std::size_t probe, const std::function<double(double)>& phi) const {
  if (probe >= snapshots.size()) throw DomainError("functional_values: probe index out of range");
  const EnsembleSnapshot& snap = snapshots[probe];
  std::vector<double> values(snap.positions.size());
  for (std::size_t r = 0; r < snap.positions.size(); ++r) {
    double acc = 0.0;
    for (float xi : snap.positions[r]) acc += phi(static_cast<double>(xi));
    values[r] = acc * particle_mass;
  }
  return values;
}

std::vector<std::int64_t> EnsembleResult::alive_counts(std::size_t probe) const {
  if (probe >= snapshots.size()) throw DomainError("alive_counts: probe index out of range");
  const EnsembleSnapshot& snap = snapshots[probe];
  std::vector<std::int64_t> counts(snap.positions.size());
  for (std::size_t r = 0; r < snap.positions.size(); ++r) {
    counts[r] = static_cast<std::int64_t>(snap.positions[r].size());
  }
  return counts;
}

MomentEstimate empirical_moment(const EnsembleResult& ensemble, std::size_t probe, double x,
                                int k, double delta) {
  if (k < 1) throw DomainError("empirical_moment: order must be >= 1");
  const std::vector<double> values = ensemble.smoothed_values(probe, x, delta);
  const int M = static_cast<int>(values.size());
  if (M < 2) throw DomainError("empirical_moment: need at least 2 replicas for a std error");
  double sum = 0.0, sum_sq = 0.0;
  for (double v : values) {
    double p = 1.0;
    for (int i = 0; i < k; ++i) p *= v;
    sum += p;
    sum_sq += p * p;
  }
  const double mean = sum / M;
  const double var = std::max(0.0, (sum_sq - M * mean * mean) / (M - 1));
  return MomentEstimate{mean, std::sqrt(var / M), M};
}

KsResult ks_exponential(const std::vector<LifetimeRecord>& lifetimes, double rate,
                        double birth_cutoff) {
  if (!(rate > 0.0)) throw DomainError("ks_exponential: rate must be > 0");
  std::vector<double> sample;
  sample.reserve(lifetimes.size());
  for (const LifetimeRecord& rec : lifetimes) {
    if (static_cast<double>(rec.birth) <= birth_cutoff) {
      sample.push_back(static_cast<double>(rec.lifetime));
    }
  }
  if (sample.empty()) return KsResult{std::numeric_limits<double>::quiet_NaN(), 0};
  std::sort(sample.begin(), sample.end());
  const double inv_n = 1.0 / static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = -std::expm1(-rate * sample[i]);
    d = std::max(d, std::max(f - i * inv_n, (i + 1) * inv_n - f));
  }
  return KsResult{d, sample.size()};
}

}  // namespace mfsbm
