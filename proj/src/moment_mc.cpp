#include "mfsbm/moment_mc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "mfsbm/error.hpp"
#include "mfsbm/heat_kernel.hpp"
#include "mfsbm/quadrature.hpp"
#include "mfsbm/rng.hpp"

namespace mfsbm {

TripleTable::TripleTable(int n) : n_(n) {
  if (n < 1) throw DomainError("TripleTable: order must be >= 1");
  count_per_depth_.assign(std::max(n - 1, 0), 0);
  for (int nprime = 1; nprime <= n - 1; ++nprime) {
    for_each_triple(n, nprime, [&](const IndexTriple& triple) {
      CompiledTriple ct;
      ct.depth = nprime;
      const int n_alpha = popcount(triple.alpha);
      ct.a_exponent = n - n_alpha;
      const auto beta_pos = one_positions(triple.beta);
      ct.first_anchor.assign(nprime, Anchor{});
      ct.second_anchor.assign(nprime, Anchor{});
      std::vector<int> seen(nprime, 0);
      for (int slot = 1; slot <= 2 * nprime; ++slot) {
        const int label = triple.tau[slot - 1];
        Anchor a;
        if (slot <= n_alpha) {
          a.at_observation = true;
          a.parent = 0;
        } else {
          a.at_observation = false;
          a.parent = beta_pos[slot - n_alpha - 1]; // strictly below label
        }
        if (seen[label - 1] == 0) {
          ct.first_anchor[label - 1] = a;
        } else {
          ct.second_anchor[label - 1] = a;
        }
        seen[label - 1] += 1;
      }
      for (int i = 1; i <= nprime; ++i) {
        if (triple.beta[i - 1] == 0) ct.density_positions.push_back(i);
      }
      triples_.push_back(std::move(ct));
      count_per_depth_[nprime - 1] += 1;
    });
  }
}

const TripleTable& TripleTable::shared(int n) {
  static std::mutex mtx;
  static std::map<int, TripleTable> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, TripleTable(n)).first;
  return it->second;
}

namespace {

struct SampleScratch {
  std::vector<double> s; // simplex times, 1-based, descending
  std::vector<double> z; // sampled points, 1-based
  std::vector<double> uniforms;
};

double factorial(int k) {
  double f = 1.0;
  for (int m = 2; m <= k; ++m) f *= m;
  return f;
}

/// One integrand draw for one triple.  Returns the unbiased contribution to
/// the triple's simplex/space integral.  Exactly tied simplex times (a
/// measure-zero event surfacing only through finite precision) contribute
/// zero and are counted.
double sample_triple(const TripleTable::CompiledTriple& ct, CounterRng& rng, double t,
                     double x, double delta, bool importance,
                     const std::vector<double>& conv_pow, const InitialDensity& init,
                     const SigmaHatSqField& sigma_hat_sq, SampleScratch& ws,
                     long& degenerate) {
  const int np = ct.depth;
  ws.s.resize(np + 1);
  ws.z.resize(np + 1);

  double weight;
  if (importance) {
    // Largest time pulled toward t with density proportional to (t-s)^{-1/2},
    // neutralising the integrable kernel singularity there.
    const double u0 = rng.uniform();
    const double s1 = t * (1.0 - u0 * u0);
    weight = 2.0 * t * u0;
    ws.s[1] = s1;
    if (np > 1) {
      ws.uniforms.resize(np - 1);
      for (int k = 0; k < np - 1; ++k) ws.uniforms[k] = rng.uniform(0.0, s1);
      std::sort(ws.uniforms.begin(), ws.uniforms.end(), std::greater<double>());
      for (int k = 2; k <= np; ++k) ws.s[k] = ws.uniforms[k - 2];
      weight *= std::pow(s1, np - 1) / factorial(np - 1);
    }
  } else {
    ws.uniforms.resize(np);
    for (int k = 0; k < np; ++k) ws.uniforms[k] = rng.uniform(0.0, t);
    std::sort(ws.uniforms.begin(), ws.uniforms.end(), std::greater<double>());
    for (int k = 1; k <= np; ++k) ws.s[k] = ws.uniforms[k - 1];
    weight = std::pow(t, np) / factorial(np);
  }

  for (int k = 1; k <= np; ++k) {
    const auto& a1 = ct.first_anchor[k - 1];
    const auto& a2 = ct.second_anchor[k - 1];
    const double time1 = a1.at_observation ? (t + delta - ws.s[k]) : (ws.s[a1.parent] - ws.s[k]);
    const double time2 = a2.at_observation ? (t + delta - ws.s[k]) : (ws.s[a2.parent] - ws.s[k]);
    if (!(time1 > 0.0) || !(time2 > 0.0)) {
      degenerate += 1;
      return 0.0;
    }
    const double center1 = a1.at_observation ? x : ws.z[a1.parent];
    const double center2 = a2.at_observation ? x : ws.z[a2.parent];
    // Draw from the narrower factor; the wider one enters the weight, keeping
    // it bounded by (2 pi max(time1, time2))^{-1/2}.
    double sample_time = time1, sample_center = center1;
    double weight_time = time2, weight_center = center2;
    if (time2 < time1) {
      sample_time = time2;
      sample_center = center2;
      weight_time = time1;
      weight_center = center1;
    }
    ws.z[k] = sample_center + std::sqrt(sample_time) * rng.normal();
    weight *= heat_kernel_value(weight_time, weight_center - ws.z[k]);
  }

  for (int i : ct.density_positions) {
    weight *= init.heat_convolve(ws.s[i], ws.z[i]);
  }
  for (int k = 1; k <= np; ++k) {
    weight *= sigma_hat_sq(ws.s[k], ws.z[k]);
  }
  return weight * conv_pow[ct.a_exponent];
}

struct BlockAccumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  long degenerate = 0;
};

McEstimate run_formula_mc(int n, double t, double x, const InitialDensity& init,
                          const SigmaHatSqField& sigma_hat_sq, const McOptions& opt,
                          double delta, bool use_openmp) {
  if (n < 1) throw DomainError("moment_formula_mc: order must be >= 1");
  if (n > opt.order_cap) {
    std::ostringstream msg;
    msg << "moment_formula_mc: order " << n << " above cap " << opt.order_cap;
    throw CapacityError(msg.str());
  }
  if (t < 0.0 || !std::isfinite(t) || !std::isfinite(x)) {
    throw DomainError("moment_formula_mc: requires finite x and t >= 0");
  }
  if (delta < 0.0) throw DomainError("moment_formula_mc: delta must be >= 0");
  if (opt.samples < 1) throw DomainError("moment_formula_mc: samples must be >= 1");

  McEstimate out;
  if (t == 0.0) {
    const double base = delta > 0.0 ? init.heat_convolve(delta, x) : init.value(x);
    out.value = std::pow(base, n);
    out.samples = 0;
    return out;
  }

  const double conv_base = init.heat_convolve(t + delta, x);
  std::vector<double> conv_pow(n + 1, 1.0);
  for (int k = 1; k <= n; ++k) conv_pow[k] = conv_pow[k - 1] * conv_base;

  const TripleTable& table = TripleTable::shared(n);
  out.triples_per_depth = table.count_per_depth();

  // Depth-0 term is the pure heat-flow power, deterministic.
  const double term0 = conv_pow[n];
  if (table.triples().empty()) {
    out.value = term0;
    out.samples = 0;
    return out;
  }

  const bool importance =
      opt.importance == ImportanceMode::On || (opt.importance == ImportanceMode::Auto && n >= 3);

  const long S = opt.samples;
  const int B = std::max(opt.block_size, 1);
  const long n_blocks = (S + B - 1) / B;
  std::vector<BlockAccumulator> blocks(n_blocks);

  const auto& triples = table.triples();
  const long n_triples = static_cast<long>(triples.size());

#pragma omp parallel for schedule(dynamic) if (use_openmp)
  for (long b = 0; b < n_blocks; ++b) {
    SampleScratch ws;
    BlockAccumulator acc;
    const long lo = b * B;
    const long hi = std::min(S, lo + B);
    for (long s = lo; s < hi; ++s) {
      double v = 0.0;
      for (long ti = 0; ti < n_triples; ++ti) {
        CounterRng rng(stream_key(opt.seed, opt.stream_tag, static_cast<std::uint64_t>(ti),
                                  static_cast<std::uint64_t>(s)));
        v += sample_triple(triples[ti], rng, t, x, delta, importance, conv_pow, init,
                           sigma_hat_sq, ws, acc.degenerate);
      }
      acc.sum += v;
      acc.sum_sq += v * v;
    }
    blocks[b] = acc;
  }

  double total = 0.0;
  double total_sq = 0.0;
  for (const auto& acc : blocks) {
    total += acc.sum;
    total_sq += acc.sum_sq;
    out.degenerate_samples += acc.degenerate;
  }

  const double mean = total / static_cast<double>(S);
  out.value = term0 + mean;
  out.samples = S;
  if (S > 1) {
    const double var =
        std::max(0.0, (total_sq - static_cast<double>(S) * mean * mean) / (S - 1.0));
    out.std_error = std::sqrt(var / static_cast<double>(S));
  }
  if (!std::isfinite(out.value)) {
    throw NumericError("moment_formula_mc: non-finite estimate", out.value, out.std_error);
  }
  return out;
}

} // namespace

McEstimate moment_formula_mc(int n, double t, double x, const InitialDensity& init,
                             const SigmaHatSqField& sigma_hat_sq, const McOptions& opt,
                             double delta) {
  return run_formula_mc(n, t, x, init, sigma_hat_sq, opt, delta, true);
}

McEstimate moment_formula_mc_serial(int n, double t, double x, const InitialDensity& init,
                                    const SigmaHatSqField& sigma_hat_sq, const McOptions& opt,
                                    double delta) {
  return run_formula_mc(n, t, x, init, sigma_hat_sq, opt, delta, false);
}

double classical_second_moment(double t, double x, const InitialDensity& init, double gamma,
                               double delta, double tol) {
  if (t < 0.0 || !std::isfinite(t) || !std::isfinite(x)) {
    throw DomainError("classical_second_moment: requires finite x and t >= 0");
  }
  if (gamma < 0.0) throw DomainError("classical_second_moment: gamma must be >= 0");
  if (delta < 0.0) throw DomainError("classical_second_moment: delta must be >= 0");
  if (t == 0.0) {
    const double base = delta > 0.0 ? init.heat_convolve(delta, x) : init.value(x);
    return base * base;
  }
  const double mean = init.heat_convolve(t + delta, x);
  double correction = 0.0;
  if (gamma > 0.0) {
    if (delta == 0.0) {
      // s = t - v^2 turns (4 pi (t-s))^{-1/2} ds into pi^{-1/2} dv.
      auto f = [&](double v) {
        return init.heat_convolve(t - 0.5 * v * v, x) / std::sqrt(3.14159265358979323846);
      };
      correction = gamma * integrate(f, 0.0, std::sqrt(t), tol, tol).value;
    } else {
      auto f = [&](double s) {
        return heat_kernel_square_prefactor(t + delta - s) *
               init.heat_convolve(0.5 * (t + delta + s), x);
      };
      correction = gamma * integrate(f, 0.0, t, tol, tol).value;
    }
  }
  return mean * mean + correction;
}

double moment_upper_bound(int n, double c1, double c2) {
  if (n < 1) throw DomainError("moment_upper_bound: order must be >= 1");
  if (!(c1 > 0.0) || !(c2 > 0.0)) {
    throw DomainError("moment_upper_bound: constants must be positive");
  }
  const double log_value = std::log(c1) + n * std::log(c2) + 1.5 * std::lgamma(n + 1.0);
  return std::exp(log_value); // overflow saturates to +inf by IEEE semantics
}

} // namespace mfsbm
