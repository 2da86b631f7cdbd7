#include "mfsbm/dual.hpp"

#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Cholesky>

#include "mfsbm/error.hpp"
#include "mfsbm/quadrature.hpp"

namespace mfsbm {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr std::uint64_t kDualStream = 0x6475616cULL;

/// log det and solve helper for an SPD matrix; throws NumericError with the
/// matrix dimension in the message when the factorization fails.
Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& m, const char* where) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << where << ": covariance of dimension " << m.rows()
        << " is not symmetric positive definite";
    throw NumericError(msg.str(), 0.0, std::numeric_limits<double>::infinity());
  }
  return llt;
}

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  double s = 0.0;
  const auto& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

}  // namespace

GaussianFunctional GaussianFunctional::delta_tensor(int n, double x, double delta) {
  if (n < 1) throw DomainError("delta_tensor: dimension must be >= 1");
  if (!(delta > 0.0)) throw DomainError("delta_tensor: delta must be > 0");
  GaussianFunctional g;
  g.weight = 1.0;
  g.mean = Eigen::VectorXd::Constant(n, x);
  g.cov = delta * Eigen::MatrixXd::Identity(n, n);
  return g;
}

double GaussianFunctional::evaluate(const Eigen::VectorXd& y) const {
  if (y.size() != mean.size()) throw DomainError("GaussianFunctional: argument dimension mismatch");
  const Eigen::LLT<Eigen::MatrixXd> llt = checked_llt(cov, "GaussianFunctional::evaluate");
  const Eigen::VectorXd d = y - mean;
  const double quad = d.dot(llt.solve(d));
  const double log_norm = -0.5 * (dim() * std::log(kTwoPi) + log_det_from_llt(llt));
  return weight * std::exp(log_norm - 0.5 * quad);
}

GaussianFunctional heat_evolve(const GaussianFunctional& g, double dt) {
  if (dt < 0.0) throw DomainError("heat_evolve: dt must be >= 0");
  GaussianFunctional out = g;
  out.cov.diagonal().array() += dt;
  return out;
}

GaussianFunctional coalesce(const GaussianFunctional& g, int i, int j) {
  const int k = g.dim();
  if (k < 2) throw DomainError("coalesce: need at least two variables");
  if (i < 1 || j < 1 || i >= j || j > k) {
    throw DomainError("coalesce: indices must satisfy 1 <= i < j <= dim");
  }

  const Eigen::LLT<Eigen::MatrixXd> llt = checked_llt(g.cov, "coalesce");
  const Eigen::MatrixXd lambda = llt.solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::VectorXd b = lambda * g.mean;

  // Embedding P: new variables y (k-1 of them) into old variables via
  // x_m = y_{pos(m)} for m != j and x_j = y_{pos(i)}.
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(k, k - 1);
  for (int m = 1; m <= k; ++m) {
    const int src = (m == j) ? i : m;
    const int col = src - (src > j ? 1 : 0);  // position of old variable src among survivors
    p(m - 1, col - 1) = 1.0;
  }

  GaussianFunctional out;
  const Eigen::MatrixXd lambda_new = p.transpose() * lambda * p;
  const Eigen::VectorXd b_new = p.transpose() * b;
  const Eigen::LLT<Eigen::MatrixXd> llt_new = checked_llt(lambda_new, "coalesce (restricted form)");
  out.cov = llt_new.solve(Eigen::MatrixXd::Identity(k - 1, k - 1));
  out.mean = llt_new.solve(b_new);

  // Completing the square leaves the constant m' Lambda' m' - m Lambda m in the
  // exponent, and the normalized-density parameterization contributes the ratio
  // of normalization constants.
  const double quad_old = g.mean.dot(b);
  const double quad_new = out.mean.dot(b_new);
  const double log_det_old = log_det_from_llt(llt);          // log det cov
  const double log_det_new = -log_det_from_llt(llt_new);     // log det cov' = -log det lambda'
  const double log_factor =
      -0.5 * std::log(kTwoPi) + 0.5 * (log_det_new - log_det_old) - 0.5 * (quad_old - quad_new);
  out.weight = g.weight * std::exp(log_factor);
  if (!std::isfinite(out.weight)) {
    throw NumericError("coalesce: weight overflow/underflow in the completed square", out.weight,
                       std::numeric_limits<double>::infinity());
  }
  return out;
}

double pair_with_initial(const GaussianFunctional& g, const InitialDensity& init, int quad_nodes) {
  const int k = g.dim();
  if (!init.components().empty()) {
    // Gaussian mixture: sum over component assignments; each term is the value
    // of a k-dimensional Gaussian density at the component-center vector with
    // covariance cov + diag(component variances).
    const auto& comps = init.components();
    const int q = static_cast<int>(comps.size());
    std::vector<int> assign(static_cast<std::size_t>(k), 0);
    double total = 0.0;
    for (;;) {
      double prod_w = 1.0;
      Eigen::MatrixXd c = g.cov;
      Eigen::VectorXd d(k);
      for (int a = 0; a < k; ++a) {
        const auto& comp = comps[static_cast<std::size_t>(assign[static_cast<std::size_t>(a)])];
        prod_w *= comp.weight;
        c(a, a) += comp.variance;
        d(a) = comp.center - g.mean(a);
      }
      const Eigen::LLT<Eigen::MatrixXd> llt = checked_llt(c, "pair_with_initial");
      const double quad = d.dot(llt.solve(d));
      const double log_norm = -0.5 * (k * std::log(kTwoPi) + log_det_from_llt(llt));
      total += prod_w * std::exp(log_norm - 0.5 * quad);
      int pos = 0;
      while (pos < k) {
        if (++assign[static_cast<std::size_t>(pos)] < q) break;
        assign[static_cast<std::size_t>(pos)] = 0;
        ++pos;
      }
      if (pos == k) break;
    }
    return g.weight * total;
  }

  // Bump initial data: tensorized Gauss-Legendre over the support box.
  if (k > 3) {
    throw CapacityError(
        "pair_with_initial: bump initial data is limited to 3 remaining variables");
  }
  if (quad_nodes < 2) throw DomainError("pair_with_initial: quadrature needs >= 2 nodes");
  const double lo = init.bump_center() - init.bump_radius();
  const double hi = init.bump_center() + init.bump_radius();
  const QuadratureRule& rule = gauss_legendre(quad_nodes);
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  std::vector<double> nodes(rule.nodes.size()), weights(rule.nodes.size()),
      density(rule.nodes.size());
  for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
    nodes[a] = mid + half * rule.nodes[a];
    weights[a] = half * rule.weights[a];
    density[a] = init.value(nodes[a]);
  }
  const Eigen::LLT<Eigen::MatrixXd> llt = checked_llt(g.cov, "pair_with_initial (bump)");
  const double log_norm = -0.5 * (k * std::log(kTwoPi) + log_det_from_llt(llt));
  const int m = static_cast<int>(nodes.size());
  std::vector<int> idx(static_cast<std::size_t>(k), 0);
  Eigen::VectorXd y(k);
  double total = 0.0;
  for (;;) {
    double w = 1.0;
    for (int a = 0; a < k; ++a) {
      const int ia = idx[static_cast<std::size_t>(a)];
      w *= weights[static_cast<std::size_t>(ia)] * density[static_cast<std::size_t>(ia)];
      y(a) = nodes[static_cast<std::size_t>(ia)];
    }
    if (w != 0.0) {
      const Eigen::VectorXd d = y - g.mean;
      const double quad = d.dot(llt.solve(d));
      total += w * std::exp(log_norm - 0.5 * quad);
    }
    int pos = 0;
    while (pos < k) {
      if (++idx[static_cast<std::size_t>(pos)] < m) break;
      idx[static_cast<std::size_t>(pos)] = 0;
      ++pos;
    }
    if (pos == k) break;
  }
  return g.weight * total;
}

DualPath simulate_dual_path(int n, double horizon, CounterRng& rng) {
  if (n < 1) throw DomainError("simulate_dual_path: start count must be >= 1");
  if (!(horizon >= 0.0)) throw DomainError("simulate_dual_path: horizon must be >= 0");
  DualPath path;
  path.start = n;
  double t = 0.0;
  int k = n;
  while (k >= 2) {
    const double rate = 0.5 * k * (k - 1);
    t += rng.exponential(rate);
    if (t > horizon) break;
    const int num_pairs = k * (k - 1) / 2;
    int idx = static_cast<int>(rng.uniform() * num_pairs);
    if (idx >= num_pairs) idx = num_pairs - 1;
    int i = 1;
    while (idx >= k - i) {
      idx -= k - i;
      ++i;
    }
    const int j = i + 1 + idx;
    path.jumps.push_back(DualJump{t, i, j});
    --k;
  }
  return path;
}

namespace {

/// Value of one dual path at one delta: evolve/coalesce the Gaussian
/// functional along the path, pair with the initial data, and weigh by the
/// accumulated exponential and the per-jump gamma factors.
double path_value(const DualPath& path, double t, double x, double delta, double gamma,
                  const InitialDensity& init, int quad_nodes) {
  if (gamma == 0.0 && !path.jumps.empty()) return 0.0;
  GaussianFunctional g = GaussianFunctional::delta_tensor(path.start, x, delta);
  int k = path.start;
  double prev = 0.0;
  double exponent = 0.0;
  double gamma_factor = 1.0;
  for (const DualJump& jump : path.jumps) {
    exponent += 0.5 * k * (k - 1) * (jump.time - prev);
    g = heat_evolve(g, jump.time - prev);
    g = coalesce(g, jump.i, jump.j);
    gamma_factor *= gamma;
    prev = jump.time;
    --k;
  }
  exponent += 0.5 * k * (k - 1) * (t - prev);
  g = heat_evolve(g, t - prev);
  return std::exp(exponent) * gamma_factor * pair_with_initial(g, init, quad_nodes);
}

}  // namespace

DualEstimate dual_moment_estimate(int n, double t, double x, const std::vector<double>& deltas,
                                  const std::vector<double>& combo_weights, double gamma,
                                  const InitialDensity& init, const DualOptions& opt) {
  if (n < 1) throw DomainError("dual_moment_estimate: order must be >= 1");
  if (!(t > 0.0)) throw DomainError("dual_moment_estimate: t must be > 0");
  if (deltas.empty()) throw DomainError("dual_moment_estimate: need at least one delta");
  for (double d : deltas) {
    if (!(d > 0.0)) throw DomainError("dual_moment_estimate: every delta must be > 0");
  }
  if (!(gamma >= 0.0)) throw DomainError("dual_moment_estimate: gamma must be >= 0");
  if (opt.paths < 2) throw DomainError("dual_moment_estimate: need at least 2 paths");
  if (opt.block_size < 1) throw DomainError("dual_moment_estimate: block size must be >= 1");
  std::vector<double> weights = combo_weights;
  if (weights.empty()) {
    if (deltas.size() != 1) {
      throw DomainError("dual_moment_estimate: combination weights required for several deltas");
    }
    weights = {1.0};
  }
  if (weights.size() != deltas.size()) {
    throw DomainError("dual_moment_estimate: weights and deltas must have equal length");
  }

  const std::size_t nd = deltas.size();
  const std::int64_t paths = opt.paths;
  const std::int64_t block = opt.block_size;
  const std::int64_t nblocks = (paths + block - 1) / block;

  // Per block: sum and sum of squares for each delta, for the weighted
  // combination, and the jump count.  Combined in block order afterwards so
  // the result does not depend on the thread layout.
  const std::size_t stride = 2 * nd + 3;
  std::vector<double> acc(static_cast<std::size_t>(nblocks) * stride, 0.0);
  std::exception_ptr first_error;
  const bool use_openmp = opt.use_openmp;

#pragma omp parallel for schedule(dynamic) if (use_openmp)
  for (std::int64_t bi = 0; bi < nblocks; ++bi) {
    try {
      double* slot = acc.data() + static_cast<std::size_t>(bi) * stride;
      std::vector<double> vals(nd);
      const std::int64_t lo = bi * block;
      const std::int64_t hi = std::min(paths, lo + block);
      for (std::int64_t s = lo; s < hi; ++s) {
        CounterRng rng(stream_key(opt.seed, kDualStream, opt.stream_tag,
                                  static_cast<std::uint64_t>(s)));
        const DualPath path = simulate_dual_path(n, t, rng);
        double combo = 0.0;
        for (std::size_t d = 0; d < nd; ++d) {
          vals[d] = path_value(path, t, x, deltas[d], gamma, init, opt.quad_nodes);
          combo += weights[d] * vals[d];
        }
        for (std::size_t d = 0; d < nd; ++d) {
          slot[2 * d] += vals[d];
          slot[2 * d + 1] += vals[d] * vals[d];
        }
        slot[2 * nd] += combo;
        slot[2 * nd + 1] += combo * combo;
        slot[2 * nd + 2] += static_cast<double>(path.jumps.size());
      }
    } catch (...) {
#pragma omp critical
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<double> total(stride, 0.0);
  for (std::int64_t bi = 0; bi < nblocks; ++bi) {
    const double* slot = acc.data() + static_cast<std::size_t>(bi) * stride;
    for (std::size_t c = 0; c < stride; ++c) total[c] += slot[c];
  }

  const double inv_paths = 1.0 / static_cast<double>(paths);
  DualEstimate est;
  est.paths = paths;
  est.mean_jumps = total[2 * nd + 2] * inv_paths;
  est.delta_values.resize(nd);
  est.delta_std_errors.resize(nd);
  auto finish = [&](double sum, double sum_sq, double& mean, double& se) {
    mean = sum * inv_paths;
    const double var =
        std::max(0.0, (sum_sq - static_cast<double>(paths) * mean * mean) /
                          (static_cast<double>(paths) - 1.0));
    se = std::sqrt(var * inv_paths);
    if (!std::isfinite(mean)) {
      throw NumericError("dual_moment_estimate: non-finite estimate", mean, se);
    }
  };
  for (std::size_t d = 0; d < nd; ++d) {
    finish(total[2 * d], total[2 * d + 1], est.delta_values[d], est.delta_std_errors[d]);
  }
  finish(total[2 * nd], total[2 * nd + 1], est.value, est.std_error);
  return est;
}

}  // namespace mfsbm
