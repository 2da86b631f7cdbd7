#include "mfsbm/picard.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "mfsbm/error.hpp"

namespace mfsbm {

namespace {

std::vector<double> linspace(double lo, double hi, int nodes) {
  std::vector<double> v(nodes);
  // Affine combination: endpoints are exact, and a symmetric range mirrors
  // bit for bit (v[k] == -v[nodes-1-k] when lo == -hi).
  for (int k = 0; k < nodes; ++k) {
    v[k] = (lo * static_cast<double>(nodes - 1 - k) + hi * static_cast<double>(k)) /
           static_cast<double>(nodes - 1);
  }
  return v;
}

double auto_halfwidth(const InitialDensity& init, double horizon) {
  double spread = 0.0;
  double center = 0.0;
  if (init.is_gaussian_mixture()) {
    for (const auto& c : init.components()) {
      spread = std::max(spread, std::sqrt(c.variance));
      center = std::max(center, std::abs(c.center));
    }
  } else {
    spread = init.bump_radius();
    center = std::abs(init.bump_center());
  }
  return 6.0 * (spread + std::sqrt(horizon)) + center;
}

void check_options(const PicardOptions& opt) {
  if (opt.orders < 1 || opt.orders > opt.order_cap) {
    throw DomainError("picard: orders must be in [1, order_cap]");
  }
  if (!(opt.horizon > 0.0)) throw DomainError("picard: horizon must be positive");
  if (opt.time_nodes < 2 || opt.space_nodes < 2) {
    throw DomainError("picard: needs at least 2 nodes per axis");
  }
  if (opt.samples < 1) throw DomainError("picard: samples must be >= 1");
  if (opt.max_iterations < 1) throw DomainError("picard: max_iterations must be >= 1");
}

/// Evaluates every grid node of `out` with the given coefficient field.
/// Node stream tags depend on (time, space, order) only.
void fill_grid(MomentField& out, const SigmaHatSqField& field, const SigmaSpec& sigma,
               const InitialDensity& init, const PicardOptions& opt) {
  const int jt = out.time_nodes();
  const int ix = out.space_nodes();
  const int orders = out.orders();

  // t = 0 row: powers of the initial density, exact.
  for (int i = 0; i < ix; ++i) {
    const double v = init.value(out.xs()[i]);
    double p = 1.0;
    for (int n = 1; n <= orders; ++n) {
      p *= v;
      out.value(0, i, n) = p;
      out.std_error(0, i, n) = 0.0;
    }
  }

  (void)sigma;
  const long flat = static_cast<long>(jt - 1) * ix * orders;
  std::exception_ptr first_error = nullptr;

#pragma omp parallel for schedule(dynamic)
  for (long node = 0; node < flat; ++node) {
    try {
      const int n = static_cast<int>(node % orders) + 1;
      const int i = static_cast<int>((node / orders) % ix);
      const int j = static_cast<int>(node / (static_cast<long>(orders) * ix)) + 1;
      McOptions mc;
      mc.samples = opt.samples;
      mc.seed = opt.seed;
      // Tag namespace (1 << 32): grid-fill streams never collide with the
      // direct per-probe streams other callers derive from the same seed.
      mc.stream_tag = (std::uint64_t{1} << 32) + static_cast<std::uint64_t>(node);
      mc.importance = opt.importance;
      mc.order_cap = opt.order_cap;
      const McEstimate est =
          moment_formula_mc_serial(n, out.times()[j], out.xs()[i], init, field, mc);
      out.value(j, i, n) = est.value;
      out.std_error(j, i, n) = est.std_error;
    } catch (...) {
#pragma omp critical
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

} // namespace

MomentField make_picard_grid(const InitialDensity& init, const PicardOptions& opt) {
  check_options(opt);
  const double l = opt.space_halfwidth > 0.0 ? opt.space_halfwidth
                                             : auto_halfwidth(init, opt.horizon);
  return MomentField(linspace(0.0, opt.horizon, opt.time_nodes), linspace(-l, l, opt.space_nodes),
                     opt.orders);
}

SigmaHatSqField sigma_field_from_moments(const SigmaSpec& sigma, const MomentField& u) {
  const int orders = u.orders();
  if (orders < sigma.moment_order()) {
    throw DomainError("sigma_field_from_moments: grid carries fewer orders than sigma reads");
  }
  return [&sigma, &u, orders](double s, double z) {
    double moments[kMaxSigmaOrder];
    for (int n = 1; n <= orders; ++n) moments[n - 1] = u.interpolate(s, z, n);
    return sigma.evaluate(s, z, moments, orders);
  };
}

MomentField picard_initial(const SigmaSpec& sigma, const InitialDensity& init,
                           const PicardOptions& opt) {
  MomentField out = make_picard_grid(init, opt);
  const int orders = opt.orders;
  SigmaHatSqField field = [&sigma, &init, orders](double s, double z) {
    double moments[kMaxSigmaOrder];
    double p = 1.0;
    const double v = init.value(z);
    for (int n = 1; n <= orders; ++n) {
      p *= v;
      moments[n - 1] = p;
    }
    return sigma.evaluate(s, z, moments, orders);
  };
  fill_grid(out, field, sigma, init, opt);
  return out;
}

MomentField picard_step(const MomentField& prev, const SigmaSpec& sigma,
                        const InitialDensity& init, const PicardOptions& opt) {
  check_options(opt);
  MomentField out(prev.times(), prev.xs(), prev.orders());
  fill_grid(out, sigma_field_from_moments(sigma, prev), sigma, init, opt);
  return out;
}

MomentField picard_solve(const SigmaSpec& sigma, const InitialDensity& init,
                         const PicardOptions& opt, PicardDiagnostics* diagnostics) {
  MomentField u = picard_initial(sigma, init, opt);
  PicardDiagnostics diag;
  for (int k = 1; k <= opt.max_iterations; ++k) {
    MomentField next = picard_step(u, sigma, init, opt);
    const double h = next.max_abs_difference(u);
    diag.h.push_back(h);
    diag.iterations = k;
    u = std::move(next);
    if (h <= opt.tol) {
      diag.converged = true;
      break;
    }
  }
  if (diagnostics) *diagnostics = std::move(diag);
  return u;
}

} // namespace mfsbm
