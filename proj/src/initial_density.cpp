#include "mfsbm/initial_density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfsbm/error.hpp"
#include "mfsbm/heat_kernel.hpp"
#include "mfsbm/quadrature.hpp"

namespace mfsbm {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kTailEps = 1e-12;
}

InitialDensity InitialDensity::gaussian_mixture(std::vector<Component> components) {
  if (components.empty()) {
    throw DomainError("InitialDensity: mixture needs at least one component");
  }
  for (const auto& c : components) {
    if (!(c.weight > 0.0) || !(c.variance > 0.0) || !std::isfinite(c.center)) {
      throw DomainError("InitialDensity: component weights and variances must be positive");
    }
  }
  InitialDensity d;
  d.kind_ = Kind::GaussianMixture;
  d.components_ = std::move(components);
  return d;
}

InitialDensity InitialDensity::bump(double center, double radius, double height) {
  if (!(radius > 0.0) || !(height > 0.0) || !std::isfinite(center)) {
    throw DomainError("InitialDensity: bump needs radius > 0 and height > 0");
  }
  InitialDensity d;
  d.kind_ = Kind::Bump;
  d.bump_center_ = center;
  d.bump_radius_ = radius;
  d.bump_height_ = height;
  // integral of exp(1 - 1/(1-u^2)) over (-1,1), scaled by height * radius
  auto profile = [](double u) {
    const double w = 1.0 - u * u;
    return w > 0.0 ? std::exp(1.0 - 1.0 / w) : 0.0;
  };
  d.bump_mass_ = height * radius * integrate(profile, -1.0, 1.0, 1e-14, 1e-14).value;
  return d;
}

double InitialDensity::value(double x) const {
  if (kind_ == Kind::GaussianMixture) {
    double v = 0.0;
    for (const auto& c : components_) {
      v += c.weight * heat_kernel_value(c.variance, x - c.center);
    }
    return v;
  }
  const double u = (x - bump_center_) / bump_radius_;
  const double w = 1.0 - u * u;
  return w > 0.0 ? bump_height_ * std::exp(1.0 - 1.0 / w) : 0.0;
}

double InitialDensity::mass() const {
  if (kind_ == Kind::GaussianMixture) {
    double m = 0.0;
    for (const auto& c : components_) m += c.weight;
    return m;
  }
  return bump_mass_;
}

double InitialDensity::sup_bound() const {
  if (kind_ == Kind::GaussianMixture) {
    double s = 0.0;
    for (const auto& c : components_) s += c.weight / std::sqrt(kTwoPi * c.variance);
    return s;
  }
  return bump_height_;
}

double InitialDensity::heat_convolve(double t, double x) const {
  if (t < 0.0 || !std::isfinite(t) || !std::isfinite(x)) {
    throw DomainError("heat_convolve: requires finite x and t >= 0");
  }
  if (t == 0.0) return value(x);
  if (kind_ == Kind::GaussianMixture) {
    double v = 0.0;
    for (const auto& c : components_) {
      v += c.weight * heat_kernel_value(t + c.variance, x - c.center);
    }
    return v;
  }
  // Bump support is compact, so integrate over it; the kernel factor decides
  // whether the product is negligible, which the adaptive rule handles.
  const double lo = bump_center_ - bump_radius_;
  const double hi = bump_center_ + bump_radius_;
  // Restrict further to where the kernel has mass, to keep the partition small.
  const double l = gaussian_tail_halfwidth(t, kTailEps);
  const double a = std::max(lo, x - l);
  const double b = std::min(hi, x + l);
  if (a >= b) return 0.0;
  auto f = [&](double y) { return heat_kernel_value(t, x - y) * value(y); };
  return integrate(f, a, b, 1e-12, 1e-10).value;
}

double InitialDensity::sample(CounterRng& rng) const {
  if (kind_ == Kind::GaussianMixture) {
    double u = rng.uniform() * mass();
    std::size_t pick = components_.size() - 1;
    for (std::size_t q = 0; q < components_.size(); ++q) {
      if (u < components_[q].weight) {
        pick = q;
        break;
      }
      u -= components_[q].weight;
    }
    const auto& c = components_[pick];
    return c.center + std::sqrt(c.variance) * rng.normal();
  }
  // Rejection from the uniform envelope on the support (acceptance ~ 0.44).
  for (;;) {
    const double x = rng.uniform(bump_center_ - bump_radius_, bump_center_ + bump_radius_);
    if (rng.uniform() * bump_height_ <= value(x)) return x;
  }
}

void InitialDensity::support_hint(double eps, double& lo, double& hi) const {
  if (kind_ == Kind::Bump) {
    lo = bump_center_ - bump_radius_;
    hi = bump_center_ + bump_radius_;
    return;
  }
  lo = std::numeric_limits<double>::infinity();
  hi = -std::numeric_limits<double>::infinity();
  for (const auto& c : components_) {
    const double l = gaussian_tail_halfwidth(c.variance, eps);
    lo = std::min(lo, c.center - l);
    hi = std::max(hi, c.center + l);
  }
}

} // namespace mfsbm
