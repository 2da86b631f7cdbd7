#pragma once

#include <vector>

#include "mfsbm/rng.hpp"

namespace mfsbm {

/// Finite-mass initial mass density on the line.  Two families:
///  - gaussian_mixture: sum_q a_q * p_{v_q}(x - m_q), closed under heat flow;
///  - bump: height * exp(1 - 1/(1 - ((x-c)/r)^2)) on (c-r, c+r), smooth and
///    compactly supported, convolved by quadrature.
class InitialDensity {
public:
  struct Component {
    double weight;   // mass a_q > 0
    double center;   // m_q
    double variance; // v_q > 0
  };

  static InitialDensity gaussian_mixture(std::vector<Component> components);
  static InitialDensity bump(double center, double radius, double height);

  /// Pointwise density value X0(x) >= 0.
  double value(double x) const;

  /// Total mass, integral of the density (exact for mixtures, cached
  /// quadrature for bumps).
  double mass() const;

  /// Upper bound for sup_x X0(x): exact for bumps and single-component
  /// mixtures, the sum of component peaks otherwise.
  double sup_bound() const;

  /// Heat convolution (p_t * X0)(x) for t > 0; value(x) at t == 0.
  /// Closed form for mixtures; adaptive quadrature with tail control for
  /// bumps.  Never exceeds min(sup_bound(), mass() * (2 pi t)^{-1/2}).
  double heat_convolve(double t, double x) const;

  /// Draws one point from the normalised density X0 / mass.
  double sample(CounterRng& rng) const;

  /// Smallest interval [lo, hi] holding all but eps of the mass.
  void support_hint(double eps, double& lo, double& hi) const;

  bool is_gaussian_mixture() const { return kind_ == Kind::GaussianMixture; }
  const std::vector<Component>& components() const { return components_; }
  double bump_center() const { return bump_center_; }
  double bump_radius() const { return bump_radius_; }
  double bump_height() const { return bump_height_; }

private:
  enum class Kind { GaussianMixture, Bump };

  InitialDensity() = default;

  Kind kind_ = Kind::GaussianMixture;
  std::vector<Component> components_;
  double bump_center_ = 0.0;
  double bump_radius_ = 1.0;
  double bump_height_ = 1.0;
  double bump_mass_ = 0.0; // cached at construction
};

} // namespace mfsbm
