#pragma once

#include <vector>

namespace mfsbm {

/// Moment vector field u_n(t_j, x_i) on a regular grid, with a companion
/// standard-error array of the same shape.  Interpolation is bilinear in
/// (t, x); queries outside the grid clamp to the nearest node, which is safe
/// because the spatial box is sized so the fields are negligible at its edges.
class MomentField {
public:
  MomentField() = default;
  MomentField(std::vector<double> times, std::vector<double> xs, int orders);

  int time_nodes() const { return static_cast<int>(times_.size()); }
  int space_nodes() const { return static_cast<int>(xs_.size()); }
  int orders() const { return orders_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& xs() const { return xs_; }

  /// n is 1-based (order of the moment).
  double& value(int j, int i, int n) { return values_[index(j, i, n)]; }
  double value(int j, int i, int n) const { return values_[index(j, i, n)]; }
  double& std_error(int j, int i, int n) { return errors_[index(j, i, n)]; }
  double std_error(int j, int i, int n) const { return errors_[index(j, i, n)]; }

  double interpolate(double t, double x, int n) const;

  /// Largest |this - other| over all nodes and orders (shapes must match).
  double max_abs_difference(const MomentField& other) const;

private:
  std::size_t index(int j, int i, int n) const;

  std::vector<double> times_;
  std::vector<double> xs_;
  int orders_ = 0;
  std::vector<double> values_;
  std::vector<double> errors_;
};

} // namespace mfsbm
