#include "mfsbm/moment_field.hpp"

#include <algorithm>
#include <cmath>

#include "mfsbm/error.hpp"

namespace mfsbm {

MomentField::MomentField(std::vector<double> times, std::vector<double> xs, int orders)
    : times_(std::move(times)), xs_(std::move(xs)), orders_(orders) {
  if (times_.empty() || xs_.empty() || orders_ < 1) {
    throw DomainError("MomentField: needs nonempty grids and orders >= 1");
  }
  if (!std::is_sorted(times_.begin(), times_.end()) || !std::is_sorted(xs_.begin(), xs_.end())) {
    throw DomainError("MomentField: grids must be ascending");
  }
  values_.assign(times_.size() * xs_.size() * orders_, 0.0);
  errors_.assign(values_.size(), 0.0);
}

std::size_t MomentField::index(int j, int i, int n) const {
  if (j < 0 || j >= time_nodes() || i < 0 || i >= space_nodes() || n < 1 || n > orders_) {
    throw DomainError("MomentField: index out of range");
  }
  return (static_cast<std::size_t>(j) * xs_.size() + i) * orders_ + (n - 1);
}

namespace {

/// Clamped bracketing: returns k with grid[k] <= q <= grid[k+1] and the local
/// coordinate in [0, 1]; endpoints clamp.
void bracket(const std::vector<double>& grid, double q, int& k, double& w) {
  const int m = static_cast<int>(grid.size());
  if (m == 1 || q <= grid.front()) {
    k = 0;
    w = 0.0;
    return;
  }
  if (q >= grid.back()) {
    k = m - 2;
    w = 1.0;
    return;
  }
  k = static_cast<int>(std::upper_bound(grid.begin(), grid.end(), q) - grid.begin()) - 1;
  k = std::min(k, m - 2);
  const double span = grid[k + 1] - grid[k];
  w = span > 0.0 ? (q - grid[k]) / span : 0.0;
}

} // namespace

double MomentField::interpolate(double t, double x, int n) const {
  int j, i;
  double wt, wx;
  bracket(times_, t, j, wt);
  bracket(xs_, x, i, wx);
  if (time_nodes() == 1 && space_nodes() == 1) return value(0, 0, n);
  if (time_nodes() == 1) {
    return (1.0 - wx) * value(0, i, n) + wx * value(0, i + 1, n);
  }
  if (space_nodes() == 1) {
    return (1.0 - wt) * value(j, 0, n) + wt * value(j + 1, 0, n);
  }
  const double v00 = value(j, i, n);
  const double v01 = value(j, i + 1, n);
  const double v10 = value(j + 1, i, n);
  const double v11 = value(j + 1, i + 1, n);
  return (1.0 - wt) * ((1.0 - wx) * v00 + wx * v01) + wt * ((1.0 - wx) * v10 + wx * v11);
}

double MomentField::max_abs_difference(const MomentField& other) const {
  if (values_.size() != other.values_.size()) {
    throw DomainError("MomentField: shape mismatch in difference");
  }
  double m = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    m = std::max(m, std::abs(values_[k] - other.values_[k]));
  }
  return m;
}

} // namespace mfsbm
