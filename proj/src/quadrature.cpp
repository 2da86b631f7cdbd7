#include "mfsbm/quadrature.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <queue>
#include <sstream>

#include "mfsbm/error.hpp"

namespace mfsbm {

namespace {

// 15-point Kronrod extension of 7-point Gauss (QUADPACK constants).
// Positive abscissae; even symmetry.  Odd positions (1,3,5,7 counting from 1)
// are the embedded Gauss nodes.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, // Kronrod
    0.949107912342758524526189684047851, // Gauss
    0.864864423359769072789712788640926, // Kronrod
    0.741531185599394439863864773280788, // Gauss
    0.586087235467691130294144838258730, // Kronrod
    0.405845151377397166906606412076961, // Gauss
    0.207784955007898467600689403773245, // Kronrod
    0.000000000000000000000000000000000, // Gauss (centre)
};

constexpr double kWgk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
};

constexpr double kWg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
};

struct Interval {
  double a, b;
  double value;
  double err;
};

Interval evaluate_gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double kron = 0.0;
  double gauss = 0.0;
  for (int i = 0; i < 8; ++i) {
    double fsum;
    if (i == 7) {
      fsum = f(c);
    } else {
      fsum = f(c - h * kXgk[i]) + f(c + h * kXgk[i]);
    }
    kron += kWgk[i] * fsum;
    if (i % 2 == 1) {
      gauss += kWg[i / 2] * fsum;
    }
  }
  Interval iv;
  iv.a = a;
  iv.b = b;
  iv.value = kron * h;
  // The standard QUADPACK error inflation; conservative for smooth integrands.
  const double diff = std::abs((kron - gauss) * h);
  iv.err = diff;
  return iv;
}

} // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double abs_tol, double rel_tol, int max_intervals) {
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw DomainError("integrate: endpoints must be finite");
  }
  double sign = 1.0;
  if (a == b) return {0.0, 0.0, 0};
  if (a > b) {
    std::swap(a, b);
    sign = -1.0;
  }

  auto cmp = [](const Interval& l, const Interval& r) { return l.err < r.err; };
  std::priority_queue<Interval, std::vector<Interval>, decltype(cmp)> heap(cmp);
  heap.push(evaluate_gk15(f, a, b));

  double total_value = heap.top().value;
  double total_err = heap.top().err;

  while (static_cast<int>(heap.size()) < max_intervals) {
    const double target = std::max(abs_tol, rel_tol * std::abs(total_value));
    if (total_err <= target) break;
    Interval worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      // Interval at floating-point resolution: accept its contribution as is.
      worst.err = 0.0;
      heap.push(worst);
      continue;
    }
    Interval left = evaluate_gk15(f, worst.a, mid);
    Interval right = evaluate_gk15(f, mid, worst.b);
    total_value += left.value + right.value - worst.value;
    total_err += left.err + right.err - worst.err;
    heap.push(left);
    heap.push(right);
  }

  const double target = std::max(abs_tol, rel_tol * std::abs(total_value));
  if (total_err > target) {
    std::ostringstream msg;
    msg << "integrate: interval budget " << max_intervals
        << " exhausted; error bound " << total_err << " above tolerance " << target;
    throw NumericError(msg.str(), sign * total_value, total_err);
  }

  QuadratureResult out;
  out.value = sign * total_value;
  out.error_bound = total_err;
  out.intervals = static_cast<int>(heap.size());
  return out;
}

namespace {

/// Golub-Welsch: nodes are eigenvalues of the symmetric tridiagonal Jacobi
/// matrix; weights are mu0 * (first eigenvector component)^2.
QuadratureRule golub_welsch(const std::vector<double>& offdiag, double mu0) {
  const int m = static_cast<int>(offdiag.size()) + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k + 1 < m; ++k) {
    jacobi(k, k + 1) = offdiag[k];
    jacobi(k + 1, k) = offdiag[k];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(m);
  rule.weights.resize(m);

  // The eigensolver locates nodes and weights to ~1e-10; polish each node
  // with two Newton steps on the orthonormal three-term recurrence and take
  // the weight from the Christoffel function, which brings both down to a
  // few ulps.  With a zero diagonal the recurrence is
  //   b_{k} p_k(x) = x p_{k-1}(x) - b_{k-1} p_{k-2}(x),  p_0 = 1/sqrt(mu0),
  // and q(x) = x p_{m-1}(x) - b_{m-1} p_{m-2}(x) vanishes exactly at the
  // nodes; w_i = 1 / sum_{k<m} p_k(x_i)^2.
  for (int k = 0; k < m; ++k) {
    double x = solver.eigenvalues()(k);
    double christoffel = 0.0;
    for (int pass = 0; pass < 3; ++pass) {
      double pm1 = 0.0, p = 1.0 / std::sqrt(mu0);
      double dpm1 = 0.0, dp = 0.0;
      christoffel = p * p;
      for (int j = 1; j < m; ++j) {
        const double b = offdiag[j - 1];
        const double bprev = j >= 2 ? offdiag[j - 2] : 0.0;
        const double pn = (x * p - bprev * pm1) / b;
        const double dpn = (p + x * dp - bprev * dpm1) / b;
        pm1 = p;
        p = pn;
        dpm1 = dp;
        dp = dpn;
        christoffel += p * p;
      }
      if (pass == 2) break;  // final pass only refreshes the Christoffel sum
      const double bm1 = m >= 2 ? offdiag[m - 2] : 0.0;
      const double q = x * p - bm1 * pm1;
      const double dq = p + x * dp - bm1 * dpm1;
      if (dq != 0.0 && std::isfinite(q / dq)) x -= q / dq;
    }
    rule.nodes[k] = x;
    rule.weights[k] = 1.0 / christoffel;
  }
  return rule;
}

} // namespace

const QuadratureRule& gauss_hermite(int m) {
  if (m < 1 || m > 200) throw DomainError("gauss_hermite: order out of range");
  static std::mutex mtx;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(m);
  if (it == cache.end()) {
    std::vector<double> off(m - 1);
    for (int k = 1; k < m; ++k) off[k - 1] = std::sqrt(k / 2.0);
    it = cache.emplace(m, golub_welsch(off, std::sqrt(3.14159265358979323846))).first;
  }
  return it->second;
}

const QuadratureRule& gauss_legendre(int m) {
  if (m < 1 || m > 200) throw DomainError("gauss_legendre: order out of range");
  static std::mutex mtx;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(m);
  if (it == cache.end()) {
    std::vector<double> off(m - 1);
    for (int k = 1; k < m; ++k) off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
    it = cache.emplace(m, golub_welsch(off, 2.0)).first;
  }
  return it->second;
}

} // namespace mfsbm
