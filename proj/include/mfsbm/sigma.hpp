#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace mfsbm {

/// Branching-coefficient specification sigma^2 = f(t, x, (u_1, ..., u_N)),
/// where u_k are moments of the field law at (t, x).  Three families:
///  - constant: f = gamma, no moment dependency;
///  - moment_poly: f = h(a_0 + sum_k a_k u_k) with h a logistic squashing onto
///    (h_lo, h_hi), so f is Lipschitz in u and bounded away from 0 and infinity;
///  - cosine_series: f = 3 + sum_{k=1}^N (-1)^k u_k / (2k)!, the truncation of
///    the moment expansion of E[2 + cos(sqrt(X))]; the truncation order is
///    recorded and reported with results.
/// Every evaluation is checked against the declared band (0, k_upper]; a
/// violation raises ContractError naming the offending node.

/// Largest moment order any coefficient family may read; fixed-size moment
/// buffers in hot loops are sized against it.
inline constexpr int kMaxSigmaOrder = 20;

class SigmaSpec {
public:
  enum class Kind { Constant, MomentPoly, CosineSeries };

  /// gamma in (0, k_upper]; gamma == 0 admitted only with test_mode (used by
  /// tests exercising the noiseless heat flow).
  static SigmaSpec constant(double gamma, bool test_mode = false);

  static SigmaSpec moment_poly(std::vector<double> coeffs, double h_lo, double h_hi,
                               double h_center = 1.0, double h_scale = 1.0);

  static SigmaSpec cosine_series(int order);

  Kind kind() const { return kind_; }
  bool is_constant() const { return kind_ == Kind::Constant; }
  double constant_gamma() const { return gamma_; }

  /// Highest moment order the functional reads (0 for constant).
  int moment_order() const { return order_; }

  /// Declared band: evaluations must land in (0, k_upper]; k_lower is the
  /// declared lower edge used in diagnostics (0 when test_mode admits zero).
  double k_upper() const { return k_upper_; }
  double k_lower() const { return k_lower_; }

  /// Declared Lipschitz/derivative bound of f in the moment arguments.
  double derivative_bound() const { return derivative_bound_; }

  /// Evaluate sigma^2 at a node; `moments[k-1]` holds u_k and `count` must
  /// cover moment_order() entries.  Throws ContractError when the value leaves
  /// the declared band, naming (t, x).
  double evaluate(double t, double x, const double* moments, int count) const;
  double evaluate(double t, double x, const std::vector<double>& moments) const {
    return evaluate(t, x, moments.data(), static_cast<int>(moments.size()));
  }

  nlohmann::json to_json() const;
  static SigmaSpec from_json(const nlohmann::json& j);

  bool operator==(const SigmaSpec&) const = default;

private:
  SigmaSpec() = default;

  Kind kind_ = Kind::Constant;
  double gamma_ = 1.0;
  bool test_mode_ = false;
  int order_ = 0;
  std::vector<double> coeffs_; // a_0 ... a_N for moment_poly
  double h_lo_ = 0.5;
  double h_hi_ = 2.0;
  double h_center_ = 1.0;
  double h_scale_ = 1.0;
  double k_upper_ = 1.0;
  double k_lower_ = 1.0;
  double derivative_bound_ = 0.0;
};

} // namespace mfsbm
