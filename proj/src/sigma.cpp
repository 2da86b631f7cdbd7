#include "mfsbm/sigma.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "mfsbm/error.hpp"

namespace mfsbm {

SigmaSpec SigmaSpec::constant(double gamma, bool test_mode) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw DomainError("SigmaSpec: constant gamma must be finite and >= 0");
  }
  if (gamma == 0.0 && !test_mode) {
    throw DomainError("SigmaSpec: gamma == 0 admitted only in test mode");
  }
  SigmaSpec s;
  s.kind_ = Kind::Constant;
  s.gamma_ = gamma;
  s.test_mode_ = test_mode;
  s.order_ = 0;
  s.k_upper_ = std::max(gamma, 1e-300);
  s.k_lower_ = test_mode ? 0.0 : gamma;
  s.derivative_bound_ = 0.0;
  return s;
}

SigmaSpec SigmaSpec::moment_poly(std::vector<double> coeffs, double h_lo, double h_hi,
                                 double h_center, double h_scale) {
  if (coeffs.empty()) throw DomainError("SigmaSpec: moment_poly needs a_0 at least");
  if (static_cast<int>(coeffs.size()) - 1 > kMaxSigmaOrder) {
    throw DomainError("SigmaSpec: moment_poly order exceeds the supported cap");
  }
  if (!(0.0 < h_lo && h_lo < h_hi) || !(h_scale > 0.0)) {
    throw DomainError("SigmaSpec: moment_poly needs 0 < h_lo < h_hi and h_scale > 0");
  }
  SigmaSpec s;
  s.kind_ = Kind::MomentPoly;
  s.order_ = static_cast<int>(coeffs.size()) - 1;
  s.coeffs_ = std::move(coeffs);
  s.h_lo_ = h_lo;
  s.h_hi_ = h_hi;
  s.h_center_ = h_center;
  s.h_scale_ = h_scale;
  s.k_upper_ = h_hi;
  s.k_lower_ = h_lo;
  double amax = 0.0;
  for (std::size_t k = 1; k < s.coeffs_.size(); ++k) amax = std::max(amax, std::abs(s.coeffs_[k]));
  // Logistic derivative peaks at 1/4.
  s.derivative_bound_ = 0.25 * (h_hi - h_lo) / h_scale * amax;
  return s;
}

SigmaSpec SigmaSpec::cosine_series(int order) {
  if (order < 1 || order > 20) throw DomainError("SigmaSpec: cosine_series order in [1, 20]");
  SigmaSpec s;
  s.kind_ = Kind::CosineSeries;
  s.order_ = order;
  // Full series stays in [1, 3]; a truncation evaluated on moderate moments
  // stays close, so declare a padded band and let the runtime check enforce it.
  s.k_upper_ = 3.5;
  s.k_lower_ = 0.5;
  s.derivative_bound_ = 0.5; // |d/du_1| = 1/2! dominates
  return s;
}

double SigmaSpec::evaluate(double t, double x, const double* moments, int count) const {
  double value = 0.0;
  switch (kind_) {
    case Kind::Constant:
      return gamma_; // band enforced at construction; zero allowed in test mode
    case Kind::MomentPoly: {
      if (count < order_) {
        throw DomainError("SigmaSpec: moment vector shorter than functional order");
      }
      double y = coeffs_[0];
      for (int k = 1; k <= order_; ++k) y += coeffs_[k] * moments[k - 1];
      const double z = (y - h_center_) / h_scale_;
      value = h_lo_ + (h_hi_ - h_lo_) / (1.0 + std::exp(-z));
      break;
    }
    case Kind::CosineSeries: {
      if (count < order_) {
        throw DomainError("SigmaSpec: moment vector shorter than functional order");
      }
      value = 3.0;
      double fact = 1.0; // (2k)!
      double sign = 1.0;
      for (int k = 1; k <= order_; ++k) {
        fact *= (2.0 * k - 1.0) * (2.0 * k);
        sign = -sign;
        value += sign * moments[k - 1] / fact;
      }
      break;
    }
  }
  if (!(value > 0.0) || value > k_upper_ || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << "sigma functional left its declared band (0, " << k_upper_ << "] at node (t="
        << t << ", x=" << x << "): value " << value;
    throw ContractError(msg.str());
  }
  return value;
}

nlohmann::json SigmaSpec::to_json() const {
  nlohmann::json j;
  switch (kind_) {
    case Kind::Constant:
      j["kind"] = "constant";
      j["gamma"] = gamma_;
      if (test_mode_) j["test_mode"] = true;
      break;
    case Kind::MomentPoly:
      j["kind"] = "moment_poly";
      j["coeffs"] = coeffs_;
      j["h_lo"] = h_lo_;
      j["h_hi"] = h_hi_;
      j["h_center"] = h_center_;
      j["h_scale"] = h_scale_;
      break;
    case Kind::CosineSeries:
      j["kind"] = "cosine_series";
      j["order"] = order_;
      break;
  }
  return j;
}

SigmaSpec SigmaSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind")) {
    throw ConfigError("sigma: expected object with \"kind\"");
  }
  const std::string kind = j.at("kind").get<std::string>();
  auto reject_unknown = [&](std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) {
        if (it.key() == a) ok = true;
      }
      if (!ok) throw ConfigError("sigma: unknown key \"" + it.key() + "\"");
    }
  };
  try {
    if (kind == "constant") {
      reject_unknown({"kind", "gamma", "test_mode"});
      return SigmaSpec::constant(j.at("gamma").get<double>(), j.value("test_mode", false));
    }
    if (kind == "moment_poly") {
      reject_unknown({"kind", "coeffs", "h_lo", "h_hi", "h_center", "h_scale"});
      return SigmaSpec::moment_poly(j.at("coeffs").get<std::vector<double>>(),
                                    j.at("h_lo").get<double>(), j.at("h_hi").get<double>(),
                                    j.value("h_center", 1.0), j.value("h_scale", 1.0));
    }
    if (kind == "cosine_series") {
      reject_unknown({"kind", "order"});
      return SigmaSpec::cosine_series(j.at("order").get<int>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sigma: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("sigma: ") + e.what());
  }
  throw ConfigError("sigma: unknown kind \"" + kind + "\"");
}

} // namespace mfsbm
