#include "mfsbm/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>

#include "mfsbm/error.hpp"

namespace mfsbm {

namespace {

void check_keys(const nlohmann::json& j, const char* where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw ConfigError(std::string(where) + ": expected a JSON object");
  }
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError(std::string(where) + ": unknown key \"" + item.key() + "\"");
    }
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("field \"") + key + "\": " + e.what());
    }
  }
}

}  // namespace

nlohmann::json initial_density_to_json(const InitialDensity& init) {
  nlohmann::json j;
  if (!init.components().empty()) {
    j["kind"] = "gaussian_mixture";
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : init.components()) {
      comps.push_back({{"weight", c.weight}, {"center", c.center}, {"variance", c.variance}});
    }
    j["components"] = comps;
  } else {
    j["kind"] = "bump";
    j["center"] = init.bump_center();
    j["radius"] = init.bump_radius();
    j["height"] = init.bump_height();
  }
  return j;
}

InitialDensity initial_density_from_json(const nlohmann::json& j) {
  check_keys(j, "init", {"kind", "components", "center", "radius", "height"});
  std::string kind;
  read_field(j, "kind", kind);
  try {
    if (kind == "gaussian_mixture") {
      if (!j.contains("components")) {
        throw ConfigError("init: gaussian_mixture needs \"components\"");
      }
      std::vector<InitialDensity::Component> comps;
      for (const auto& c : j.at("components")) {
        check_keys(c, "init.components[]", {"weight", "center", "variance"});
        InitialDensity::Component comp{1.0, 0.0, 1.0};
        read_field(c, "weight", comp.weight);
        read_field(c, "center", comp.center);
        read_field(c, "variance", comp.variance);
        comps.push_back(comp);
      }
      return InitialDensity::gaussian_mixture(std::move(comps));
    }
    if (kind == "bump") {
      double center = 0.0, radius = 1.0, height = 1.0;
      read_field(j, "center", center);
      read_field(j, "radius", radius);
      read_field(j, "height", height);
      return InitialDensity::bump(center, radius, height);
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("init: ") + e.what());
  }
  throw ConfigError("init: kind must be \"gaussian_mixture\" or \"bump\"");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["experiment"] = experiment;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["init"] = initial_density_to_json(init);
  j["sigma"] = sigma.to_json();
  j["probes"] = {{"times", probes.times}, {"xs", probes.xs}, {"orders", probes.orders}};
  j["moment"] = {{"orders", moment.orders},         {"samples", moment.samples},
                 {"importance", moment.importance}, {"delta", moment.delta},
                 {"order_cap", moment.order_cap},   {"block_size", moment.block_size}};
  j["picard"] = {{"time_nodes", picard.time_nodes},
                 {"space_nodes", picard.space_nodes},
                 {"space_halfwidth", picard.space_halfwidth},
                 {"horizon", picard.horizon},
                 {"samples", picard.samples},
                 {"max_iterations", picard.max_iterations},
                 {"tol", picard.tol}};
  j["particle"] = {{"scaling_n", particle.scaling_n},
                   {"delta", particle.delta},
                   {"dt", particle.dt},
                   {"horizon", particle.horizon},
                   {"replicas", particle.replicas},
                   {"space_halfwidth", particle.space_halfwidth},
                   {"law_nodes", particle.law_nodes},
                   {"smoothing_nodes", particle.smoothing_nodes},
                   {"population_cap", particle.population_cap},
                   {"record_lifetimes", particle.record_lifetimes}};
  j["dual"] = {{"deltas", dual.deltas}, {"paths", dual.paths}, {"block_size", dual.block_size}};
  j["validate"] = {{"routes", validate.routes},
                   {"threshold", validate.threshold},
                   {"extrapolate", validate.extrapolate}};
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  check_keys(j, "config",
             {"experiment", "seed", "output_dir", "init", "sigma", "probes", "moment", "picard",
              "particle", "dual", "validate"});
  if (!j.contains("seed")) {
    throw ConfigError("config: \"seed\" is required; runs never draw implicit entropy");
  }
  RunConfig cfg;
  read_field(j, "experiment", cfg.experiment);
  read_field(j, "seed", cfg.seed);
  read_field(j, "output_dir", cfg.output_dir);
  if (j.contains("init")) cfg.init = initial_density_from_json(j.at("init"));
  if (j.contains("sigma")) {
    try {
      cfg.sigma = SigmaSpec::from_json(j.at("sigma"));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("sigma: ") + e.what());
    }
  }
  if (j.contains("probes")) {
    const auto& p = j.at("probes");
    check_keys(p, "probes", {"times", "xs", "orders"});
    read_field(p, "times", cfg.probes.times);
    read_field(p, "xs", cfg.probes.xs);
    read_field(p, "orders", cfg.probes.orders);
  }
  if (j.contains("moment")) {
    const auto& m = j.at("moment");
    check_keys(m, "moment", {"orders", "samples", "importance", "delta", "order_cap", "block_size"});
    read_field(m, "orders", cfg.moment.orders);
    read_field(m, "samples", cfg.moment.samples);
    read_field(m, "importance", cfg.moment.importance);
    read_field(m, "delta", cfg.moment.delta);
    read_field(m, "order_cap", cfg.moment.order_cap);
    read_field(m, "block_size", cfg.moment.block_size);
  }
  if (j.contains("picard")) {
    const auto& p = j.at("picard");
    check_keys(p, "picard",
               {"time_nodes", "space_nodes", "space_halfwidth", "horizon", "samples",
                "max_iterations", "tol"});
    read_field(p, "time_nodes", cfg.picard.time_nodes);
    read_field(p, "space_nodes", cfg.picard.space_nodes);
    read_field(p, "space_halfwidth", cfg.picard.space_halfwidth);
    read_field(p, "horizon", cfg.picard.horizon);
    read_field(p, "samples", cfg.picard.samples);
    read_field(p, "max_iterations", cfg.picard.max_iterations);
    read_field(p, "tol", cfg.picard.tol);
  }
  if (j.contains("particle")) {
    const auto& p = j.at("particle");
    check_keys(p, "particle",
               {"scaling_n", "delta", "dt", "horizon", "replicas", "space_halfwidth", "law_nodes",
                "smoothing_nodes", "population_cap", "record_lifetimes"});
    read_field(p, "scaling_n", cfg.particle.scaling_n);
    read_field(p, "delta", cfg.particle.delta);
    read_field(p, "dt", cfg.particle.dt);
    read_field(p, "horizon", cfg.particle.horizon);
    read_field(p, "replicas", cfg.particle.replicas);
    read_field(p, "space_halfwidth", cfg.particle.space_halfwidth);
    read_field(p, "law_nodes", cfg.particle.law_nodes);
    read_field(p, "smoothing_nodes", cfg.particle.smoothing_nodes);
    read_field(p, "population_cap", cfg.particle.population_cap);
    read_field(p, "record_lifetimes", cfg.particle.record_lifetimes);
  }
  if (j.contains("dual")) {
    const auto& d = j.at("dual");
    check_keys(d, "dual", {"deltas", "paths", "block_size"});
    read_field(d, "deltas", cfg.dual.deltas);
    read_field(d, "paths", cfg.dual.paths);
    read_field(d, "block_size", cfg.dual.block_size);
  }
  if (j.contains("validate")) {
    const auto& v = j.at("validate");
    check_keys(v, "validate", {"routes", "threshold", "extrapolate"});
    read_field(v, "routes", cfg.validate.routes);
    read_field(v, "threshold", cfg.validate.threshold);
    read_field(v, "extrapolate", cfg.validate.extrapolate);
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  return from_json(j);
}

std::uint64_t RunConfig::fingerprint() const {
  const std::string canonical = to_json().dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> validate_config(const RunConfig& cfg) {
  std::vector<std::string> bad;
  auto complain = [&](const std::string& msg) { bad.push_back(msg); };

  if (cfg.probes.times.empty()) complain("probes.times: at least one probe time is required");
  if (cfg.probes.xs.empty()) complain("probes.xs: at least one probe coordinate is required");
  if (cfg.probes.orders.empty()) complain("probes.orders: at least one order is required");
  for (double t : cfg.probes.times) {
    if (!(t > 0.0)) complain("probes.times: every probe time must be > 0");
  }
  for (int n : cfg.probes.orders) {
    if (n < 1) complain("probes.orders: orders must be >= 1");
    if (n > cfg.moment.order_cap) {
      std::ostringstream msg;
      msg << "probes.orders: order " << n << " exceeds moment.order_cap = " << cfg.moment.order_cap;
      complain(msg.str());
    }
  }
  if (cfg.moment.orders < 1) complain("moment.orders: must be >= 1");
  if (cfg.moment.orders > cfg.moment.order_cap) complain("moment.orders: exceeds moment.order_cap");
  if (cfg.moment.samples < 2) complain("moment.samples: must be >= 2");
  if (cfg.moment.delta < 0.0) complain("moment.delta: must be >= 0");
  if (cfg.moment.importance != "on" && cfg.moment.importance != "off" &&
      cfg.moment.importance != "auto") {
    complain("moment.importance: must be \"on\", \"off\", or \"auto\"");
  }
  if (cfg.moment.block_size < 1) complain("moment.block_size: must be >= 1");

  if (cfg.picard.time_nodes < 2) complain("picard.time_nodes: must be >= 2");
  if (cfg.picard.space_nodes < 2) complain("picard.space_nodes: must be >= 2");
  if (!(cfg.picard.horizon > 0.0)) complain("picard.horizon: must be > 0");
  if (cfg.picard.samples < 2) complain("picard.samples: must be >= 2");
  if (cfg.picard.max_iterations < 1) complain("picard.max_iterations: must be >= 1");
  if (!(cfg.picard.tol > 0.0)) complain("picard.tol: must be > 0");
  if (cfg.sigma.moment_order() > cfg.moment.orders) {
    complain("moment.orders: smaller than the moment order the coefficient reads");
  }

  const bool wants_particle = std::find(cfg.validate.routes.begin(), cfg.validate.routes.end(),
                                        "particle") != cfg.validate.routes.end();
  const bool wants_dual = std::find(cfg.validate.routes.begin(), cfg.validate.routes.end(),
                                    "dual") != cfg.validate.routes.end();
  for (const std::string& r : cfg.validate.routes) {
    if (r != "formula" && r != "classical" && r != "particle" && r != "dual") {
      complain("validate.routes: unknown route \"" + r + "\"");
    }
  }
  if (!(cfg.validate.threshold > 0.0)) complain("validate.threshold: must be > 0");

  if (cfg.particle.scaling_n < 1) complain("particle.scaling_n: must be >= 1");
  if (!(cfg.particle.delta > 0.0)) complain("particle.delta: must be > 0");
  if (!(cfg.particle.dt > 0.0)) complain("particle.dt: must be > 0");
  if (!(cfg.particle.horizon > 0.0)) complain("particle.horizon: must be > 0");
  if (cfg.particle.replicas < 2) complain("particle.replicas: must be >= 2");
  if (cfg.particle.population_cap < 1) complain("particle.population_cap: must be >= 1");
  if (wants_particle) {
    // The particle engine re-checks this invariant on every run; the config
    // gate only fires when the particle route actually participates.
    const double step_load = cfg.particle.dt * cfg.particle.scaling_n * cfg.sigma.k_upper();
    if (step_load > 0.1 * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "particle.dt: dt * n * sup sigma^2 = " << step_load
          << " violates the 0.1 step-size invariant";
      complain(msg.str());
    }
    for (double t : cfg.probes.times) {
      const double ratio = t / cfg.particle.dt;
      if (std::abs(ratio - std::llround(ratio)) > 1e-9 * std::max(1.0, std::abs(ratio))) {
        std::ostringstream msg;
        msg << "probes.times: " << t << " does not sit on the particle step grid (dt = "
            << cfg.particle.dt << ")";
        complain(msg.str());
      }
      if (t > cfg.particle.horizon * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "probes.times: " << t << " exceeds particle.horizon";
        complain(msg.str());
      }
    }
  }
  for (double t : cfg.probes.times) {
    if (t > cfg.picard.horizon * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "probes.times: " << t << " exceeds picard.horizon";
      complain(msg.str());
    }
  }

  if (cfg.dual.deltas.empty()) complain("dual.deltas: at least one delta is required");
  for (double d : cfg.dual.deltas) {
    if (!(d > 0.0)) complain("dual.deltas: every delta must be > 0");
  }
  {
    std::set<double> uniq(cfg.dual.deltas.begin(), cfg.dual.deltas.end());
    if (uniq.size() != cfg.dual.deltas.size()) complain("dual.deltas: deltas must be distinct");
  }
  if (cfg.dual.paths < 2) complain("dual.paths: must be >= 2");
  if (cfg.dual.block_size < 1) complain("dual.block_size: must be >= 1");
  if (wants_dual && !cfg.sigma.is_constant()) {
    complain("validate.routes: the dual route requires a constant coefficient");
  }
  const bool wants_classical = std::find(cfg.validate.routes.begin(), cfg.validate.routes.end(),
                                         "classical") != cfg.validate.routes.end();
  if (wants_classical && !cfg.sigma.is_constant()) {
    complain("validate.routes: the classical route requires a constant coefficient");
  }
  if (cfg.validate.extrapolate && cfg.dual.deltas.size() < 2) {
    complain("validate.extrapolate: needs at least two deltas in dual.deltas");
  }
  if (cfg.validate.extrapolate && !cfg.sigma.is_constant()) {
    complain(
        "validate.extrapolate: requires a constant coefficient (particle trajectories must not "
        "depend on the smoothing to be re-read at other smoothing widths)");
  }
  return bad;
}

void require_valid(const RunConfig& cfg) {
  const std::vector<std::string> bad = validate_config(cfg);
  if (bad.empty()) return;
  std::ostringstream msg;
  msg << "configuration rejected (" << bad.size() << " violation" << (bad.size() == 1 ? "" : "s")
      << "):";
  for (const std::string& b : bad) msg << "\n  - " << b;
  throw ConfigError(msg.str());
}

}  // namespace mfsbm
