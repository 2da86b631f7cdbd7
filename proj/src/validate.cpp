#include "mfsbm/validate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <Eigen/Dense>

#include "mfsbm/dual.hpp"
#include "mfsbm/error.hpp"
#include "mfsbm/moment_mc.hpp"
#include "mfsbm/particle.hpp"
#include "mfsbm/picard.hpp"

namespace mfsbm {
namespace {

/// Stream-tag namespace for the per-probe moment-formula runs, disjoint from
/// the Picard grid-fill namespace (1 << 32) so no two callers that share a
/// seed ever share a counter stream.
constexpr std::uint64_t kProbeTagBase = std::uint64_t{2} << 32;

constexpr const char* kNotComputedPrefix = "not computed";

struct Probe {
  double t;
  double x;
  int order;
};

std::vector<Probe> expand_probes(const ProbeConfig& probes) {
  std::vector<Probe> out;
  out.reserve(probes.times.size() * probes.xs.size() * probes.orders.size());
  for (double t : probes.times) {
    for (double x : probes.xs) {
      for (int n : probes.orders) out.push_back({t, x, n});
    }
  }
  return out;
}

ImportanceMode importance_from_string(const std::string& s) {
  if (s == "on") return ImportanceMode::On;
  if (s == "off") return ImportanceMode::Off;
  return ImportanceMode::Auto;  // "auto"; other values rejected by config parsing
}

bool participates(const RouteResult& r) {
  return r.ok && r.note.rfind(kNotComputedPrefix, 0) != 0;
}

RouteResult failed_row(const std::string& route, double delta, const Probe& p,
                       const std::string& why) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {route, delta, p.t, p.x, p.order, nan, nan, false, why};
}

std::string ladder_note(const std::vector<double>& deltas) {
  std::ostringstream os;
  os << "extrapolated over deltas {";
  for (std::size_t i = 0; i < deltas.size(); ++i) os << (i ? ", " : "") << deltas[i];
  os << "} with bias powers {1/2, 1, ...}";
  return os.str();
}

/// Bias powers cancelled by an m-level ladder: sqrt(delta), delta, delta^{3/2}, ...
std::vector<double> default_bias_powers(std::size_t levels) {
  std::vector<double> p(levels);
  for (std::size_t i = 0; i < levels; ++i) p[i] = 0.5 * static_cast<double>(i + 1);
  return p;
}

void formula_route(const RunConfig& cfg, const std::vector<Probe>& probes,
                   std::vector<RouteResult>& rows, std::vector<std::string>& failures) {
  SigmaHatSqField field;
  if (cfg.sigma.is_constant()) {
    const double gamma = cfg.sigma.constant_gamma();
    field = [gamma](double, double) { return gamma; };
  } else {
    try {
      PicardOptions popt;
      popt.orders = std::max(1, cfg.sigma.moment_order());
      popt.horizon = cfg.picard.horizon;
      popt.time_nodes = cfg.picard.time_nodes;
      popt.space_nodes = cfg.picard.space_nodes;
      popt.space_halfwidth = cfg.picard.space_halfwidth;
      popt.samples = cfg.picard.samples;
      popt.seed = cfg.seed;
      popt.importance = importance_from_string(cfg.moment.importance);
      popt.max_iterations = cfg.picard.max_iterations;
      popt.tol = cfg.picard.tol;
      popt.order_cap = cfg.moment.order_cap;
      const MomentField solved = picard_solve(cfg.sigma, cfg.init, popt);
      field = sigma_field_from_moments(cfg.sigma, solved);
    } catch (const std::exception& e) {
      failures.push_back(std::string("formula: ") + e.what());
      for (const Probe& p : probes) rows.push_back(failed_row("formula", cfg.moment.delta, p, e.what()));
      return;
    }
  }
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const Probe& p = probes[i];
    try {
      McOptions mc;
      mc.samples = cfg.moment.samples;
      mc.seed = cfg.seed;
      mc.stream_tag = kProbeTagBase + i;
      mc.importance = importance_from_string(cfg.moment.importance);
      mc.order_cap = cfg.moment.order_cap;
      mc.block_size = cfg.moment.block_size;
      const McEstimate est =
          moment_formula_mc(p.order, p.t, p.x, cfg.init, field, mc, cfg.moment.delta);
      rows.push_back({"formula", cfg.moment.delta, p.t, p.x, p.order, est.value, est.std_error,
                      true, ""});
    } catch (const std::exception& e) {
      failures.push_back(std::string("formula: ") + e.what());
      rows.push_back(failed_row("formula", cfg.moment.delta, p, e.what()));
    }
  }
}

void classical_route(const RunConfig& cfg, const std::vector<Probe>& probes,
                     std::vector<RouteResult>& rows, std::vector<std::string>& failures) {
  const double gamma = cfg.sigma.constant_gamma();  // constancy enforced by config validation
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const Probe& p : probes) {
    if (p.order > 2) {
      rows.push_back({"classical", cfg.moment.delta, p.t, p.x, p.order, nan, nan, true,
                      std::string(kNotComputedPrefix) +
                          ": the closed form covers orders 1 and 2 only"});
      continue;
    }
    try {
      double value = 0.0;
      if (p.order == 1) {
        value = cfg.init.heat_convolve(p.t + cfg.moment.delta, p.x);
      } else {
        value = classical_second_moment(p.t, p.x, cfg.init, gamma, cfg.moment.delta);
      }
      rows.push_back({"classical", cfg.moment.delta, p.t, p.x, p.order, value, 0.0, true, ""});
    } catch (const std::exception& e) {
      failures.push_back(std::string("classical: ") + e.what());
      rows.push_back(failed_row("classical", cfg.moment.delta, p, e.what()));
    }
  }
}

void particle_route(const RunConfig& cfg, const std::vector<Probe>& probes,
                    std::vector<RouteResult>& rows, std::vector<std::string>& failures) {
  // Report smoothing widths: the native width always; the ladder widths and
  // the extrapolated width-0 combination when extrapolation is requested
  // (constant coefficient, so the recorded trajectories are exact for every
  // width and can be re-read at each one).
  std::vector<double> report_deltas{cfg.particle.delta};
  std::vector<double> ladder;
  std::vector<double> weights;
  if (cfg.validate.extrapolate) {
    ladder = cfg.dual.deltas;
    weights = richardson_weights(ladder, default_bias_powers(ladder.size() - 1));
    for (double d : ladder) {
      if (std::find(report_deltas.begin(), report_deltas.end(), d) == report_deltas.end()) {
        report_deltas.push_back(d);
      }
    }
  }

  EnsembleResult ens;
  std::vector<double> snap_times = cfg.probes.times;
  std::sort(snap_times.begin(), snap_times.end());
  snap_times.erase(std::unique(snap_times.begin(), snap_times.end()), snap_times.end());
  try {
    ParticleConfig pc;
    pc.scaling_n = cfg.particle.scaling_n;
    pc.delta = cfg.particle.delta;
    pc.dt = cfg.particle.dt;
    pc.horizon = cfg.particle.horizon;
    pc.replicas = cfg.particle.replicas;
    pc.seed = cfg.seed;
    pc.stream_tag = 0;
    pc.space_halfwidth = cfg.particle.space_halfwidth;
    pc.law_nodes = cfg.particle.law_nodes;
    pc.smoothing_nodes = cfg.particle.smoothing_nodes;
    pc.population_cap = cfg.particle.population_cap;
    pc.record_lifetimes = cfg.particle.record_lifetimes;
    pc.probe_times = snap_times;
    ens = run_ensemble(pc, cfg.sigma, cfg.init);
  } catch (const std::exception& e) {
    failures.push_back(std::string("particle: ") + e.what());
    for (const Probe& p : probes) {
      for (double d : report_deltas) rows.push_back(failed_row("particle", d, p, e.what()));
      if (cfg.validate.extrapolate) rows.push_back(failed_row("particle", 0.0, p, e.what()));
    }
    return;
  }

  for (const Probe& p : probes) {
    const auto it = std::lower_bound(snap_times.begin(), snap_times.end(), p.t);
    const std::size_t probe_idx = static_cast<std::size_t>(it - snap_times.begin());
    try {
      for (double d : report_deltas) {
        const MomentEstimate est = empirical_moment(ens, probe_idx, p.x, p.order, d);
        rows.push_back(
            {"particle", d, p.t, p.x, p.order, est.value, est.std_error, true, ""});
      }
      if (cfg.validate.extrapolate) {
        // Per-replica weighted combination, so the standard error carries the
        // cross-width correlations of the shared trajectories.
        std::vector<double> combo;
        for (std::size_t j = 0; j < ladder.size(); ++j) {
          const std::vector<double> vals = ens.smoothed_values(probe_idx, p.x, ladder[j]);
          if (combo.empty()) combo.assign(vals.size(), 0.0);
          for (std::size_t r = 0; r < vals.size(); ++r) {
            double power = 1.0;
            for (int k = 0; k < p.order; ++k) power *= vals[r];
            combo[r] += weights[j] * power;
          }
        }
        double sum = 0.0;
        double sumsq = 0.0;
        for (double v : combo) {
          sum += v;
          sumsq += v * v;
        }
        const double m = static_cast<double>(combo.size());
        const double mean = sum / m;
        const double var = std::max(0.0, (sumsq - m * mean * mean) / (m - 1.0));
        rows.push_back({"particle", 0.0, p.t, p.x, p.order, mean, std::sqrt(var / m), true,
                        ladder_note(ladder)});
      }
    } catch (const std::exception& e) {
      failures.push_back(std::string("particle: ") + e.what());
      rows.push_back(failed_row("particle", cfg.particle.delta, p, e.what()));
    }
  }
}

void dual_route(const RunConfig& cfg, const std::vector<Probe>& probes,
                std::vector<RouteResult>& rows, std::vector<std::string>& failures) {
  const double gamma = cfg.sigma.constant_gamma();  // constancy enforced by config validation
  const std::vector<double>& deltas = cfg.dual.deltas;
  std::vector<double> weights;
  if (deltas.size() > 1) weights = richardson_weights(deltas, default_bias_powers(deltas.size() - 1));
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const Probe& p = probes[i];
    try {
      DualOptions opt;
      opt.seed = cfg.seed;
      opt.stream_tag = i;
      opt.paths = cfg.dual.paths;
      opt.block_size = cfg.dual.block_size;
      const DualEstimate est =
          dual_moment_estimate(p.order, p.t, p.x, deltas, weights, gamma, cfg.init, opt);
      for (std::size_t j = 0; j < deltas.size(); ++j) {
        rows.push_back({"dual", deltas[j], p.t, p.x, p.order, est.delta_values[j],
                        est.delta_std_errors[j], true, ""});
      }
      if (cfg.validate.extrapolate && deltas.size() > 1) {
        rows.push_back({"dual", 0.0, p.t, p.x, p.order, est.value, est.std_error, true,
                        ladder_note(deltas)});
      }
    } catch (const std::exception& e) {
      failures.push_back(std::string("dual: ") + e.what());
      for (double d : deltas) rows.push_back(failed_row("dual", d, p, e.what()));
      if (cfg.validate.extrapolate && deltas.size() > 1) {
        rows.push_back(failed_row("dual", 0.0, p, e.what()));
      }
    }
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::vector<double> richardson_weights(const std::vector<double>& deltas,
                                       const std::vector<double>& powers) {
  const std::size_t m = deltas.size();
  if (m == 0) throw DomainError("richardson_weights: at least one delta is required");
  if (powers.size() + 1 != m) {
    throw DomainError("richardson_weights: need exactly deltas.size() - 1 bias powers");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!(deltas[i] > 0.0)) throw DomainError("richardson_weights: deltas must be positive");
    for (std::size_t j = i + 1; j < m; ++j) {
      if (deltas[i] == deltas[j]) throw DomainError("richardson_weights: deltas must be distinct");
    }
  }
  Eigen::MatrixXd a(m, m);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) a(0, static_cast<Eigen::Index>(j)) = 1.0;
  b(0) = 1.0;
  for (std::size_t k = 0; k < powers.size(); ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      a(static_cast<Eigen::Index>(k + 1), static_cast<Eigen::Index>(j)) =
          std::pow(deltas[j], powers[k]);
    }
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) {
    throw NumericError("richardson_weights: singular constraint system (repeated powers?)", 0.0,
                       0.0);
  }
  const Eigen::VectorXd w = lu.solve(b);
  return std::vector<double>(w.data(), w.data() + m);
}

ValidationReport run_validate(const RunConfig& cfg) {
  require_valid(cfg);
  ValidationReport report;
  report.config_echo = cfg.to_json();
  report.fingerprint = cfg.fingerprint();
  report.threshold = cfg.validate.threshold;
#ifdef _OPENMP
  report.workers = omp_get_max_threads();
#else
  report.workers = 1;
#endif

  const std::vector<Probe> probes = expand_probes(cfg.probes);

  std::vector<std::string> seen;
  for (const std::string& route : cfg.validate.routes) {
    if (std::find(seen.begin(), seen.end(), route) != seen.end()) continue;
    seen.push_back(route);
    if (route == "formula") {
      formula_route(cfg, probes, report.results, report.route_failures);
    } else if (route == "classical") {
      classical_route(cfg, probes, report.results, report.route_failures);
    } else if (route == "particle") {
      particle_route(cfg, probes, report.results, report.route_failures);
    } else if (route == "dual") {
      dual_route(cfg, probes, report.results, report.route_failures);
    }
  }

  // Pair every two participating rows that report the same observable: same
  // probe, same order, same smoothing width.  Values smoothed at different
  // widths measure different quantities and are never compared directly.
  std::map<std::tuple<double, double, double, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < report.results.size(); ++i) {
    const RouteResult& r = report.results[i];
    if (!participates(r)) continue;
    groups[{r.delta, r.t, r.x, r.order}].push_back(i);
  }
  for (const auto& [key, members] : groups) {
    (void)key;
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        const RouteResult& ra = report.results[members[a]];
        const RouteResult& rb = report.results[members[b]];
        PairComparison cmp;
        cmp.delta = ra.delta;
        cmp.t = ra.t;
        cmp.x = ra.x;
        cmp.order = ra.order;
        cmp.route_a = ra.route;
        cmp.route_b = rb.route;
        cmp.value_a = ra.value;
        cmp.se_a = ra.std_error;
        cmp.value_b = rb.value;
        cmp.se_b = rb.std_error;
        const double diff = std::abs(ra.value - rb.value);
        const double combined = std::sqrt(ra.std_error * ra.std_error +
                                          rb.std_error * rb.std_error);
        const double scale = std::max({1.0, std::abs(ra.value), std::abs(rb.value)});
        // Deterministic pairs (both errors zero) fall back to a relative
        // epsilon; stochastic pairs use the combined-error threshold with the
        // same epsilon as an absolute floor.
        const double tolerance = report.threshold * combined + 1e-12 * scale;
        if (combined > 0.0) {
          cmp.z = diff / combined;
        } else {
          cmp.z = diff <= 1e-12 * scale ? 0.0 : std::numeric_limits<double>::infinity();
        }
        cmp.pass = std::isfinite(diff) && diff <= tolerance;
        report.comparisons.push_back(cmp);
      }
    }
  }

  bool ok = report.route_failures.empty();
  for (const RouteResult& r : report.results) {
    if (!r.ok) ok = false;
    if (participates(r) && (!std::isfinite(r.value) || !std::isfinite(r.std_error))) ok = false;
  }
  for (const PairComparison& c : report.comparisons) {
    if (!c.pass) ok = false;
  }
  report.all_pass = ok;
  return report;
}

void write_results_csv(const ValidationReport& report, std::ostream& out) {
  out << "route,delta,t,x,order,value,std_error,ok,note\n";
  for (const RouteResult& r : report.results) {
    out << r.route << ',' << format_double(r.delta) << ',' << format_double(r.t) << ','
        << format_double(r.x) << ',' << r.order << ',' << format_double(r.value) << ','
        << format_double(r.std_error) << ',' << (r.ok ? "true" : "false") << ','
        << csv_quote(r.note) << '\n';
  }
}

void write_comparisons_csv(const ValidationReport& report, std::ostream& out) {
  out << "delta,t,x,order,route_a,route_b,value_a,se_a,value_b,se_b,z,pass\n";
  for (const PairComparison& c : report.comparisons) {
    out << format_double(c.delta) << ',' << format_double(c.t) << ',' << format_double(c.x) << ','
        << c.order << ',' << c.route_a << ',' << c.route_b << ',' << format_double(c.value_a)
        << ',' << format_double(c.se_a) << ',' << format_double(c.value_b) << ','
        << format_double(c.se_b) << ',' << format_double(c.z) << ','
        << (c.pass ? "true" : "false") << '\n';
  }
}

nlohmann::json report_to_json(const ValidationReport& report) {
  nlohmann::json j;
  j["config"] = report.config_echo;
  j["fingerprint"] = report.fingerprint;
  j["threshold"] = report.threshold;
  j["workers"] = report.workers;
  j["all_pass"] = report.all_pass;
  j["route_failures"] = report.route_failures;
  j["results"] = nlohmann::json::array();
  for (const RouteResult& r : report.results) {
    j["results"].push_back({{"route", r.route},
                            {"delta", r.delta},
                            {"t", r.t},
                            {"x", r.x},
                            {"order", r.order},
                            {"value", r.value},
                            {"std_error", r.std_error},
                            {"ok", r.ok},
                            {"note", r.note}});
  }
  j["comparisons"] = nlohmann::json::array();
  for (const PairComparison& c : report.comparisons) {
    j["comparisons"].push_back({{"delta", c.delta},
                                {"t", c.t},
                                {"x", c.x},
                                {"order", c.order},
                                {"route_a", c.route_a},
                                {"route_b", c.route_b},
                                {"value_a", c.value_a},
                                {"se_a", c.se_a},
                                {"value_b", c.value_b},
                                {"se_b", c.se_b},
                                {"z", c.z},
                                {"pass", c.pass}});
  }
  return j;
}

void write_report_files(const ValidationReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  {
    std::ofstream out(base / "results.csv");
    if (!out) throw ConfigError("cannot write " + (base / "results.csv").string());
    write_results_csv(report, out);
  }
  {
    std::ofstream out(base / "comparisons.csv");
    if (!out) throw ConfigError("cannot write " + (base / "comparisons.csv").string());
    write_comparisons_csv(report, out);
  }
  {
    std::ofstream out(base / "report.json");
    if (!out) throw ConfigError("cannot write " + (base / "report.json").string());
    out << report_to_json(report).dump(2) << '\n';
  }
}

}  // namespace mfsbm
