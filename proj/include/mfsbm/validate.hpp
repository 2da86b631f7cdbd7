#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfsbm/config.hpp"

namespace mfsbm {

/// Cross-route validation: the same moments computed by independent numerical
/// routes (combinatorial formula, deterministic quadrature, branching
/// particles, coalescing dual), aligned at matched smoothing and compared at a
/// combined-standard-error threshold.

struct RouteResult {
  std::string route;  ///< "formula" | "classical" | "particle" | "dual" (+ "_extrap")
  double delta;       ///< smoothing at which the value is reported (0 = none)
  double t;
  double x;
  int order;
  double value;
  double std_error;  ///< 0 for deterministic routes
  bool ok;           ///< false when the route failed at this probe
  std::string note;
};

struct PairComparison {
  double delta;
  double t;
  double x;
  int order;
  std::string route_a;
  std::string route_b;
  double value_a;
  double se_a;
  double value_b;
  double se_b;
  double z;  ///< |a - b| / sqrt(se_a^2 + se_b^2)
  bool pass;
};

struct ValidationReport {
  nlohmann::json config_echo;
  std::uint64_t fingerprint = 0;
  double threshold = 3.0;
  int workers = 1;
  std::vector<RouteResult> results;
  std::vector<PairComparison> comparisons;
  bool all_pass = false;
  std::vector<std::string> route_failures;  ///< routes that threw, with messages
};

/// Weights w with sum(w) = 1 and sum(w * delta^p) = 0 for each p in `powers`;
/// requires powers.size() + 1 == deltas.size() and distinct deltas.  Used to
/// cancel the leading smoothing-bias terms (powers {0.5, 1} by default
/// elsewhere, matching the sqrt(delta) leading bias of kernel smoothing).
std::vector<double> richardson_weights(const std::vector<double>& deltas,
                                       const std::vector<double>& powers);

/// Run every configured route at every probe and compare.  Routes that throw
/// are recorded as failed (their probes keep ok = false) without aborting the
/// others.  A report containing any non-finite value never passes.
ValidationReport run_validate(const RunConfig& cfg);

void write_results_csv(const ValidationReport& report, std::ostream& out);
void write_comparisons_csv(const ValidationReport& report, std::ostream& out);
nlohmann::json report_to_json(const ValidationReport& report);

/// Writes results.csv, comparisons.csv, and report.json under `dir`.
void write_report_files(const ValidationReport& report, const std::string& dir);

}  // namespace mfsbm
