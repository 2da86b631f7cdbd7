#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfsbm/initial_density.hpp"
#include "mfsbm/sigma.hpp"

namespace mfsbm {

/// JSON-backed run configuration.  One file drives every subcommand; CLI flags
/// only override individual fields.  Parsing is strict: unknown keys are
/// rejected, and the seed is mandatory (no implicit entropy ever).

struct MomentRunConfig {
  int orders = 2;                    ///< moments computed per probe (1..orders)
  std::int64_t samples = 100000;     ///< Monte Carlo samples per node
  std::string importance = "auto";   ///< "on" | "off" | "auto"
  double delta = 0.0;                ///< observable smoothing (0 = density moments)
  int order_cap = 6;                 ///< refuse orders above this
  int block_size = 4096;
};

struct PicardRunConfig {
  int time_nodes = 33;
  int space_nodes = 65;
  double space_halfwidth = 0.0;  ///< 0 = auto from the initial data and horizon
  double horizon = 1.0;
  std::int64_t samples = 4000;  ///< per grid node per iteration
  int max_iterations = 40;
  double tol = 1e-5;
};

struct ParticleRunConfig {
  int scaling_n = 100;
  double delta = 0.02;
  double dt = 1e-3;
  double horizon = 1.0;
  int replicas = 1000;
  double space_halfwidth = 0.0;
  int law_nodes = 41;
  int smoothing_nodes = 9;
  std::int64_t population_cap = 1'000'000;
  bool record_lifetimes = false;
};

struct DualRunConfig {
  std::vector<double> deltas{0.04, 0.02, 0.01};
  std::int64_t paths = 100000;
  int block_size = 4096;
};

struct ProbeConfig {
  std::vector<double> times;
  std::vector<double> xs;
  std::vector<int> orders;
};

struct ValidateConfig {
  std::vector<std::string> routes{"formula", "classical", "particle", "dual"};
  double threshold = 3.0;  ///< combined-standard-error multiple for agreement
  bool extrapolate = false;  ///< add smoothing-free rows via the delta ladder
};

struct RunConfig {
  std::string experiment = "run";
  std::uint64_t seed = 0;
  std::string output_dir = ".";
  InitialDensity init = InitialDensity::gaussian_mixture({{1.0, 0.0, 1.0}});
  SigmaSpec sigma = SigmaSpec::constant(1.0);
  ProbeConfig probes;
  MomentRunConfig moment;
  PicardRunConfig picard;
  ParticleRunConfig particle;
  DualRunConfig dual;
  ValidateConfig validate;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);

  /// FNV-1a over the canonical serialization; embedded in every report.
  std::uint64_t fingerprint() const;

  bool operator==(const RunConfig& other) const {
    return to_json() == other.to_json();
  }
};

/// Cross-field validation; returns human-readable violations (empty = valid).
std::vector<std::string> validate_config(const RunConfig& cfg);

/// Runs validate_config and throws ConfigError listing every violation.
void require_valid(const RunConfig& cfg);

/// JSON (de)serialization for the initial data (the density type itself stays
/// JSON-free).
nlohmann::json initial_density_to_json(const InitialDensity& init);
InitialDensity initial_density_from_json(const nlohmann::json& j);

}  // namespace mfsbm
