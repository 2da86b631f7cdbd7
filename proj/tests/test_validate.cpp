#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mfsbm/config.hpp"
#include "mfsbm/error.hpp"
#include "mfsbm/validate.hpp"

using namespace mfsbm;

namespace {

RunConfig three_route_config() {
  RunConfig cfg;
  cfg.experiment = "cross-route";
  cfg.seed = 77;
  cfg.probes.times = {0.5};
  cfg.probes.xs = {0.0, 0.6};
  cfg.probes.orders = {1, 2, 3};
  cfg.moment.samples = 20000;
  cfg.moment.delta = 0.02;
  cfg.dual.deltas = {0.02};
  cfg.dual.paths = 40000;
  cfg.validate.routes = {"formula", "classical", "dual"};
  return cfg;
}

int count_rows(const ValidationReport& report, const std::string& route, double delta) {
  int c = 0;
  for (const RouteResult& r : report.results) {
    if (r.route == route && r.delta == delta) ++c;
  }
  return c;
}

std::string results_csv_string(const ValidationReport& report) {
  std::ostringstream os;
  write_results_csv(report, os);
  return os.str();
}

}  // namespace

TEST_CASE("ladder weights cancel the requested bias powers") {
  // Hand-solvable two-level ladder: deltas {4, 1} with a sqrt bias give
  // weights {-1, 2}.
  const std::vector<double> w2 = richardson_weights({4.0, 1.0}, {0.5});
  REQUIRE(w2.size() == 2);
  CHECK(w2[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(w2[1] == doctest::Approx(2.0).epsilon(1e-12));

  const std::vector<double> deltas{0.04, 0.02, 0.01};
  const std::vector<double> powers{0.5, 1.0};
  const std::vector<double> w = richardson_weights(deltas, powers);
  REQUIRE(w.size() == 3);
  double sum = 0.0, half = 0.0, lin = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    sum += w[i];
    half += w[i] * std::sqrt(deltas[i]);
    lin += w[i] * deltas[i];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(half) < 1e-10);
  CHECK(std::abs(lin) < 1e-10);

  const std::vector<double> one = richardson_weights({0.02}, {});
  REQUIRE(one.size() == 1);
  CHECK(one[0] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(richardson_weights({}, {}), DomainError);
  CHECK_THROWS_AS(richardson_weights({0.04, 0.02}, {}), DomainError);
  CHECK_THROWS_AS(richardson_weights({0.02, 0.02}, {0.5}), DomainError);
  CHECK_THROWS_AS(richardson_weights({0.04, -0.02}, {0.5}), DomainError);
  CHECK_THROWS_AS(richardson_weights({0.04, 0.02, 0.01}, {0.5, 0.5}), NumericError);
}

TEST_CASE("three independent routes agree on a constant-coefficient run") {
  const RunConfig cfg = three_route_config();
  const ValidationReport report = run_validate(cfg);

  CHECK(report.threshold == 3.0);
  CHECK(report.workers >= 1);
  CHECK(report.fingerprint == cfg.fingerprint());
  CHECK(report.route_failures.empty());

  // Every probe appears exactly once per (route, smoothing width).
  REQUIRE(report.results.size() == 18);
  CHECK(count_rows(report, "formula", 0.02) == 6);
  CHECK(count_rows(report, "classical", 0.02) == 6);
  CHECK(count_rows(report, "dual", 0.02) == 6);

  // The closed form covers orders 1-2; order-3 rows are marked, kept in the
  // report, and excluded from comparisons.
  int marked = 0;
  for (const RouteResult& r : report.results) {
    if (r.note.rfind("not computed", 0) == 0) {
      ++marked;
      CHECK(r.route == "classical");
      CHECK(r.order == 3);
      CHECK(r.ok);
      CHECK(std::isnan(r.value));
    } else {
      CHECK(r.ok);
      CHECK(std::isfinite(r.value));
    }
  }
  CHECK(marked == 2);

  // 3 routes at orders 1-2 (3 pairs x 4 probes) + 2 routes at order 3.
  REQUIRE(report.comparisons.size() == 14);
  for (const PairComparison& c : report.comparisons) {
    CHECK(c.pass);
    CHECK(c.delta == 0.02);
    if (c.order == 3) {
      CHECK(c.route_a != "classical");
      CHECK(c.route_b != "classical");
    }
  }
  CHECK(report.all_pass);
}

TEST_CASE("reports are byte-identical across reruns") {
  const RunConfig cfg = three_route_config();
  const ValidationReport a = run_validate(cfg);
  const ValidationReport b = run_validate(cfg);
  CHECK(results_csv_string(a) == results_csv_string(b));
  std::ostringstream ca, cb;
  write_comparisons_csv(a, ca);
  write_comparisons_csv(b, cb);
  CHECK(ca.str() == cb.str());
  CHECK(report_to_json(a).dump() == report_to_json(b).dump());
}

TEST_CASE("smoothing-free extrapolation rows are labeled and consistent") {
  RunConfig cfg;
  cfg.seed = 31;
  cfg.probes.times = {0.5};
  cfg.probes.xs = {0.0};
  cfg.probes.orders = {2};
  cfg.dual.deltas = {0.04, 0.02, 0.01};
  cfg.dual.paths = 5000;
  cfg.validate.routes = {"dual"};
  cfg.validate.extrapolate = true;
  const ValidationReport report = run_validate(cfg);

  REQUIRE(report.results.size() == 4);
  const std::vector<double> weights =
      richardson_weights(cfg.dual.deltas, {0.5, 1.0});
  double combo = 0.0;
  const RouteResult* extrap = nullptr;
  for (const RouteResult& r : report.results) {
    CHECK(r.route == "dual");
    if (r.delta == 0.0) {
      extrap = &r;
    } else {
      const auto it =
          std::find(cfg.dual.deltas.begin(), cfg.dual.deltas.end(), r.delta);
      REQUIRE(it != cfg.dual.deltas.end());
      combo += weights[static_cast<std::size_t>(it - cfg.dual.deltas.begin())] * r.value;
    }
  }
  REQUIRE(extrap != nullptr);
  CHECK(extrap->note.rfind("extrapolated over deltas", 0) == 0);
  CHECK(extrap->value == doctest::Approx(combo).epsilon(1e-10));
  // Different smoothing widths are different observables: nothing to compare.
  CHECK(report.comparisons.empty());
  CHECK(report.all_pass);
}

TEST_CASE("a failing route is reported without aborting the run") {
  RunConfig cfg;
  cfg.seed = 5;
  cfg.init = InitialDensity::bump(0.0, 1.0, 1.0);
  cfg.probes.times = {0.05};
  cfg.probes.xs = {0.0};
  cfg.probes.orders = {4};  // bump pairing capacity is 3 surviving variables
  cfg.dual.deltas = {0.02};
  cfg.dual.paths = 50;
  cfg.validate.routes = {"dual"};
  const ValidationReport report = run_validate(cfg);
  REQUIRE(report.results.size() == 1);
  CHECK_FALSE(report.results[0].ok);
  CHECK(std::isnan(report.results[0].value));
  REQUIRE(report.route_failures.size() == 1);
  CHECK(report.route_failures[0].rfind("dual:", 0) == 0);
  CHECK_FALSE(report.all_pass);
  // The report still serializes cleanly.
  CHECK(results_csv_string(report).find("false") != std::string::npos);
}

TEST_CASE("invalid configurations are rejected before any route runs") {
  RunConfig empty;
  empty.seed = 1;
  CHECK_THROWS_AS(run_validate(empty), ConfigError);

  RunConfig nonconst = three_route_config();
  nonconst.sigma = SigmaSpec::moment_poly({1.0, 0.2}, 0.5, 2.0);
  CHECK_THROWS_AS(run_validate(nonconst), ConfigError);
}

TEST_CASE("an empty report emits header-only tables") {
  const ValidationReport report;
  CHECK(results_csv_string(report) == "route,delta,t,x,order,value,std_error,ok,note\n");
  std::ostringstream os;
  write_comparisons_csv(report, os);
  CHECK(os.str() == "delta,t,x,order,route_a,route_b,value_a,se_a,value_b,se_b,z,pass\n");
}

TEST_CASE("report files are written together and survive a round trip") {
  RunConfig cfg;
  cfg.seed = 31;
  cfg.probes.times = {0.5};
  cfg.probes.xs = {0.0};
  cfg.probes.orders = {1};
  cfg.dual.deltas = {0.02};
  cfg.dual.paths = 100;
  cfg.validate.routes = {"classical", "dual"};
  const ValidationReport report = run_validate(cfg);
  CHECK(report.all_pass);

  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "mfsbm_validate_report_test";
  std::filesystem::remove_all(dir);
  write_report_files(report, dir.string());
  for (const char* name : {"results.csv", "comparisons.csv", "report.json"}) {
    CHECK(std::filesystem::exists(dir / name));
  }
  std::ifstream in(dir / "results.csv");
  std::stringstream buffer;
  buffer << in.rdbuf();
  CHECK(buffer.str() == results_csv_string(report));

  std::ifstream jin(dir / "report.json");
  nlohmann::json j;
  jin >> j;
  CHECK(j.at("all_pass").get<bool>() == report.all_pass);
  CHECK(j.at("results").size() == report.results.size());

  // A path blocked by a regular file is an IO error, not silent data loss.
  std::ofstream blocker(dir / "blocker");
  blocker << "x";
  blocker.close();
  CHECK_THROWS(write_report_files(report, (dir / "blocker" / "sub").string()));
  std::filesystem::remove_all(dir);
}
