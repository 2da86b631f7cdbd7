// Command-line harness: enumeration, counting, moment evaluation, the
// fixed-point solver, particle simulation, dual estimation, and the
// cross-route validation command.  A JSON config file carries every knob;
// flags only override individual fields.  The MFSBM_WORKERS environment
// variable sets the worker-thread count (default: all cores).

#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "mfsbm/config.hpp"
#include "mfsbm/dual.hpp"
#include "mfsbm/error.hpp"
#include "mfsbm/index_set.hpp"
#include "mfsbm/moment_mc.hpp"
#include "mfsbm/particle.hpp"
#include "mfsbm/picard.hpp"
#include "mfsbm/sigma.hpp"
#include "mfsbm/validate.hpp"

namespace {

using nlohmann::json;

void apply_worker_env() {
#ifdef _OPENMP
  if (const char* env = std::getenv("MFSBM_WORKERS")) {
    try {
      const int workers = std::stoi(env);
      if (workers >= 1) omp_set_num_threads(workers);
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring non-numeric MFSBM_WORKERS=\"" << env << "\"\n";
    }
  }
#endif
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Output stream bound to a file, or to stdout for "-".
class OutStream {
public:
  explicit OutStream(const std::string& path) {
    if (path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw mfsbm::ConfigError("cannot write " + path);
    }
  }
  std::ostream& get() { return file_ ? *file_ : std::cout; }

private:
  std::unique_ptr<std::ofstream> file_;
};

json parse_spec_argument(const std::string& arg) {
  if (!arg.empty() && (arg.front() == '{' || arg.front() == '[')) {
    return json::parse(arg);
  }
  std::ifstream in(arg);
  if (!in) throw mfsbm::ConfigError("cannot read spec file " + arg);
  return json::parse(in);
}

struct CommonState {
  std::string config_path;
  std::string init_spec;
  std::string sigma_spec;

  mfsbm::RunConfig load() const {
    mfsbm::RunConfig cfg;
    if (!config_path.empty()) cfg = mfsbm::RunConfig::from_file(config_path);
    if (!init_spec.empty()) cfg.init = mfsbm::initial_density_from_json(parse_spec_argument(init_spec));
    if (!sigma_spec.empty()) cfg.sigma = mfsbm::SigmaSpec::from_json(parse_spec_argument(sigma_spec));
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonState& state) {
  cmd->add_option("--config", state.config_path, "JSON run-config file");
  cmd->add_option("--init", state.init_spec, "initial-density spec (JSON file or inline JSON)");
  cmd->add_option("--sigma", state.sigma_spec, "coefficient spec (JSON file or inline JSON)");
}

/// Field of squared-coefficient values the moment formula integrates against:
/// constant coefficients give the constant field; moment-dependent ones are
/// closed by first solving the fixed point on a grid.
mfsbm::SigmaHatSqField make_closed_field(const mfsbm::RunConfig& cfg, std::ostream& log) {
  if (cfg.sigma.is_constant()) {
    const double gamma = cfg.sigma.constant_gamma();
    return [gamma](double, double) { return gamma; };
  }
  mfsbm::PicardOptions popt;
  popt.orders = std::max(1, cfg.sigma.moment_order());
  popt.horizon = cfg.picard.horizon;
  popt.time_nodes = cfg.picard.time_nodes;
  popt.space_nodes = cfg.picard.space_nodes;
  popt.space_halfwidth = cfg.picard.space_halfwidth;
  popt.samples = cfg.picard.samples;
  popt.seed = cfg.seed;
  popt.max_iterations = cfg.picard.max_iterations;
  popt.tol = cfg.picard.tol;
  popt.order_cap = cfg.moment.order_cap;
  mfsbm::PicardDiagnostics diag;
  const mfsbm::MomentField solved = mfsbm::picard_solve(cfg.sigma, cfg.init, popt, &diag);
  log << "# coefficient closure: " << diag.iterations << " fixed-point iterations, "
      << (diag.converged ? "converged" : "budget reached") << "\n";
  return mfsbm::sigma_field_from_moments(cfg.sigma, solved);
}

int cmd_enumerate(int n, int nprime, const std::string& out_path) {
  OutStream out(out_path);
  mfsbm::for_each_triple(n, nprime, [&](const mfsbm::IndexTriple& triple) {
    json line;
    line["alpha"] = triple.alpha;
    line["beta"] = triple.beta;
    line["tau"] = triple.tau;
    out.get() << line.dump() << "\n";
  });
  return 0;
}

int cmd_count(int n, int nprime, bool have_nprime, const std::string& out_path) {
  OutStream out(out_path);
  out.get() << "n,nprime,closed_form,enumerated\n";
  const int lo = have_nprime ? nprime : 0;
  const int hi = have_nprime ? nprime : n - 1;
  for (int d = lo; d <= hi; ++d) {
    long enumerated = 0;
    mfsbm::for_each_triple(n, d, [&](const mfsbm::IndexTriple&) { ++enumerated; });
    out.get() << n << ',' << d << ',' << mfsbm::u128_to_string(mfsbm::count_triples(n, d)) << ','
              << enumerated << "\n";
  }
  return 0;
}

int cmd_moments(const mfsbm::RunConfig& cfg, int order, double t, double x,
                const std::string& out_path) {
  const mfsbm::SigmaHatSqField field = make_closed_field(cfg, std::cerr);
  OutStream out(out_path);
  out.get() << "node_t,node_x,n,estimate,std_error\n";
  for (int n = 1; n <= order; ++n) {
    mfsbm::McOptions mc;
    mc.samples = cfg.moment.samples;
    mc.seed = cfg.seed;
    mc.stream_tag = static_cast<std::uint64_t>(n);
    mc.importance = cfg.moment.importance == "on"    ? mfsbm::ImportanceMode::On
                    : cfg.moment.importance == "off" ? mfsbm::ImportanceMode::Off
                                                     : mfsbm::ImportanceMode::Auto;
    mc.order_cap = cfg.moment.order_cap;
    mc.block_size = cfg.moment.block_size;
    const mfsbm::McEstimate est =
        mfsbm::moment_formula_mc(n, t, x, cfg.init, field, mc, cfg.moment.delta);
    out.get() << fmt(t) << ',' << fmt(x) << ',' << n << ',' << fmt(est.value) << ','
              << fmt(est.std_error) << "\n";
  }
  return 0;
}

int cmd_picard(const mfsbm::RunConfig& cfg, const std::string& out_path) {
  mfsbm::PicardOptions popt;
  popt.orders = cfg.moment.orders;
  popt.horizon = cfg.picard.horizon;
  popt.time_nodes = cfg.picard.time_nodes;
  popt.space_nodes = cfg.picard.space_nodes;
  popt.space_halfwidth = cfg.picard.space_halfwidth;
  popt.samples = cfg.picard.samples;
  popt.seed = cfg.seed;
  popt.importance = cfg.moment.importance == "on"    ? mfsbm::ImportanceMode::On
                    : cfg.moment.importance == "off" ? mfsbm::ImportanceMode::Off
                                                     : mfsbm::ImportanceMode::Auto;
  popt.max_iterations = cfg.picard.max_iterations;
  popt.tol = cfg.picard.tol;
  popt.order_cap = cfg.moment.order_cap;

  mfsbm::PicardDiagnostics diag;
  const mfsbm::MomentField field = mfsbm::picard_solve(cfg.sigma, cfg.init, popt, &diag);
  for (std::size_t k = 0; k < diag.h.size(); ++k) {
    std::cerr << "# iteration " << (k + 1) << ": sup-difference h = " << fmt(diag.h[k]) << "\n";
  }
  std::cerr << "# " << (diag.converged ? "converged" : "iteration budget reached") << " after "
            << diag.iterations << " iterations\n";

  OutStream out(out_path);
  out.get() << "node_t,node_x,n,estimate,std_error\n";
  for (int j = 0; j < field.time_nodes(); ++j) {
    for (int i = 0; i < field.space_nodes(); ++i) {
      for (int n = 1; n <= field.orders(); ++n) {
        out.get() << fmt(field.times()[j]) << ',' << fmt(field.xs()[i]) << ',' << n << ','
                  << fmt(field.value(j, i, n)) << ',' << fmt(field.std_error(j, i, n)) << "\n";
      }
    }
  }
  return 0;
}

int cmd_simulate(const mfsbm::RunConfig& cfg, const std::string& out_path,
                 const std::string& trees_path) {
  mfsbm::ParticleConfig pc;
  pc.scaling_n = cfg.particle.scaling_n;
  pc.delta = cfg.particle.delta;
  pc.dt = cfg.particle.dt;
  pc.horizon = cfg.particle.horizon;
  pc.replicas = cfg.particle.replicas;
  pc.seed = cfg.seed;
  pc.space_halfwidth = cfg.particle.space_halfwidth;
  pc.law_nodes = cfg.particle.law_nodes;
  pc.smoothing_nodes = cfg.particle.smoothing_nodes;
  pc.population_cap = cfg.particle.population_cap;
  pc.record_lifetimes = cfg.particle.record_lifetimes;
  pc.record_tree = !trees_path.empty();
  pc.probe_times = cfg.probes.times;
  if (pc.probe_times.empty()) pc.probe_times = {cfg.particle.horizon};

  const mfsbm::EnsembleResult ens = mfsbm::run_ensemble(pc, cfg.sigma, cfg.init);

  OutStream out(out_path);
  out.get() << "t,replica,alive_count,mass";
  for (std::size_t i = 0; i < cfg.probes.xs.size(); ++i) out.get() << ",field_x" << i;
  out.get() << "\n";
  for (std::size_t p = 0; p < ens.snapshots.size(); ++p) {
    const double t = ens.snapshots[p].time;
    const std::vector<std::int64_t> alive = ens.alive_counts(p);
    std::vector<std::vector<double>> fields;
    fields.reserve(cfg.probes.xs.size());
    for (double x : cfg.probes.xs) fields.push_back(ens.smoothed_values(p, x, pc.delta));
    for (std::size_t r = 0; r < alive.size(); ++r) {
      out.get() << fmt(t) << ',' << r << ',' << alive[r] << ','
                << fmt(static_cast<double>(alive[r]) * ens.particle_mass);
      for (const auto& col : fields) out.get() << ',' << fmt(col[r]);
      out.get() << "\n";
    }
  }

  if (!trees_path.empty()) {
    std::ofstream tout(trees_path);
    if (!tout) throw mfsbm::ConfigError("cannot write " + trees_path);
    for (std::size_t r = 0; r < ens.trees.size(); ++r) {
      json line;
      line["replica"] = r;
      json nodes = json::array();
      for (const mfsbm::TreeNode& node : ens.trees[r]) {
        nodes.push_back({{"parent", node.parent},
                         {"birth", node.birth},
                         {"death", node.death},
                         {"birth_position", node.birth_position},
                         {"death_position", node.death_position},
                         {"offspring", node.offspring}});
      }
      line["nodes"] = std::move(nodes);
      tout << line.dump() << "\n";
    }
  }
  std::cerr << "# " << ens.total_events << " deaths, " << ens.total_splits << " splits across "
            << pc.replicas << " replicas\n";
  return 0;
}

int cmd_dual(const mfsbm::RunConfig& cfg, int n, double t, double x, double delta, double gamma,
             const std::string& out_path) {
  mfsbm::DualOptions opt;
  opt.seed = cfg.seed;
  opt.paths = cfg.dual.paths;
  opt.block_size = cfg.dual.block_size;
  const mfsbm::DualEstimate est =
      mfsbm::dual_moment_estimate(n, t, x, {delta}, {}, gamma, cfg.init, opt);
  OutStream out(out_path);
  out.get() << "estimate,std_error,mean_jumps\n";
  out.get() << fmt(est.value) << ',' << fmt(est.std_error) << ',' << fmt(est.mean_jumps) << "\n";
  return 0;
}

int cmd_validate(const mfsbm::RunConfig& cfg, const std::string& out_dir) {
  const mfsbm::ValidationReport report = mfsbm::run_validate(cfg);
  const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;
  mfsbm::write_report_files(report, dir);
  std::cout << "routes x probes: " << report.results.size() << " results, "
            << report.comparisons.size() << " comparisons (threshold " << report.threshold
            << " combined SE, " << report.workers << " workers)\n";
  for (const mfsbm::PairComparison& c : report.comparisons) {
    std::cout << (c.pass ? "  [PASS] " : "  [FAIL] ") << c.route_a << " vs " << c.route_b
              << " at (t=" << c.t << ", x=" << c.x << ", n=" << c.order
              << ", delta=" << c.delta << "): z = " << std::setprecision(3) << c.z
              << std::setprecision(6) << "\n";
  }
  for (const std::string& f : report.route_failures) std::cout << "  [FAIL] " << f << "\n";
  std::cout << (report.all_pass ? "ALL PASS" : "FAILURES PRESENT") << "; report written to " << dir
            << "\n";
  return report.all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  apply_worker_env();
  CLI::App app{"moment toolkit: combinatorial formula, particle ensemble, coalescing dual"};
  app.require_subcommand(1);

  // enumerate
  int en_n = 3;
  int en_nprime = 0;
  std::string en_out = "-";
  CLI::App* enumerate_cmd = app.add_subcommand("enumerate", "emit index triples as JSON lines");
  enumerate_cmd->add_option("--n", en_n, "order")->required();
  enumerate_cmd->add_option("--nprime", en_nprime, "depth")->required();
  enumerate_cmd->add_option("--out", en_out, "output file or - for stdout");

  // count
  int ct_n = 3;
  int ct_nprime = 0;
  std::string ct_out = "-";
  CLI::App* count_cmd =
      app.add_subcommand("count", "closed-form and enumerated triple counts side by side");
  count_cmd->add_option("--n", ct_n, "order")->required();
  CLI::Option* ct_np_opt = count_cmd->add_option("--nprime", ct_nprime, "single depth (default: all)");
  count_cmd->add_option("--out", ct_out, "output file or - for stdout");

  // moments
  CommonState mo_state;
  int mo_order = 2;
  double mo_t = 1.0;
  double mo_x = 0.0;
  long long mo_samples = 0;
  std::uint64_t mo_seed = 0;
  std::string mo_importance;
  double mo_delta = -1.0;
  std::string mo_out = "-";
  CLI::App* moments_cmd = app.add_subcommand("moments", "moment-formula Monte Carlo at one probe");
  add_common(moments_cmd, mo_state);
  moments_cmd->add_option("--order", mo_order, "compute orders 1..order");
  moments_cmd->add_option("--t", mo_t, "probe time");
  moments_cmd->add_option("--x", mo_x, "probe coordinate");
  moments_cmd->add_option("--samples", mo_samples, "Monte Carlo samples");
  CLI::Option* mo_seed_opt = moments_cmd->add_option("--seed", mo_seed, "stream seed");
  moments_cmd->add_option("--importance", mo_importance, "importance sampling: on|off|auto")
      ->check(CLI::IsMember({"on", "off", "auto"}));
  moments_cmd->add_option("--delta", mo_delta, "observable smoothing width (0 = density moments)");
  moments_cmd->add_option("--out", mo_out, "output file or - for stdout");

  // picard
  CommonState pi_state;
  int pi_orders = 0;
  int pi_iters = 0;
  double pi_tol = -1.0;
  std::string pi_grid;
  std::string pi_out = "-";
  CLI::App* picard_cmd = app.add_subcommand("picard", "fixed-point moment grid");
  add_common(picard_cmd, pi_state);
  picard_cmd->add_option("--order-N", pi_orders, "moment orders carried on the grid");
  picard_cmd->add_option("--iters", pi_iters, "iteration budget");
  picard_cmd->add_option("--tol", pi_tol, "sup-norm convergence threshold");
  picard_cmd->add_option("--grid", pi_grid, "grid nodes as TIMExSPACE, e.g. 33x65");
  picard_cmd->add_option("--out", pi_out, "output file or - for stdout");

  // simulate
  CommonState si_state;
  int si_replicas = 0;
  int si_n = 0;
  double si_dt = 0.0;
  double si_horizon = 0.0;
  std::uint64_t si_seed = 0;
  std::string si_out = "-";
  std::string si_trees;
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "branching-particle ensemble");
  add_common(simulate_cmd, si_state);
  simulate_cmd->add_option("--replicas", si_replicas, "replica count");
  simulate_cmd->add_option("--n", si_n, "scaling parameter (particle mass 1/n)");
  simulate_cmd->add_option("--dt", si_dt, "step size");
  simulate_cmd->add_option("--horizon", si_horizon, "simulation horizon");
  CLI::Option* si_seed_opt = simulate_cmd->add_option("--seed", si_seed, "stream seed");
  simulate_cmd->add_option("--out", si_out, "output file or - for stdout");
  simulate_cmd->add_option("--trees", si_trees, "also dump genealogy trees as JSON lines");

  // dual
  CommonState du_state;
  int du_n = 2;
  double du_t = 1.0;
  double du_x = 0.0;
  double du_delta = 0.02;
  double du_gamma = -1.0;
  long long du_replicas = 0;
  std::uint64_t du_seed = 0;
  std::string du_out = "-";
  CLI::App* dual_cmd = app.add_subcommand("dual", "coalescing-dual moment estimate");
  add_common(dual_cmd, du_state);
  dual_cmd->add_option("--n", du_n, "moment order");
  dual_cmd->add_option("--t", du_t, "probe time");
  dual_cmd->add_option("--x", du_x, "probe coordinate");
  dual_cmd->add_option("--delta", du_delta, "smoothing width");
  dual_cmd->add_option("--gamma", du_gamma, "constant squared coefficient");
  dual_cmd->add_option("--replicas", du_replicas, "dual paths");
  CLI::Option* du_seed_opt = dual_cmd->add_option("--seed", du_seed, "stream seed");
  dual_cmd->add_option("--out", du_out, "output file or - for stdout");

  // validate
  CommonState va_state;
  double va_threshold = 0.0;
  bool va_extrapolate = false;
  std::vector<std::string> va_routes;
  std::string va_out_dir;
  std::uint64_t va_seed = 0;
  CLI::App* validate_cmd =
      app.add_subcommand("validate", "cross-route agreement report at the configured probes");
  add_common(validate_cmd, va_state);
  validate_cmd->add_option("--threshold", va_threshold, "combined-SE agreement threshold");
  validate_cmd->add_flag("--extrapolate", va_extrapolate, "add smoothing-free rows via the ladder");
  validate_cmd->add_option("--routes", va_routes, "routes to run (repeatable)");
  validate_cmd->add_option("--out-dir", va_out_dir, "report directory (default: config output_dir)");
  CLI::Option* va_seed_opt = validate_cmd->add_option("--seed", va_seed, "stream seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (enumerate_cmd->parsed()) return cmd_enumerate(en_n, en_nprime, en_out);
    if (count_cmd->parsed()) return cmd_count(ct_n, ct_nprime, ct_np_opt->count() > 0, ct_out);

    if (moments_cmd->parsed()) {
      mfsbm::RunConfig cfg = mo_state.load();
      if (mo_samples > 0) cfg.moment.samples = mo_samples;
      if (mo_seed_opt->count() > 0) cfg.seed = mo_seed;
      if (!mo_importance.empty()) cfg.moment.importance = mo_importance;
      if (mo_delta >= 0.0) cfg.moment.delta = mo_delta;
      cfg.moment.orders = std::max(cfg.moment.orders, mo_order);
      return cmd_moments(cfg, mo_order, mo_t, mo_x, mo_out);
    }
    if (picard_cmd->parsed()) {
      mfsbm::RunConfig cfg = pi_state.load();
      if (pi_orders > 0) cfg.moment.orders = pi_orders;
      if (pi_iters > 0) cfg.picard.max_iterations = pi_iters;
      if (pi_tol > 0.0) cfg.picard.tol = pi_tol;
      if (!pi_grid.empty()) {
        const std::size_t sep = pi_grid.find('x');
        if (sep == std::string::npos) {
          throw mfsbm::ConfigError("--grid expects TIMExSPACE, e.g. 33x65");
        }
        cfg.picard.time_nodes = std::stoi(pi_grid.substr(0, sep));
        cfg.picard.space_nodes = std::stoi(pi_grid.substr(sep + 1));
      }
      return cmd_picard(cfg, pi_out);
    }
    if (simulate_cmd->parsed()) {
      mfsbm::RunConfig cfg = si_state.load();
      if (si_replicas > 0) cfg.particle.replicas = si_replicas;
      if (si_n > 0) cfg.particle.scaling_n = si_n;
      if (si_dt > 0.0) cfg.particle.dt = si_dt;
      if (si_horizon > 0.0) cfg.particle.horizon = si_horizon;
      if (si_seed_opt->count() > 0) cfg.seed = si_seed;
      return cmd_simulate(cfg, si_out, si_trees);
    }
    if (dual_cmd->parsed()) {
      mfsbm::RunConfig cfg = du_state.load();
      if (du_replicas > 0) cfg.dual.paths = du_replicas;
      if (du_seed_opt->count() > 0) cfg.seed = du_seed;
      const double gamma =
          du_gamma > 0.0
              ? du_gamma
              : (cfg.sigma.is_constant()
                     ? cfg.sigma.constant_gamma()
                     : throw mfsbm::ConfigError(
                           "dual: --gamma required unless the config coefficient is constant"));
      return cmd_dual(cfg, du_n, du_t, du_x, du_delta, gamma, du_out);
    }
    if (validate_cmd->parsed()) {
      mfsbm::RunConfig cfg = va_state.load();
      if (va_threshold > 0.0) cfg.validate.threshold = va_threshold;
      if (va_extrapolate) cfg.validate.extrapolate = true;
      if (!va_routes.empty()) cfg.validate.routes = va_routes;
      if (va_seed_opt->count() > 0) cfg.seed = va_seed;
      return cmd_validate(cfg, va_out_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
