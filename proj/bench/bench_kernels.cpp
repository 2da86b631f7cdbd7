// Serial-versus-parallel comparison for the four compute kernels.  Each
// kernel's OpenMP path must reproduce its serial reference bit for bit (the
// blocked reductions are order-fixed), so the table reports both the speedup
// and an `identical` column that is required to read `yes`.
//
//   bench_kernels           full-size timing table
//   bench_kernels --smoke   small sizes, exit nonzero on any mismatch

#include <chrono>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mfsbm/dual.hpp"
#include "mfsbm/initial_density.hpp"
#include "mfsbm/moment_mc.hpp"
#include "mfsbm/particle.hpp"
#include "mfsbm/picard.hpp"
#include "mfsbm/sigma.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Row {
  std::string kernel;
  double serial_s = 0.0;
  double parallel_s = 0.0;
  bool identical = false;
};

void print_row(const Row& r) {
  std::cout << std::left << std::setw(22) << r.kernel << std::right << std::fixed
            << std::setprecision(3) << std::setw(10) << r.serial_s << "s" << std::setw(10)
            << r.parallel_s << "s" << std::setw(9) << (r.serial_s / r.parallel_s) << "x   "
            << (r.identical ? "yes" : "NO") << "\n";
}

Row bench_moment(bool smoke) {
  const mfsbm::InitialDensity init = mfsbm::InitialDensity::gaussian_mixture({{1.0, 0.0, 1.0}});
  const mfsbm::SigmaHatSqField field = [](double, double) { return 1.0; };
  mfsbm::McOptions opt;
  opt.samples = smoke ? 20000 : 400000;
  opt.seed = 7;

  Row row{"moment_formula_mc", 0, 0, false};
  auto t0 = Clock::now();
  const mfsbm::McEstimate serial = mfsbm::moment_formula_mc_serial(3, 1.0, 0.0, init, field, opt);
  row.serial_s = seconds_since(t0);
  t0 = Clock::now();
  const mfsbm::McEstimate parallel = mfsbm::moment_formula_mc(3, 1.0, 0.0, init, field, opt);
  row.parallel_s = seconds_since(t0);
  row.identical = serial.value == parallel.value && serial.std_error == parallel.std_error;
  return row;
}

Row bench_picard(bool smoke) {
  const mfsbm::InitialDensity init = mfsbm::InitialDensity::gaussian_mixture({{1.0, 0.0, 1.0}});
  const mfsbm::SigmaSpec sigma =
      mfsbm::SigmaSpec::moment_poly({1.0, 0.2}, 0.5, 2.0, 1.0, 1.0);
  mfsbm::PicardOptions opt;
  opt.orders = 1;
  opt.horizon = 0.5;
  opt.time_nodes = smoke ? 5 : 9;
  opt.space_nodes = smoke ? 9 : 17;
  opt.samples = smoke ? 400 : 2000;
  opt.seed = 7;

  Row row{"picard_initial", 0, 0, false};
#ifdef _OPENMP
  const int max_threads = omp_get_max_threads();
  omp_set_num_threads(1);
#endif
  auto t0 = Clock::now();
  const mfsbm::MomentField serial = mfsbm::picard_initial(sigma, init, opt);
  row.serial_s = seconds_since(t0);
#ifdef _OPENMP
  omp_set_num_threads(max_threads);
#endif
  t0 = Clock::now();
  const mfsbm::MomentField parallel = mfsbm::picard_initial(sigma, init, opt);
  row.parallel_s = seconds_since(t0);
  row.identical = serial.max_abs_difference(parallel) == 0.0;
  return row;
}

Row bench_particle(bool smoke) {
  const mfsbm::InitialDensity init = mfsbm::InitialDensity::gaussian_mixture({{1.0, 0.0, 1.0}});
  const mfsbm::SigmaSpec sigma = mfsbm::SigmaSpec::constant(1.0);
  mfsbm::ParticleConfig cfg;
  cfg.scaling_n = 50;
  cfg.dt = 1e-3;
  cfg.horizon = smoke ? 0.1 : 0.5;
  cfg.replicas = smoke ? 100 : 1000;
  cfg.seed = 7;
  cfg.probe_times = {cfg.horizon};

  Row row{"particle_ensemble", 0, 0, false};
  cfg.use_openmp = false;
  auto t0 = Clock::now();
  const mfsbm::EnsembleResult serial = mfsbm::run_ensemble(cfg, sigma, init);
  row.serial_s = seconds_since(t0);
  cfg.use_openmp = true;
  t0 = Clock::now();
  const mfsbm::EnsembleResult parallel = mfsbm::run_ensemble(cfg, sigma, init);
  row.parallel_s = seconds_since(t0);
  row.identical = serial.snapshots.size() == parallel.snapshots.size();
  for (std::size_t p = 0; row.identical && p < serial.snapshots.size(); ++p) {
    row.identical = serial.snapshots[p].positions == parallel.snapshots[p].positions;
  }
  return row;
}

Row bench_dual(bool smoke) {
  const mfsbm::InitialDensity init = mfsbm::InitialDensity::gaussian_mixture({{1.0, 0.0, 1.0}});
  mfsbm::DualOptions opt;
  opt.paths = smoke ? 20000 : 400000;
  opt.seed = 7;

  Row row{"dual_paths", 0, 0, false};
  opt.use_openmp = false;
  auto t0 = Clock::now();
  const mfsbm::DualEstimate serial =
      mfsbm::dual_moment_estimate(3, 1.0, 0.0, {0.02}, {}, 1.0, init, opt);
  row.serial_s = seconds_since(t0);
  opt.use_openmp = true;
  t0 = Clock::now();
  const mfsbm::DualEstimate parallel =
      mfsbm::dual_moment_estimate(3, 1.0, 0.0, {0.02}, {}, 1.0, init, opt);
  row.parallel_s = seconds_since(t0);
  row.identical = serial.value == parallel.value && serial.std_error == parallel.std_error;
  return row;
}

}  // namespace

int main(int argc, char** argv) {
  const bool smoke = argc > 1 && std::strcmp(argv[1], "--smoke") == 0;
#ifdef _OPENMP
  std::cout << "# OpenMP enabled, max threads = " << omp_get_max_threads() << "\n";
#else
  std::cout << "# OpenMP disabled; parallel paths run serially\n";
#endif
  std::cout << std::left << std::setw(22) << "kernel" << std::right << std::setw(11) << "serial"
            << std::setw(11) << "parallel" << std::setw(10) << "speedup"
            << "   identical\n";
  const Row rows[] = {bench_moment(smoke), bench_picard(smoke), bench_particle(smoke),
                      bench_dual(smoke)};
  bool all_identical = true;
  for (const Row& r : rows) {
    print_row(r);
    all_identical = all_identical && r.identical;
  }
  if (!all_identical) {
    std::cout << "MISMATCH: a parallel kernel diverged from its serial reference\n";
    return 1;
  }
  return 0;
}
