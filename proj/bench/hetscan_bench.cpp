// Serial reference vs OpenMP kernels: wall time and agreement.
//
//   hetscan_bench [N] [P] [repeats]
//
// Thread count follows OMP_NUM_THREADS / HETSCAN_THREADS.
#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <random>

#include "hetscan/kernel.hpp"
#include "hetscan/parallel.hpp"
#include "hetscan/pointwise.hpp"

using namespace hetscan;

namespace {

template <class F>
double best_seconds(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    best = std::min(best, dt.count());
  }
  return best;
}

void report(const char* name, double serial, double parallel, double max_abs_diff) {
  std::cout << std::left << std::setw(22) << name << std::right << std::fixed << std::setprecision(4)
            << " serial=" << serial << "s parallel=" << parallel << "s speedup=" << std::setprecision(2)
            << serial / parallel << "x max|diff|=" << std::scientific << max_abs_diff << std::defaultfloat
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  configure_threads_from_env();
  const int n = argc > 1 ? std::atoi(argv[1]) : 400;
  const int p = argc > 2 ? std::atoi(argv[2]) : 8;
  const int repeats = argc > 3 ? std::atoi(argv[3]) : 3;
  const int n_numerical = p - 2;

  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n_numerical; ++j) x(i, j) = normal(rng);
    for (int j = n_numerical; j < p; ++j) x(i, j) = static_cast<double>(rng() % 2);
  }
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = std::sin(x(i, 0)) + x(i, p - 1) * x(i, 1) + 0.1 * normal(rng);

  Hyperparameters hyp;
  hyp.lengthscales = Eigen::VectorXd::Constant(p, 1.5);
  hyp.signal_variance = 1.0;
  hyp.noise_variance = 0.1;

  std::cout << "N=" << n << " P=" << p << " threads=" << max_threads() << "\n";

  Eigen::MatrixXd g_serial, g_parallel;
  const double ts = best_seconds(repeats, [&] { g_serial = gram_matrix(x, hyp, Execution::Serial); });
  const double tp = best_seconds(repeats, [&] { g_parallel = gram_matrix(x, hyp, Execution::Parallel); });
  report("gram_matrix", ts, tp, (g_serial - g_parallel).cwiseAbs().maxCoeff());

  const Posterior post = fit_exact(x, y, hyp);
  PointwiseMeasures m_serial, m_parallel;
  const double ms = best_seconds(repeats, [&] { m_serial = pointwise_measures(post, x, n_numerical, Execution::Serial); });
  const double mp =
      best_seconds(repeats, [&] { m_parallel = pointwise_measures(post, x, n_numerical, Execution::Parallel); });
  const double diff = std::max((m_serial.slope - m_parallel.slope).cwiseAbs().maxCoeff(),
                               (m_serial.intercept - m_parallel.intercept).cwiseAbs().maxCoeff());
  report("pointwise_measures", ms, mp, diff);
  return diff == 0.0 && (g_serial - g_parallel).cwiseAbs().maxCoeff() == 0.0 ? 0 : 1;
}
