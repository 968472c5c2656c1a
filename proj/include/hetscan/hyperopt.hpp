#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetscan/dataset.hpp"
#include "hetscan/gp.hpp"

namespace hetscan {

/// Hyperparameters as an unconstrained vector:
/// [log l_1 .. log l_P, log signal_variance, log noise_variance (Gaussian only)].
Eigen::VectorXd to_log_params(const Hyperparameters& hyp);
Hyperparameters from_log_params(const Eigen::VectorXd& theta, int dim, Family family);

struct LmlResult {
  double value = 0.0;
  Eigen::VectorXd gradient;  // d value / d log-parameters
};

/// Carries the last Laplace iterate between evaluations so successive mode
/// searches start close to the answer.
struct LaplaceWarmStart {
  Eigen::VectorXd a;
};

/// Exact log evidence for Gaussian, Laplace-approximate for Bernoulli (y in
/// {0,1}). For Bernoulli the gradient includes the implicit dependence of the
/// mode on the hyperparameters.
LmlResult log_marginal_likelihood(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                  const Hyperparameters& hyp, Family family, LaplaceWarmStart* warm = nullptr);

struct LogRange {
  double lo;
  double hi;
};

struct OptConfig {
  int restarts = 5;
  int max_iters = 200;
  double grad_tol = 1e-6;
  LogRange lengthscale_range{-2.302585092994046, 2.302585092994046};  // [log 0.1, log 10]
  LogRange signal_range{-2.302585092994046, 2.302585092994046};
  LogRange noise_range{-4.605170185988091, 0.0};  // [log 0.01, log 1]
  /// Box the search is projected onto; initialisation ranges must lie
  /// inside. The defaults only keep the Gram matrix representable.
  LogRange lengthscale_bounds{-20.0, 20.0};
  LogRange signal_bounds{-20.0, 20.0};
  LogRange noise_bounds{-20.0, 20.0};
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct RestartDiagnostics {
  int index = 0;
  bool ok = false;
  double initial_value = 0.0;
  double final_value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::string status;
};

struct OptResult {
  Hyperparameters hyp;
  double value = 0.0;
  int best_restart = -1;
  std::vector<RestartDiagnostics> restarts;
};

class OptimizationError : public std::runtime_error {
 public:
  OptimizationError(const std::string& what, std::vector<RestartDiagnostics> diags)
      : std::runtime_error(what), diagnostics(std::move(diags)) {}
  std::vector<RestartDiagnostics> diagnostics;
};

/// Initial log-hyperparameters of one restart. Depends only on
/// (cfg.rng_seed, restart), so restarts can run in any order.
Eigen::VectorXd sample_initial_log_params(const OptConfig& cfg, int restart, int dim, Family family);

/// Multi-restart BFGS ascent of the log marginal likelihood in log space.
OptResult optimize(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, Family family, const OptConfig& cfg);

}  // namespace hetscan
