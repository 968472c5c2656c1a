#pragma once

#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hetscan/dataset.hpp"
#include "hetscan/kernel.hpp"

namespace hetscan {

class CholeskyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_delta)
      : std::runtime_error(what), last_objective_delta(last_delta) {}
  double last_objective_delta;
};

/// Lower Cholesky factor of A + jitter * I. Tries A as given, then adds
/// jitter starting at 1e-10 * mean(diag(A)), growing tenfold up to
/// 1e-4 * mean(diag(A)). Throws CholeskyError when all attempts fail.
struct JitteredCholesky {
  Eigen::MatrixXd lower;
  double jitter = 0.0;
};
JitteredCholesky robust_cholesky(const Eigen::MatrixXd& a);

/// Whether the regression predictive is over y* (latent + noise) or f*.
enum class PredictiveTarget { Observation, Latent };

struct ExactPosterior {
  Eigen::MatrixXd design;
  Hyperparameters hyp;
  Eigen::MatrixXd chol;  // lower factor of K + noise * I (+ jitter)
  Eigen::VectorXd alpha;
  double jitter = 0.0;
  PredictiveTarget target = PredictiveTarget::Observation;
};

ExactPosterior fit_exact(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Hyperparameters& hyp,
                         PredictiveTarget target = PredictiveTarget::Observation);

struct LaplaceOptions {
  int max_iters = 100;
  double objective_tol = 1e-10;
  /// Initial latent vector; zero when absent.
  std::optional<Eigen::VectorXd> warm_start;
};

/// Laplace approximation of the probit-GP latent posterior. Labels are
/// stored as +-1.
struct LaplacePosterior {
  Eigen::MatrixXd design;
  Hyperparameters hyp;
  Eigen::VectorXd labels;
  Eigen::VectorXd mode;
  Eigen::VectorXd grad_at_mode;
  Eigen::VectorXd w_sqrt;
  Eigen::MatrixXd chol_b;  // lower factor of I + W^1/2 K W^1/2
  Eigen::MatrixXd gram;
  Eigen::VectorXd a;       // K^-1 mode, as produced by the Newton iteration
  double objective = 0.0;  // log p(y|f) - 1/2 f' K^-1 f at the mode
  double log_marginal = 0.0;
  int iterations = 0;
};

/// y must contain 0/1 labels.
LaplacePosterior fit_laplace(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Hyperparameters& hyp,
                             const LaplaceOptions& opts = {});

/// Gaussian: params = (mu, sigma). Bernoulli: params = (p).
struct PredictiveDistribution {
  Family family = Family::Gaussian;
  Eigen::VectorXd params;

  int n_params() const { return static_cast<int>(params.size()); }
};

struct PredictiveDerivatives {
  Eigen::MatrixXd first;               // n_params x P
  std::vector<Eigen::MatrixXd> second;  // n_params entries, each P x P
};

struct Prediction {
  PredictiveDistribution dist;
  PredictiveDerivatives derivs;
};

PredictiveDistribution predict_exact(const ExactPosterior& post, const Eigen::VectorXd& x_star);
Prediction predict_exact_with_derivatives(const ExactPosterior& post, const Eigen::VectorXd& x_star);

PredictiveDistribution predict_laplace(const LaplacePosterior& post, const Eigen::VectorXd& x_star);
Prediction predict_laplace_with_derivatives(const LaplacePosterior& post, const Eigen::VectorXd& x_star);

using Posterior = std::variant<ExactPosterior, LaplacePosterior>;

PredictiveDistribution predict(const Posterior& post, const Eigen::VectorXd& x_star);
Prediction predict_with_derivatives(const Posterior& post, const Eigen::VectorXd& x_star);
const Eigen::MatrixXd& training_design(const Posterior& post);

}  // namespace hetscan
