#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "hetscan/parallel.hpp"

namespace hetscan {

/// ARD squared-exponential hyperparameters: one lengthscale per design column.
/// noise_variance is set only for the Gaussian likelihood.
struct Hyperparameters {
  Eigen::VectorXd lengthscales;
  double signal_variance = 1.0;
  std::optional<double> noise_variance;

  int dim() const { return static_cast<int>(lengthscales.size()); }
  void validate() const;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// k(a, b) = signal_variance * exp(-sum_j (a_j - b_j)^2 / (2 l_j^2))
double kernel_eval(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Hyperparameters& hyp);

/// k(x_star, X_i) for every row of X.
Eigen::VectorXd kernel_vector(const Eigen::VectorXd& x_star, const Eigen::MatrixXd& X, const Hyperparameters& hyp);

/// Gram matrix K_XX without noise. The parallel build fills the upper
/// triangle row blocks concurrently; entries are computed by the same
/// expression as the serial reference, so both agree bit for bit.
Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& X, const Hyperparameters& hyp,
                            Execution exec = Execution::Parallel);

/// dk(i, d) = dk(x*, x_i)/dx*_d and d2k[i](d, e) = d2k(x*, x_i)/dx*_d dx*_e.
struct KernelDerivatives {
  Eigen::MatrixXd dk;
  std::vector<Eigen::MatrixXd> d2k;
};

KernelDerivatives kernel_input_derivatives(const Eigen::VectorXd& x_star, const Eigen::MatrixXd& X,
                                           const Hyperparameters& hyp);

/// Input-gradient of the kernel vector: N x P matrix, without the second
/// order tensor. kvec must equal kernel_vector(x_star, X, hyp).
Eigen::MatrixXd kernel_gradient(const Eigen::VectorXd& x_star, const Eigen::MatrixXd& X,
                                const Eigen::VectorXd& kvec, const Hyperparameters& hyp);

/// sum_i w_i * d2k(x*, x_i)/dx*_d dx*_e as a P x P matrix, computed without
/// materialising the N x P x P tensor.
Eigen::MatrixXd contract_kernel_hessian(const Eigen::VectorXd& x_star, const Eigen::MatrixXd& X,
                                        const Eigen::VectorXd& kvec, const Eigen::VectorXd& weights,
                                        const Hyperparameters& hyp);

}  // namespace hetscan
