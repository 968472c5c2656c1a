#include "hetscan/kernel.hpp"

#include <cmath>
#include <string>

namespace hetscan {

void Hyperparameters::validate() const {
  if (lengthscales.size() == 0) throw std::invalid_argument("hyperparameters: no lengthscales");
  for (Eigen::Index j = 0; j < lengthscales.size(); ++j)
    if (!(lengthscales[j] > 0.0) || !std::isfinite(lengthscales[j]))
      throw std::invalid_argument("hyperparameters: lengthscale " + std::to_string(j) + " must be finite and > 0");
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
    throw std::invalid_argument("hyperparameters: signal variance must be finite and > 0");
  if (noise_variance && (!(*noise_variance > 0.0) || !std::isfinite(*noise_variance)))
    throw std::invalid_argument("hyperparameters: noise variance must be finite and > 0");
}

namespace {

void check_dim(Eigen::Index got, const Hyperparameters& hyp, const char* what) {
  if (got != hyp.lengthscales.size())
    throw DimensionError(std::string(what) + ": dimension " + std::to_string(got) + " does not match " +
                         std::to_string(hyp.lengthscales.size()) + " lengthscales");
}

template <typename A, typename B>
double se_kernel(const A& a, const B& b, const Eigen::VectorXd& inv_ls2, double signal) {
  double r2 = 0.0;
  for (Eigen::Index j = 0; j < inv_ls2.size(); ++j) {
    const double diff = a[j] - b[j];
    r2 += diff * diff * inv_ls2[j];
  }
  return signal * std::exp(-0.5 * r2);
}

Eigen::VectorXd inverse_squared(const Eigen::VectorXd& ls) { return ls.array().square().inverse(); }

}  // namespace

double kernel_eval(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Hyperparameters& hyp) {
  check_dim(a.size(), hyp, "kernel_eval");
  check_dim(b.size(), hyp, "kernel_eval");
  return se_kernel(a, b, inverse_squared(hyp.lengthscales), hyp.signal_variance);
}

Eigen::VectorXd kernel_vector(const Eigen::VectorXd& x_star, const Eigen::MatrixXd& X, const Hyperparameters& hyp) {
  check_dim(x_star.size(), hyp, "kernel_vector");
  check_dim(X.cols(), hyp, "kernel_vector");
  const Eigen::VectorXd inv_ls2 = inverse_squared(hyp.lengthscales);
  Eigen::VectorXd k(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) k[i] = se_kernel(x_star, X.row(i), inv_ls2, hyp.signal_variance);
  return k;
}

Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& X, const Hyperparameters& hyp, Execution exec) {
  check_dim(X.cols(), hyp, "gram_matrix");
  const Eigen::VectorXd inv_ls2 = inverse_squared(hyp.lengthscales);
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  // Column-major storage: fill column j for rows i <= j, mirror afterwards.
  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i <= j; ++i) K(i, j) = se_kernel(X.row(i), X.row(j), inv_ls2, hyp.signal_variance);
  } else {
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i <= j; ++i) K(i, j) = se_kernel(X.row(i), X.row(j), inv_ls2, hyp.signal_variance);
  }
  K.triangularView<Eigen::StrictlyLower>() = K.transpose();
  return K;
}

Eigen::MatrixXd kernel_gradient(const Eigen::VectorXd& x_star, const Eigen::MatrixXd& X,
                                const Eigen::VectorXd& kvec, const Hyperparameters& hyp) {
  const Eigen::VectorXd inv_ls2 = inverse_squared(hyp.lengthscales);
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd dk(X.rows(), p);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index d = 0; d < p; ++d) dk(i, d) = -(x_star[d] - X(i, d)) * inv_ls2[d] * kvec[i];
  return dk;
}

KernelDerivatives kernel_input_derivatives(const Eigen::VectorXd& x_star, const Eigen::MatrixXd& X,
                                           const Hyperparameters& hyp) {
  const Eigen::VectorXd k = kernel_vector(x_star, X, hyp);
  const Eigen::VectorXd inv_ls2 = inverse_squared(hyp.lengthscales);
  const Eigen::Index p = X.cols();
  KernelDerivatives out;
  out.dk = kernel_gradient(x_star, X, k, hyp);
  out.d2k.resize(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Eigen::MatrixXd& h = out.d2k[i];
    h.resize(p, p);
    for (Eigen::Index d = 0; d < p; ++d) {
      const double sd = (x_star[d] - X(i, d)) * inv_ls2[d];
      for (Eigen::Index e = d; e < p; ++e) {
        const double se = (x_star[e] - X(i, e)) * inv_ls2[e];
        double v = sd * se * k[i];
        if (d == e) v -= inv_ls2[d] * k[i];
        h(d, e) = v;
        h(e, d) = v;
      }
    }
  }
  return out;
}

Eigen::MatrixXd contract_kernel_hessian(const Eigen::VectorXd& x_star, const Eigen::MatrixXd& X,
                                        const Eigen::VectorXd& kvec, const Eigen::VectorXd& weights,
                                        const Hyperparameters& hyp) {
  const Eigen::VectorXd inv_ls2 = inverse_squared(hyp.lengthscales);
  const Eigen::Index p = X.cols();
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd scaled(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index d = 0; d < p; ++d) scaled(i, d) = (x_star[d] - X(i, d)) * inv_ls2[d];
  const Eigen::VectorXd c = weights.cwiseProduct(kvec);
  const double c_sum = c.sum();
  Eigen::MatrixXd out(p, p);
  for (Eigen::Index d = 0; d < p; ++d) {
    for (Eigen::Index e = d; e < p; ++e) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) acc += scaled(i, d) * scaled(i, e) * c[i];
      if (d == e) acc -= inv_ls2[d] * c_sum;
      out(d, e) = acc;
      out(e, d) = acc;
    }
  }
  return out;
}

}  // namespace hetscan
