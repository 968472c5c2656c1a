#include "hetscan/gp.hpp"

#include <utility>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hetscan/probit.hpp"

namespace hetscan {

JitteredCholesky robust_cholesky(const Eigen::MatrixXd& a) {
  const double mean_diag = a.diagonal().mean();
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return {llt.matrixL(), 0.0};
  for (double rel = 1e-10; rel <= 1e-4 * (1 + 1e-9); rel *= 10.0) {
    const double jitter = rel * mean_diag;
    Eigen::MatrixXd shifted = a;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
  }
  throw CholeskyError("matrix is not positive definite even with jitter 1e-4 * mean(diag)");
}

ExactPosterior fit_exact(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Hyperparameters& hyp,
                         PredictiveTarget target) {
  hyp.validate();
  if (!hyp.noise_variance) throw std::invalid_argument("fit_exact: noise variance required");
  if (design.rows() != y.size()) throw DimensionError("fit_exact: design rows do not match response length");
  Eigen::MatrixXd k = gram_matrix(design, hyp);
  k.diagonal().array() += *hyp.noise_variance;
  auto chol = robust_cholesky(k);

  ExactPosterior post;
  post.design = design;
  post.hyp = hyp;
  post.chol = std::move(chol.lower);
  post.jitter = chol.jitter;
  post.target = target;
  const auto lower = std::as_const(post.chol).triangularView<Eigen::Lower>();
  post.alpha = lower.transpose().solve(lower.solve(y));
  return post;
}

namespace {

double observation_variance(const ExactPosterior& post, double latent_var) {
  double var = latent_var;
  if (post.target == PredictiveTarget::Observation) var += *post.hyp.noise_variance;
  return std::max(var, std::numeric_limits<double>::min());
}

}  // namespace

PredictiveDistribution predict_exact(const ExactPosterior& post, const Eigen::VectorXd& x_star) {
  const Eigen::VectorXd k = kernel_vector(x_star, post.design, post.hyp);
  const Eigen::VectorXd u = post.chol.triangularView<Eigen::Lower>().solve(k);
  const double mean = k.dot(post.alpha);
  const double var = observation_variance(post, post.hyp.signal_variance - u.squaredNorm());
  PredictiveDistribution dist;
  dist.family = Family::Gaussian;
  dist.params.resize(2);
  dist.params << mean, std::sqrt(var);
  return dist;
}

Prediction predict_exact_with_derivatives(const ExactPosterior& post, const Eigen::VectorXd& x_star) {
  const auto lower = std::as_const(post.chol).triangularView<Eigen::Lower>();
  const Eigen::VectorXd k = kernel_vector(x_star, post.design, post.hyp);
  const Eigen::MatrixXd dk = kernel_gradient(x_star, post.design, k, post.hyp);
  const Eigen::VectorXd u = lower.solve(k);
  const Eigen::MatrixXd v_mat = lower.solve(dk);
  const Eigen::VectorXd beta = lower.transpose().solve(u);

  const double mean = k.dot(post.alpha);
  const double var = observation_variance(post, post.hyp.signal_variance - u.squaredNorm());
  const double sigma = std::sqrt(var);

  const Eigen::VectorXd d_mean = dk.transpose() * post.alpha;
  const Eigen::MatrixXd dd_mean = contract_kernel_hessian(x_star, post.design, k, post.alpha, post.hyp);

  // Derivatives of sigma^2 flow only through k*, since k(x*, x*) is constant.
  const Eigen::VectorXd d_var = -2.0 * (v_mat.transpose() * u);
  Eigen::MatrixXd dd_var = -2.0 * (v_mat.transpose() * v_mat +
                                   contract_kernel_hessian(x_star, post.design, k, beta, post.hyp));
  dd_var = 0.5 * (dd_var + dd_var.transpose()).eval();

  const Eigen::VectorXd d_sigma = d_var / (2.0 * sigma);
  Eigen::MatrixXd dd_sigma = dd_var / (2.0 * sigma) - (d_var * d_var.transpose()) / (4.0 * sigma * sigma * sigma);

  Prediction out;
  out.dist.family = Family::Gaussian;
  out.dist.params.resize(2);
  out.dist.params << mean, sigma;
  out.derivs.first.resize(2, d_mean.size());
  out.derivs.first.row(0) = d_mean.transpose();
  out.derivs.first.row(1) = d_sigma.transpose();
  out.derivs.second = {dd_mean, std::move(dd_sigma)};
  return out;
}

namespace {

double latent_objective(const Eigen::VectorXd& labels, const Eigen::VectorXd& f, const Eigen::VectorXd& a) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) ll += probit::log_cdf(labels[i] * f[i]);
  return ll - 0.5 * a.dot(f);
}

struct NewtonState {
  Eigen::VectorXd grad;
  Eigen::VectorXd w_sqrt;
  Eigen::MatrixXd chol_b;
};

NewtonState newton_state(const Eigen::MatrixXd& gram, const Eigen::VectorXd& labels, const Eigen::VectorXd& f) {
  const Eigen::Index n = f.size();
  NewtonState s;
  s.grad.resize(n);
  s.w_sqrt.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto t = probit::likelihood_terms(labels[i], f[i]);
    s.grad[i] = t.d1;
    s.w_sqrt[i] = std::sqrt(std::max(-t.d2, 0.0));
  }
  Eigen::MatrixXd b = s.w_sqrt.asDiagonal() * gram * s.w_sqrt.asDiagonal();
  b.diagonal().array() += 1.0;
  s.chol_b = robust_cholesky(b).lower;
  return s;
}

}  // namespace

LaplacePosterior fit_laplace(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Hyperparameters& hyp,
                             const LaplaceOptions& opts) {
  hyp.validate();
  if (design.rows() != y.size()) throw DimensionError("fit_laplace: design rows do not match label count");
  const Eigen::Index n = y.size();

  LaplacePosterior post;
  post.design = design;
  post.hyp = hyp;
  post.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw std::invalid_argument("fit_laplace: labels must be 0/1");
    post.labels[i] = y[i] == 1.0 ? 1.0 : -1.0;
  }
  post.gram = gram_matrix(design, hyp);
  const Eigen::MatrixXd& k = post.gram;

  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  if (opts.warm_start && opts.warm_start->size() == n) a = *opts.warm_start;
  Eigen::VectorXd f = k * a;
  double objective = latent_objective(post.labels, f, a);
  if (opts.warm_start && !std::isfinite(objective)) {
    a.setZero();
    f.setZero();
    objective = latent_objective(post.labels, f, a);
  }

  double last_delta = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    const NewtonState s = newton_state(k, post.labels, f);
    const auto lower = std::as_const(s.chol_b).triangularView<Eigen::Lower>();
    const Eigen::VectorXd w = s.w_sqrt.array().square();
    const Eigen::VectorXd b = w.cwiseProduct(f) + s.grad;
    const Eigen::VectorXd kb = k * b;
    const Eigen::VectorXd a_full =
        b - s.w_sqrt.cwiseProduct(lower.transpose().solve(lower.solve(s.w_sqrt.cwiseProduct(kb))));

    // Newton direction in a-space with step halving; the objective is concave
    // so halving terminates.
    Eigen::VectorXd a_new = a_full;
    Eigen::VectorXd f_new = k * a_new;
    double obj_new = latent_objective(post.labels, f_new, a_new);
    for (int h = 0; h < 30 && !(obj_new >= objective - 1e-12 * std::abs(objective)); ++h) {
      a_new = 0.5 * (a + a_new);
      f_new = k * a_new;
      obj_new = latent_objective(post.labels, f_new, a_new);
    }
    last_delta = std::abs(obj_new - objective);
    const double step = (f_new - f).lpNorm<Eigen::Infinity>();
    a = std::move(a_new);
    f = std::move(f_new);
    objective = obj_new;
    if (last_delta < opts.objective_tol && step < 1e-8 * (1.0 + f.lpNorm<Eigen::Infinity>())) {
      converged = true;
      ++iter;
      break;
    }
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "Laplace mode search did not converge after " << opts.max_iters
        << " iterations (last objective change " << last_delta << ")";
    throw ConvergenceError(msg.str(), last_delta);
  }

  NewtonState s = newton_state(k, post.labels, f);
  post.mode = std::move(f);
  post.a = std::move(a);
  post.grad_at_mode = std::move(s.grad);
  post.w_sqrt = std::move(s.w_sqrt);
  post.chol_b = std::move(s.chol_b);
  post.objective = objective;
  post.log_marginal = objective - post.chol_b.diagonal().array().log().sum();
  post.iterations = iter;
  return post;
}

namespace {

struct LatentMoments {
  double mean;
  double var;
};

LatentMoments laplace_latent(const LaplacePosterior& post, const Eigen::VectorXd& k) {
  const Eigen::VectorXd u = post.chol_b.triangularView<Eigen::Lower>().solve(post.w_sqrt.cwiseProduct(k));
  return {k.dot(post.grad_at_mode), std::max(post.hyp.signal_variance - u.squaredNorm(), 0.0)};
}

}  // namespace

PredictiveDistribution predict_laplace(const LaplacePosterior& post, const Eigen::VectorXd& x_star) {
  const Eigen::VectorXd k = kernel_vector(x_star, post.design, post.hyp);
  const auto m = laplace_latent(post, k);
  PredictiveDistribution dist;
  dist.family = Family::Bernoulli;
  dist.params.resize(1);
  dist.params << probit::normal_cdf(m.mean / std::sqrt(1.0 + m.var));
  return dist;
}

Prediction predict_laplace_with_derivatives(const LaplacePosterior& post, const Eigen::VectorXd& x_star) {
  const auto lower = std::as_const(post.chol_b).triangularView<Eigen::Lower>();
  const Eigen::VectorXd k = kernel_vector(x_star, post.design, post.hyp);
  const Eigen::MatrixXd dk = kernel_gradient(x_star, post.design, k, post.hyp);

  const Eigen::VectorXd u = lower.solve(post.w_sqrt.cwiseProduct(k));
  const Eigen::MatrixXd v_mat = lower.solve(post.w_sqrt.asDiagonal() * dk);
  const Eigen::VectorXd c = post.w_sqrt.cwiseProduct(lower.transpose().solve(u));

  const double mean = k.dot(post.grad_at_mode);
  const double var = std::max(post.hyp.signal_variance - u.squaredNorm(), 0.0);
  const Eigen::VectorXd d_mean = dk.transpose() * post.grad_at_mode;
  const Eigen::MatrixXd dd_mean = contract_kernel_hessian(x_star, post.design, k, post.grad_at_mode, post.hyp);
  const Eigen::VectorXd d_var = -2.0 * (v_mat.transpose() * u);
  Eigen::MatrixXd dd_var =
      -2.0 * (v_mat.transpose() * v_mat + contract_kernel_hessian(x_star, post.design, k, c, post.hyp));
  dd_var = 0.5 * (dd_var + dd_var.transpose()).eval();

  // p = Phi(z), z = m * s, s = (1 + v)^-1/2
  const double s = 1.0 / std::sqrt(1.0 + var);
  const double z = mean * s;
  const Eigen::VectorXd d_s = -0.5 * s * s * s * d_var;
  const Eigen::MatrixXd dd_s = 0.75 * std::pow(s, 5) * (d_var * d_var.transpose()) - 0.5 * s * s * s * dd_var;
  const Eigen::VectorXd d_z = s * d_mean + mean * d_s;
  Eigen::MatrixXd dd_z = s * dd_mean + d_mean * d_s.transpose() + d_s * d_mean.transpose() + mean * dd_s;
  dd_z = 0.5 * (dd_z + dd_z.transpose()).eval();

  const double phi = probit::normal_pdf(z);
  const Eigen::VectorXd d_p = phi * d_z;
  Eigen::MatrixXd dd_p = phi * (dd_z - z * (d_z * d_z.transpose()));

  Prediction out;
  out.dist.family = Family::Bernoulli;
  out.dist.params.resize(1);
  out.dist.params << probit::normal_cdf(z);
  out.derivs.first = d_p.transpose();
  out.derivs.second = {std::move(dd_p)};
  return out;
}

PredictiveDistribution predict(const Posterior& post, const Eigen::VectorXd& x_star) {
  return std::visit(
      [&](const auto& p) -> PredictiveDistribution {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, ExactPosterior>)
          return predict_exact(p, x_star);
        else
          return predict_laplace(p, x_star);
      },
      post);
}

Prediction predict_with_derivatives(const Posterior& post, const Eigen::VectorXd& x_star) {
  return std::visit(
      [&](const auto& p) -> Prediction {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, ExactPosterior>)
          return predict_exact_with_derivatives(p, x_star);
        else
          return predict_laplace_with_derivatives(p, x_star);
      },
      post);
}

const Eigen::MatrixXd& training_design(const Posterior& post) {
  return std::visit([](const auto& p) -> const Eigen::MatrixXd& { return p.design; }, post);
}

}  // namespace hetscan
