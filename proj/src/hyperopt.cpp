#include "hetscan/hyperopt.hpp"

#include <utility>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "hetscan/probit.hpp"

namespace hetscan {

Eigen::VectorXd to_log_params(const Hyperparameters& hyp) {
  const int p = hyp.dim();
  Eigen::VectorXd theta(p + 1 + (hyp.noise_variance ? 1 : 0));
  theta.head(p) = hyp.lengthscales.array().log();
  theta[p] = std::log(hyp.signal_variance);
  if (hyp.noise_variance) theta[p + 1] = std::log(*hyp.noise_variance);
  return theta;
}

Hyperparameters from_log_params(const Eigen::VectorXd& theta, int dim, Family family) {
  const Eigen::Index expected = dim + 1 + (family == Family::Gaussian ? 1 : 0);
  if (theta.size() != expected) throw DimensionError("from_log_params: wrong parameter count");
  Hyperparameters hyp;
  hyp.lengthscales = theta.head(dim).array().exp();
  hyp.signal_variance = std::exp(theta[dim]);
  if (family == Family::Gaussian) hyp.noise_variance = std::exp(theta[dim + 1]);
  return hyp;
}

namespace {

// sum_{i,k} Q_ik * dK_ik / d log l_j for every j, exploiting symmetry of Q and K.
Eigen::VectorXd lengthscale_traces(const Eigen::MatrixXd& design, const Eigen::MatrixXd& gram,
                                   const Eigen::MatrixXd& q, const Hyperparameters& hyp) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  const Eigen::VectorXd inv_ls2 = hyp.lengthscales.array().square().inverse();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(p);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double w = q(i, k) * gram(i, k);
      for (Eigen::Index j = 0; j < p; ++j) {
        const double diff = design(i, j) - design(k, j);
        acc[j] += w * diff * diff;
      }
    }
  }
  return 2.0 * acc.cwiseProduct(inv_ls2);
}

LmlResult gaussian_lml(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Hyperparameters& hyp) {
  const Eigen::Index n = y.size();
  const int p = hyp.dim();
  const Eigen::MatrixXd gram = gram_matrix(design, hyp);
  Eigen::MatrixXd kc = gram;
  kc.diagonal().array() += *hyp.noise_variance;
  const auto chol = robust_cholesky(kc);
  const auto lower = std::as_const(chol.lower).triangularView<Eigen::Lower>();
  const Eigen::VectorXd alpha = lower.transpose().solve(lower.solve(y));

  LmlResult out;
  out.value = -0.5 * y.dot(alpha) - chol.lower.diagonal().array().log().sum() -
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  const Eigen::MatrixXd linv = lower.solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd q = alpha * alpha.transpose();
  q.noalias() -= linv.transpose() * linv;

  out.gradient.resize(p + 2);
  out.gradient.head(p) = 0.5 * lengthscale_traces(design, gram, q, hyp);
  out.gradient[p] = 0.5 * q.cwiseProduct(gram).sum();
  out.gradient[p + 1] = 0.5 * *hyp.noise_variance * q.trace();
  return out;
}

LmlResult bernoulli_lml(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Hyperparameters& hyp,
                        LaplaceWarmStart* warm) {
  LaplaceOptions opts;
  if (warm && warm->a.size() == y.size()) opts.warm_start = warm->a;
  const LaplacePosterior post = fit_laplace(design, y, hyp, opts);
  if (warm) warm->a = post.a;

  const Eigen::Index n = y.size();
  const int p = hyp.dim();
  const Eigen::MatrixXd& k = post.gram;
  const auto lower = std::as_const(post.chol_b).triangularView<Eigen::Lower>();

  // R = L^-1 W^1/2, Z = W^1/2 B^-1 W^1/2 = R'R, C = R K.
  const Eigen::MatrixXd r = lower.solve(Eigen::MatrixXd(post.w_sqrt.asDiagonal()));
  const Eigen::MatrixXd z = r.transpose() * r;
  const Eigen::MatrixXd c = r * k;

  Eigen::VectorXd d3(n);
  for (Eigen::Index i = 0; i < n; ++i) d3[i] = probit::likelihood_terms(post.labels[i], post.mode[i]).d3;
  // d(-1/2 log|B|)/d mode_i = 1/2 Sigma_ii d3_i with Sigma = (K^-1 + W)^-1; W = -d2,
  // so dW_ii/df_i = -d3_i.
  const Eigen::VectorXd s2 =
      0.5 * (k.diagonal() - c.colwise().squaredNorm().transpose()).cwiseProduct(d3);
  const Eigen::VectorXd& grad = post.grad_at_mode;

  LmlResult out;
  out.value = post.log_marginal;
  out.gradient.resize(p + 1);

  auto implicit_term = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd s3 = b - k * (z * b);
    return s2.dot(s3);
  };

  // Lengthscales: dK = K o D_j^2 / l_j^2, applied without forming dK.
  const Eigen::VectorXd inv_ls2 = hyp.lengthscales.array().square().inverse();
  for (int j = 0; j < p; ++j) {
    Eigen::MatrixXd dk(n, n);
    for (Eigen::Index col = 0; col < n; ++col)
      for (Eigen::Index row = 0; row < n; ++row) {
        const double diff = design(row, j) - design(col, j);
        dk(row, col) = k(row, col) * diff * diff * inv_ls2[j];
      }
    const double s1 = 0.5 * grad.dot(dk * grad) - 0.5 * z.cwiseProduct(dk).sum();
    out.gradient[j] = s1 + implicit_term(dk * grad);
  }
  {
    const double s1 = 0.5 * grad.dot(k * grad) - 0.5 * z.cwiseProduct(k).sum();
    out.gradient[p] = s1 + implicit_term(k * grad);
  }
  return out;
}

}  // namespace

LmlResult log_marginal_likelihood(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                  const Hyperparameters& hyp, Family family, LaplaceWarmStart* warm) {
  hyp.validate();
  if (design.rows() != y.size()) throw DimensionError("log_marginal_likelihood: row count mismatch");
  if (design.cols() != hyp.dim()) throw DimensionError("log_marginal_likelihood: dimension mismatch");
  if (family == Family::Gaussian) {
    if (!hyp.noise_variance) throw std::invalid_argument("Gaussian evidence needs a noise variance");
    return gaussian_lml(design, y, hyp);
  }
  return bernoulli_lml(design, y, hyp, warm);
}

void OptConfig::validate() const {
  if (restarts < 1) throw std::invalid_argument("optimizer: restarts must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("optimizer: max_iters must be >= 1");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("optimizer: grad_tol must be > 0");
  for (const LogRange& r : {lengthscale_range, signal_range, noise_range, lengthscale_bounds, signal_bounds,
                            noise_bounds})
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi)
      throw std::invalid_argument("optimizer: ranges and bounds must be finite with lo <= hi");
  auto inside = [](const LogRange& r, const LogRange& b) { return b.lo <= r.lo && r.hi <= b.hi; };
  if (!inside(lengthscale_range, lengthscale_bounds) || !inside(signal_range, signal_bounds) ||
      !inside(noise_range, noise_bounds))
    throw std::invalid_argument("optimizer: initialisation ranges must lie inside the bounds");
}

Eigen::VectorXd sample_initial_log_params(const OptConfig& cfg, int restart, int dim, Family family) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.rng_seed & 0xffffffffu),
                    static_cast<std::uint32_t>(cfg.rng_seed >> 32), static_cast<std::uint32_t>(restart),
                    0x6879u};
  std::mt19937_64 rng(seq);
  auto draw = [&](const LogRange& r) { return std::uniform_real_distribution<double>(r.lo, r.hi)(rng); };
  Eigen::VectorXd theta(dim + 1 + (family == Family::Gaussian ? 1 : 0));
  for (int j = 0; j < dim; ++j) theta[j] = draw(cfg.lengthscale_range);
  theta[dim] = draw(cfg.signal_range);
  if (family == Family::Gaussian) theta[dim + 1] = draw(cfg.noise_range);
  return theta;
}

namespace {

constexpr double kMaxStep = 2.0;
constexpr int kMaxHalvings = 20;
// Relative objective change treated as stalled, and how many stalled
// iterations in a row end the restart.
constexpr double kStallTol = 1e-10;
constexpr int kStallIters = 3;

struct Evaluation {
  bool ok = false;
  double value = 0.0;  // negative log evidence
  Eigen::VectorXd gradient;
};

RestartDiagnostics run_restart(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, Family family,
                               const OptConfig& cfg, int restart, Eigen::VectorXd& theta_out) {
  const int dim = static_cast<int>(design.cols());
  RestartDiagnostics diag;
  diag.index = restart;
  LaplaceWarmStart warm;

  const Eigen::Index n_params = dim + 1 + (family == Family::Gaussian ? 1 : 0);
  Eigen::VectorXd lower(n_params), upper(n_params);
  lower.head(dim).setConstant(cfg.lengthscale_bounds.lo);
  upper.head(dim).setConstant(cfg.lengthscale_bounds.hi);
  lower[dim] = cfg.signal_bounds.lo;
  upper[dim] = cfg.signal_bounds.hi;
  if (family == Family::Gaussian) {
    lower[dim + 1] = cfg.noise_bounds.lo;
    upper[dim + 1] = cfg.noise_bounds.hi;
  }
  // Coordinates sitting on a bound whose descent direction points outside
  // are frozen for the step.
  auto pinned = [&](const Eigen::VectorXd& theta, const Eigen::VectorXd& g, Eigen::Index j) {
    return (theta[j] <= lower[j] && g[j] > 0.0) || (theta[j] >= upper[j] && g[j] < 0.0);
  };
  auto evaluate = [&](const Eigen::VectorXd& theta) {
    Evaluation e;
    ++diag.evaluations;
    if (!theta.allFinite()) return e;
    try {
      const LmlResult r = log_marginal_likelihood(design, y, from_log_params(theta, dim, family), family, &warm);
      if (!std::isfinite(r.value) || !r.gradient.allFinite()) return e;
      e.ok = true;
      e.value = -r.value;
      e.gradient = -r.gradient;
    } catch (const std::exception&) {
      e.ok = false;
    }
    return e;
  };

  Eigen::VectorXd theta = sample_initial_log_params(cfg, restart, dim, family);
  Evaluation cur = evaluate(theta);
  if (!cur.ok) {
    diag.status = "evaluation failed at initial point";
    return diag;
  }
  diag.initial_value = -cur.value;

  const Eigen::Index n = theta.size();
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  bool first_update = true;
  int stalled = 0;
  diag.status = "max_iters reached";
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    Eigen::VectorXd grad = cur.gradient;
    for (Eigen::Index j = 0; j < n; ++j)
      if (pinned(theta, cur.gradient, j)) grad[j] = 0.0;
    if (grad.lpNorm<Eigen::Infinity>() < cfg.grad_tol) {
      diag.status = "gradient tolerance reached";
      break;
    }
    Eigen::VectorXd dir = -h_inv * grad;
    for (Eigen::Index j = 0; j < n; ++j)
      if (grad[j] == 0.0 && cur.gradient[j] != 0.0) dir[j] = 0.0;
    if (!(grad.dot(dir) < 0.0)) {
      h_inv.setIdentity();
      dir = -grad;
    }
    const double dir_max = dir.lpNorm<Eigen::Infinity>();
    if (dir_max > kMaxStep) dir *= kMaxStep / dir_max;

    double t = 1.0;
    Evaluation next;
    Eigen::VectorXd trial;
    bool accepted = false;
    for (int ls = 0; ls < kMaxHalvings; ++ls) {
      trial = (theta + t * dir).cwiseMax(lower).cwiseMin(upper);
      next = evaluate(trial);
      const double predicted = cur.gradient.dot(trial - theta);
      if (next.ok && next.value <= cur.value + 1e-4 * predicted && next.value <= cur.value) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      diag.status = "line search made no progress";
      break;
    }

    const Eigen::VectorXd s = trial - theta;
    const Eigen::VectorXd yk = next.gradient - cur.gradient;
    const double sy = s.dot(yk);
    theta = trial;
    const double decrease = cur.value - next.value;
    cur = std::move(next);
    stalled = decrease < kStallTol * (1.0 + std::abs(cur.value)) ? stalled + 1 : 0;
    if (stalled >= kStallIters) {
      ++it;
      diag.status = "objective stalled";
      break;
    }
    if (sy > 1e-12 * s.norm() * yk.norm()) {
      if (first_update) {
        h_inv *= sy / yk.squaredNorm();
        first_update = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left = Eigen::MatrixXd::Identity(n, n) - rho * s * yk.transpose();
      h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
    }
  }
  diag.iterations = it;
  diag.ok = true;
  diag.final_value = -cur.value;
  theta_out = theta;
  return diag;
}

}  // namespace

OptResult optimize(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, Family family, const OptConfig& cfg) {
  cfg.validate();
  if (design.rows() != y.size()) throw DimensionError("optimize: row count mismatch");
  const int dim = static_cast<int>(design.cols());

  std::vector<RestartDiagnostics> diags(cfg.restarts);
  std::vector<Eigen::VectorXd> thetas(cfg.restarts);
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < cfg.restarts; ++r) diags[r] = run_restart(design, y, family, cfg, r, thetas[r]);

  OptResult out;
  out.restarts = diags;
  for (int r = 0; r < cfg.restarts; ++r) {
    if (!diags[r].ok) continue;
    if (out.best_restart < 0 || diags[r].final_value > out.value) {
      out.best_restart = r;
      out.value = diags[r].final_value;
    }
  }
  if (out.best_restart < 0) {
    std::ostringstream msg;
    msg << "all " << cfg.restarts << " optimizer restarts failed:";
    for (const auto& d : diags) msg << " [" << d.index << ": " << d.status << "]";
    throw OptimizationError(msg.str(), diags);
  }
  out.hyp = from_log_params(thetas[out.best_restart], dim, family);
  return out;
}

}  // namespace hetscan
