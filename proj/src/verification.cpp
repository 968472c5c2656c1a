#include "hetscan/verification.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "hetscan/kernel.hpp"
#include "hetscan/kl_sensitivity.hpp"

namespace hetscan {

bool VerificationSummary::passed(double tol) const {
  for (const auto& c : checks)
    if (!(c.max_rel_error < tol)) return false;
  return !checks.empty();
}

Eigen::MatrixXd finite_difference_fisher(const PredictiveDistribution& dist, double h) {
  const int np = dist.n_params();
  const double scale = dist.family == Family::Gaussian ? dist.params[1]
                                                       : std::min(dist.params[0], 1.0 - dist.params[0]);
  const double step = h * scale;
  auto kl_at = [&](int k, double sk, int l, double sl) {
    PredictiveDistribution q = dist;
    q.params[k] += sk;
    q.params[l] += sl;
    return kl_divergence(dist, q);
  };
  Eigen::MatrixXd hess(np, np);
  for (int k = 0; k < np; ++k) {
    PredictiveDistribution up = dist, down = dist;
    up.params[k] += step;
    down.params[k] -= step;
    hess(k, k) = (kl_divergence(dist, up) + kl_divergence(dist, down)) / (step * step);
    for (int l = k + 1; l < np; ++l) {
      const double v = (kl_at(k, step, l, step) - kl_at(k, step, l, -step) - kl_at(k, -step, l, step) +
                        kl_at(k, -step, l, -step)) /
                       (4.0 * step * step);
      hess(k, l) = v;
      hess(l, k) = v;
    }
  }
  return hess;
}

namespace {

double normwise_rel_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& reference) {
  const double denom = std::max(reference.cwiseAbs().maxCoeff(), 1e-12);
  return (analytic - reference).cwiseAbs().maxCoeff() / denom;
}

struct Instance {
  Eigen::MatrixXd design;
  Eigen::VectorXd y;
  Hyperparameters hyp;
  Eigen::VectorXd x_star;
};

Instance random_instance(Family family, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_dist(5, 40), p_dist(2, 5), level(1, 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  Instance inst;
  const int n = n_dist(rng);
  const int p = p_dist(rng);
  const int n_dummy = std::uniform_int_distribution<int>(1, p - 1)(rng);
  const int n_num = p - n_dummy;
  inst.design.resize(n, p);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < n_num; ++d) inst.design(i, d) = normal(rng);
    for (int d = n_num; d < p; ++d) inst.design(i, d) = level(rng);
  }
  inst.hyp.lengthscales.resize(p);
  for (int d = 0; d < p; ++d) inst.hyp.lengthscales[d] = std::exp(uniform(std::log(0.7), std::log(3.0)));
  inst.hyp.signal_variance = uniform(0.5, 2.0);
  if (family == Family::Gaussian) inst.hyp.noise_variance = uniform(0.05, 0.5);

  Eigen::VectorXd w(p);
  for (int d = 0; d < p; ++d) w[d] = normal(rng);
  inst.y.resize(n);
  for (int i = 0; i < n; ++i) {
    const double signal = std::sin(inst.design.row(i).dot(w)) + inst.design(i, 0) * inst.design(i, p - 1) * 0.3;
    if (family == Family::Gaussian)
      inst.y[i] = signal + 0.1 * normal(rng);
    else
      inst.y[i] = signal + 0.3 * normal(rng) > 0.0 ? 1.0 : 0.0;
  }
  const int anchor = std::uniform_int_distribution<int>(0, n - 1)(rng);
  inst.x_star = inst.design.row(anchor).transpose();
  for (int d = 0; d < p; ++d) inst.x_star[d] += 0.3 * normal(rng);
  return inst;
}

// Stacked parameter-wise finite differences of a vector-valued function of x.
template <typename Fn>
Eigen::MatrixXd fd_gradient(const Fn& fn, const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = fn(x);
  Eigen::MatrixXd out(f0.size(), x.size());
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    Eigen::VectorXd up = x, down = x;
    up[d] += h;
    down[d] -= h;
    out.col(d) = (fn(up) - fn(down)) / (2.0 * h);
  }
  return out;
}

// Returns one P x P matrix per output component.
template <typename Fn>
std::vector<Eigen::MatrixXd> fd_hessian(const Fn& fn, const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = fn(x);
  const Eigen::Index p = x.size();
  std::vector<Eigen::MatrixXd> out(f0.size(), Eigen::MatrixXd(p, p));
  auto at = [&](Eigen::Index d, double hd, Eigen::Index e, double he) {
    Eigen::VectorXd z = x;
    z[d] += hd;
    z[e] += he;
    return fn(z);
  };
  for (Eigen::Index d = 0; d < p; ++d) {
    const Eigen::VectorXd diag = (at(d, h, d, 0.0) - 2.0 * f0 + at(d, -h, d, 0.0)) / (h * h);
    for (Eigen::Index k = 0; k < f0.size(); ++k) out[k](d, d) = diag[k];
    for (Eigen::Index e = d + 1; e < p; ++e) {
      const Eigen::VectorXd cross = (at(d, h, e, h) - at(d, h, e, -h) - at(d, -h, e, h) + at(d, -h, e, -h)) / (4.0 * h * h);
      for (Eigen::Index k = 0; k < f0.size(); ++k) {
        out[k](d, e) = cross[k];
        out[k](e, d) = cross[k];
      }
    }
  }
  return out;
}

Eigen::MatrixXd stack(const std::vector<Eigen::MatrixXd>& blocks) {
  if (blocks.empty()) return {};
  Eigen::MatrixXd out(blocks.front().rows() * static_cast<Eigen::Index>(blocks.size()), blocks.front().cols());
  for (std::size_t b = 0; b < blocks.size(); ++b)
    out.middleRows(static_cast<Eigen::Index>(b) * blocks.front().rows(), blocks.front().rows()) = blocks[b];
  return out;
}

}  // namespace

VerificationSummary verify_derivatives(Family family, int trials, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  VerificationSummary summary;
  summary.trials = trials;
  summary.checks = {{"kernel first derivatives"}, {"kernel second derivatives"},
                    {"predictive first derivatives"}, {"predictive second derivatives"},
                    {"fisher matrix"}, {"kl_diff"}, {"kl_diff2"}};
  auto record = [&](int idx, double err) {
    auto& c = summary.checks[idx];
    c.max_rel_error = std::max(c.max_rel_error, std::isfinite(err) ? err : INFINITY);
    ++c.evaluations;
  };

  for (int t = 0; t < trials; ++t) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(family == Family::Gaussian ? 1 : 2)};
    std::mt19937_64 rng(seq);
    const Instance inst = random_instance(family, rng);
    const Eigen::Index p = inst.design.cols();

    const KernelDerivatives kd = kernel_input_derivatives(inst.x_star, inst.design, inst.hyp);
    auto kfn = [&](const Eigen::VectorXd& x) { return kernel_vector(x, inst.design, inst.hyp); };
    record(0, normwise_rel_error(kd.dk, fd_gradient(kfn, inst.x_star, 1e-5)));
    record(1, normwise_rel_error(stack(kd.d2k), stack(fd_hessian(kfn, inst.x_star, 1e-4))));

    const Posterior post = family == Family::Gaussian ? Posterior(fit_exact(inst.design, inst.y, inst.hyp))
                                                      : Posterior(fit_laplace(inst.design, inst.y, inst.hyp));
    const Prediction pred = predict_with_derivatives(post, inst.x_star);
    auto pfn = [&](const Eigen::VectorXd& x) { return predict(post, x).params; };
    record(2, normwise_rel_error(pred.derivs.first, fd_gradient(pfn, inst.x_star, 1e-5).eval()));
    record(3, normwise_rel_error(stack(pred.derivs.second), stack(fd_hessian(pfn, inst.x_star, 1e-4))));

    record(4, normwise_rel_error(fisher_at_coincidence(pred.dist), finite_difference_fisher(pred.dist)));

    const PredictFn predict_fn = [&](const Eigen::VectorXd& x) { return predict(post, x); };
    Eigen::VectorXd analytic1(p), oracle1(p);
    for (Eigen::Index d = 0; d < p; ++d) {
      analytic1[d] = kl_diff(pred.dist, pred.derivs, static_cast<int>(d));
      oracle1[d] = finite_difference_kl_oracle(predict_fn, inst.x_star, static_cast<int>(d), std::nullopt, 1e-3);
    }
    record(5, normwise_rel_error(analytic1, oracle1));

    Eigen::VectorXd analytic2(p * (p - 1) / 2), oracle2(p * (p - 1) / 2);
    Eigen::Index idx = 0;
    for (Eigen::Index d = 0; d < p; ++d)
      for (Eigen::Index e = d + 1; e < p; ++e, ++idx) {
        analytic2[idx] = kl_diff2(pred.dist, pred.derivs, static_cast<int>(d), static_cast<int>(e));
        oracle2[idx] = finite_difference_kl_oracle(predict_fn, inst.x_star, static_cast<int>(d),
                                                   static_cast<int>(e), 1e-3);
      }
    record(6, normwise_rel_error(analytic2, oracle2));
  }
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

}  // namespace hetscan
