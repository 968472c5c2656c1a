#include "hetscan/kl_sensitivity.hpp"

#include <cmath>
#include <string>

namespace hetscan {

namespace {

void check_params(const PredictiveDistribution& dist) {
  if (dist.family == Family::Gaussian) {
    if (dist.n_params() != 2) throw std::invalid_argument("Gaussian predictive needs (mu, sigma)");
    if (!(dist.params[1] > 0.0)) throw std::domain_error("Gaussian predictive sigma must be > 0");
  } else {
    if (dist.n_params() != 1) throw std::invalid_argument("Bernoulli predictive needs (p)");
    const double p = dist.params[0];
    if (!(p > 1e-12 && p < 1.0 - 1e-12)) throw std::domain_error("Bernoulli predictive p at boundary");
  }
}

void check_column(const PredictiveDerivatives& derivs, int d) {
  if (d < 0 || d >= derivs.first.cols())
    throw std::out_of_range("column index " + std::to_string(d) + " out of range");
}

}  // namespace

Eigen::MatrixXd fisher_at_coincidence(const PredictiveDistribution& dist) {
  check_params(dist);
  if (dist.family == Family::Gaussian) {
    const double inv_var = 1.0 / (dist.params[1] * dist.params[1]);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2, 2);
    h(0, 0) = inv_var;
    h(1, 1) = 2.0 * inv_var;
    return h;
  }
  const double p = dist.params[0];
  return Eigen::MatrixXd::Constant(1, 1, 1.0 / (p * (1.0 - p)));
}

double kl_divergence(const PredictiveDistribution& p, const PredictiveDistribution& q) {
  if (p.family != q.family) throw std::invalid_argument("kl_divergence: family mismatch");
  if (p.family == Family::Gaussian) {
    const double mu1 = p.params[0], s1 = p.params[1];
    const double mu2 = q.params[0], s2 = q.params[1];
    const double dm = mu1 - mu2;
    return std::log(s2 / s1) + (s1 * s1 + dm * dm) / (2.0 * s2 * s2) - 0.5;
  }
  const double a = p.params[0], b = q.params[0];
  return a * std::log(a / b) + (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
}

double kl_diff(const PredictiveDistribution& dist, const PredictiveDerivatives& derivs, int d) {
  check_column(derivs, d);
  const Eigen::MatrixXd h = fisher_at_coincidence(dist);
  const Eigen::VectorXd g = derivs.first.col(d);
  return std::sqrt(std::max(g.dot(h * g), 0.0));
}

double kl_diff2(const PredictiveDistribution& dist, const PredictiveDerivatives& derivs, int d, int e) {
  check_column(derivs, d);
  check_column(derivs, e);
  if (d == e) throw std::invalid_argument("kl_diff2: self-interaction (d == e) is not defined");
  const Eigen::MatrixXd h = fisher_at_coincidence(dist);
  const int np = dist.n_params();
  Eigen::VectorXd c(np);
  // Read the (min, max) entry so the result is exactly symmetric in (d, e).
  const int lo = std::min(d, e), hi = std::max(d, e);
  for (int k = 0; k < np; ++k) c[k] = derivs.second[k](lo, hi);
  return std::sqrt(std::max(2.0 * c.dot(h * c), 0.0));
}

double finite_difference_kl_oracle(const PredictFn& predict_fn, const Eigen::VectorXd& x_star, int d,
                                   std::optional<int> e, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite difference step must be > 0");
  const PredictiveDistribution base = predict_fn(x_star);
  auto shifted = [&](double hd, double he) {
    Eigen::VectorXd x = x_star;
    x[d] += hd;
    if (e) x[*e] += he;
    return predict_fn(x);
  };
  auto finite = [](double v) {
    if (!std::isfinite(v)) throw std::domain_error("non-finite KL evaluation in finite-difference oracle");
    return v;
  };

  if (!e) {
    const double plus = finite(kl_divergence(base, shifted(h, 0.0)));
    const double minus = finite(kl_divergence(base, shifted(-h, 0.0)));
    return std::sqrt(std::max((plus + minus) / (h * h), 0.0));
  }
  if (*e == d) throw std::invalid_argument("finite_difference_kl_oracle: pair mode needs d != e");

  const Eigen::VectorXd cross = (shifted(h, h).params - shifted(h, -h).params - shifted(-h, h).params +
                                 shifted(-h, -h).params) /
                                (4.0 * h * h);
  const double norm = cross.norm();
  if (norm == 0.0) return 0.0;
  // Perturbation small against the distribution's own scale.
  const double scale = base.family == Family::Gaussian ? base.params[1]
                                                       : std::min(base.params[0], 1.0 - base.params[0]);
  const double eps = 1e-4 * scale / norm;
  PredictiveDistribution up = base, down = base;
  up.params += eps * cross;
  down.params -= eps * cross;
  const double curvature = (finite(kl_divergence(base, up)) + finite(kl_divergence(base, down))) / (eps * eps);
  return std::sqrt(std::max(2.0 * curvature, 0.0));
}

}  // namespace hetscan
