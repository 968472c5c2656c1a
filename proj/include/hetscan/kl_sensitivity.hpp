#pragma once

#include <functional>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "hetscan/gp.hpp"

namespace hetscan {

/// Hessian of D_KL[p || q] in q's parameters at q = p.
/// Gaussian (mu, sigma): diag(1/sigma^2, 2/sigma^2). Bernoulli (p): 1/(p(1-p)).
Eigen::MatrixXd fisher_at_coincidence(const PredictiveDistribution& dist);

/// Closed-form D_KL[p || q] for two members of the same family.
double kl_divergence(const PredictiveDistribution& p, const PredictiveDistribution& q);

/// sqrt(g_d' H g_d), g_d the parameter gradient along column d.
double kl_diff(const PredictiveDistribution& dist, const PredictiveDerivatives& derivs, int d);

/// sqrt(2 h_de' H h_de), h_de the parameter cross second derivative.
double kl_diff2(const PredictiveDistribution& dist, const PredictiveDerivatives& derivs, int d, int e);

using PredictFn = std::function<PredictiveDistribution(const Eigen::VectorXd&)>;

/// Derivative-free reference for kl_diff / kl_diff2, built only from
/// predictions and the closed-form KL divergence.
///
/// Single column (e empty): sqrt((KL(p(x) || p(x + h u_d)) + KL(p(x) || p(x - h u_d))) / h^2).
///
/// Column pair: the parameter cross derivative is estimated with the
/// four-point stencil c = [theta(++) - theta(+-) - theta(-+) + theta(--)] / (4 h^2),
/// its Fisher norm c'Hc is taken as the second difference of
/// KL(p(x) || p_{theta + eps c}) in eps, and the result is sqrt(2 c'Hc).
double finite_difference_kl_oracle(const PredictFn& predict_fn, const Eigen::VectorXd& x_star, int d,
                                   std::optional<int> e, double h);

}  // namespace hetscan
