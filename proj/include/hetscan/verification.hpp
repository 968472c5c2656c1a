#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetscan/dataset.hpp"
#include "hetscan/gp.hpp"

namespace hetscan {

/// Worst normwise relative error ||analytic - fd||_inf / ||fd||_inf of one
/// check across all trials.
struct CheckResult {
  std::string name;
  double max_rel_error = 0.0;
  int evaluations = 0;
};

struct VerificationSummary {
  std::vector<CheckResult> checks;
  int trials = 0;
  double seconds = 0.0;

  bool passed(double tol) const;
};

/// Hessian of the closed-form KL divergence D_KL[p || q] in q's parameters
/// at q = p by central differences with step h (relative to the
/// distribution's scale).
Eigen::MatrixXd finite_difference_fisher(const PredictiveDistribution& dist, double h = 1e-4);

/// Randomised analytic-versus-finite-difference checks on instances with
/// N <= 40 and at most 5 design columns: kernel input derivatives, predictive
/// parameter first and second derivatives, Fisher matrices, kl_diff and
/// kl_diff2.
VerificationSummary verify_derivatives(Family family, int trials, std::uint64_t seed);

}  // namespace hetscan
