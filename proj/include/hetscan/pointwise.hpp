#pragma once

#include <Eigen/Dense>

#include "hetscan/gp.hpp"
#include "hetscan/parallel.hpp"

namespace hetscan {

/// Per-point sensitivity values at every evaluation point.
/// slope(i, d * K + k) = kl_diff2 between numerical column d and dummy k at
/// point i; intercept(i, k) = kl_diff of dummy k at point i.
struct PointwiseMeasures {
  Eigen::MatrixXd slope;
  Eigen::MatrixXd intercept;
};

/// Numerical columns are the first n_numerical design columns, dummies the rest.
PointwiseMeasures pointwise_measures(const Posterior& post, const Eigen::MatrixXd& points, int n_numerical,
                                     Execution exec = Execution::Parallel);

struct AveragedMeasures {
  Eigen::MatrixXd slope;       // D x K
  Eigen::VectorXd intercept;   // K
};

/// Arithmetic means over points, summed in row order regardless of how the
/// pointwise values were scheduled.
AveragedMeasures average_measures(const PointwiseMeasures& values, int n_numerical, int n_dummy);

}  // namespace hetscan
