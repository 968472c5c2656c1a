#include "hetscan/pointwise.hpp"

#include "hetscan/kl_sensitivity.hpp"

namespace hetscan {

namespace {

void evaluate_point(const Posterior& post, const Eigen::VectorXd& x, int n_numerical, int n_dummy,
                    Eigen::MatrixXd& slope, Eigen::MatrixXd& intercept, Eigen::Index row) {
  const Prediction pred = predict_with_derivatives(post, x);
  for (int k = 0; k < n_dummy; ++k) {
    const int dummy_col = n_numerical + k;
    intercept(row, k) = kl_diff(pred.dist, pred.derivs, dummy_col);
    for (int d = 0; d < n_numerical; ++d)
      slope(row, d * n_dummy + k) = kl_diff2(pred.dist, pred.derivs, d, dummy_col);
  }
}

}  // namespace

PointwiseMeasures pointwise_measures(const Posterior& post, const Eigen::MatrixXd& points, int n_numerical,
                                     Execution exec) {
  const int p = static_cast<int>(points.cols());
  const int n_dummy = p - n_numerical;
  if (n_numerical < 1 || n_dummy < 1) throw std::invalid_argument("pointwise_measures: need D >= 1 and K >= 1");
  if (training_design(post).cols() != points.cols())
    throw DimensionError("pointwise_measures: evaluation points have wrong dimension");
  const Eigen::Index n = points.rows();
  PointwiseMeasures out;
  out.slope.resize(n, n_numerical * n_dummy);
  out.intercept.resize(n, n_dummy);

  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (Eigen::Index i = 0; i < n; ++i)
      evaluate_point(post, points.row(i).transpose(), n_numerical, n_dummy, out.slope, out.intercept, i);
  } else {
    for (Eigen::Index i = 0; i < n; ++i)
      evaluate_point(post, points.row(i).transpose(), n_numerical, n_dummy, out.slope, out.intercept, i);
  }
  return out;
}

AveragedMeasures average_measures(const PointwiseMeasures& values, int n_numerical, int n_dummy) {
  const Eigen::Index n = values.slope.rows();
  AveragedMeasures avg;
  avg.slope = Eigen::MatrixXd::Zero(n_numerical, n_dummy);
  avg.intercept = Eigen::VectorXd::Zero(n_dummy);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < n_dummy; ++k) {
      avg.intercept[k] += values.intercept(i, k);
      for (int d = 0; d < n_numerical; ++d) avg.slope(d, k) += values.slope(i, d * n_dummy + k);
    }
  }
  avg.slope /= static_cast<double>(n);
  avg.intercept /= static_cast<double>(n);
  return avg;
}

}  // namespace hetscan
