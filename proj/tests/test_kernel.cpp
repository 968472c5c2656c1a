#include <gtest/gtest.h>

#include <random>

#include "hetscan/kernel.hpp"
#include "oracles.hpp"

using namespace hetscan;

namespace {

Hyperparameters iso(int p, double ls, double sf2) {
  Hyperparameters h;
  h.lengthscales = Eigen::VectorXd::Constant(p, ls);
  h.signal_variance = sf2;
  return h;
}

}  // namespace

TEST(KernelEval, ZeroDistanceGivesSignalVariance) {
  const Eigen::Vector3d a(0.3, -1.0, 2.0);
  Hyperparameters h;
  h.lengthscales = Eigen::Vector3d(0.2, 5.0, 1.0);
  h.signal_variance = 2.7;
  EXPECT_DOUBLE_EQ(kernel_eval(a, a, h), 2.7);
}

TEST(KernelEval, OneDimensionalHandValue) {
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 0.0);
  const Eigen::VectorXd b = Eigen::VectorXd::Constant(1, std::sqrt(2.0));
  EXPECT_NEAR(kernel_eval(a, b, iso(1, 1.0, 1.0)), 0.367879441171442, 1e-15);
}

TEST(KernelEval, FlatLimit) {
  const Eigen::Vector2d a(0.0, 1.0), b(3.0, -2.0);
  EXPECT_NEAR(kernel_eval(a, b, iso(2, 1e6, 1.3)), 1.3, 1e-10);
}

TEST(KernelEval, MatchesBruteForce) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 30; ++t) {
    Eigen::VectorXd a(4), b(4), ls(4);
    for (int j = 0; j < 4; ++j) {
      a[j] = normal(rng);
      b[j] = normal(rng);
      ls[j] = 0.5 + std::abs(normal(rng));
    }
    Hyperparameters h;
    h.lengthscales = ls;
    h.signal_variance = 0.8;
    EXPECT_NEAR(kernel_eval(a, b, h), oracle::se_kernel(a, b, ls, 0.8), 1e-15);
  }
}

TEST(KernelEval, DimensionMismatchThrows) {
  EXPECT_THROW(kernel_eval(Eigen::Vector2d(0, 0), Eigen::Vector3d(0, 0, 0), iso(2, 1, 1)), DimensionError);
  EXPECT_THROW(kernel_eval(Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0), iso(3, 1, 1)), DimensionError);
}

TEST(Hyperparameters, ValidateRejectsNonPositive) {
  Hyperparameters h = iso(2, 1.0, 1.0);
  EXPECT_NO_THROW(h.validate());
  h.lengthscales[1] = 0.0;
  EXPECT_THROW(h.validate(), std::invalid_argument);
  h = iso(2, 1.0, -1.0);
  EXPECT_THROW(h.validate(), std::invalid_argument);
  h = iso(2, 1.0, 1.0);
  h.noise_variance = 0.0;
  EXPECT_THROW(h.validate(), std::invalid_argument);
}

TEST(GramMatrix, SymmetricPsdAndBruteForce) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 10; ++t) {
    auto inst = oracle::random_instance(rng, 25, 3, 1, false);
    // Duplicate rows make the matrix singular; it must stay PSD.
    inst.design.row(3) = inst.design.row(4);
    const Eigen::MatrixXd k = gram_matrix(inst.design, inst.hyp);
    EXPECT_EQ(k, k.transpose());
    for (int i = 0; i < 25; ++i)
      for (int j = 0; j < 25; ++j)
        EXPECT_NEAR(k(i, j),
                    oracle::se_kernel(inst.design.row(i).transpose(), inst.design.row(j).transpose(),
                                      inst.hyp.lengthscales, inst.hyp.signal_variance),
                    1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-12 * k.diagonal().mean());
  }
}

TEST(GramMatrix, SerialAndParallelBitwiseEqual) {
  std::mt19937_64 rng(3);
  const auto inst = oracle::random_instance(rng, 120, 4, 2, false);
  EXPECT_EQ(gram_matrix(inst.design, inst.hyp, Execution::Serial),
            gram_matrix(inst.design, inst.hyp, Execution::Parallel));
}

TEST(KernelDerivatives, ZeroGradientAtTrainingPoint) {
  std::mt19937_64 rng(4);
  const auto inst = oracle::random_instance(rng, 8, 2, 1, false);
  const KernelDerivatives kd = kernel_input_derivatives(inst.design.row(5).transpose(), inst.design, inst.hyp);
  EXPECT_EQ(kd.dk.row(5).cwiseAbs().maxCoeff(), 0.0);
}

TEST(KernelDerivatives, OneDimensionalHandValue) {
  Eigen::MatrixXd X(1, 1);
  X << 0.0;
  const KernelDerivatives kd = kernel_input_derivatives(Eigen::VectorXd::Constant(1, 1.0), X, iso(1, 1.0, 1.0));
  EXPECT_NEAR(kd.dk(0, 0), -std::exp(-0.5), 1e-15);
  // (diff^2 - 1) k = 0 at unit distance.
  EXPECT_NEAR(kd.d2k[0](0, 0), 0.0, 1e-15);
}

TEST(KernelDerivatives, MatchCentralDifferences) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto inst = oracle::random_instance(rng, 12, 2, 1, false);
    auto kfun = [&](const Eigen::VectorXd& x) { return kernel_vector(x, inst.design, inst.hyp); };
    const KernelDerivatives kd = kernel_input_derivatives(inst.x_star, inst.design, inst.hyp);
    EXPECT_LT(oracle::max_rel_error(kd.dk, oracle::jacobian(kfun, inst.x_star, 1e-5)), 1e-6);

    const auto fd2 = oracle::hessians(kfun, inst.x_star, 1e-4);
    double worst = 0.0, scale = 0.0;
    for (int i = 0; i < 12; ++i) {
      worst = std::max(worst, (kd.d2k[i] - fd2[i]).cwiseAbs().maxCoeff());
      scale = std::max(scale, fd2[i].cwiseAbs().maxCoeff());
      EXPECT_EQ(kd.d2k[i], kd.d2k[i].transpose());
    }
    EXPECT_LT(worst / scale, 1e-5);
  }
}

TEST(KernelDerivatives, GradientAndContractionAgreeWithFullTensor) {
  std::mt19937_64 rng(6);
  const auto inst = oracle::random_instance(rng, 15, 3, 2, false);
  const Eigen::VectorXd kvec = kernel_vector(inst.x_star, inst.design, inst.hyp);
  const KernelDerivatives kd = kernel_input_derivatives(inst.x_star, inst.design, inst.hyp);
  EXPECT_LT((kernel_gradient(inst.x_star, inst.design, kvec, inst.hyp) - kd.dk).cwiseAbs().maxCoeff(), 1e-15);

  const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(15, -1.0, 2.0);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(5, 5);
  for (int i = 0; i < 15; ++i) expected += w[i] * kd.d2k[i];
  const Eigen::MatrixXd got = contract_kernel_hessian(inst.x_star, inst.design, kvec, w, inst.hyp);
  EXPECT_LT((got - expected).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_EQ(got, got.transpose());
}
