#include <gtest/gtest.h>

#include <limits>
#include <numbers>
#include <random>

#include "hetscan/hyperopt.hpp"
#include "oracles.hpp"

using namespace hetscan;

namespace {

oracle::ScalarFn lml_of(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, Family family) {
  return [=](const Eigen::VectorXd& theta) {
    return log_marginal_likelihood(design, y, from_log_params(theta, static_cast<int>(design.cols()), family), family)
        .value;
  };
}

}  // namespace

TEST(LogParams, RoundTrip) {
  Hyperparameters h;
  h.lengthscales = Eigen::Vector3d(0.5, 2.0, 7.0);
  h.signal_variance = 1.7;
  h.noise_variance = 0.02;
  const Eigen::VectorXd theta = to_log_params(h);
  ASSERT_EQ(theta.size(), 5);
  const Hyperparameters back = from_log_params(theta, 3, Family::Gaussian);
  EXPECT_LT((back.lengthscales - h.lengthscales).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(*back.noise_variance, 0.02, 1e-16);
  EXPECT_FALSE(from_log_params(theta.head(4), 3, Family::Bernoulli).noise_variance.has_value());
  EXPECT_THROW(from_log_params(theta, 3, Family::Bernoulli), DimensionError);
}

TEST(LogMarginalLikelihood, SinglePointClosedForm) {
  Eigen::MatrixXd X(1, 1);
  X << 0.3;
  Hyperparameters h;
  h.lengthscales = Eigen::VectorXd::Constant(1, 1.0);
  h.signal_variance = 0.6;
  h.noise_variance = 0.4;
  const LmlResult r = log_marginal_likelihood(X, Eigen::VectorXd::Zero(1), h, Family::Gaussian);
  EXPECT_NEAR(r.value, -0.5 * std::log(2.0 * std::numbers::pi), 1e-14);
  EXPECT_NEAR(r.value, -0.918939, 1e-6);
}

TEST(LogMarginalLikelihood, GaussianGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 15; ++t) {
    const auto inst = oracle::random_instance(rng, 10 + 2 * t, 1 + t % 3, 1 + t % 2, false);
    const Eigen::VectorXd theta = to_log_params(inst.hyp);
    const LmlResult r = log_marginal_likelihood(inst.design, inst.y, inst.hyp, Family::Gaussian);
    const Eigen::VectorXd fd = oracle::gradient(lml_of(inst.design, inst.y, Family::Gaussian), theta, 1e-5);
    EXPECT_LT(oracle::max_rel_error(r.gradient, fd), 1e-5) << "trial " << t;
  }
}

TEST(LogMarginalLikelihood, BernoulliGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 15; ++t) {
    const auto inst = oracle::random_instance(rng, 12 + 2 * t, 1 + t % 3, 1 + t % 2, true);
    const Eigen::VectorXd theta = to_log_params(inst.hyp);
    const LmlResult r = log_marginal_likelihood(inst.design, inst.y, inst.hyp, Family::Bernoulli);
    const Eigen::VectorXd fd = oracle::gradient(lml_of(inst.design, inst.y, Family::Bernoulli), theta, 1e-5);
    EXPECT_LT(oracle::max_rel_error(r.gradient, fd), 1e-5) << "trial " << t;
  }
}

TEST(LogMarginalLikelihood, GaussianChangeOfVariables) {
  std::mt19937_64 rng(3);
  const auto inst = oracle::random_instance(rng, 30, 2, 1, false);
  const double c = 3.7;
  Hyperparameters scaled = inst.hyp;
  scaled.signal_variance *= c * c;
  *scaled.noise_variance *= c * c;
  const double base = log_marginal_likelihood(inst.design, inst.y, inst.hyp, Family::Gaussian).value;
  const double moved = log_marginal_likelihood(inst.design, c * inst.y, scaled, Family::Gaussian).value;
  EXPECT_NEAR(moved - base, -30.0 * std::log(c), 1e-9);
}

TEST(LogMarginalLikelihood, WarmStartDoesNotChangeResult) {
  std::mt19937_64 rng(4);
  const auto inst = oracle::random_instance(rng, 25, 2, 1, true);
  LaplaceWarmStart warm;
  const LmlResult cold = log_marginal_likelihood(inst.design, inst.y, inst.hyp, Family::Bernoulli);
  Hyperparameters other = inst.hyp;
  other.signal_variance *= 1.3;
  log_marginal_likelihood(inst.design, inst.y, other, Family::Bernoulli, &warm);
  const LmlResult hot = log_marginal_likelihood(inst.design, inst.y, inst.hyp, Family::Bernoulli, &warm);
  EXPECT_NEAR(hot.value, cold.value, 1e-8);
  EXPECT_LT((hot.gradient - cold.gradient).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(OptConfig, Validation) {
  OptConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.restarts = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = OptConfig{};
  cfg.grad_tol = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = OptConfig{};
  cfg.noise_range = {1.0, -1.0};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = OptConfig{};
  cfg.lengthscale_bounds = {0.0, 20.0};  // excludes part of the initialisation range
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = OptConfig{};
  cfg.signal_bounds.hi = std::numeric_limits<double>::infinity();
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Optimize, StaysInsideTheBoxAndConvergesOntoActiveBounds) {
  // Pure noise: an unconstrained fit drives some lengthscales very small.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X(120, 3);
  Eigen::VectorXd y(120);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = normal(rng);
  OptConfig cfg;
  cfg.rng_seed = 4;
  cfg.lengthscale_range = {0.0, 1.0};
  cfg.lengthscale_bounds = {0.0, 3.0};
  cfg.noise_bounds = {-3.0, 1.0};
  cfg.noise_range = {-3.0, 0.0};
  const OptResult res = optimize(X, y, Family::Gaussian, cfg);
  const Eigen::VectorXd theta = to_log_params(res.hyp);
  for (int j = 0; j < 3; ++j) {
    EXPECT_GE(theta[j], 0.0);
    EXPECT_LE(theta[j], 3.0);
  }
  EXPECT_GE(theta[4], -3.0);
  EXPECT_LE(theta[4], 1.0);
  const bool on_bound = (theta.head(3).array() == 0.0).any() || (theta.head(3).array() == 3.0).any() ||
                        theta[3] == cfg.signal_bounds.lo || theta[4] == -3.0 || theta[4] == 1.0;
  EXPECT_TRUE(on_bound) << theta.transpose();
  for (const auto& d : res.restarts) EXPECT_GE(d.final_value, d.initial_value);

  // Brute-force oracle over the box: no grid point beats the optimizer by
  // more than the grid's own resolution error.
  const auto lml = lml_of(X, y, Family::Gaussian);
  double best_grid = -1e300;
  for (double a = 0.0; a <= 3.0; a += 0.75)
    for (double b = 0.0; b <= 3.0; b += 0.75)
      for (double c = 0.0; c <= 3.0; c += 0.75)
        for (double sf = -3.0; sf <= 1.0; sf += 1.0)
          for (double sn = -3.0; sn <= 1.0; sn += 1.0) {
            Eigen::VectorXd t(5);
            t << a, b, c, sf, sn;
            best_grid = std::max(best_grid, lml(t));
          }
  EXPECT_GE(res.value, best_grid - 1e-6);
}

TEST(Optimize, ImprovesOnEveryInitialisationAndPicksBest) {
  std::mt19937_64 rng(5);
  for (Family family : {Family::Gaussian, Family::Bernoulli}) {
    const auto inst = oracle::random_instance(rng, 40, 2, 1, family == Family::Bernoulli);
    OptConfig cfg;
    cfg.rng_seed = 9;
    const OptResult res = optimize(inst.design, inst.y, family, cfg);
    ASSERT_EQ(res.restarts.size(), 5u);
    for (const auto& d : res.restarts) {
      ASSERT_TRUE(d.ok);
      EXPECT_GE(d.final_value, d.initial_value);
      EXPECT_GE(res.value, d.initial_value);
      EXPECT_GE(res.value, d.final_value);
      // The recorded initial value is the LML at the sampled point.
      const Eigen::VectorXd theta0 = sample_initial_log_params(cfg, d.index, 3, family);
      EXPECT_NEAR(d.initial_value, lml_of(inst.design, inst.y, family)(theta0), 1e-9 * (1 + std::abs(d.initial_value)));
    }
    EXPECT_NEAR(res.value, log_marginal_likelihood(inst.design, inst.y, res.hyp, family).value, 1e-8);
    EXPECT_NO_THROW(res.hyp.validate());
  }
}

TEST(Optimize, BitwiseDeterministic) {
  std::mt19937_64 rng(6);
  const auto inst = oracle::random_instance(rng, 35, 2, 1, false);
  OptConfig cfg;
  cfg.rng_seed = 1234;
  const OptResult a = optimize(inst.design, inst.y, Family::Gaussian, cfg);
  const OptResult b = optimize(inst.design, inst.y, Family::Gaussian, cfg);
  EXPECT_EQ(a.hyp.lengthscales, b.hyp.lengthscales);
  EXPECT_EQ(a.hyp.signal_variance, b.hyp.signal_variance);
  EXPECT_EQ(*a.hyp.noise_variance, *b.hyp.noise_variance);
  EXPECT_EQ(a.best_restart, b.best_restart);
}

TEST(Optimize, NoiselessSinusoidGetsSmallNoise) {
  const int n = 40;
  Eigen::MatrixXd X(n, 1);
  for (int i = 0; i < n; ++i) X(i, 0) = -2.0 + 4.0 * i / (n - 1);
  const Eigen::VectorXd y = (3.0 * X.col(0)).array().sin();
  OptConfig cfg;
  cfg.rng_seed = 2;
  const OptResult res = optimize(X, y, Family::Gaussian, cfg);
  EXPECT_LT(*res.hyp.noise_variance, 0.05 * res.hyp.signal_variance);

  // Grid-search oracle: the optimizer must do at least as well as a coarse grid.
  const auto lml = lml_of(X, y, Family::Gaussian);
  double best_grid = -1e300;
  Eigen::Vector3d best_theta;
  for (double ll = -2.0; ll <= 1.5; ll += 0.25)
    for (double ls = -2.0; ls <= 3.0; ls += 0.25)
      for (double ln = -16.0; ln <= 0.0; ln += 1.0) {
        const Eigen::Vector3d theta(ll, ls, ln);
        const double v = lml(theta);
        if (v > best_grid) {
          best_grid = v;
          best_theta = theta;
        }
      }
  EXPECT_LT(std::exp(best_theta[2]), 0.05 * std::exp(best_theta[1]));
  EXPECT_GE(res.value, best_grid - 1e-6);
}

TEST(Optimize, AllRestartsFailingRaisesWithDiagnostics) {
  Eigen::MatrixXd X(3, 1);
  X << 0, 1, 2;
  Eigen::VectorXd y(3);
  y << 0, std::numeric_limits<double>::quiet_NaN(), 1;
  OptConfig cfg;
  cfg.restarts = 3;
  try {
    optimize(X, y, Family::Gaussian, cfg);
    FAIL() << "expected OptimizationError";
  } catch (const OptimizationError& e) {
    EXPECT_EQ(e.diagnostics.size(), 3u);
    for (const auto& d : e.diagnostics) EXPECT_FALSE(d.ok);
  }
}
