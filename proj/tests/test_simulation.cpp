#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "hetscan/simulation.hpp"

using namespace hetscan;

namespace {

GroundTruth truth_with(std::vector<int> active, int groupings) {
  GroundTruth t;
  t.active = std::move(active);
  t.group_intercepts = Eigen::MatrixXd::Zero(2, groupings);
  return t;
}

Selection selection_of(std::vector<std::vector<int>> chosen) {
  Selection s;
  s.selected = std::move(chosen);
  return s;
}

int level_of(const Dataset& d, int k, int i) { return std::stoi(d.level_labels[k][d.groups[k][i] - 1]); }

}  // namespace

TEST(Generate, SameSeedIsBitwiseIdentical) {
  SimConfig cfg;
  cfg.n_predictors = 10;
  cfg.n_groupings = 2;
  cfg.seed = 77;
  const auto [d1, t1] = generate(cfg);
  const auto [d2, t2] = generate(cfg);
  EXPECT_EQ(d1.x, d2.x);
  EXPECT_EQ(d1.y, d2.y);
  EXPECT_EQ(d1.groups, d2.groups);
  EXPECT_EQ(truth_to_json(t1).dump(), truth_to_json(t2).dump());

  cfg.seed = 78;
  EXPECT_NE(generate(cfg).first.y, d1.y);
}

TEST(Generate, ShapesAndNames) {
  SimConfig cfg;
  cfg.n_obs = 50;
  cfg.n_predictors = 5;
  cfg.n_groupings = 3;
  cfg.n_levels = 4;
  const auto [data, truth] = generate(cfg);
  EXPECT_EQ(data.x.rows(), 50);
  EXPECT_EQ(data.x.cols(), 5);
  ASSERT_EQ(data.groups.size(), 3u);
  EXPECT_EQ(data.grouping_names, (std::vector<std::string>{"g1", "g2", "g3"}));
  EXPECT_EQ(data.predictor_names.front(), "x1");
  EXPECT_EQ(truth.group_intercepts.rows(), 4);
  EXPECT_EQ(truth.group_intercepts.cols(), 3);
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 50; ++i) {
      const int l = level_of(data, k, i);
      EXPECT_GE(l, 1);
      EXPECT_LE(l, 4);
    }
}

// Brute-force recomputation of the linear predictor from the ground truth and
// the dataset: exactly one group term per grouping, for the observation's level.
TEST(Generate, LinearPredictorMatchesGroundTruth) {
  SimConfig cfg;
  cfg.n_obs = 80;
  cfg.n_predictors = 6;
  cfg.n_groupings = 2;
  cfg.seed = 5;
  const auto [data, truth] = generate(cfg);
  for (int i = 0; i < cfg.n_obs; ++i) {
    double mu = truth.intercept;
    for (int d = 0; d < cfg.n_predictors; ++d) mu += truth.active[d] * truth.slopes[d] * data.x(i, d);
    for (int k = 0; k < cfg.n_groupings; ++k) {
      const int l = level_of(data, k, i) - 1;
      mu += truth.group_intercepts(l, k);
      for (int d = 0; d < cfg.n_predictors; ++d)
        mu += truth.active[d] * truth.group_slopes[l][k][d] * data.x(i, d);
    }
    EXPECT_NEAR(mu, truth.linear_predictor[i], 1e-10 * (1 + std::abs(mu)));
  }
}

TEST(Generate, GaussianNoiseFollowsSignalToNoiseRatio) {
  SimConfig cfg;
  cfg.n_obs = 4000;
  cfg.seed = 3;
  const auto [data, truth] = generate(cfg);
  const Eigen::VectorXd mu = truth.linear_predictor;
  const double mu_sd = std::sqrt((mu.array() - mu.mean()).square().sum() / (mu.size() - 1));
  EXPECT_NEAR(truth.noise_sd, mu_sd / 3.0, 1e-12);
  const Eigen::VectorXd eps = data.y - mu;
  const double eps_sd = std::sqrt((eps.array() - eps.mean()).square().sum() / (eps.size() - 1));
  EXPECT_NEAR(eps_sd / truth.noise_sd, 1.0, 0.05);
}

TEST(Generate, BernoulliResponseIsBinaryWithBothClasses) {
  SimConfig cfg;
  cfg.family = Family::Bernoulli;
  cfg.params = FamilyParams::defaults(Family::Bernoulli);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.seed = seed;
    const auto [data, truth] = generate(cfg);
    int ones = 0;
    for (double v : data.y) {
      ASSERT_TRUE(v == 0.0 || v == 1.0);
      ones += v == 1.0;
    }
    EXPECT_GT(ones, 0);
    EXPECT_LT(ones, cfg.n_obs);
    EXPECT_GT(truth.latent_scale, 0.0);
  }
}

TEST(Generate, ActivityRateAtTenPredictors) {
  SimConfig cfg;
  cfg.n_obs = 10;
  cfg.n_predictors = 10;
  const int seeds = 2000;
  double sum = 0.0;
  for (int s = 0; s < seeds; ++s) {
    cfg.seed = s;
    const auto truth = generate(cfg).second;
    sum += std::count(truth.active.begin(), truth.active.end(), 1);
  }
  const double mean = sum / seeds;
  const double se = std::sqrt(10 * 0.6 * 0.4 / seeds);
  EXPECT_NEAR(mean, 6.0, 3 * se);
}

TEST(Generate, PopulationSlopeMoments) {
  SimConfig cfg;
  cfg.n_obs = 10;
  std::vector<double> b;
  for (int s = 0; s < 1000; ++s) {
    cfg.seed = s;
    const auto truth = generate(cfg).second;
    for (double v : truth.slopes) b.push_back(v);
  }
  const double n = static_cast<double>(b.size());
  double mean = 0.0;
  for (double v : b) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : b) var += (v - mean) * (v - mean);
  var /= n - 1;
  EXPECT_NEAR(mean, 5.0, 3 * std::sqrt(10.0 / n));
  EXPECT_NEAR(var, 10.0, 2.0);
}

// No active predictors and no group intercept variation: the response is
// the population intercept plus unit noise, and assess finds nothing.
TEST(Generate, NullModelGivesNearZeroReport) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SimConfig cfg;
    cfg.sparsity = 1.0;
    cfg.params.var_bg = 0.0;
    cfg.params.mu_bg = 0.0;
    cfg.seed = seed;
    const auto [data, truth] = generate(cfg);
    EXPECT_EQ(std::count(truth.active.begin(), truth.active.end(), 1), 0);
    EXPECT_EQ(truth.noise_sd, 1.0);
    const Eigen::VectorXd eps = data.y - truth.linear_predictor;
    EXPECT_NEAR(std::sqrt((eps.array() - eps.mean()).square().sum() / (eps.size() - 1)), 1.0, 0.15);

    OptConfig opt;
    opt.rng_seed = seed;
    const HeterogeneityReport rep = assess(data, opt);
    EXPECT_LT(rep.slope_matrix.maxCoeff(), 0.05) << "seed " << seed;
    EXPECT_LT(rep.intercept_vector.maxCoeff(), 0.05) << "seed " << seed;
  }
}

TEST(Generate, RejectsInvalidConfig) {
  SimConfig cfg;
  cfg.sparsity = 1.5;
  EXPECT_THROW(generate(cfg), std::invalid_argument);
  cfg = SimConfig{};
  cfg.snr = 0.0;
  EXPECT_THROW(generate(cfg), std::invalid_argument);
  cfg = SimConfig{};
  cfg.n_levels = 1;
  EXPECT_THROW(generate(cfg), std::invalid_argument);
}

TEST(ScoreSelection, Examples) {
  const GroundTruth t = truth_with({1, 1, 1, 0, 0}, 1);
  auto r = score_selection(selection_of({{0, 1, 2, 3, 4}}), t);
  EXPECT_EQ(r.tpr, 1.0);
  EXPECT_EQ(r.fpr, 1.0);
  r = score_selection(selection_of({{}}), t);
  EXPECT_EQ(r.tpr, 0.0);
  EXPECT_EQ(r.fpr, 0.0);
  // Predictors "1" and "2" in one-based numbering.
  r = score_selection(selection_of({{0, 1}}), t);
  EXPECT_DOUBLE_EQ(r.tpr, 2.0 / 3.0);
  EXPECT_EQ(r.fpr, 0.0);
}

TEST(ScoreSelection, DegenerateDenominatorsGiveZero) {
  auto r = score_selection(selection_of({{0, 1}}), truth_with({0, 0, 0}, 1));
  EXPECT_EQ(r.tpr, 0.0);
  EXPECT_DOUBLE_EQ(r.fpr, 2.0 / 3.0);
  r = score_selection(selection_of({{2}}), truth_with({1, 1, 1}, 1));
  EXPECT_DOUBLE_EQ(r.tpr, 1.0 / 3.0);
  EXPECT_EQ(r.fpr, 0.0);
}

TEST(ScoreSelection, ShapeMismatchThrows) {
  const GroundTruth t = truth_with({1, 0, 1}, 2);
  EXPECT_THROW(score_selection(selection_of({{0}}), t), std::invalid_argument);
  EXPECT_THROW(score_selection(selection_of({{0}, {3}}), t), std::invalid_argument);
}

TEST(ScoreSelection, OrderInvariant) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 8;
    std::vector<int> active(dim);
    for (int& a : active) a = static_cast<int>(rng() % 2);
    const GroundTruth t = truth_with(active, 2);
    std::vector<std::vector<int>> chosen(2);
    for (auto& c : chosen)
      for (int d = 0; d < dim; ++d)
        if (rng() % 2) c.push_back(d);
    const RocRates a = score_selection(selection_of(chosen), t);
    for (auto& c : chosen) std::shuffle(c.begin(), c.end(), rng);
    const RocRates b = score_selection(selection_of(chosen), t);
    EXPECT_EQ(a.tpr, b.tpr);
    EXPECT_EQ(a.fpr, b.fpr);
  }
}

TEST(ScoreSelection, NestedSelectionsGiveMonotoneRates) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = 10, groupings = 2;
    HeterogeneityReport rep;
    rep.slope_matrix.resize(dim, groupings);
    for (Eigen::Index i = 0; i < rep.slope_matrix.size(); ++i) rep.slope_matrix.data()[i] = std::abs(normal(rng));
    std::vector<int> active(dim);
    for (int& a : active) a = static_cast<int>(rng() % 2);
    const GroundTruth truth = truth_with(active, groupings);
    RocRates prev;
    for (int i = 0; i <= 20; ++i) {
      const RocRates cur = score_selection(select_top_t(rep, i / 20.0), truth);
      EXPECT_GE(cur.tpr, prev.tpr);
      EXPECT_GE(cur.fpr, prev.fpr);
      prev = cur;
    }
    EXPECT_EQ(prev.fpr, std::count(active.begin(), active.end(), 0) > 0 ? 1.0 : 0.0);
  }
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_EQ(percentile({3, 1, 4, 2}, 0.5), 2.5);
  EXPECT_EQ(percentile({3, 1, 4, 2}, 0.0), 1.0);
  EXPECT_EQ(percentile({3, 1, 4, 2}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(percentile({0, 10}, 0.025), 0.25);
  EXPECT_EQ(percentile({7}, 0.975), 7.0);
  EXPECT_THROW(percentile({}, 0.5), std::invalid_argument);
}

TEST(MeanRocAuc, ChanceAndPerfect) {
  std::vector<RocPoint> chance;
  for (double t : {0.2, 0.5, 0.8}) {
    RocPoint p;
    p.tpr_mean = p.fpr_mean = t;
    chance.push_back(p);
  }
  EXPECT_NEAR(mean_roc_auc(chance), 0.5, 1e-15);
  RocPoint perfect;
  perfect.tpr_mean = 1.0;
  perfect.fpr_mean = 0.0;
  EXPECT_NEAR(mean_roc_auc({perfect}), 1.0, 1e-15);
  EXPECT_NEAR(mean_roc_auc({}), 0.5, 1e-15);
}

TEST(Benchmark, RejectsTooFewReplicationsAndBadThresholds) {
  SimConfig cell;
  EXPECT_THROW(run_benchmark({cell}, 1, {0.5}, 0, OptConfig{}), std::invalid_argument);
  EXPECT_THROW(run_benchmark({cell}, 2, {}, 0, OptConfig{}), std::invalid_argument);
  EXPECT_THROW(run_benchmark({cell}, 2, {1.5}, 0, OptConfig{}), std::invalid_argument);
}

TEST(Benchmark, ReplicationSeedsDependOnCellNotPosition) {
  SimConfig a, b;
  b.n_predictors = 10;
  EXPECT_EQ(replication_seed(1, a, 0), replication_seed(1, a, 0));
  EXPECT_NE(replication_seed(1, a, 0), replication_seed(1, a, 1));
  EXPECT_NE(replication_seed(1, a, 0), replication_seed(1, b, 0));
  EXPECT_NE(replication_seed(1, a, 0), replication_seed(2, a, 0));
  a.seed = 99;  // the cell's own seed field is not part of its identity
  EXPECT_EQ(replication_seed(1, a, 0), replication_seed(1, SimConfig{}, 0));
}

TEST(Benchmark, SmallRunCsvIsSortedDeterministicAndConsistent) {
  SimConfig big, small;
  big.n_obs = small.n_obs = 60;
  big.n_predictors = 6;
  small.n_predictors = 5;
  OptConfig opt;
  opt.restarts = 2;
  opt.max_iters = 40;
  const std::vector<double> thresholds{0.8, 0.2, 0.5};
  const auto res = run_benchmark({big, small}, 3, thresholds, 42, opt);
  ASSERT_EQ(res.size(), 2u);
  EXPECT_EQ(res[0].cell.n_predictors, 5);
  EXPECT_EQ(res[1].cell.n_predictors, 6);
  for (const auto& cell : res) {
    EXPECT_EQ(cell.n_ok + cell.n_fail, 3);
    ASSERT_EQ(cell.points.size(), 3u);
    EXPECT_EQ(cell.points[0].threshold, 0.2);
    EXPECT_EQ(cell.points[2].threshold, 0.8);
    for (const auto& p : cell.points) {
      for (double v : {p.tpr_lo, p.tpr_mean, p.tpr_hi, p.fpr_lo, p.fpr_mean, p.fpr_hi}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
      EXPECT_LE(p.tpr_lo, p.tpr_mean);
      EXPECT_LE(p.tpr_mean, p.tpr_hi);
      EXPECT_LE(p.fpr_lo, p.fpr_mean);
      EXPECT_LE(p.fpr_mean, p.fpr_hi);
    }
  }

  std::ostringstream first, second;
  write_benchmark_csv(res, first);
  write_benchmark_csv(run_benchmark({small, big}, 3, thresholds, 42, opt), second);
  EXPECT_EQ(first.str(), second.str());
  std::istringstream lines(first.str());
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(header, "family,D,K,L,N,threshold,tpr_mean,tpr_lo,tpr_hi,fpr_mean,fpr_lo,fpr_hi,n_ok,n_fail");
  int rows = 0;
  for (std::string row; std::getline(lines, row);) ++rows;
  EXPECT_EQ(rows, 6);
}
