#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "hetscan/dataset.hpp"
#include "hetscan/heterogeneity.hpp"
#include "hetscan/hyperopt.hpp"

namespace hetscan {

/// Means and variances of the coefficient priors of the generator.
struct FamilyParams {
  double mu_f, var_f;    // population slopes b_d
  double mu_bf, var_bf;  // population intercept a
  double mu_g, var_g;    // group slopes b_lkd
  double mu_bg, var_bg;  // group intercepts a_lk

  static FamilyParams defaults(Family family);
};

struct SimConfig {
  int n_obs = 300;
  int n_predictors = 5;
  int n_groupings = 1;
  int n_levels = 5;
  double sparsity = 0.4;  // P(z_d = 0)
  Family family = Family::Gaussian;
  FamilyParams params = FamilyParams::defaults(Family::Gaussian);
  double snr = 3.0;  // Gaussian only: noise sd = sd(mu) / snr
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json sim_config_to_json(const SimConfig& cfg);

struct GroundTruth {
  std::vector<int> active;                     // z_d
  double intercept = 0.0;                      // a
  Eigen::VectorXd slopes;                      // b_d
  Eigen::MatrixXd group_intercepts;            // a_lk, L x K
  std::vector<std::vector<Eigen::VectorXd>> group_slopes;  // [l][k] -> b_lk. (length D)
  Eigen::VectorXd linear_predictor;            // mu_i
  double noise_sd = 0.0;                       // Gaussian phi
  double latent_scale = 1.0;                   // Bernoulli: probit argument is mu / latent_scale
  int n_groupings() const { return static_cast<int>(group_intercepts.cols()); }
};

nlohmann::json truth_to_json(const GroundTruth& truth);

/// Draws a dataset from the multilevel linear generator. Grouping columns
/// are named g1..gK with labels equal to the generator's level numbers;
/// predictors x1..xD; response y.
std::pair<Dataset, GroundTruth> generate(const SimConfig& cfg);

struct RocRates {
  double tpr = 0.0;
  double fpr = 0.0;
};

/// Pair (d, k) is a positive iff z_d = 1. Empty denominators give 0.
RocRates score_selection(const Selection& selection, const GroundTruth& truth);

struct RocPoint {
  double threshold = 0.0;
  double tpr_mean = 0.0, tpr_lo = 0.0, tpr_hi = 0.0;
  double fpr_mean = 0.0, fpr_lo = 0.0, fpr_hi = 0.0;
};

struct CellResult {
  SimConfig cell;
  std::vector<RocPoint> points;
  int n_ok = 0;
  int n_fail = 0;
  std::vector<std::string> failures;
  /// Per-replication rates, [replication][threshold]; failed replications omitted.
  std::vector<std::vector<RocRates>> replications;
};

class BenchmarkAborted : public std::runtime_error {
 public:
  BenchmarkAborted(const std::string& what, std::string cell) : std::runtime_error(what), cell_id(std::move(cell)) {}
  std::string cell_id;
};

std::string cell_id(const SimConfig& cell);

/// Seed of replication r of a cell; depends on the cell's parameters, not on
/// its position in the grid.
std::uint64_t replication_seed(std::uint64_t master_seed, const SimConfig& cell, int replication);

/// Runs every (cell, replication) pair, possibly in parallel, and
/// aggregates per threshold. Cells are returned sorted by (family, D, K, L, N).
/// A cell with more than 20% failed replications aborts the run.
std::vector<CellResult> run_benchmark(const std::vector<SimConfig>& cells, int replications,
                                      const std::vector<double>& thresholds, std::uint64_t master_seed,
                                      const OptConfig& opt);

/// Linear-interpolation percentile, q in [0, 1].
double percentile(std::vector<double> values, double q);

/// Trapezoid area under the mean ROC, closed with (0,0) and (1,1).
double mean_roc_auc(const std::vector<RocPoint>& points);

void write_benchmark_csv(const std::vector<CellResult>& results, std::ostream& out);

}  // namespace hetscan
