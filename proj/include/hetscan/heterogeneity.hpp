#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "hetscan/dataset.hpp"
#include "hetscan/hyperopt.hpp"
#include "hetscan/parallel.hpp"

namespace hetscan {

struct HeterogeneityReport {
  Eigen::MatrixXd slope_matrix;     // D x K, mean kl_diff2(numerical d, dummy k)
  Eigen::VectorXd intercept_vector; // K, mean kl_diff(dummy k)
  Eigen::VectorXd grouping_totals;  // K, column sums of slope_matrix
  Hyperparameters hyperparameters;
  double log_marginal_likelihood = 0.0;
  std::vector<std::string> predictor_names;
  std::vector<std::string> grouping_names;
  std::string response_name;
  int n_obs = 0;
  Family family = Family::Gaussian;
};

/// Standardize, fit hyperparameters, fit the surrogate and average the
/// pointwise measures over the training points. Gaussian responses are
/// standardized before fitting; all values are on that scale.
HeterogeneityReport assess(const Dataset& data, const OptConfig& opt, Execution exec = Execution::Parallel);

/// Same pipeline with fixed hyperparameters (no optimisation).
HeterogeneityReport assess_with_hyperparameters(const Dataset& data, const Hyperparameters& hyp,
                                                Execution exec = Execution::Parallel);

struct Selection {
  std::vector<std::vector<int>> selected;  // per grouping, predictor indices by decreasing strength
  double threshold = 0.0;
};

/// Top T = floor(t * D) predictors per grouping; ties go to the lower index.
Selection select_top_t(const HeterogeneityReport& report, double t);

/// Grouping with the largest total interaction; ties go to the lower index.
int choose_grouping(const HeterogeneityReport& report);

/// Keeps the selection only for one grouping, emptying the others.
Selection restrict_to_grouping(const Selection& selection, int grouping);

/// "y ~ x1 + ... + xD + (sel | g1) + (1 | g2) ...", predictors and groupings
/// in dataset order.
std::string recommend_formula(const std::string& response, const std::vector<std::string>& predictors,
                              const std::vector<std::string>& groupings, const Selection& selection);

struct FormulaTerm {
  std::vector<std::string> predictors;  // empty means intercept only "(1 | g)"
  std::string grouping;
};

struct ParsedFormula {
  std::string response;
  std::vector<std::string> population_terms;
  std::vector<FormulaTerm> group_terms;
};

/// Parses the subset of formula syntax recommend_formula emits.
ParsedFormula parse_formula(const std::string& text);

/// Serialised report. Keys: predictors, groupings, slope_matrix (D rows of K),
/// intercept_vector, grouping_totals, hyperparameters, formula, threshold.
nlohmann::json report_to_json(const HeterogeneityReport& report, const Selection& selection,
                              const std::string& formula);

}  // namespace hetscan
