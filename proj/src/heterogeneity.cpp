#include "hetscan/heterogeneity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hetscan/pointwise.hpp"

namespace hetscan {

namespace {

struct PreparedData {
  EncodedDesign design;
  Eigen::VectorXd y;
};

PreparedData prepare(const Dataset& data) {
  data.validate();
  if (data.n_groupings() < 1) throw DataError("heterogeneity assessment needs at least one grouping column");
  PreparedData out;
  out.design = standardize(data).first;
  out.y = data.family == Family::Gaussian ? standardize_response(data.y).scaled : data.y;
  return out;
}

HeterogeneityReport assess_prepared(const Dataset& data, const PreparedData& prepared, const Hyperparameters& hyp,
                                    double lml, Execution exec) {
  const Eigen::MatrixXd& z = prepared.design.z;
  Posterior post = data.family == Family::Gaussian ? Posterior(fit_exact(z, prepared.y, hyp))
                                                   : Posterior(fit_laplace(z, prepared.y, hyp));
  const int n_num = data.n_predictors();
  const int n_dummy = data.n_groupings();
  const PointwiseMeasures values = pointwise_measures(post, z, n_num, exec);
  AveragedMeasures avg = average_measures(values, n_num, n_dummy);

  HeterogeneityReport report;
  report.slope_matrix = std::move(avg.slope);
  report.intercept_vector = std::move(avg.intercept);
  report.grouping_totals = report.slope_matrix.colwise().sum().transpose();
  report.hyperparameters = hyp;
  report.log_marginal_likelihood = lml;
  report.predictor_names = data.predictor_names;
  report.grouping_names = data.grouping_names;
  report.response_name = data.response_name;
  report.n_obs = data.n_obs();
  report.family = data.family;
  return report;
}

}  // namespace

HeterogeneityReport assess(const Dataset& data, const OptConfig& opt, Execution exec) {
  const PreparedData prepared = prepare(data);
  const OptResult fitted = optimize(prepared.design.z, prepared.y, data.family, opt);
  return assess_prepared(data, prepared, fitted.hyp, fitted.value, exec);
}

HeterogeneityReport assess_with_hyperparameters(const Dataset& data, const Hyperparameters& hyp, Execution exec) {
  const PreparedData prepared = prepare(data);
  const double lml = log_marginal_likelihood(prepared.design.z, prepared.y, hyp, data.family).value;
  return assess_prepared(data, prepared, hyp, lml, exec);
}

Selection select_top_t(const HeterogeneityReport& report, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("threshold t must lie in [0, 1]");
  const int d = static_cast<int>(report.slope_matrix.rows());
  const int k = static_cast<int>(report.slope_matrix.cols());
  // Small slack so decimal thresholds such as 0.3 * 10 are not floored to 2.
  const int top = std::min(d, static_cast<int>(std::floor(t * d + 1e-9)));
  Selection sel;
  sel.threshold = t;
  sel.selected.resize(k);
  for (int g = 0; g < k; ++g) {
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return report.slope_matrix(a, g) > report.slope_matrix(b, g); });
    sel.selected[g].assign(order.begin(), order.begin() + top);
  }
  return sel;
}

int choose_grouping(const HeterogeneityReport& report) {
  if (report.grouping_totals.size() < 1) throw std::invalid_argument("choose_grouping: report has no groupings");
  int best = 0;
  for (int g = 1; g < report.grouping_totals.size(); ++g)
    if (report.grouping_totals[g] > report.grouping_totals[best]) best = g;
  return best;
}

Selection restrict_to_grouping(const Selection& selection, int grouping) {
  Selection out = selection;
  for (int g = 0; g < static_cast<int>(out.selected.size()); ++g)
    if (g != grouping) out.selected[g].clear();
  return out;
}

std::string recommend_formula(const std::string& response, const std::vector<std::string>& predictors,
                              const std::vector<std::string>& groupings, const Selection& selection) {
  if (selection.selected.size() != groupings.size())
    throw std::invalid_argument("recommend_formula: selection does not match groupings");
  std::string out = response + " ~ ";
  for (std::size_t d = 0; d < predictors.size(); ++d) out += (d ? " + " : "") + predictors[d];
  for (std::size_t g = 0; g < groupings.size(); ++g) {
    std::vector<int> chosen = selection.selected[g];
    std::sort(chosen.begin(), chosen.end());
    out += " + (";
    if (chosen.empty()) {
      out += "1";
    } else {
      for (std::size_t j = 0; j < chosen.size(); ++j) out += (j ? " + " : "") + predictors.at(chosen[j]);
    }
    out += " | " + groupings[g] + ")";
  }
  return out;
}

nlohmann::json report_to_json(const HeterogeneityReport& report, const Selection& selection,
                              const std::string& formula) {
  using nlohmann::json;
  json slope = json::array();
  for (Eigen::Index d = 0; d < report.slope_matrix.rows(); ++d) {
    json row = json::array();
    for (Eigen::Index k = 0; k < report.slope_matrix.cols(); ++k) row.push_back(report.slope_matrix(d, k));
    slope.push_back(std::move(row));
  }
  auto to_array = [](const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
  };
  json hyp = {{"lengthscales", to_array(report.hyperparameters.lengthscales)},
              {"signal_variance", report.hyperparameters.signal_variance},
              {"noise_variance", report.hyperparameters.noise_variance ? json(*report.hyperparameters.noise_variance)
                                                                      : json(nullptr)},
              {"log_marginal_likelihood", report.log_marginal_likelihood}};
  json selected = json::object();
  for (std::size_t g = 0; g < selection.selected.size(); ++g) {
    json names = json::array();
    for (int d : selection.selected[g]) names.push_back(report.predictor_names.at(d));
    selected[report.grouping_names.at(g)] = std::move(names);
  }
  return json{{"predictors", report.predictor_names},
              {"groupings", report.grouping_names},
              {"slope_matrix", std::move(slope)},
              {"intercept_vector", to_array(report.intercept_vector)},
              {"grouping_totals", to_array(report.grouping_totals)},
              {"hyperparameters", std::move(hyp)},
              {"formula", formula},
              {"threshold", selection.threshold},
              {"response", report.response_name},
              {"family", to_string(report.family)},
              {"n_obs", report.n_obs},
              {"selection", std::move(selected)}};
}

}  // namespace hetscan
